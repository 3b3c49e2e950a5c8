#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "xclp/lsh.hpp"

using namespace xclp;

TEST(Lsh, EqualSpecsGiveIdenticalProjections) {
  ProjectionSpec spec{42, 64, 12};
  Eigen::MatrixXd a = generate_projection(spec);
  Eigen::MatrixXd b = generate_projection(spec);
  EXPECT_TRUE(a.isApprox(b, 0.0));
}

TEST(Lsh, DifferentSeedsDiffer) {
  Eigen::MatrixXd a = generate_projection({1, 16, 4});
  Eigen::MatrixXd b = generate_projection({2, 16, 4});
  EXPECT_FALSE(a.isApprox(b, 0.0));
}

TEST(Lsh, ProjectionShape) {
  Eigen::MatrixXd p = generate_projection({7, 4096, 128});
  EXPECT_EQ(p.rows(), 4096);
  EXPECT_EQ(p.cols(), 128);
}

TEST(Lsh, ProjectionEntriesLookStandardNormal) {
  Eigen::MatrixXd p = generate_projection({3, 256, 64});
  double mean = p.mean();
  double var = (p.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.03);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Lsh, ScaleInvariance) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(5, 8);
  Eigen::MatrixXd p = generate_projection({11, 64, 8});
  BitCodeMatrix a = hash_features(v, p);
  BitCodeMatrix b = hash_features(3.0 * v, p);
  EXPECT_EQ(a.words, b.words);
}

TEST(Lsh, SignAntisymmetry) {
  // Use a projection with no exact zeros against these rows so sign(0) never
  // fires; then codes of v and -v are complementary.
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(4, 6).array() + 1.5;
  Eigen::MatrixXd p = generate_projection({13, 64, 6});
  BitCodeMatrix a = hash_features(v, p);
  BitCodeMatrix b = hash_features(-v, p);
  for (int i = 0; i < a.rows; ++i)
    EXPECT_EQ(hamming_distance(a, i, b, i), 64);
}

TEST(Lsh, ExpectedHammingMatchesAngle) {
  // Two fixed vectors at a known angle; over many projections the mean
  // normalized Hamming distance approaches theta/pi.
  Eigen::MatrixXd v(2, 2);
  v << 1.0, 0.0, 1.0, 1.0;  // 45 degrees apart
  const double expected = (M_PI / 4.0) / M_PI;
  const int L = 64, trials = 1000;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd p = generate_projection({static_cast<std::uint64_t>(t), L, 2});
    BitCodeMatrix c = hash_features(v, p);
    total += static_cast<double>(hamming_distance(c, 0, c, 1)) / L;
  }
  EXPECT_NEAR(total / trials, expected, 0.01);
}

TEST(Lsh, EstimateCosineEndpoints) {
  EXPECT_DOUBLE_EQ(estimate_cosine(0, 64), 1.0);
  EXPECT_NEAR(estimate_cosine(32, 64), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(estimate_cosine(64, 64), -1.0);
}

TEST(Lsh, EstimateCosineRangeChecked) {
  EXPECT_THROW(estimate_cosine(-1, 64), std::out_of_range);
  EXPECT_THROW(estimate_cosine(65, 64), std::out_of_range);
}

TEST(Lsh, SelfSimilarityIsExactlyOne) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(3, 5);
  Eigen::MatrixXd p = generate_projection({21, 128, 5});
  BitCodeMatrix c = hash_features(v, p);
  for (int i = 0; i < c.rows; ++i)
    EXPECT_DOUBLE_EQ(estimate_cosine(hamming_distance(c, i, c, i), 128), 1.0);
}

TEST(Lsh, HashDeterministic) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(6, 7);
  Eigen::MatrixXd p = generate_projection({5, 96, 7});
  EXPECT_EQ(hash_features(v, p).words, hash_features(v, p).words);
}

TEST(Lsh, NonFiniteFeaturesRejected) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(1, 3);
  v(0, 2) = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd p = generate_projection({5, 8, 3});
  EXPECT_THROW(hash_features(v, p), std::invalid_argument);
}

TEST(Lsh, SerializationRoundTrip) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(5, 4);
  Eigen::MatrixXd p = generate_projection({9, 100, 4});  // L not a word multiple
  BitCodeMatrix c = hash_features(v, p);
  BitCodeMatrix back = deserialize_codes(serialize_codes(c));
  EXPECT_EQ(back.rows, c.rows);
  EXPECT_EQ(back.code_length, c.code_length);
  EXPECT_EQ(back.words, c.words);
}

TEST(Lsh, ConcentrationAtLargeL) {
  // For unit vectors with true cosine c the estimator error stays below
  // 3 sigma of the binomial bound for >= 99% of trials at L = 4096.
  const int L = 4096, trials = 1000;
  CounterRng rng(0xabcdef);
  int ok = 0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd u(8), w(8);
    for (int i = 0; i < 8; ++i) {
      u[i] = rng.next_normal();
      w[i] = rng.next_normal();
    }
    u.normalize();
    w.normalize();
    double c = u.dot(w);
    Eigen::MatrixXd v(2, 8);
    v.row(0) = u;
    v.row(1) = w;
    Eigen::MatrixXd p = generate_projection({static_cast<std::uint64_t>(t) + 777, L, 8});
    BitCodeMatrix codes = hash_features(v, p);
    double est = estimate_cosine(hamming_distance(codes, 0, codes, 1), L);
    double prob = std::acos(std::clamp(c, -1.0, 1.0)) / M_PI;
    double bound = 3.0 * M_PI * std::sqrt(prob * (1.0 - prob) / L);
    if (std::abs(est - c) <= std::max(bound, 1e-12)) ++ok;
  }
  EXPECT_GE(ok, 990);
}
