#include <gtest/gtest.h>

#include "test_util.hpp"
#include "xclp/graph_engine.hpp"
#include "xclp/plaintext_oracle.hpp"

using namespace xclp;

namespace {

SimilarityGraph fixture_graph(std::uint64_t seed, int n_clients, int per, int k) {
  Cohort cohort = xclp_test::random_cohort(seed, n_clients, per, 5, 3, 0.3);
  auto codes = xclp_test::cohort_codes(cohort, 64, seed + 1);
  Bus bus;
  HammingOptions o;
  o.seed = seed;
  HammingMatrix H = compute_hamming_matrix(codes, o, bus);
  return build_graph(H, k);
}

}  // namespace

TEST(Oracle, EntropyConfidenceExtremes) {
  Eigen::VectorXd one_hot(3);
  one_hot << 1, 0, 0;
  EXPECT_DOUBLE_EQ(entropy_confidence(one_hot), 1.0);
  Eigen::VectorXd uniform(4);
  uniform << 1, 1, 1, 1;
  EXPECT_DOUBLE_EQ(entropy_confidence(uniform), 0.0);
}

TEST(Oracle, EntropyConfidenceDerivedValue) {
  Eigen::VectorXd row(2);
  row << 3, 1;
  double h = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  EXPECT_NEAR(entropy_confidence(row), 1.0 - h / std::log(2.0), 1e-12);
  EXPECT_NEAR(entropy_confidence(row), 0.18872, 1e-5);
}

TEST(Oracle, EntropyConfidenceZeroRowAndErrors) {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  EXPECT_DOUBLE_EQ(entropy_confidence(zero), 0.0);
  Eigen::VectorXd neg(2);
  neg << 1, -0.5;
  EXPECT_THROW(entropy_confidence(neg), std::invalid_argument);
}

TEST(Oracle, ScoreRowLabelAbstainsOnZero) {
  EXPECT_EQ(score_row_label(Eigen::VectorXd::Zero(4)), kAbstain);
  Eigen::VectorXd row(3);
  row << 0.1, 0.9, 0.5;
  EXPECT_EQ(score_row_label(row), 1);
}

TEST(Oracle, ZeroLabelsGiveZeroScoresAndAbstain) {
  SimilarityGraph g = fixture_graph(1, 2, 4, 3);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), 3);
  OracleResult r = propagate_closed_form(g.normalized, Y, 0.9);
  EXPECT_DOUBLE_EQ(r.scores.cwiseAbs().maxCoeff(), 0.0);
  for (int l : r.labels) EXPECT_EQ(l, kAbstain);
}

TEST(Oracle, TinyAlphaReturnsLabels) {
  SimilarityGraph g = fixture_graph(2, 2, 4, 3);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), 2);
  Y(0, 1) = 1.0;
  Y(3, 0) = 1.0;
  OracleResult r = propagate_closed_form(g.normalized, Y, 1e-12);
  EXPECT_LT((r.scores - Y).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Oracle, TwoNodeClosedForm) {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.5, 0.5, 1.0;
  SimilarityGraph g = build_graph_from_similarity(A, 1);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(2, 1);
  Y(0, 0) = 1.0;
  const double alpha = 0.99;
  OracleResult r = propagate_closed_form(g.normalized, Y, alpha);
  EXPECT_NEAR(r.scores(1, 0), alpha / (1.0 - alpha * alpha), 1e-8);
  EXPECT_NEAR(r.scores(0, 0), 1.0 / (1.0 - alpha * alpha), 1e-8);
}

TEST(Oracle, IterativeMatchesClosedForm) {
  SimilarityGraph g = fixture_graph(3, 3, 8, 4);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), 3);
  Y(0, 0) = 1.0;
  Y(5, 1) = 1.0;
  Y(12, 2) = 1.0;
  OracleResult closed = propagate_closed_form(g.normalized, Y, 0.99);
  OracleResult iter = propagate_iterative(g.normalized, Y, 0.99, 1e-10);
  EXPECT_LT((closed.scores - iter.scores).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(closed.labels, iter.labels);
}

TEST(Oracle, IterativeResidualsContractGeometrically) {
  SimilarityGraph g = fixture_graph(4, 2, 6, 3);
  const double alpha = 0.9;
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), 2);
  Y(0, 0) = 1.0;
  Y(7, 1) = 1.0;
  // In the Frobenius norm the update contracts with ratio alpha * rho(W_norm)
  // <= alpha, since W_norm is symmetric with spectrum in [-1, 1].
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(g.size(), 2);
  double prev = -1.0;
  for (int t = 0; t < 30; ++t) {
    Eigen::MatrixXd next = alpha * (g.normalized * z) + Y;
    double delta = (next - z).norm();
    if (prev > 1e-14 && t > 1) EXPECT_LE(delta, prev * alpha + 1e-12);
    prev = delta;
    z = next;
  }
}

TEST(Oracle, FirstIterateEqualsLabels) {
  SimilarityGraph g = fixture_graph(5, 2, 4, 2);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Random(g.size(), 2).cwiseAbs();
  // One update from z_0 = 0 gives z_1 = Y.
  Eigen::MatrixXd z1 = 0.9 * (g.normalized * Eigen::MatrixXd::Zero(g.size(), 2)) + Y;
  EXPECT_TRUE(z1.isApprox(Y, 0.0));
}

TEST(Oracle, MaxItersExceededThrows) {
  SimilarityGraph g = fixture_graph(6, 2, 4, 3);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), 2);
  Y(0, 0) = 1.0;
  EXPECT_THROW(propagate_iterative(g.normalized, Y, 0.999, 1e-14, 3), std::runtime_error);
}

TEST(Oracle, DecompositionIdentity) {
  // Z computed in one solve equals the sum over clients of S_L^(j) Y_L^(j).
  Cohort cohort = xclp_test::random_cohort(7, 3, 6, 5, 3, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 64, 8);
  Bus bus;
  HammingOptions ho;
  ho.seed = 7;
  HammingMatrix H = compute_hamming_matrix(codes, ho, bus);
  SimilarityGraph g = build_graph(H, 4);
  const double alpha = 0.95;
  Eigen::MatrixXd Y = stacked_labels(cohort);
  OracleResult direct = propagate_closed_form(g.normalized, Y, alpha);

  Eigen::MatrixXd assembled = Eigen::MatrixXd::Zero(cohort.total_size(), cohort.class_count);
  int base = 0;
  for (const auto& c : cohort.clients) {
    std::vector<int> idx;
    for (int i = 0; i < c.labeled_count; ++i) idx.push_back(base + i);
    if (!idx.empty()) {
      InfluenceColumns cols = influence_columns(g, idx, alpha);
      assembled += cols.columns * c.labels.topRows(c.labeled_count).cast<double>();
    }
    base += c.size();
  }
  EXPECT_LT((direct.scores - assembled).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Oracle, SanitizeSnapsDustAndRejectsNegatives) {
  Eigen::VectorXd row(3);
  row << 1e-17, 0.5, kScoreZeroTolerance / 2;
  Eigen::VectorXd s = sanitize_score_row(row);
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_DOUBLE_EQ(s[2], 0.0);
  Eigen::VectorXd bad(1);
  bad << -1e-3;
  EXPECT_THROW(sanitize_score_row(bad), std::logic_error);
}
