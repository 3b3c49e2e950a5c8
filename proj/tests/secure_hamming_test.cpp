#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"
#include "xclp/secure_hamming.hpp"

using namespace xclp;
using xclp_test::popcount_xor;
using xclp_test::random_bits;

TEST(SecureHamming, RingModulus) {
  EXPECT_EQ(hamming_ring_modulus(8), 16u);
  EXPECT_EQ(hamming_ring_modulus(64), 128u);
  EXPECT_EQ(hamming_ring_modulus(1024), 2048u);
  EXPECT_EQ(hamming_ring_modulus(7), 8u);
}

TEST(SecureHamming, OtPairZeroDistance) {
  Bus bus;
  SimulatedOtChannel ch(bus);
  CounterRng rng(1);
  auto b = random_bits(rng, 16);
  const std::uint64_t M = hamming_ring_modulus(16);
  auto res = ot_hamming_pair(b, b, ch, rng, M);
  EXPECT_EQ((res.t_sum + M - res.r_sum) % M, 0u);
}

TEST(SecureHamming, OtPairComplement) {
  Bus bus;
  SimulatedOtChannel ch(bus);
  CounterRng rng(2);
  auto b = random_bits(rng, 8);
  auto nb = b;
  for (auto& x : nb) x ^= 1;
  const std::uint64_t M = 16;
  auto res = ot_hamming_pair(b, nb, ch, rng, M);
  EXPECT_EQ((res.t_sum + M - res.r_sum) % M, 8u);
}

TEST(SecureHamming, OtPairMatchesPopcountOracle) {
  Bus bus;
  SimulatedOtChannel ch(bus);
  CounterRng rng(3);
  const std::uint64_t M = hamming_ring_modulus(64);
  for (int t = 0; t < 50; ++t) {
    auto a = random_bits(rng, 64);
    auto b = random_bits(rng, 64);
    auto res = ot_hamming_pair(a, b, ch, rng, M);
    EXPECT_EQ(static_cast<int>((res.t_sum + M - res.r_sum) % M), popcount_xor(a, b));
  }
}

TEST(SecureHamming, OtPairOverDhChannel) {
  Bus bus;
  DhOtChannel ch(bus, 11);
  CounterRng rng(4);
  const std::uint64_t M = hamming_ring_modulus(16);
  auto a = random_bits(rng, 16);
  auto b = random_bits(rng, 16);
  auto res = ot_hamming_pair(a, b, ch, rng, M);
  EXPECT_EQ(static_cast<int>((res.t_sum + M - res.r_sum) % M), popcount_xor(a, b));
}

// h(x, y) = popcount(x) + sum_{x_l=0} y_l - sum_{x_l=1} y_l, checked on all
// 4-bit vector pairs.
TEST(SecureHamming, DistanceIdentityExhaustive4Bit) {
  for (int x = 0; x < 16; ++x)
    for (int y = 0; y < 16; ++y) {
      int popx = 0, pos = 0, neg = 0, h = 0;
      for (int l = 0; l < 4; ++l) {
        int xl = (x >> l) & 1, yl = (y >> l) & 1;
        popx += xl;
        (xl ? pos : neg) += yl;
        h += xl ^ yl;
      }
      EXPECT_EQ(h, popx + neg - pos);
    }
}

TEST(SecureHamming, PheBlockAllZeros) {
  auto kp = PaillierKeypair::generate(256, 5);
  CounterRng rng(6);
  std::vector<std::uint8_t> zeros(8, 0);
  auto pairs = phe_hamming_block(zeros, {zeros}, kp, rng);
  ASSERT_EQ(pairs.size(), 1u);
  mpz_class h = (pairs[0].t_value - pairs[0].r_value) % kp.pub().n;
  if (h < 0) h += kp.pub().n;
  EXPECT_EQ(h, 0);
}

TEST(SecureHamming, PheBlockMatchesOracle) {
  auto kp = PaillierKeypair::generate(512, 7);
  CounterRng rng(8);
  auto holder = random_bits(rng, 64);
  std::vector<std::vector<std::uint8_t>> others;
  for (int t = 0; t < 10; ++t) others.push_back(random_bits(rng, 64));
  auto pairs = phe_hamming_block(holder, others, kp, rng);
  for (int t = 0; t < 10; ++t) {
    mpz_class h = (pairs[t].t_value - pairs[t].r_value) % kp.pub().n;
    if (h < 0) h += kp.pub().n;
    EXPECT_EQ(h, mpz_class(popcount_xor(holder, others[t])));
  }
}

namespace {

HammingMatrix plaintext_matrix(const std::vector<BitCodeMatrix>& codes, int L,
                               std::uint64_t seed) {
  Bus bus;
  HammingOptions o;
  o.protocol = HammingProtocol::kPlaintextDebug;
  o.seed = seed;
  return compute_hamming_matrix(codes, o, bus);
}

}  // namespace

TEST(SecureHamming, MatrixOtEqualsPlaintext) {
  Cohort cohort = xclp_test::random_cohort(21, 2, 2, 4, 2, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 8, 31);
  HammingMatrix truth = plaintext_matrix(codes, 8, 5);
  Bus bus;
  HammingOptions o;
  o.protocol = HammingProtocol::kOt;
  o.seed = 5;
  HammingMatrix H = compute_hamming_matrix(codes, o, bus);
  EXPECT_EQ(H.values, truth.values);
}

TEST(SecureHamming, MatrixPheEqualsPlaintext) {
  Cohort cohort = xclp_test::random_cohort(21, 2, 2, 4, 2, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 8, 31);
  HammingMatrix truth = plaintext_matrix(codes, 8, 5);
  Bus bus;
  HammingOptions o;
  o.protocol = HammingProtocol::kPhe;
  o.seed = 5;
  HammingMatrix H = compute_hamming_matrix(codes, o, bus);
  EXPECT_EQ(H.values, truth.values);
}

TEST(SecureHamming, MatrixDhOtEqualsPlaintext) {
  Cohort cohort = xclp_test::random_cohort(22, 2, 2, 4, 2, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 16, 33);
  HammingMatrix truth = plaintext_matrix(codes, 16, 5);
  Bus bus;
  HammingOptions o;
  o.protocol = HammingProtocol::kOt;
  o.ot_backend = OtBackend::kDiffieHellman;
  o.seed = 5;
  HammingMatrix H = compute_hamming_matrix(codes, o, bus);
  EXPECT_EQ(H.values, truth.values);
}

TEST(SecureHamming, InvariantsHold) {
  Cohort cohort = xclp_test::random_cohort(23, 3, 5, 4, 3, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 32, 35);
  Bus bus;
  HammingOptions o;
  o.protocol = HammingProtocol::kOt;
  o.seed = 6;
  HammingMatrix H = compute_hamming_matrix(codes, o, bus);
  EXPECT_NO_THROW(H.check_invariants());
  for (int i = 0; i < H.size(); ++i) EXPECT_EQ(H.values(i, i), 0);
}

TEST(SecureHamming, DropoutEqualsRunWithoutClient) {
  Cohort cohort = xclp_test::random_cohort(24, 3, 3, 4, 2, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 16, 37);

  Bus bus;
  HammingOptions o;
  o.protocol = HammingProtocol::kOt;
  o.seed = 7;
  o.drop_after_pairs["client_02"] = 1;  // drops after its first cross pair
  HammingMatrix H = compute_hamming_matrix(codes, o, bus);
  auto [compacted, kept] = compact_present(H);

  std::vector<BitCodeMatrix> without(codes.begin(), codes.end() - 1);
  Bus bus2;
  HammingOptions o2;
  o2.protocol = HammingProtocol::kOt;
  o2.seed = 7;
  HammingMatrix ref = compute_hamming_matrix(without, o2, bus2);
  EXPECT_EQ(compacted.values, ref.values);
  EXPECT_EQ(static_cast<int>(kept.size()), ref.size());
}

TEST(SecureHamming, OwnersMustBeUniqueAndNonEmpty) {
  Cohort cohort = xclp_test::random_cohort(25, 2, 2, 4, 2, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 8, 39);
  codes[1].owner = codes[0].owner;
  Bus bus;
  HammingOptions o;
  EXPECT_THROW(compute_hamming_matrix(codes, o, bus), std::invalid_argument);
  codes[1].owner = "";
  EXPECT_THROW(compute_hamming_matrix(codes, o, bus), std::invalid_argument);
}

// No message a client sends under the crypto backends may contain any 64-bit
// word of its packed code.
TEST(SecureHamming, TranscriptHygiene) {
  Cohort cohort = xclp_test::random_cohort(26, 2, 3, 6, 2, 0.5);
  auto codes = xclp_test::cohort_codes(cohort, 64, 41);
  for (auto proto : {HammingProtocol::kOt, HammingProtocol::kPhe}) {
    Bus bus(true);
    HammingOptions o;
    o.protocol = proto;
    o.seed = 8;
    compute_hamming_matrix(codes, o, bus);
    for (const auto& c : codes) {
      const auto& transcript = bus.transcripts().at(c.owner);
      for (const auto& rec : transcript.records) {
        if (!rec.sent || rec.envelope.kind == "hamming_intra") continue;
        ASSERT_GE(rec.payload.size(), 0u);
        for (std::uint64_t word : c.words) {
          if (word == 0) continue;  // zero words are not identifying
          std::vector<std::uint8_t> needle;
          append_u64(needle, word);
          auto it = std::search(rec.payload.begin(), rec.payload.end(), needle.begin(),
                                needle.end());
          EXPECT_EQ(it, rec.payload.end())
              << c.owner << " leaked a code word in kind " << rec.envelope.kind;
        }
      }
    }
  }
}

// A transmitted T value is uniform on Z_M across fresh randomness.
TEST(SecureHamming, OtMaskedValuesUniform) {
  const int L = 8;
  const std::uint64_t M = hamming_ring_modulus(L);
  CounterRng rng(0x715);
  auto a = random_bits(rng, L);
  auto b = random_bits(rng, L);
  std::vector<std::uint64_t> samples;
  for (int t = 0; t < 10000; ++t) {
    Bus bus;
    SimulatedOtChannel ch(bus);
    auto res = ot_hamming_pair(a, b, ch, rng, M);
    samples.push_back(res.t_sum);
  }
  EXPECT_GT(xclp_test::uniformity_pvalue(samples, M), 0.001);
}
