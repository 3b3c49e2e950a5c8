#ifndef XCLP_SECURE_HAMMING_HPP_
#define XCLP_SECURE_HAMMING_HPP_

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xclp/bus.hpp"
#include "xclp/lsh.hpp"
#include "xclp/ot.hpp"
#include "xclp/paillier.hpp"
#include "xclp/rng.hpp"

// Secure pairwise Hamming distance computation. The server ends up with the
// full distance matrix and nothing else; clients learn nothing about each
// other's codes. Two cryptographic backends (SHADE-style OT, Paillier) plus a
// plaintext debug path with identical outputs.
//
// Distances live in [0, L]; computing modulo L would make h = L ambiguous, so
// the ring modulus is the next power of two above L.

namespace xclp {

inline std::uint64_t hamming_ring_modulus(int code_length) {
  return std::bit_ceil(static_cast<std::uint64_t>(code_length) + 1);
}

struct HammingMatrix {
  Eigen::MatrixXi values;  // n x n over the full cohort indexing
  int code_length = 0;
  std::uint64_t modulus = 0;
  std::vector<std::uint8_t> present;  // per global row; 0 = dropped client

  int size() const { return static_cast<int>(values.rows()); }

  void check_invariants() const {
    for (int i = 0; i < size(); ++i) {
      if (!present[i]) continue;
      if (values(i, i) != 0) throw std::logic_error("hamming: nonzero diagonal");
      for (int j = 0; j < size(); ++j) {
        if (!present[j]) continue;
        if (values(i, j) != values(j, i)) throw std::logic_error("hamming: asymmetric");
        if (values(i, j) < 0 || values(i, j) > code_length)
          throw std::logic_error("hamming: entry outside [0, L]");
      }
    }
  }
};

// --- OT-based SHADE variant --------------------------------------------------
//
// Per bit l the sender offers z0 = r_l + b_l and z1 = r_l + (1 - b_l) in Z_M;
// the receiver's choice bit is its own code bit, so it obtains
// t_l = r_l + (b_l xor b'_l). Then T - R = h(b, b') mod M.
struct OtHammingResult {
  std::uint64_t r_sum = 0;  // sender side
  std::uint64_t t_sum = 0;  // receiver side
};

inline OtHammingResult ot_hamming_pair(const std::vector<std::uint8_t>& sender_code,
                                       const std::vector<std::uint8_t>& receiver_code,
                                       ObliviousTransferChannel& channel,
                                       CounterRng& rng, std::uint64_t modulus,
                                       const std::string& sender = "sender",
                                       const std::string& receiver = "receiver") {
  if (sender_code.size() != receiver_code.size())
    throw std::invalid_argument("ot_hamming_pair: code length mismatch");
  const std::size_t L = sender_code.size();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> offers(L);
  std::uint64_t r_sum = 0;
  for (std::size_t l = 0; l < L; ++l) {
    std::uint64_t r = rng.next_below(modulus);
    r_sum = (r_sum + r) % modulus;
    offers[l] = {(r + sender_code[l]) % modulus, (r + 1 - sender_code[l]) % modulus};
  }
  std::vector<std::uint64_t> received = channel.transfer(sender, receiver, offers, receiver_code);
  std::uint64_t t_sum = 0;
  for (std::uint64_t t : received) t_sum = (t_sum + t) % modulus;
  return {r_sum, t_sum};
}

// --- PHE-based variant -------------------------------------------------------
//
// Holder j encrypts its code bitwise; evaluator k computes, per code pair,
// f(y; x) = r + sum_{x_l=0} y_l - sum_{x_l=1} y_l
// homomorphically. Since h(x, y) = popcount(x) + sum_{x_l=0} y_l -
// sum_{x_l=1} y_l, setting T = dec(f) and R = r - popcount(x) lets the
// server recover h = T - R mod N.
struct PheHammingPair {
  mpz_class r_value;  // evaluator side, already offset by popcount - L
  mpz_class t_value;  // holder side after decryption
};

inline std::vector<mpz_class> phe_encrypt_code(const std::vector<std::uint8_t>& code,
                                               PaillierKeypair& keys) {
  std::vector<mpz_class> cts;
  cts.reserve(code.size());
  for (std::uint8_t b : code) cts.push_back(keys.encrypt(b));
  return cts;
}

inline std::vector<PheHammingPair> phe_hamming_block(
    const std::vector<std::uint8_t>& holder_code,
    const std::vector<std::vector<std::uint8_t>>& other_codes, PaillierKeypair& keys,
    CounterRng& eval_rng) {
  const int L = static_cast<int>(holder_code.size());
  const PaillierPublicKey& pub = keys.pub();
  if (pub.n <= 2 * L + 2)
    throw std::invalid_argument("paillier plaintext space too small for code length");

  std::vector<mpz_class> y_ct = phe_encrypt_code(holder_code, keys);
  // Encryption of the holder's total bit count, shared across evaluations.
  mpz_class all = y_ct.empty() ? keys.encrypt(0) : y_ct[0];
  for (int l = 1; l < L; ++l) all = pub.add(all, y_ct[l]);

  std::vector<PheHammingPair> out;
  out.reserve(other_codes.size());
  for (const auto& x : other_codes) {
    if (static_cast<int>(x.size()) != L)
      throw std::invalid_argument("phe_hamming_block: code length mismatch");
    // sum_{x_l=0} y_l - sum_{x_l=1} y_l = sum_l y_l - 2 * sum_{x_l=1} y_l
    mpz_class pos = 1;
    int popcnt = 0;
    for (int l = 0; l < L; ++l)
      if (x[l]) {
        pos = pub.add(pos, y_ct[l]);
        ++popcnt;
      }
    mpz_class pos_sq = (pos * pos) % pub.n_squared;
    mpz_class inv_pos_sq;
    if (mpz_invert(inv_pos_sq.get_mpz_t(), pos_sq.get_mpz_t(), pub.n_squared.get_mpz_t()) == 0)
      throw std::runtime_error("phe_hamming_block: ciphertext not invertible");
    mpz_class acc = (all * inv_pos_sq) % pub.n_squared;
    // Fresh additive mask r, applied as a deterministic encryption of r.
    mpz_class r = 0;
    std::size_t bits = mpz_sizeinbase(pub.n.get_mpz_t(), 2);
    for (std::size_t i = 0; i < (bits + 63) / 64; ++i) {
      r <<= 64;
      r += mpz_class(eval_rng.next_u64());
    }
    r %= pub.n;
    mpz_class r_enc = (1 + r * pub.n) % pub.n_squared;
    acc = (acc * r_enc) % pub.n_squared;

    PheHammingPair pair;
    pair.r_value = (r - popcnt) % pub.n;
    if (pair.r_value < 0) pair.r_value += pub.n;
    pair.t_value = keys.decrypt(acc);
    out.push_back(std::move(pair));
  }
  return out;
}

// --- Full-matrix protocol ----------------------------------------------------

enum class HammingProtocol { kOt, kPhe, kPlaintextDebug };

enum class OtBackend { kSimulated, kDiffieHellman };

struct HammingOptions {
  HammingProtocol protocol = HammingProtocol::kPlaintextDebug;
  OtBackend ot_backend = OtBackend::kSimulated;
  std::uint64_t seed = 0;
  int paillier_bits = 512;
  // Client drops out after completing this many cross-client pair blocks.
  std::map<std::string, int> drop_after_pairs;
};

namespace detail {

inline std::vector<std::uint8_t> pack_mpz_values(const std::vector<mpz_class>& values,
                                                 const PaillierPublicKey& pub) {
  std::size_t width = (mpz_sizeinbase(pub.n.get_mpz_t(), 2) + 7) / 8;
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * width);
  for (const auto& v : values) {
    mpz_class x = v;
    for (std::size_t i = 0; i < width; ++i) {
      out.push_back(static_cast<std::uint8_t>(mpz_class(x & 0xff).get_ui()));
      x >>= 8;
    }
  }
  return out;
}

}  // namespace detail

// Runs the pairwise schedule in lexicographic client order. Cross-client
// blocks use the selected protocol; intra-client blocks are computed by the
// owning client and uploaded (they reveal only distances the client already
// knows about its own data).
inline HammingMatrix compute_hamming_matrix(const std::vector<BitCodeMatrix>& cohort_codes,
                                            const HammingOptions& options, Bus& bus) {
  const int m = static_cast<int>(cohort_codes.size());
  if (m == 0) throw std::invalid_argument("compute_hamming_matrix: no clients");
  const int L = cohort_codes.front().code_length;
  for (const auto& c : cohort_codes)
    if (c.code_length != L) throw std::invalid_argument("code length mismatch across clients");
  const std::uint64_t M = hamming_ring_modulus(L);

  {
    std::set<std::string> owners;
    for (const auto& c : cohort_codes) {
      if (c.owner.empty() || !owners.insert(c.owner).second)
        throw std::invalid_argument("compute_hamming_matrix: owners must be unique and non-empty");
    }
  }

  std::vector<int> offsets(m + 1, 0);
  for (int j = 0; j < m; ++j) offsets[j + 1] = offsets[j] + cohort_codes[j].rows;
  const int n = offsets[m];

  HammingMatrix H;
  H.values = Eigen::MatrixXi::Constant(n, n, -1);
  H.code_length = L;
  H.modulus = M;
  H.present.assign(n, 1);

  std::vector<int> pairs_done(m, 0);
  auto dropped = [&](int j) {
    auto it = options.drop_after_pairs.find(cohort_codes[j].owner);
    return it != options.drop_after_pairs.end() && pairs_done[j] >= it->second;
  };

  // Intra-client blocks: local popcount, uploaded to the server.
  for (int j = 0; j < m; ++j) {
    const auto& codes = cohort_codes[j];
    std::vector<std::uint64_t> block;
    block.reserve(static_cast<std::size_t>(codes.rows) * codes.rows);
    for (int a = 0; a < codes.rows; ++a)
      for (int b = 0; b < codes.rows; ++b) {
        int h = hamming_distance(codes, a, codes, b);
        block.push_back(static_cast<std::uint64_t>(h));
        H.values(offsets[j] + a, offsets[j] + b) = h;
      }
    bus.send(codes.owner, "server", "hamming_intra", pack_u64s(block), block.size());
  }

  if (options.protocol == HammingProtocol::kPlaintextDebug) {
    // Debug mode only: clients hand the server their raw codes.
    for (const auto& c : cohort_codes)
      bus.send(c.owner, "server", "codes_plain", serialize_codes(c),
               static_cast<std::uint64_t>(c.rows));
  }

  std::unique_ptr<ObliviousTransferChannel> channel;
  if (options.protocol == HammingProtocol::kOt) {
    if (options.ot_backend == OtBackend::kDiffieHellman)
      channel = std::make_unique<DhOtChannel>(bus, options.seed);
    else
      channel = std::make_unique<SimulatedOtChannel>(bus);
  }

  std::map<std::string, PaillierKeypair> keys;
  std::map<std::string, std::vector<std::vector<mpz_class>>> enc_cache;

  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      if (dropped(j) || dropped(k)) continue;
      const auto& cj = cohort_codes[j];
      const auto& ck = cohort_codes[k];
      const std::string& pj = cj.owner;
      const std::string& pk = ck.owner;

      if (options.protocol == HammingProtocol::kPlaintextDebug) {
        // Debug path: server computes from raw codes (uploaded below).
        for (int a = 0; a < cj.rows; ++a)
          for (int b = 0; b < ck.rows; ++b) {
            int h = hamming_distance(cj, a, ck, b);
            H.values(offsets[j] + a, offsets[k] + b) = h;
            H.values(offsets[k] + b, offsets[j] + a) = h;
          }
      } else if (options.protocol == HammingProtocol::kOt) {
        CounterRng pair_rng = CounterRng::derived(
            options.seed, 0x07a00000ULL ^ (static_cast<std::uint64_t>(j) << 20) ^
                              static_cast<std::uint64_t>(k));
        std::vector<std::uint64_t> r_values, t_values;
        r_values.reserve(static_cast<std::size_t>(cj.rows) * ck.rows);
        t_values.reserve(r_values.capacity());
        for (int a = 0; a < cj.rows; ++a) {
          auto bits_a = cj.row_bits(a);
          for (int b = 0; b < ck.rows; ++b) {
            auto res = ot_hamming_pair(bits_a, ck.row_bits(b), *channel, pair_rng, M, pj, pk);
            r_values.push_back(res.r_sum);
            t_values.push_back(res.t_sum);
          }
        }
        bus.send(pj, "server", "hamming_R", pack_u64s(r_values), r_values.size());
        bus.send(pk, "server", "hamming_T", pack_u64s(t_values), t_values.size());
        std::size_t idx = 0;
        for (int a = 0; a < cj.rows; ++a)
          for (int b = 0; b < ck.rows; ++b, ++idx) {
            int h = static_cast<int>((t_values[idx] + M - r_values[idx]) % M);
            H.values(offsets[j] + a, offsets[k] + b) = h;
            H.values(offsets[k] + b, offsets[j] + a) = h;
          }
      } else {  // kPhe; lower-index client j is the encryptor
        auto key_it = keys.find(pj);
        if (key_it == keys.end()) {
          key_it = keys.emplace(pj, PaillierKeypair::generate(
                                        options.paillier_bits,
                                        mix64(options.seed ^ hash_bytes(std::vector<std::uint8_t>(
                                                                 pj.begin(), pj.end())))))
                       .first;
        }
        PaillierKeypair& kp = key_it->second;
        const PaillierPublicKey& pub = kp.pub();
        auto enc_it = enc_cache.find(pj);
        if (enc_it == enc_cache.end()) {
          std::vector<std::vector<mpz_class>> rows;
          rows.reserve(cj.rows);
          for (int a = 0; a < cj.rows; ++a) rows.push_back(phe_encrypt_code(cj.row_bits(a), kp));
          enc_it = enc_cache.emplace(pj, std::move(rows)).first;
        }
        const auto& y_cts = enc_it->second;
        // j -> k: encrypted codes, once per pair.
        {
          std::size_t ct_width = (mpz_sizeinbase(pub.n_squared.get_mpz_t(), 2) + 7) / 8;
          std::vector<std::uint8_t> payload;
          payload.reserve(static_cast<std::size_t>(cj.rows) * L * ct_width);
          for (const auto& row : y_cts)
            for (const auto& ct : row) {
              auto b = paillier_ct_bytes(ct, pub);
              payload.insert(payload.end(), b.begin(), b.end());
            }
          bus.send(pj, pk, "phe_codes", payload,
                   static_cast<std::uint64_t>(cj.rows) * static_cast<std::uint64_t>(L));
        }

        CounterRng eval_rng = CounterRng::derived(
            options.seed, 0x9e000000ULL ^ (static_cast<std::uint64_t>(j) << 20) ^
                              static_cast<std::uint64_t>(k));
        // Precompute the all-bit sum per holder row.
        std::vector<mpz_class> all_sum(cj.rows);
        for (int a = 0; a < cj.rows; ++a) {
          mpz_class all = 1;
          for (const auto& ct : y_cts[a]) all = pub.add(all, ct);
          all_sum[a] = all;
        }
        std::vector<mpz_class> r_values, t_cts;
        r_values.reserve(static_cast<std::size_t>(cj.rows) * ck.rows);
        t_cts.reserve(r_values.capacity());
        std::size_t n_bits = mpz_sizeinbase(pub.n.get_mpz_t(), 2);
        for (int b = 0; b < ck.rows; ++b) {
          auto x = ck.row_bits(b);
          int popcnt = 0;
          for (int l = 0; l < L; ++l) popcnt += x[l];
          for (int a = 0; a < cj.rows; ++a) {
            mpz_class pos = 1;
            for (int l = 0; l < L; ++l)
              if (x[l]) pos = pub.add(pos, y_cts[a][l]);
            mpz_class pos_sq = (pos * pos) % pub.n_squared;
            mpz_class inv_pos_sq;
            if (mpz_invert(inv_pos_sq.get_mpz_t(), pos_sq.get_mpz_t(),
                           pub.n_squared.get_mpz_t()) == 0)
              throw std::runtime_error("phe: ciphertext not invertible");
            mpz_class acc = (all_sum[a] * inv_pos_sq) % pub.n_squared;
            mpz_class r = 0;
            for (std::size_t i = 0; i < (n_bits + 63) / 64; ++i) {
              r <<= 64;
              r += mpz_class(eval_rng.next_u64());
            }
            r %= pub.n;
            acc = (acc * ((1 + r * pub.n) % pub.n_squared)) % pub.n_squared;
            mpz_class rv = (r - popcnt) % pub.n;
            if (rv < 0) rv += pub.n;
            r_values.push_back(rv);
            t_cts.push_back(acc);
          }
        }
        // k -> j: evaluated ciphertexts (one per code pair).
        {
          std::vector<std::uint8_t> payload;
          for (const auto& ct : t_cts) {
            auto b = paillier_ct_bytes(ct, pub);
            payload.insert(payload.end(), b.begin(), b.end());
          }
          bus.send(pk, pj, "phe_eval", payload, t_cts.size());
        }
        std::vector<mpz_class> t_values;
        t_values.reserve(t_cts.size());
        for (const auto& ct : t_cts) t_values.push_back(kp.decrypt(ct));
        bus.send(pj, "server", "hamming_T", detail::pack_mpz_values(t_values, pub),
                 t_values.size());
        bus.send(pk, "server", "hamming_R", detail::pack_mpz_values(r_values, pub),
                 r_values.size());
        std::size_t idx = 0;
        for (int b = 0; b < ck.rows; ++b)
          for (int a = 0; a < cj.rows; ++a, ++idx) {
            mpz_class h = (t_values[idx] - r_values[idx]) % pub.n;
            if (h < 0) h += pub.n;
            if (h > L) throw std::runtime_error("phe: recovered distance out of range");
            H.values(offsets[j] + a, offsets[k] + b) = static_cast<int>(h.get_ui());
            H.values(offsets[k] + b, offsets[j] + a) = static_cast<int>(h.get_ui());
          }
      }
      ++pairs_done[j];
      ++pairs_done[k];
    }
  }

  // Mark dropped clients' rows absent.
  for (int j = 0; j < m; ++j)
    if (options.drop_after_pairs.count(cohort_codes[j].owner))
      for (int i = offsets[j]; i < offsets[j + 1]; ++i) H.present[i] = 0;

  // A client that dropped partway leaves unfilled cross entries; those rows
  // are absent, so blank them consistently.
  for (int i = 0; i < n; ++i)
    for (int j2 = 0; j2 < n; ++j2)
      if (H.values(i, j2) < 0 && H.present[i] && H.present[j2])
        throw std::logic_error("hamming: missing entry between present clients");

  H.check_invariants();
  return H;
}

// Restricts a Hamming matrix to its present rows, returning the compacted
// matrix and the kept global indices.
inline std::pair<HammingMatrix, std::vector<int>> compact_present(const HammingMatrix& H) {
  std::vector<int> keep;
  for (int i = 0; i < H.size(); ++i)
    if (H.present[i]) keep.push_back(i);
  HammingMatrix out;
  out.code_length = H.code_length;
  out.modulus = H.modulus;
  out.present.assign(keep.size(), 1);
  out.values.resize(keep.size(), keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = 0; b < keep.size(); ++b)
      out.values(a, b) = H.values(keep[a], keep[b]);
  return {out, keep};
}

}  // namespace xclp

#endif  // XCLP_SECURE_HAMMING_HPP_
