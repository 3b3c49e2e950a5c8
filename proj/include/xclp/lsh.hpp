#ifndef XCLP_LSH_HPP_
#define XCLP_LSH_HPP_

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "xclp/rng.hpp"

// Shared-seed random hyperplane hashing. Every client derives the same
// Gaussian projection from (seed, L, d) alone, so equal specs produce
// bit-identical codes on every party.

namespace xclp {

struct ProjectionSpec {
  std::uint64_t seed = 0;
  int code_length = 0;  // L
  int dim = 0;          // d

  void validate() const {
    if (code_length < 1) throw std::invalid_argument("code_length must be >= 1");
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  }
};

inline Eigen::MatrixXd generate_projection(const ProjectionSpec& spec) {
  spec.validate();
  Eigen::MatrixXd pi(spec.code_length, spec.dim);
  CounterRng rng = CounterRng::derived(spec.seed, 0x4c5348);  // projection stream
  for (int i = 0; i < spec.code_length; ++i)
    for (int j = 0; j < spec.dim; ++j) pi(i, j) = rng.next_normal();
  return pi;
}

// Packed sign codes, 64 bits per word, row-major.
struct BitCodeMatrix {
  std::string owner;
  int rows = 0;
  int code_length = 0;
  std::vector<std::uint64_t> words;

  int words_per_row() const { return (code_length + 63) / 64; }

  bool bit(int row, int l) const {
    return (words[static_cast<std::size_t>(row) * words_per_row() + l / 64] >> (l % 64)) & 1u;
  }

  void set_bit(int row, int l) {
    words[static_cast<std::size_t>(row) * words_per_row() + l / 64] |= std::uint64_t{1} << (l % 64);
  }

  const std::uint64_t* row_words(int row) const {
    return words.data() + static_cast<std::size_t>(row) * words_per_row();
  }

  std::vector<std::uint8_t> row_bits(int row) const {
    std::vector<std::uint8_t> bits(code_length);
    for (int l = 0; l < code_length; ++l) bits[l] = bit(row, l) ? 1 : 0;
    return bits;
  }
};

// sign(0) := 1.
inline BitCodeMatrix hash_features(const Eigen::MatrixXd& features,
                                   const Eigen::MatrixXd& projection) {
  if (features.cols() != projection.cols())
    throw std::invalid_argument("feature dimension does not match projection");
  if (!features.allFinite())
    throw std::invalid_argument("non-finite feature entry");
  BitCodeMatrix codes;
  codes.rows = static_cast<int>(features.rows());
  codes.code_length = static_cast<int>(projection.rows());
  codes.words.assign(static_cast<std::size_t>(codes.rows) * codes.words_per_row(), 0);
  // One inner product per (row, hyperplane); Eigen does the heavy lifting.
  Eigen::MatrixXd dots = features * projection.transpose();  // n x L
  for (int i = 0; i < codes.rows; ++i)
    for (int l = 0; l < codes.code_length; ++l)
      if (dots(i, l) >= 0.0) codes.set_bit(i, l);
  return codes;
}

inline int hamming_distance(const BitCodeMatrix& a, int row_a,
                            const BitCodeMatrix& b, int row_b) {
  if (a.code_length != b.code_length)
    throw std::invalid_argument("code length mismatch");
  const std::uint64_t* wa = a.row_words(row_a);
  const std::uint64_t* wb = b.row_words(row_b);
  int h = 0;
  for (int w = 0; w < a.words_per_row(); ++w) h += std::popcount(wa[w] ^ wb[w]);
  return h;
}

inline double estimate_cosine(int hamming, int code_length) {
  if (hamming < 0 || hamming > code_length)
    throw std::out_of_range("hamming distance outside [0, L]");
  return std::cos(M_PI * static_cast<double>(hamming) / static_cast<double>(code_length));
}

// Serialization: u64 rows, u64 L, then packed words row-major, little-endian.
inline std::vector<std::uint8_t> serialize_codes(const BitCodeMatrix& codes) {
  std::vector<std::uint8_t> out;
  auto put_u64 = [&out](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u64(static_cast<std::uint64_t>(codes.rows));
  put_u64(static_cast<std::uint64_t>(codes.code_length));
  for (std::uint64_t w : codes.words) put_u64(w);
  return out;
}

inline BitCodeMatrix deserialize_codes(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto get_u64 = [&bytes, &pos]() {
    if (pos + 8 > bytes.size()) throw std::runtime_error("truncated code matrix");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return v;
  };
  BitCodeMatrix codes;
  codes.rows = static_cast<int>(get_u64());
  codes.code_length = static_cast<int>(get_u64());
  std::size_t nwords = static_cast<std::size_t>(codes.rows) * codes.words_per_row();
  codes.words.resize(nwords);
  for (std::size_t i = 0; i < nwords; ++i) codes.words[i] = get_u64();
  return codes;
}

}  // namespace xclp

#endif  // XCLP_LSH_HPP_
