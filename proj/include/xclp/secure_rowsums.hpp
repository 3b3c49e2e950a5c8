#ifndef XCLP_SECURE_ROWSUMS_HPP_
#define XCLP_SECURE_ROWSUMS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "xclp/bus.hpp"
#include "xclp/fixed_point.hpp"
#include "xclp/rng.hpp"

// Masked row-wise summation: each client contributes an n x C matrix; every
// client learns only the rows of the sum indexed by its own partition block,
// and the server sees only uniformly masked shares.
//
// Masks are pairwise (Bonawitz-style): for each unordered client pair a PRG
// stream is added by the lower-indexed client and subtracted by the other, so
// all masks cancel in the ring sum.

namespace xclp {

using RingMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;

inline std::uint64_t pairwise_secret(std::uint64_t root_seed, const std::string& a,
                                     const std::string& b) {
  const std::string& lo = a < b ? a : b;
  const std::string& hi = a < b ? b : a;
  std::vector<std::uint8_t> bytes(lo.begin(), lo.end());
  bytes.push_back(0);
  bytes.insert(bytes.end(), hi.begin(), hi.end());
  return mix64(root_seed ^ hash_bytes(bytes));
}

// Expands pairwise secrets into per-client mask matrices whose element-wise
// ring sum is exactly zero.
inline std::map<std::string, RingMatrix> derive_pairwise_masks(
    const std::vector<std::string>& participants, int rows, int cols,
    const std::map<std::pair<std::string, std::string>, std::uint64_t>& seeds) {
  std::map<std::string, RingMatrix> masks;
  for (const auto& p : participants) masks[p] = RingMatrix::Zero(rows, cols);
  for (std::size_t a = 0; a < participants.size(); ++a) {
    for (std::size_t b = a + 1; b < participants.size(); ++b) {
      auto key = std::make_pair(participants[a], participants[b]);
      auto it = seeds.find(key);
      if (it == seeds.end())
        throw std::invalid_argument("missing pairwise secret for " + key.first + "/" + key.second);
      CounterRng stream(it->second);
      RingMatrix& ma = masks[participants[a]];
      RingMatrix& mb = masks[participants[b]];
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          std::uint64_t r = stream.next_u64();
          ma(i, j) += r;
          mb(i, j) -= r;
        }
    }
  }
  return masks;
}

struct RowSumsResult {
  // Per participating client: the rows of the sum indexed by its block.
  std::map<std::string, Eigen::MatrixXd> client_rows;
  int restarts = 0;
};

struct RowSumsOptions {
  std::uint64_t root_seed = 0;
  std::uint64_t round_id = 1;
  // Clients that drop after sending masks but before the server aggregates;
  // triggers a restart without them.
  std::set<std::string> drop_mid_protocol;
};

// contributions: client -> n x C real matrix. row_partition: client -> sorted
// global row indices it should receive. Rows not covered by any client (e.g.
// belonging to a dropped party) are simply never relayed.
inline RowSumsResult secure_row_sums(
    const std::map<std::string, Eigen::MatrixXd>& contributions,
    const std::map<std::string, std::vector<int>>& row_partition, Bus& bus,
    const FixedPointCodec& codec, RowSumsOptions options = {}) {
  if (contributions.empty()) throw std::invalid_argument("secure_row_sums: no participants");
  const int n = static_cast<int>(contributions.begin()->second.rows());
  const int C = static_cast<int>(contributions.begin()->second.cols());

  std::vector<std::string> participants;
  for (const auto& [id, z] : contributions) {
    if (z.rows() != n || z.cols() != C)
      throw std::invalid_argument("secure_row_sums: shape mismatch");
    double bound = codec.max_magnitude(static_cast<int>(contributions.size()));
    if (z.cwiseAbs().maxCoeff() >= bound)
      throw std::overflow_error("secure_row_sums: contribution exceeds fixed-point range");
    participants.push_back(id);
  }

  RowSumsResult result;
  std::set<std::string> active(participants.begin(), participants.end());
  bool pending_drop = !options.drop_mid_protocol.empty();
  std::uint64_t round_id = options.round_id;

  while (true) {
    std::vector<std::string> P(active.begin(), active.end());
    bus.set_round(round_id);
    std::map<std::pair<std::string, std::string>, std::uint64_t> seeds;
    for (std::size_t a = 0; a < P.size(); ++a)
      for (std::size_t b = a + 1; b < P.size(); ++b)
        seeds[{P[a], P[b]}] =
            mix64(pairwise_secret(options.root_seed, P[a], P[b]) ^ mix64(round_id));
    auto masks = derive_pairwise_masks(P, n, C, seeds);

    // Each client: encode, add mask, zero its own rows, upload.
    std::map<std::string, RingMatrix> shares;      // as received by the server
    std::map<std::string, RingMatrix> obfuscated;  // Z-tilde, kept locally
    bool aborted = false;
    for (const auto& id : P) {
      RingMatrix z_tilde(n, C);
      const Eigen::MatrixXd& z = contributions.at(id);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < C; ++c) z_tilde(i, c) = codec.encode(z(i, c)) + masks[id](i, c);
      obfuscated[id] = z_tilde;

      if (pending_drop && options.drop_mid_protocol.count(id)) {
        // Client vanishes after mask agreement, before its share arrives.
        aborted = true;
        continue;
      }
      RingMatrix z_hat = z_tilde;
      auto part = row_partition.find(id);
      if (part != row_partition.end())
        for (int r : part->second) z_hat.row(r).setZero();

      std::vector<std::uint64_t> flat;
      flat.reserve(static_cast<std::size_t>(n) * C);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < C; ++c) flat.push_back(z_hat(i, c));
      bus.send(id, "server", "rowsum_share", pack_u64s(flat),
               static_cast<std::uint64_t>(n) * C);
      shares[id] = std::move(z_hat);
    }

    if (aborted) {
      // Masks of the dropped client never cancel; restart without it.
      for (const auto& id : options.drop_mid_protocol) active.erase(id);
      if (active.empty()) throw std::runtime_error("secure_row_sums: all clients dropped");
      pending_drop = false;
      ++result.restarts;
      ++round_id;
      continue;
    }

    RingMatrix z_hat_sum = RingMatrix::Zero(n, C);
    for (const auto& [id, s] : shares) z_hat_sum += s;

    // Relay each client only its own rows; recover Z[R_j] = Zhat[R_j] + Ztilde[R_j].
    for (const auto& id : P) {
      auto part = row_partition.find(id);
      if (part == row_partition.end()) continue;
      const auto& rows = part->second;
      std::vector<std::uint64_t> flat;
      flat.reserve(rows.size() * C);
      for (int r : rows)
        for (int c = 0; c < C; ++c) flat.push_back(z_hat_sum(r, c));
      bus.send("server", id, "rowsum_rows", pack_u64s(flat),
               static_cast<std::uint64_t>(rows.size()) * C);

      Eigen::MatrixXd block(static_cast<Eigen::Index>(rows.size()), C);
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (int c = 0; c < C; ++c)
          block(static_cast<Eigen::Index>(i), c) =
              codec.decode(z_hat_sum(rows[i], c) + obfuscated[id](rows[i], c));
      result.client_rows[id] = std::move(block);
    }
    return result;
  }
}

}  // namespace xclp

#endif  // XCLP_SECURE_ROWSUMS_HPP_
