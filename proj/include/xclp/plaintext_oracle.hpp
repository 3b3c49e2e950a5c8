#ifndef XCLP_PLAINTEXT_ORACLE_HPP_
#define XCLP_PLAINTEXT_ORACLE_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "xclp/data_model.hpp"
#include "xclp/graph_engine.hpp"

// Centralized, crypto-free label propagation used as the correctness oracle
// for the distributed protocol. Optimized for obviousness, not speed.

namespace xclp {

// omega = 1 - H(p)/log C for the row-normalized score vector, natural log,
// 0*log 0 := 0. Identically-zero rows map to confidence 0.
inline double entropy_confidence(const Eigen::VectorXd& score_row) {
  const int C = static_cast<int>(score_row.size());
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    if (score_row[c] < 0.0) throw std::invalid_argument("entropy_confidence: negative entry");
    total += score_row[c];
  }
  if (total == 0.0) return 0.0;
  if (C == 1) return 1.0;
  double entropy = 0.0;
  for (int c = 0; c < C; ++c) {
    double p = score_row[c] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return 1.0 - entropy / std::log(static_cast<double>(C));
}

// Argmax with lowest-index tie break; kAbstain for all-zero rows.
inline int score_row_label(const Eigen::VectorXd& score_row) {
  if (score_row.isZero(0.0)) return kAbstain;
  int best = 0;
  for (int c = 1; c < score_row.size(); ++c)
    if (score_row[c] > score_row[best]) best = c;
  return best;
}

struct OracleResult {
  Eigen::MatrixXd scores;  // Z, n x C
  std::vector<int> labels;
  std::vector<double> confidences;
  int iterations = 0;
  double final_residual = 0.0;
};

// Scores below half the fixed-point resolution are indistinguishable from
// zero on the protocol side; snapping them keeps label and abstain decisions
// identical between the oracle and the fixed-point pipeline. Influence of
// labels is nonnegative in exact arithmetic, so anything below -1e-9 is a bug.
inline constexpr double kScoreZeroTolerance = 0x1.0p-25;

inline Eigen::VectorXd sanitize_score_row(Eigen::VectorXd row) {
  for (int c = 0; c < row.size(); ++c) {
    if (row[c] < -1e-9) throw std::logic_error("negative propagated score");
    if (row[c] < kScoreZeroTolerance) row[c] = 0.0;
  }
  return row;
}

namespace detail {

inline void derive_labels(OracleResult& r) {
  const int n = static_cast<int>(r.scores.rows());
  r.labels.resize(n);
  r.confidences.resize(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd row = sanitize_score_row(r.scores.row(i).transpose());
    r.labels[i] = score_row_label(row);
    r.confidences[i] = entropy_confidence(row);
  }
}

}  // namespace detail

// Z = (Id - alpha W_norm)^{-1} Y by dense solve.
inline OracleResult propagate_closed_form(const Eigen::SparseMatrix<double>& normalized,
                                          const Eigen::MatrixXd& labels, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("propagate_closed_form: alpha outside (0,1)");
  const int n = static_cast<int>(normalized.rows());
  if (labels.rows() != n) throw std::invalid_argument("label matrix row mismatch");
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - alpha * Eigen::MatrixXd(normalized);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  OracleResult r;
  r.scores = lu.solve(labels);
  // The system is nonsingular by the spectral bound; a failure here is a bug.
  double err = (system * r.scores - labels).cwiseAbs().maxCoeff();
  if (!(err < 1e-6)) throw std::logic_error("propagate_closed_form: solve failed");
  detail::derive_labels(r);
  return r;
}

// Fixed-point iteration z_{t+1} = alpha W_norm z_t + y from z_0 = 0.
inline OracleResult propagate_iterative(const Eigen::SparseMatrix<double>& normalized,
                                        const Eigen::MatrixXd& labels, double alpha,
                                        double tol = 1e-10, int max_iters = 100000) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("propagate_iterative: alpha outside (0,1)");
  OracleResult r;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(labels.rows(), labels.cols());
  for (int t = 0; t < max_iters; ++t) {
    Eigen::MatrixXd next = alpha * (normalized * z) + labels;
    double delta = (next - z).cwiseAbs().maxCoeff();
    z = next;
    r.iterations = t + 1;
    r.final_residual = delta;
    if (delta <= tol) {
      r.scores = z;
      detail::derive_labels(r);
      return r;
    }
  }
  throw std::runtime_error("propagate_iterative: max_iters exceeded, residual " +
                           std::to_string(r.final_residual));
}

// Stacks the cohort's zero-or-one-hot label matrices into Y (n x C).
inline Eigen::MatrixXd stacked_labels(const Cohort& cohort) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(cohort.total_size(), cohort.class_count);
  int base = 0;
  for (const auto& client : cohort.clients) {
    Y.block(base, 0, client.size(), cohort.class_count) = client.labels.cast<double>();
    base += client.size();
  }
  return Y;
}

}  // namespace xclp

#endif  // XCLP_PLAINTEXT_ORACLE_HPP_
