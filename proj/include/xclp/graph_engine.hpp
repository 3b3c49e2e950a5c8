#ifndef XCLP_GRAPH_ENGINE_HPP_
#define XCLP_GRAPH_ENGINE_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "xclp/lsh.hpp"
#include "xclp/secure_hamming.hpp"

// Server-side pipeline: Hamming distances -> cosine similarity -> top-k
// sparsification -> symmetrization -> degree normalization -> influence
// columns for the labeled points.

namespace xclp {

struct SimilarityGraph {
  Eigen::MatrixXd similarity;              // A, cosine estimates, n x n
  Eigen::SparseMatrix<double> adjacency;   // W = B + B^T, nonnegative
  Eigen::SparseMatrix<double> normalized;  // D^{-1/2} W D^{-1/2}
  Eigen::VectorXd degrees;

  int size() const { return static_cast<int>(similarity.rows()); }
};

// Top-k per row over the cosine estimates, self-similarity excluded, ties
// broken by lowest column index. Negative similarities kept by the top-k
// selection are clamped to 0 so W stays nonnegative and rho(W_norm) <= 1.
inline SimilarityGraph build_graph_from_similarity(Eigen::MatrixXd similarity, int k) {
  const int n = static_cast<int>(similarity.rows());
  if (n == 0) throw std::invalid_argument("build_graph: empty matrix");
  if (k < 1 || k >= n) throw std::invalid_argument("build_graph: k must be in [1, n)");

  SimilarityGraph g;
  g.similarity = std::move(similarity);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * k);
  std::vector<int> candidates(n);
  for (int i = 0; i < n; ++i) {
    candidates.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) candidates.push_back(j);
    std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(),
                      [&](int a, int b) {
                        if (g.similarity(i, a) != g.similarity(i, b))
                          return g.similarity(i, a) > g.similarity(i, b);
                        return a < b;
                      });
    for (int t = 0; t < k; ++t) {
      double w = std::max(0.0, g.similarity(i, candidates[t]));
      if (w > 0.0) triplets.emplace_back(i, candidates[t], w);
    }
  }
  Eigen::SparseMatrix<double> B(n, n);
  B.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> Bt = B.transpose();
  g.adjacency = B + Bt;

  g.degrees = Eigen::VectorXd::Zero(n);
  for (int c = 0; c < g.adjacency.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.adjacency, c); it; ++it)
      g.degrees[it.row()] += it.value();

  // Degree-0 vertices stay disconnected: their D^{-1/2} entry is 0.
  Eigen::VectorXd dinv(n);
  for (int i = 0; i < n; ++i) dinv[i] = g.degrees[i] > 0.0 ? 1.0 / std::sqrt(g.degrees[i]) : 0.0;
  g.normalized = g.adjacency;
  for (int c = 0; c < g.normalized.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.normalized, c); it; ++it)
      it.valueRef() *= dinv[it.row()] * dinv[it.col()];
  return g;
}

inline SimilarityGraph build_graph(const HammingMatrix& H, int k) {
  const int n = H.size();
  if (n == 0) throw std::invalid_argument("build_graph: empty matrix");
  for (int i = 0; i < n; ++i)
    if (!H.present[i])
      throw std::invalid_argument("build_graph: matrix has absent rows; compact it first");
  Eigen::MatrixXd similarity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      similarity(i, j) = estimate_cosine(H.values(i, j), H.code_length);
  return build_graph_from_similarity(std::move(similarity), k);
}

struct InfluenceColumns {
  // Columns of (Id - alpha * W_norm)^{-1} for the requested global indices,
  // in the order the indices were given.
  Eigen::MatrixXd columns;  // n x |indices|
  std::vector<int> indices;
  double alpha = 0.0;
};

inline constexpr int kDenseSolveLimit = 2000;

// Solves (Id - alpha W_norm) x = e_i for each requested index. Dense Cholesky
// up to kDenseSolveLimit vertices, conjugate gradient above.
inline InfluenceColumns influence_columns(const SimilarityGraph& graph,
                                          const std::vector<int>& labeled_global_indices,
                                          double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("influence_columns: alpha outside (0,1)");
  const int n = graph.size();
  InfluenceColumns out;
  out.indices = labeled_global_indices;
  out.alpha = alpha;
  out.columns.resize(n, static_cast<Eigen::Index>(labeled_global_indices.size()));
  if (labeled_global_indices.empty()) return out;
  for (int idx : labeled_global_indices)
    if (idx < 0 || idx >= n) throw std::out_of_range("influence_columns: index out of range");

  Eigen::SparseMatrix<double> system(n, n);
  system.setIdentity();
  system -= alpha * graph.normalized;

  if (n <= kDenseSolveLimit) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(system);
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("influence_columns: system not positive definite");
    for (std::size_t c = 0; c < labeled_global_indices.size(); ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[labeled_global_indices[c]] = 1.0;
      out.columns.col(static_cast<Eigen::Index>(c)) = llt.solve(e);
    }
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(10 * n);
    cg.compute(system);
    for (std::size_t c = 0; c < labeled_global_indices.size(); ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[labeled_global_indices[c]] = 1.0;
      out.columns.col(static_cast<Eigen::Index>(c)) = cg.solve(e);
      if (cg.info() != Eigen::Success)
        throw std::runtime_error("influence_columns: CG did not converge, residual " +
                                 std::to_string(cg.error()));
    }
  }

  // Residual contract.
  for (std::size_t c = 0; c < labeled_global_indices.size(); ++c) {
    Eigen::VectorXd r = system * out.columns.col(static_cast<Eigen::Index>(c));
    r[labeled_global_indices[c]] -= 1.0;
    if (r.lpNorm<Eigen::Infinity>() > 1e-8)
      throw std::runtime_error("influence_columns: residual above tolerance");
  }
  return out;
}

// Debug dump: one "i j weight" line per stored edge.
inline void dump_edge_list(const std::filesystem::path& path,
                           const Eigen::SparseMatrix<double>& W) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.precision(17);
  for (int c = 0; c < W.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(W, c); it; ++it)
      os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

}  // namespace xclp

#endif  // XCLP_GRAPH_ENGINE_HPP_
