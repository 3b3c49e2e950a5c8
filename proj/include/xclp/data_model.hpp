#ifndef XCLP_DATA_MODEL_HPP_
#define XCLP_DATA_MODEL_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xclp/rng.hpp"

// Dataset, cohort and label-assignment types shared by the whole pipeline.

namespace xclp {

inline constexpr int kAbstain = -1;

// One client's feature matrix plus zero-or-one-hot partial labels.
// Labeled rows are stored first; `original_row` maps storage order back
// to the order the data arrived in.
struct ClientDataset {
  std::string client_id;
  Eigen::MatrixXd features;   // n_j x d
  Eigen::MatrixXi labels;     // n_j x C, zero-or-one-hot
  int labeled_count = 0;
  std::vector<int> original_row;  // storage row -> original row

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  int class_count() const { return static_cast<int>(labels.cols()); }

  // Class of a labeled storage row, kAbstain for unlabeled rows.
  int label_of(int row) const {
    if (row >= labeled_count) return kAbstain;
    for (int c = 0; c < labels.cols(); ++c)
      if (labels(row, c) == 1) return c;
    return kAbstain;
  }

  void validate() const {
    if (labels.rows() != features.rows())
      throw std::invalid_argument("client " + client_id + ": label/feature row mismatch");
    if (labeled_count < 0 || labeled_count > size())
      throw std::invalid_argument("client " + client_id + ": labeled_count out of range");
    for (int i = 0; i < size(); ++i) {
      int sum = 0;
      for (int c = 0; c < labels.cols(); ++c) {
        if (labels(i, c) != 0 && labels(i, c) != 1)
          throw std::invalid_argument("client " + client_id + ": malformed label row");
        sum += labels(i, c);
      }
      if (i < labeled_count && sum != 1)
        throw std::invalid_argument("client " + client_id + ": malformed label row");
      if (i >= labeled_count && sum != 0)
        throw std::invalid_argument("client " + client_id + ": nonzero label past labeled block");
      double norm = features.row(i).norm();
      if (!std::isfinite(norm))
        throw std::invalid_argument("client " + client_id + ": non-finite feature row");
      if (norm == 0.0)
        throw std::invalid_argument("client " + client_id + ": zero feature row");
    }
  }
};

struct Cohort {
  std::vector<ClientDataset> clients;
  int class_count = 0;

  int total_size() const {
    int n = 0;
    for (const auto& c : clients) n += c.size();
    return n;
  }
  int dim() const { return clients.empty() ? 0 : clients.front().dim(); }

  // Global row of (client index, local storage row). Client blocks are
  // contiguous in sequence order.
  int global_index(int client, int local_row) const {
    int base = 0;
    for (int j = 0; j < client; ++j) base += clients[j].size();
    return base + local_row;
  }

  int block_start(int client) const { return global_index(client, 0); }

  void validate() const {
    if (clients.empty()) throw std::invalid_argument("cohort has no clients");
    int d = clients.front().dim();
    for (const auto& c : clients) {
      if (c.dim() != d) throw std::invalid_argument("dimension mismatch across clients");
      if (c.class_count() != class_count)
        throw std::invalid_argument("class count mismatch across clients");
      c.validate();
    }
  }
};

// Output of label propagation for one client, in storage row order.
struct LabelAssignment {
  std::string client_id;
  std::vector<int> labels;          // values in [0, C) or kAbstain
  std::vector<double> confidences;  // in [0, 1]
};

// ---------------------------------------------------------------------------
// Raw matrix format: 8-byte magic "XCLPMAT1", u64 rows, u64 cols, row-major
// float64, all little-endian.

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("raw matrix: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline constexpr char kRawMatrixMagic[9] = "XCLPMAT1";

inline void save_raw_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kRawMatrixMagic, 8);
  detail::put_u64(os, static_cast<std::uint64_t>(m.rows()));
  detail::put_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      detail::put_u64(os, bits);
    }
}

inline Eigen::MatrixXd load_raw_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kRawMatrixMagic, 8) != 0)
    throw std::runtime_error(path.string() + ": bad raw matrix magic");
  std::uint64_t rows = detail::get_u64(is);
  std::uint64_t cols = detail::get_u64(is);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j) {
      std::uint64_t bits = detail::get_u64(is);
      double v;
      std::memcpy(&v, &bits, 8);
      m(i, j) = v;
    }
  return m;
}

// ---------------------------------------------------------------------------
// CSV schema: one row per example, columns f_0..f_{d-1}, label (integer or
// empty). The loader moves labeled rows first and records the permutation.

inline ClientDataset make_client_dataset(std::string client_id,
                                         const Eigen::MatrixXd& features,
                                         const std::vector<int>& raw_labels,
                                         int class_count) {
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(raw_labels.size()) != n)
    throw std::invalid_argument("label count does not match feature rows");
  std::vector<int> order;
  order.reserve(n);
  for (int i = 0; i < n; ++i)
    if (raw_labels[i] != kAbstain) order.push_back(i);
  int labeled = static_cast<int>(order.size());
  for (int i = 0; i < n; ++i)
    if (raw_labels[i] == kAbstain) order.push_back(i);

  ClientDataset ds;
  ds.client_id = std::move(client_id);
  ds.features.resize(n, features.cols());
  ds.labels = Eigen::MatrixXi::Zero(n, class_count);
  ds.labeled_count = labeled;
  ds.original_row = order;
  for (int i = 0; i < n; ++i) {
    ds.features.row(i) = features.row(order[i]);
    int y = raw_labels[order[i]];
    if (y != kAbstain) {
      if (y < 0 || y >= class_count)
        throw std::invalid_argument("label value out of range");
      ds.labels(i, y) = 1;
    }
  }
  ds.validate();
  return ds;
}

inline void save_client_csv(const std::filesystem::path& path, const ClientDataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.precision(17);
  // Emit in original row order so a save/load round trip is stable.
  std::vector<int> inverse(ds.size());
  for (int i = 0; i < ds.size(); ++i) inverse[ds.original_row[i]] = i;
  for (int orig = 0; orig < ds.size(); ++orig) {
    int i = inverse[orig];
    for (int j = 0; j < ds.dim(); ++j) os << ds.features(i, j) << ",";
    int y = ds.label_of(i);
    if (y != kAbstain) os << y;
    os << "\n";
  }
}

inline ClientDataset load_client_csv(const std::filesystem::path& path, int class_count) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (cells.size() < 2) throw std::runtime_error(path.string() + ": too few columns");
    std::vector<double> feat;
    for (std::size_t j = 0; j + 1 < cells.size(); ++j) feat.push_back(std::stod(cells[j]));
    if (!rows.empty() && feat.size() != rows.front().size())
      throw std::runtime_error(path.string() + ": ragged rows");
    rows.push_back(std::move(feat));
    const std::string& lab = cells.back();
    labels.push_back(lab.empty() ? kAbstain : std::stoi(lab));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": empty file");
  Eigen::MatrixXd features(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) features(i, j) = rows[i][j];
  return make_client_dataset(path.stem().string(), features, labels, class_count);
}

enum class CohortFormat { kCsv, kRawMatrix };

// Cohort directory layout: client_*.csv, or per-client pairs
// <name>.features.mat / <name>.labels.mat (labels as n x 1 raw matrix with
// -1 for unlabeled). Class count inferred as 1 + max label unless given.
inline Cohort load_cohort(const std::filesystem::path& dir,
                          CohortFormat format = CohortFormat::kCsv,
                          int class_count = -1) {
  if (!std::filesystem::exists(dir))
    throw std::runtime_error("cohort path does not exist: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto p = e.path();
    if (format == CohortFormat::kCsv && p.extension() == ".csv") files.push_back(p);
    if (format == CohortFormat::kRawMatrix && p.string().ends_with(".features.mat"))
      files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no client files in " + dir.string());

  // First pass to determine class count when not supplied.
  struct Raw {
    std::string id;
    Eigen::MatrixXd features;
    std::vector<int> labels;
  };
  std::vector<Raw> raws;
  int max_label = -1;
  for (const auto& f : files) {
    Raw r;
    if (format == CohortFormat::kCsv) {
      // Parse with a throwaway class count, then recover raw labels.
      std::ifstream is(f);
      std::string line;
      std::vector<std::vector<double>> feats;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        std::vector<double> feat;
        for (std::size_t j = 0; j + 1 < cells.size(); ++j) feat.push_back(std::stod(cells[j]));
        feats.push_back(std::move(feat));
        r.labels.push_back(cells.back().empty() ? kAbstain : std::stoi(cells.back()));
      }
      if (feats.empty()) throw std::runtime_error(f.string() + ": empty file");
      r.features.resize(feats.size(), feats.front().size());
      for (std::size_t i = 0; i < feats.size(); ++i) {
        if (feats[i].size() != feats.front().size())
          throw std::runtime_error(f.string() + ": ragged rows");
        for (std::size_t j = 0; j < feats[i].size(); ++j) r.features(i, j) = feats[i][j];
      }
      r.id = f.stem().string();
    } else {
      r.features = load_raw_matrix(f);
      std::string base = f.string();
      base.resize(base.size() - std::string(".features.mat").size());
      Eigen::MatrixXd lab = load_raw_matrix(base + ".labels.mat");
      if (lab.rows() != r.features.rows() || lab.cols() != 1)
        throw std::runtime_error(f.string() + ": label matrix shape mismatch");
      for (Eigen::Index i = 0; i < lab.rows(); ++i)
        r.labels.push_back(static_cast<int>(std::llround(lab(i, 0))));
      r.id = std::filesystem::path(base).filename().string();
    }
    for (int y : r.labels) max_label = std::max(max_label, y);
    raws.push_back(std::move(r));
  }
  int C = class_count > 0 ? class_count : max_label + 1;
  if (C <= 0) throw std::runtime_error("cannot infer class count from fully unlabeled cohort");

  Cohort cohort;
  cohort.class_count = C;
  for (auto& r : raws)
    cohort.clients.push_back(make_client_dataset(r.id, r.features, r.labels, C));
  cohort.validate();
  return cohort;
}

inline void save_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                        CohortFormat format = CohortFormat::kCsv) {
  std::filesystem::create_directories(dir);
  for (const auto& c : cohort.clients) {
    if (format == CohortFormat::kCsv) {
      save_client_csv(dir / (c.client_id + ".csv"), c);
    } else {
      save_raw_matrix(dir / (c.client_id + ".features.mat"), c.features);
      Eigen::MatrixXd lab(c.size(), 1);
      for (int i = 0; i < c.size(); ++i) lab(c.original_row[i], 0) = c.label_of(i);
      save_raw_matrix(dir / (c.client_id + ".labels.mat"), lab);
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian-blob cohorts.

enum class Heterogeneity { kIid, kClassSkew };

struct SyntheticSpec {
  int n_clients = 2;
  int per_client = 50;
  int dim = 8;
  int class_count = 2;
  double label_fraction = 0.1;
  Heterogeneity heterogeneity = Heterogeneity::kIid;
  std::uint64_t seed = 0;
  // Blob geometry knobs; defaults give clearly separated classes.
  double center_scale = 4.0;
  double noise_sigma = 1.0;
  int informative_dims = -1;  // -1: all dims carry class signal
  int classes_per_client = -1;  // class_skew only; -1: ceil(C/2)
};

inline Cohort split_synthetic(const SyntheticSpec& spec) {
  if (spec.label_fraction < 0.0 || spec.label_fraction > 1.0)
    throw std::invalid_argument("label_fraction outside [0,1]");
  if (spec.label_fraction > 0.0 &&
      spec.class_count > spec.n_clients * spec.per_client)
    throw std::invalid_argument("class count exceeds cohort size");

  const int C = spec.class_count;
  const int d = spec.dim;
  const int inf_d = spec.informative_dims > 0 ? std::min(spec.informative_dims, d) : d;
  CounterRng center_rng = CounterRng::derived(spec.seed, 0xb10b);
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(C, d);
  for (int c = 0; c < C; ++c)
    for (int j = 0; j < inf_d; ++j)
      centers(c, j) = spec.center_scale * center_rng.next_normal();

  int skew_classes = spec.classes_per_client > 0 ? spec.classes_per_client : (C + 1) / 2;
  skew_classes = std::min(skew_classes, C);

  Cohort cohort;
  cohort.class_count = C;
  for (int j = 0; j < spec.n_clients; ++j) {
    CounterRng rng = CounterRng::derived(spec.seed, 0xc11e0000ULL + static_cast<std::uint64_t>(j));
    std::vector<int> allowed(C);
    std::iota(allowed.begin(), allowed.end(), 0);
    if (spec.heterogeneity == Heterogeneity::kClassSkew) {
      // Deterministic shuffle of this client's class subset.
      for (int i = C - 1; i > 0; --i)
        std::swap(allowed[i], allowed[rng.next_below(i + 1)]);
      allowed.resize(skew_classes);
    }
    Eigen::MatrixXd features(spec.per_client, d);
    std::vector<int> raw_labels(spec.per_client, kAbstain);
    std::vector<int> truth(spec.per_client);
    for (int i = 0; i < spec.per_client; ++i) {
      int c = allowed[rng.next_below(allowed.size())];
      truth[i] = c;
      for (int k = 0; k < d; ++k)
        features(i, k) = centers(c, k) + spec.noise_sigma * rng.next_normal();
    }
    int l = static_cast<int>(std::lround(spec.label_fraction * spec.per_client));
    for (int i = 0; i < l; ++i) raw_labels[i] = truth[i];
    std::string id = "client_" + std::string(j < 10 ? "0" : "") + std::to_string(j);
    cohort.clients.push_back(make_client_dataset(id, features, raw_labels, C));
    // Keep the generating class around for evaluation via a side channel:
    // unlabeled truth is encoded nowhere in the dataset itself.
    (void)truth;
  }
  cohort.validate();
  return cohort;
}

// split_synthetic plus ground truth for every row (storage order per client),
// for experiments that need to score pseudo-label accuracy.
struct SyntheticCohort {
  Cohort cohort;
  std::vector<std::vector<int>> truth;  // per client, storage row order
};

inline SyntheticCohort split_synthetic_with_truth(const SyntheticSpec& spec) {
  SyntheticCohort out;
  out.cohort = split_synthetic(spec);
  // Regenerate the per-client draws to recover the class of each row.
  const int C = spec.class_count;
  int skew_classes = spec.classes_per_client > 0 ? spec.classes_per_client : (C + 1) / 2;
  skew_classes = std::min(skew_classes, C);
  for (int j = 0; j < spec.n_clients; ++j) {
    CounterRng rng = CounterRng::derived(spec.seed, 0xc11e0000ULL + static_cast<std::uint64_t>(j));
    std::vector<int> allowed(C);
    std::iota(allowed.begin(), allowed.end(), 0);
    if (spec.heterogeneity == Heterogeneity::kClassSkew) {
      for (int i = C - 1; i > 0; --i)
        std::swap(allowed[i], allowed[rng.next_below(i + 1)]);
      allowed.resize(skew_classes);
    }
    std::vector<int> truth_orig(spec.per_client);
    for (int i = 0; i < spec.per_client; ++i) {
      int c = allowed[rng.next_below(allowed.size())];
      truth_orig[i] = c;
      for (int k = 0; k < spec.dim; ++k) rng.next_normal();
    }
    const auto& ds = out.cohort.clients[j];
    std::vector<int> truth_storage(spec.per_client);
    for (int i = 0; i < spec.per_client; ++i)
      truth_storage[i] = truth_orig[ds.original_row[i]];
    out.truth.push_back(std::move(truth_storage));
  }
  return out;
}

}  // namespace xclp

#endif  // XCLP_DATA_MODEL_HPP_
