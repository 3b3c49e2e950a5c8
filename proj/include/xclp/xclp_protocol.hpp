#ifndef XCLP_XCLP_PROTOCOL_HPP_
#define XCLP_XCLP_PROTOCOL_HPP_

#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <numeric>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "xclp/bus.hpp"
#include "xclp/data_model.hpp"
#include "xclp/fixed_point.hpp"
#include "xclp/graph_engine.hpp"
#include "xclp/lsh.hpp"
#include "xclp/plaintext_oracle.hpp"
#include "xclp/secure_hamming.hpp"
#include "xclp/secure_rowsums.hpp"

// End-to-end protocol orchestration across simulated parties:
//   setup    - pairwise secret agreement (simulated out-of-band key exchange)
//   phase1   - shared-seed LSH plus secure Hamming computation
//   phase2   - server-side graph construction and influence solve
//   phase3   - local label contributions, masked row sums, label decisions
// Dropouts can be injected at each window; the surviving clients' outputs
// match the corresponding counterfactual runs.

namespace xclp {

enum class DropWindow {
  kBeforeHamming,
  kDuringHamming,
  kAfterHammingBeforeRowSums,
  kDuringRowSums,
  kAfterRowSums,
};

struct DropoutEvent {
  std::string party;
  DropWindow window = DropWindow::kBeforeHamming;
  int after_pairs = 0;  // kDuringHamming: cross-pair blocks completed first
};

struct XCLPConfig {
  int code_length = 4096;
  int top_k = 10;
  double alpha = 0.99;
  HammingProtocol protocol = HammingProtocol::kPlaintextDebug;
  OtBackend ot_backend = OtBackend::kSimulated;
  int paillier_bits = 512;
  int fraction_bits = 24;
  std::uint64_t seed = 0;
  std::vector<DropoutEvent> dropout_schedule;
  bool record_payloads = false;

  void validate(int n) const {
    if (code_length < 1) throw std::invalid_argument("config: code_length must be >= 1");
    if (top_k < 1 || top_k >= n) throw std::invalid_argument("config: top_k outside [1, n)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha outside (0,1)");
  }
};

struct XCLPResult {
  std::map<std::string, LabelAssignment> assignments;
  std::map<std::string, Eigen::MatrixXd> client_scores;  // per client, n_j x C
  std::shared_ptr<Bus> bus;
  nlohmann::json report;
};

inline const char* hamming_protocol_name(HammingProtocol p) {
  switch (p) {
    case HammingProtocol::kOt:
      return "ot";
    case HammingProtocol::kPhe:
      return "phe";
    default:
      return "plaintext_debug";
  }
}

inline XCLPResult run_xclp(const Cohort& cohort, const XCLPConfig& config) {
  cohort.validate();
  config.validate(cohort.total_size());

  XCLPResult result;
  result.bus = std::make_shared<Bus>(config.record_payloads);
  Bus& bus = *result.bus;
  using Clock = std::chrono::steady_clock;
  std::map<std::string, double> phase_seconds;
  auto t0 = Clock::now();
  auto mark = [&](const std::string& phase) {
    auto t1 = Clock::now();
    phase_seconds[phase] = std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
  };

  auto drops_in = [&](DropWindow w) {
    std::set<std::string> s;
    for (const auto& e : config.dropout_schedule)
      if (e.window == w) s.insert(e.party);
    return s;
  };

  // --- Setup: pairwise secrets, shared projection seed ---
  bus.set_phase("setup");
  std::set<std::string> gone = drops_in(DropWindow::kBeforeHamming);
  std::vector<const ClientDataset*> active;
  for (const auto& c : cohort.clients)
    if (!gone.count(c.client_id)) active.push_back(&c);
  if (active.empty()) throw std::runtime_error("run_xclp: all clients dropped out");
  mark("setup");

  // --- Phase 1: LSH codes and secure Hamming ---
  bus.set_phase("hamming");
  ProjectionSpec pspec{config.seed, config.code_length, cohort.dim()};
  Eigen::MatrixXd projection = generate_projection(pspec);
  std::vector<BitCodeMatrix> codes;
  for (const auto* c : active) {
    BitCodeMatrix code = hash_features(c->features, projection);
    code.owner = c->client_id;
    codes.push_back(std::move(code));
  }

  HammingOptions hopts;
  hopts.protocol = config.protocol;
  hopts.ot_backend = config.ot_backend;
  hopts.seed = config.seed;
  hopts.paillier_bits = config.paillier_bits;
  for (const auto& e : config.dropout_schedule)
    if (e.window == DropWindow::kDuringHamming)
      hopts.drop_after_pairs[e.party] = e.after_pairs;
  HammingMatrix H = compute_hamming_matrix(codes, hopts, bus);

  // Clients that dropped mid-Hamming end up absent from H; remove them from
  // the run entirely (same outcome as dropping before the phase).
  auto [Hc, kept] = compact_present(H);
  {
    std::set<std::string> mid = drops_in(DropWindow::kDuringHamming);
    std::vector<const ClientDataset*> still;
    for (const auto* c : active)
      if (!mid.count(c->client_id)) still.push_back(c);
    active = std::move(still);
  }
  const int n = Hc.size();
  if (n == 0) throw std::runtime_error("run_xclp: no data left after dropouts");
  if (config.top_k >= n) throw std::invalid_argument("config: top_k outside [1, n)");
  mark("hamming");

  // --- Phase 2: graph and influence columns ---
  bus.set_phase("graph");
  SimilarityGraph graph = build_graph(Hc, config.top_k);

  // Block offsets of active clients within the compacted indexing.
  std::map<std::string, int> block_start;
  {
    int base = 0;
    for (const auto* c : active) {
      block_start[c->client_id] = base;
      base += c->size();
    }
  }

  std::set<std::string> silent = drops_in(DropWindow::kAfterHammingBeforeRowSums);
  std::vector<const ClientDataset*> phase3;  // clients still alive for phase 3
  for (const auto* c : active)
    if (!silent.count(c->client_id)) phase3.push_back(c);
  if (phase3.empty()) throw std::runtime_error("run_xclp: all clients dropped out");

  // Labeled global indices per phase-3 client; silent clients keep their rows
  // in the graph but contribute no label columns.
  std::map<std::string, std::vector<int>> labeled_indices;
  std::vector<int> all_labeled;
  for (const auto* c : phase3) {
    std::vector<int> idx;
    for (int i = 0; i < c->labeled_count; ++i) idx.push_back(block_start[c->client_id] + i);
    all_labeled.insert(all_labeled.end(), idx.begin(), idx.end());
    labeled_indices[c->client_id] = std::move(idx);
  }

  InfluenceColumns influence = influence_columns(graph, all_labeled, config.alpha);
  // Server -> client: each labeled client receives its n x l_j column block.
  std::map<std::string, Eigen::MatrixXd> client_columns;
  {
    int col = 0;
    for (const auto* c : phase3) {
      int l = c->labeled_count;
      if (l == 0) continue;
      Eigen::MatrixXd block = influence.columns.middleCols(col, l);
      col += l;
      std::vector<std::uint8_t> payload;
      payload.reserve(static_cast<std::size_t>(n) * l * 8);
      for (int i = 0; i < n; ++i)
        for (int j2 = 0; j2 < l; ++j2) {
          std::uint64_t bits;
          double v = block(i, j2);
          std::memcpy(&bits, &v, 8);
          append_u64(payload, bits);
        }
      bus.send("server", c->client_id, "influence_cols", payload,
               static_cast<std::uint64_t>(n) * l);
      client_columns[c->client_id] = std::move(block);
    }
  }
  mark("graph");

  // --- Phase 3: local contributions, masked row sums, label decisions ---
  bus.set_phase("rowsums");
  const int C = cohort.class_count;
  FixedPointCodec codec{config.fraction_bits};
  std::map<std::string, Eigen::MatrixXd> contributions;
  std::map<std::string, std::vector<int>> row_partition;
  for (const auto* c : phase3) {
    Eigen::MatrixXd zbar = Eigen::MatrixXd::Zero(n, C);
    if (c->labeled_count > 0) {
      Eigen::MatrixXd y_l = c->labels.topRows(c->labeled_count).cast<double>();
      zbar = client_columns[c->client_id] * y_l;
    }
    contributions[c->client_id] = std::move(zbar);
    std::vector<int> rows(c->size());
    std::iota(rows.begin(), rows.end(), block_start[c->client_id]);
    row_partition[c->client_id] = std::move(rows);
  }

  RowSumsOptions ropts;
  ropts.root_seed = mix64(config.seed ^ 0x5ec5e75ULL);
  ropts.drop_mid_protocol = drops_in(DropWindow::kDuringRowSums);
  RowSumsResult sums = secure_row_sums(contributions, row_partition, bus, codec, ropts);
  mark("rowsums");

  std::set<std::string> late = drops_in(DropWindow::kAfterRowSums);
  for (const auto* c : phase3) {
    auto it = sums.client_rows.find(c->client_id);
    if (it == sums.client_rows.end()) continue;  // dropped during row sums
    if (late.count(c->client_id)) continue;      // dropped before reading output
    const Eigen::MatrixXd& z = it->second;
    LabelAssignment assignment;
    assignment.client_id = c->client_id;
    assignment.labels.resize(c->size());
    assignment.confidences.resize(c->size());
    for (int i = 0; i < c->size(); ++i) {
      Eigen::VectorXd row = sanitize_score_row(z.row(i).transpose());
      assignment.labels[i] = score_row_label(row);
      assignment.confidences[i] = entropy_confidence(row);
    }
    result.client_scores[c->client_id] = z;
    result.assignments[c->client_id] = std::move(assignment);
  }

  // --- Run report ---
  nlohmann::json report;
  report["config"] = {{"L", config.code_length},
                      {"k", config.top_k},
                      {"alpha", config.alpha},
                      {"protocol", hamming_protocol_name(config.protocol)},
                      {"fraction_bits", config.fraction_bits},
                      {"seed", config.seed}};
  report["n"] = n;
  report["class_count"] = C;
  int abstains = 0;
  for (const auto& [id, a] : result.assignments)
    for (int l : a.labels)
      if (l == kAbstain) ++abstains;
  report["abstain_count"] = abstains;
  report["rowsum_restarts"] = sums.restarts;
  nlohmann::json per_party = nlohmann::json::object();
  for (const auto& [party, transcript] : bus.transcripts()) {
    nlohmann::json phases = nlohmann::json::object();
    for (const char* phase : {"setup", "hamming", "graph", "rowsums"})
      phases[phase] = transcript.bytes_sent(phase);
    per_party[party] = phases;
  }
  report["bytes_sent"] = per_party;
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& [phase, secs] : phase_seconds) timing[phase] = secs;
  report["phase_seconds"] = timing;
  result.report = std::move(report);
  return result;
}

// Centralized reference run: same graph pipeline, no crypto, closed-form
// propagation. The distributed protocol must reproduce its labels exactly.
struct CentralizedResult {
  OracleResult oracle;
  std::map<std::string, LabelAssignment> assignments;
  std::map<std::string, Eigen::MatrixXd> client_scores;
};

inline CentralizedResult run_centralized(const Cohort& cohort, const XCLPConfig& config) {
  cohort.validate();
  config.validate(cohort.total_size());
  ProjectionSpec pspec{config.seed, config.code_length, cohort.dim()};
  Eigen::MatrixXd projection = generate_projection(pspec);
  std::vector<BitCodeMatrix> codes;
  for (const auto& c : cohort.clients) {
    BitCodeMatrix code = hash_features(c.features, projection);
    code.owner = c.client_id;
    codes.push_back(std::move(code));
  }
  const int n = cohort.total_size();
  HammingMatrix H;
  H.code_length = config.code_length;
  H.modulus = hamming_ring_modulus(config.code_length);
  H.present.assign(n, 1);
  H.values.resize(n, n);
  std::vector<int> offsets;
  {
    int base = 0;
    for (const auto& c : codes) {
      offsets.push_back(base);
      base += c.rows;
    }
  }
  for (std::size_t a = 0; a < codes.size(); ++a)
    for (std::size_t b = 0; b < codes.size(); ++b)
      for (int i = 0; i < codes[a].rows; ++i)
        for (int j = 0; j < codes[b].rows; ++j)
          H.values(offsets[a] + i, offsets[b] + j) =
              hamming_distance(codes[a], i, codes[b], j);

  SimilarityGraph graph = build_graph(H, config.top_k);
  OracleResult oracle =
      propagate_closed_form(graph.normalized, stacked_labels(cohort), config.alpha);

  CentralizedResult out;
  int base = 0;
  for (const auto& c : cohort.clients) {
    LabelAssignment a;
    a.client_id = c.client_id;
    for (int i = 0; i < c.size(); ++i) {
      a.labels.push_back(oracle.labels[base + i]);
      a.confidences.push_back(oracle.confidences[base + i]);
    }
    out.client_scores[c.client_id] = oracle.scores.middleRows(base, c.size());
    out.assignments[c.client_id] = std::move(a);
    base += c.size();
  }
  out.oracle = std::move(oracle);
  return out;
}

}  // namespace xclp

#endif  // XCLP_XCLP_PROTOCOL_HPP_
