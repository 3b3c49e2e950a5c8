// xclp command-line tool.
//
//   generate   write a synthetic cohort to a directory
//   propagate  run the cross-client label propagation protocol once
//   train      run the federated semi-supervised training loop
//   check      run correctness suites on fresh random fixtures
//
// Every run writes a manifest JSON into the output directory before doing any
// work, so a run can be reproduced from its manifest alone.
// Exit codes: 0 success, 1 check/assertion failure, 2 usage error.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "xclp/ssl_pipeline.hpp"
#include "xclp/xclp_protocol.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xclp;

namespace {

constexpr const char* kToolVersion = "0.1.0";

fs::path resolve_out_dir(const std::string& flag_value) {
  if (const char* env = std::getenv("XCLP_OUT_DIR"); env && *env) return fs::path(env);
  return fs::path(flag_value);
}

void write_manifest(const fs::path& out_dir, const std::string& subcommand, json config,
                    json inputs, std::uint64_t seed) {
  fs::create_directories(out_dir);
  json manifest = {{"tool_version", kToolVersion},
                   {"subcommand", subcommand},
                   {"config", std::move(config)},
                   {"inputs", std::move(inputs)},
                   {"seed", seed},
                   {"output_dir", out_dir.string()}};
  std::ofstream os(out_dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

int fail_with_error(const fs::path& out_dir, const std::string& message) {
  json err = {{"error", message}};
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!ec) {
    std::ofstream os(out_dir / "error.json");
    os << err.dump(2) << "\n";
  }
  std::cerr << err.dump() << "\n";
  return 1;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

HammingProtocol parse_protocol(const std::string& s) {
  if (s == "ot") return HammingProtocol::kOt;
  if (s == "phe") return HammingProtocol::kPhe;
  if (s == "plaintext_debug") return HammingProtocol::kPlaintextDebug;
  throw UsageError("unknown protocol: " + s);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string out = "cohort";
  int clients = 10, per_client = 100, dim = 16, classes = 3;
  double label_fraction = 0.1;
  std::string heterogeneity = "iid";
  std::string format = "csv";
  std::uint64_t seed = 7;
};

int cmd_generate(const GenerateArgs& a) {
  fs::path out_dir = resolve_out_dir(a.out);
  json config = {{"clients", a.clients},       {"per_client", a.per_client},
                 {"dim", a.dim},               {"classes", a.classes},
                 {"label_fraction", a.label_fraction}, {"heterogeneity", a.heterogeneity},
                 {"format", a.format}};
  write_manifest(out_dir, "generate", config, json::array(), a.seed);
  try {
    SyntheticSpec spec;
    spec.n_clients = a.clients;
    spec.per_client = a.per_client;
    spec.dim = a.dim;
    spec.class_count = a.classes;
    spec.label_fraction = a.label_fraction;
    spec.heterogeneity =
        a.heterogeneity == "class_skew" ? Heterogeneity::kClassSkew : Heterogeneity::kIid;
    spec.seed = a.seed;
    Cohort cohort = split_synthetic(spec);
    save_cohort(out_dir, cohort,
                a.format == "raw" ? CohortFormat::kRawMatrix : CohortFormat::kCsv);
    std::cout << "wrote " << cohort.clients.size() << " clients (" << cohort.total_size()
              << " rows) to " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail_with_error(out_dir, e.what());
  }
}

// ---------------------------------------------------------------------------
// propagate

struct PropagateArgs {
  std::string data;
  std::string out = "propagate_out";
  std::string protocol = "plaintext_debug";
  std::string ot_backend = "simulated";
  int L = 4096, k = 10;
  double alpha = 0.99;
  int paillier_bits = 512;
  std::uint64_t seed = 0;
  std::string format = "csv";
};

int cmd_propagate(const PropagateArgs& a) {
  fs::path out_dir = resolve_out_dir(a.out);
  json config = {{"L", a.L},
                 {"k", a.k},
                 {"alpha", a.alpha},
                 {"protocol", a.protocol},
                 {"ot_backend", a.ot_backend},
                 {"paillier_bits", a.paillier_bits},
                 {"format", a.format}};
  write_manifest(out_dir, "propagate", config, json::array({a.data}), a.seed);
  try {
    Cohort cohort = load_cohort(
        a.data, a.format == "raw" ? CohortFormat::kRawMatrix : CohortFormat::kCsv);
    XCLPConfig cfg;
    cfg.code_length = a.L;
    cfg.top_k = a.k;
    cfg.alpha = a.alpha;
    cfg.protocol = parse_protocol(a.protocol);
    cfg.ot_backend =
        a.ot_backend == "dh" ? OtBackend::kDiffieHellman : OtBackend::kSimulated;
    cfg.paillier_bits = a.paillier_bits;
    cfg.seed = a.seed;

    XCLPResult res = run_xclp(cohort, cfg);

    // Per-client assignments in original row order.
    int checked = 0, correct = 0;
    for (const auto& c : cohort.clients) {
      auto it = res.assignments.find(c.client_id);
      if (it == res.assignments.end()) continue;
      const auto& assign = it->second;
      std::ofstream os(out_dir / (c.client_id + ".labels.csv"));
      os << "original_row,label,confidence\n";
      for (int i = 0; i < c.size(); ++i)
        os << c.original_row[i] << "," << assign.labels[i] << "," << assign.confidences[i]
           << "\n";
      for (int i = 0; i < c.labeled_count; ++i) {
        ++checked;
        if (assign.labels[i] == c.label_of(i)) ++correct;
      }
    }
    json report = res.report;
    report["accuracy"] = checked > 0 ? static_cast<double>(correct) / checked : 0.0;
    report["accuracy_note"] = "agreement with the provided labels on labeled rows";
    std::ofstream os(out_dir / "report.json");
    os << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    return fail_with_error(out_dir, e.what());
  }
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string test_data;
  std::string out = "train_out";
  std::string pseudolabeler = "xclp";
  int rounds = 200;
  double tau = 0.5;
  int epochs = 5;
  double lr = 0.1;
  int L = 4096, k = 10;
  double alpha = 0.99;
  std::string protocol = "plaintext_debug";
  std::uint64_t seed = 0;
  std::string format = "csv";
};

int cmd_train(const TrainArgs& a) {
  fs::path out_dir = resolve_out_dir(a.out);
  json config = {{"pseudolabeler", a.pseudolabeler},
                 {"rounds", a.rounds},
                 {"tau", a.tau},
                 {"epochs", a.epochs},
                 {"lr", a.lr},
                 {"L", a.L},
                 {"k", a.k},
                 {"alpha", a.alpha},
                 {"protocol", a.protocol},
                 {"format", a.format}};
  write_manifest(out_dir, "train", config, json::array({a.data, a.test_data}), a.seed);
  try {
    CohortFormat fmt = a.format == "raw" ? CohortFormat::kRawMatrix : CohortFormat::kCsv;
    TrainTask task;
    task.cohort = load_cohort(a.data, fmt);
    task.featurizer = Featurizer::make_identity();
    if (!a.test_data.empty()) {
      Cohort test = load_cohort(a.test_data, fmt, task.cohort.class_count);
      int rows = test.total_size();
      task.test_features.resize(rows, test.dim());
      task.test_labels.reserve(rows);
      int at = 0;
      for (const auto& c : test.clients) {
        for (int i = 0; i < c.size(); ++i) {
          int y = c.label_of(i);
          if (y == kAbstain)
            throw std::invalid_argument("test cohort must be fully labeled");
          task.test_features.row(at++) = c.features.row(i);
          task.test_labels.push_back(y);
        }
      }
    } else {
      // No held-out set: metrics report accuracy 0 but training still runs.
      task.test_features.resize(1, task.cohort.dim());
      task.test_features.setZero();
      task.test_labels = {0};
    }

    Pseudolabeler labeler = Pseudolabeler::kXclp;
    if (a.pseudolabeler == "perclient_lp") labeler = Pseudolabeler::kPerClientLp;
    else if (a.pseudolabeler == "network") labeler = Pseudolabeler::kNetwork;
    else if (a.pseudolabeler == "none") labeler = Pseudolabeler::kNone;
    else if (a.pseudolabeler != "xclp")
      throw UsageError("unknown labeler: " + a.pseudolabeler);

    RoundConfig cfg;
    cfg.rounds = a.rounds;
    cfg.client_fraction = a.tau;
    cfg.local_epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    cfg.xclp.code_length = a.L;
    cfg.xclp.top_k = a.k;
    cfg.xclp.alpha = a.alpha;
    cfg.xclp.protocol = parse_protocol(a.protocol);

    TrainResult result = train_fedavg_xclp(task, cfg, labeler);

    std::ofstream metrics(out_dir / "metrics.jsonl");
    for (const auto& m : result.history) {
      json line = metrics_to_json(m);
      metrics << line.dump() << "\n";
      std::cout << line.dump() << "\n";
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    return fail_with_error(out_dir, e.what());
  }
}

// ---------------------------------------------------------------------------
// check

struct CheckArgs {
  std::string suite = "all";
  int trials = 20;
  bool inject_fault = false;
  std::uint64_t seed = 1;
};

Cohort check_cohort(std::uint64_t seed, int i) {
  SyntheticSpec spec;
  spec.n_clients = 2 + i % 4;
  spec.per_client = 4 + i % 8;
  spec.dim = 4 + i % 4;
  spec.class_count = 2 + i % 3;
  spec.label_fraction = 0.4;
  spec.seed = seed + i;
  return split_synthetic(spec);
}

// Exact agreement of the OT and PHE backends with local popcounts.
bool check_hamming(const CheckArgs& a, int& failures) {
  for (int i = 0; i < a.trials; ++i) {
    Cohort cohort = check_cohort(a.seed, i);
    ProjectionSpec ps{a.seed + 100 + i, 32, cohort.dim()};
    Eigen::MatrixXd proj = generate_projection(ps);
    std::vector<BitCodeMatrix> codes;
    for (const auto& c : cohort.clients) {
      codes.push_back(hash_features(c.features, proj));
      codes.back().owner = c.client_id;
    }
    Bus plain_bus;
    HammingOptions plain_opts;
    plain_opts.seed = a.seed + i;
    HammingMatrix truth = compute_hamming_matrix(codes, plain_opts, plain_bus);
    if (a.inject_fault) truth.values(0, truth.size() - 1) += 1;
    for (auto proto : {HammingProtocol::kOt, HammingProtocol::kPhe}) {
      Bus bus;
      HammingOptions opts;
      opts.protocol = proto;
      opts.seed = a.seed + i;
      opts.paillier_bits = 128;
      if (compute_hamming_matrix(codes, opts, bus).values != truth.values) ++failures;
    }
  }
  return failures == 0;
}

// run_xclp vs the centralized oracle: exact labels, tightly matching scores.
bool check_oracle(const CheckArgs& a, int& failures) {
  for (int i = 0; i < a.trials; ++i) {
    Cohort cohort = check_cohort(a.seed + 50, i);
    XCLPConfig cfg;
    cfg.code_length = 64;
    cfg.top_k = std::min(5, cohort.total_size() - 1);
    cfg.seed = a.seed + i;
    cfg.protocol = HammingProtocol::kOt;
    XCLPResult res = run_xclp(cohort, cfg);
    CentralizedResult cent = run_centralized(cohort, cfg);
    const double tol = std::exp2(-24) * cohort.total_size();
    for (const auto& [id, assign] : res.assignments) {
      if (a.inject_fault) ++failures;
      if (assign.labels != cent.assignments.at(id).labels) ++failures;
      if ((res.client_scores.at(id) - cent.client_scores.at(id)).cwiseAbs().maxCoeff() >= tol)
        ++failures;
      if (a.inject_fault) break;
    }
  }
  return failures == 0;
}

int cmd_check(const CheckArgs& a) {
  struct Suite {
    const char* name;
    bool (*fn)(const CheckArgs&, int&);
  };
  const Suite suites[] = {{"hamming", check_hamming}, {"oracle", check_oracle}};

  bool all_pass = true;
  bool matched = false;
  for (const auto& s : suites) {
    if (a.suite != "all" && a.suite != s.name) continue;
    matched = true;
    int failures = 0;
    bool ok = s.fn(a, failures);
    std::cout << s.name << ": " << (ok ? "PASS" : "FAIL") << " (" << a.trials << " trials, "
              << failures << " failures)\n";
    all_pass = all_pass && ok;
  }
  if (!matched) {
    std::cerr << "unknown suite: " << a.suite << "\n";
    return 2;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-client label propagation toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic cohort");
  generate->add_option("--out", gen.out, "Output directory");
  generate->add_option("--clients", gen.clients, "Number of clients");
  generate->add_option("--per-client", gen.per_client, "Rows per client");
  generate->add_option("--dim", gen.dim, "Feature dimension");
  generate->add_option("--classes", gen.classes, "Class count");
  generate->add_option("--label-fraction", gen.label_fraction, "Fraction of labeled rows");
  generate->add_option("--heterogeneity", gen.heterogeneity, "iid or class_skew");
  generate->add_option("--format", gen.format, "csv or raw");
  generate->add_option("--seed", gen.seed, "Random seed");

  PropagateArgs prop;
  auto* propagate = app.add_subcommand("propagate", "Run label propagation once");
  propagate->add_option("--data", prop.data, "Cohort directory")->required();
  propagate->add_option("--out", prop.out, "Output directory");
  propagate->add_option("--protocol", prop.protocol, "plaintext_debug, ot, or phe");
  propagate->add_option("--ot-backend", prop.ot_backend, "simulated or dh");
  propagate->add_option("--L", prop.L, "Code length");
  propagate->add_option("--k", prop.k, "Neighbors per row");
  propagate->add_option("--alpha", prop.alpha, "Propagation strength in (0,1)");
  propagate->add_option("--paillier-bits", prop.paillier_bits, "PHE modulus bits");
  propagate->add_option("--seed", prop.seed, "Random seed");
  propagate->add_option("--format", prop.format, "csv or raw");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Run federated SSL training");
  train->add_option("--data", tr.data, "Training cohort directory")->required();
  train->add_option("--test-data", tr.test_data, "Fully labeled test cohort directory");
  train->add_option("--out", tr.out, "Output directory");
  train->add_option("--pseudolabeler", tr.pseudolabeler, "xclp, perclient_lp, network, none");
  train->add_option("--rounds", tr.rounds, "Federated rounds");
  train->add_option("--tau", tr.tau, "Client fraction per round");
  train->add_option("--epochs", tr.epochs, "Local epochs");
  train->add_option("--lr", tr.lr, "Learning rate");
  train->add_option("--L", tr.L, "Code length");
  train->add_option("--k", tr.k, "Neighbors per row");
  train->add_option("--alpha", tr.alpha, "Propagation strength in (0,1)");
  train->add_option("--protocol", tr.protocol, "plaintext_debug, ot, or phe");
  train->add_option("--seed", tr.seed, "Random seed");
  train->add_option("--format", tr.format, "csv or raw");

  CheckArgs chk;
  auto* check = app.add_subcommand("check", "Run correctness suites");
  check->add_option("--suite", chk.suite, "all, hamming, or oracle");
  check->add_option("--trials", chk.trials, "Fixtures per suite");
  check->add_option("--seed", chk.seed, "Random seed");
  check->add_flag("--inject-fault", chk.inject_fault,
                  "Deliberately corrupt the reference (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0, usage errors exit 2
  }

  if (generate->parsed()) return cmd_generate(gen);
  if (propagate->parsed()) return cmd_propagate(prop);
  if (train->parsed()) return cmd_train(tr);
  if (check->parsed()) return cmd_check(chk);
  return 2;
}
