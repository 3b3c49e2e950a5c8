#ifndef XCLP_SSL_PIPELINE_HPP_
#define XCLP_SSL_PIPELINE_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "xclp/data_model.hpp"
#include "xclp/plaintext_oracle.hpp"
#include "xclp/xclp_protocol.hpp"

// Federated semi-supervised training: rounds of client sampling, feature
// extraction, pseudo-labeling (cross-client LP, per-client LP, network
// predictions, or none), confidence-weighted local SGD, and uniform server
// averaging.

namespace xclp {

// Frozen feature map shared by all parties. Either the identity or a fixed
// seeded random projection; externally computed embeddings enter by loading
// them as the cohort features directly.
struct Featurizer {
  bool identity = true;
  Eigen::MatrixXd projection;  // d_out x d_in when not identity

  static Featurizer make_identity() { return {}; }

  static Featurizer make_random_projection(int d_in, int d_out, std::uint64_t seed) {
    Featurizer f;
    f.identity = false;
    f.projection.resize(d_out, d_in);
    CounterRng rng = CounterRng::derived(seed, 0xfea7);
    for (int i = 0; i < d_out; ++i)
      for (int j = 0; j < d_in; ++j)
        f.projection(i, j) = rng.next_normal() / std::sqrt(static_cast<double>(d_in));
    return f;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return identity ? x : (x * projection.transpose()).eval();
  }

  int out_dim(int d_in) const {
    return identity ? d_in : static_cast<int>(projection.rows());
  }
};

// Linear softmax classifier head; the trainable part of the model.
struct ModelParams {
  Eigen::MatrixXd weights;  // C x d
  Eigen::VectorXd bias;     // C

  static ModelParams zero(int classes, int dim) {
    return {Eigen::MatrixXd::Zero(classes, dim), Eigen::VectorXd::Zero(classes)};
  }

  ModelParams& operator+=(const ModelParams& o) {
    weights += o.weights;
    bias += o.bias;
    return *this;
  }
  ModelParams& operator*=(double s) {
    weights *= s;
    bias *= s;
    return *this;
  }
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

// Per-sample weighted cross-entropy loss value.
inline double weighted_ce_loss(const ModelParams& model, const Eigen::VectorXd& x, int y,
                               double weight) {
  Eigen::VectorXd p = softmax(model.weights * x + model.bias);
  return -weight * std::log(std::max(p[y], 1e-300));
}

// Accumulates the analytic gradient of the weighted CE loss into (gw, gb).
inline void accumulate_ce_gradient(const ModelParams& model, const Eigen::VectorXd& x, int y,
                                   double weight, Eigen::MatrixXd& gw, Eigen::VectorXd& gb) {
  Eigen::VectorXd p = softmax(model.weights * x + model.bias);
  p[y] -= 1.0;
  p *= weight;
  gw += p * x.transpose();
  gb += p;
}

struct EvalResult {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<double> per_class_recall;
};

inline EvalResult evaluate(const ModelParams& model, const Featurizer& featurizer,
                           const Eigen::MatrixXd& raw_features, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != raw_features.rows())
    throw std::invalid_argument("evaluate: label count mismatch");
  const int C = static_cast<int>(model.weights.rows());
  Eigen::MatrixXd feats = featurizer.apply(raw_features);
  std::vector<int> correct(C, 0), total(C, 0);
  int hits = 0;
  for (int i = 0; i < feats.rows(); ++i) {
    Eigen::VectorXd logits = model.weights * feats.row(i).transpose() + model.bias;
    int pred = 0;
    for (int c = 1; c < C; ++c)
      if (logits[c] > logits[pred]) pred = c;
    ++total[labels[i]];
    if (pred == labels[i]) {
      ++correct[labels[i]];
      ++hits;
    }
  }
  EvalResult r;
  r.accuracy = static_cast<double>(hits) / static_cast<double>(feats.rows());
  int seen = 0;
  for (int c = 0; c < C; ++c) {
    double recall = total[c] > 0 ? static_cast<double>(correct[c]) / total[c] : 0.0;
    r.per_class_recall.push_back(recall);
    if (total[c] > 0) {
      r.balanced_accuracy += recall;
      ++seen;
    }
  }
  if (seen > 0) r.balanced_accuracy /= seen;
  return r;
}

enum class Pseudolabeler { kXclp, kPerClientLp, kNetwork, kNone };

struct RoundConfig {
  int rounds = 200;                 // T
  double client_fraction = 0.5;     // tau
  int local_epochs = 5;             // E
  int labeled_batch_cap = 50;       // |B_L| = min(cap, #labels); |B_U| = |B_L|
  double learning_rate = 0.1;
  int anneal_horizon = 0;           // 0: 4/3 * rounds, mirroring 2000-of-1500
  std::uint64_t seed = 0;
  XCLPConfig xclp;                  // used by the xclp / perclient_lp labelers
};

struct RoundMetrics {
  int round = 0;
  double test_accuracy = 0.0;
  double pseudo_label_accuracy = 0.0;  // vs ground truth, when available
  double mean_confidence = 0.0;
  double abstain_rate = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<RoundMetrics> history;
};

namespace detail {

struct PseudoLabels {
  std::vector<int> labels;        // storage-row order, kAbstain allowed
  std::vector<double> weights;    // omega in [0,1]
};

// Runs one epoch's worth of weighted SGD batches on one client.
inline void client_update(ModelParams& model, const Eigen::MatrixXd& feats,
                          const ClientDataset& data, const PseudoLabels& pseudo,
                          const RoundConfig& cfg, double lr, CounterRng& rng) {
  const int n = data.size();
  const int l = data.labeled_count;
  std::vector<int> labeled(l), unlabeled;
  std::iota(labeled.begin(), labeled.end(), 0);
  for (int i = l; i < n; ++i)
    if (!pseudo.labels.empty() && pseudo.labels[i] != kAbstain && pseudo.weights[i] > 0.0)
      unlabeled.push_back(i);

  const int bl = std::min(cfg.labeled_batch_cap, std::max(l, 0));
  if (bl == 0 && unlabeled.empty()) return;

  auto shuffle = [&rng](std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[rng.next_below(i + 1)]);
  };

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    shuffle(labeled);
    shuffle(unlabeled);
    int batches = bl > 0 ? (l + bl - 1) / bl : 1;
    for (int b = 0; b < batches; ++b) {
      Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(model.weights.rows(), model.weights.cols());
      Eigen::VectorXd gb = Eigen::VectorXd::Zero(model.bias.size());
      int count = 0;
      for (int i = b * bl; i < std::min((b + 1) * bl, l); ++i) {
        accumulate_ce_gradient(model, feats.row(labeled[i]).transpose(), data.label_of(labeled[i]),
                               1.0, gw, gb);
        ++count;
      }
      // |B_U| = |B_L| pseudo-labeled samples, cycled through the shuffled pool.
      int bu = bl;
      for (int u = 0; u < bu && !unlabeled.empty(); ++u) {
        int i = unlabeled[(b * bu + u) % unlabeled.size()];
        accumulate_ce_gradient(model, feats.row(i).transpose(), pseudo.labels[i],
                               pseudo.weights[i], gw, gb);
        ++count;
      }
      if (count == 0) continue;
      model.weights -= (lr / count) * gw;
      model.bias -= (lr / count) * gb;
    }
  }
}

}  // namespace detail

// Training set plus test data and optional per-client ground truth (storage
// order) for pseudo-label accuracy reporting.
struct TrainTask {
  Cohort cohort;
  std::vector<std::vector<int>> truth;  // may be empty
  Eigen::MatrixXd test_features;
  std::vector<int> test_labels;
  Featurizer featurizer;
};

inline TrainResult train_fedavg_xclp(const TrainTask& task, const RoundConfig& cfg,
                                     Pseudolabeler labeler) {
  task.cohort.validate();
  if (!(cfg.client_fraction > 0.0 && cfg.client_fraction <= 1.0))
    throw std::invalid_argument("train: client_fraction outside (0,1]");
  if (cfg.local_epochs < 1) throw std::invalid_argument("train: local_epochs must be >= 1");

  const int m = static_cast<int>(task.cohort.clients.size());
  const int C = task.cohort.class_count;
  const int d = task.featurizer.out_dim(task.cohort.dim());
  const int horizon = cfg.anneal_horizon > 0 ? cfg.anneal_horizon : (4 * cfg.rounds + 2) / 3;

  std::vector<int> labeled_clients, unlabeled_clients;
  for (int j = 0; j < m; ++j)
    (task.cohort.clients[j].labeled_count > 0 ? labeled_clients : unlabeled_clients).push_back(j);
  if (labeler != Pseudolabeler::kNone && labeled_clients.empty())
    throw std::invalid_argument("train: no labeled clients to stratify on");

  // Featurize once; the extractor is frozen.
  std::vector<Eigen::MatrixXd> feats;
  for (const auto& c : task.cohort.clients) feats.push_back(task.featurizer.apply(c.features));

  TrainResult result;
  result.model = ModelParams::zero(C, d);
  CounterRng sample_rng = CounterRng::derived(cfg.seed, 0x5a3);

  auto pick = [&](const std::vector<int>& pool, int count, CounterRng& rng) {
    std::vector<int> v = pool;
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[rng.next_below(i + 1)]);
    v.resize(std::min<std::size_t>(count, v.size()));
    return v;
  };

  for (int round = 0; round < cfg.rounds; ++round) {
    // Stratified sampling keeps labels present whenever a pseudo-labeler
    // needs them in the graph.
    int want_l = std::max(1, static_cast<int>(std::lround(cfg.client_fraction * labeled_clients.size())));
    int want_u = static_cast<int>(std::lround(cfg.client_fraction * unlabeled_clients.size()));
    std::vector<int> sampled = pick(labeled_clients, want_l, sample_rng);
    std::vector<int> extra = pick(unlabeled_clients, want_u, sample_rng);
    sampled.insert(sampled.end(), extra.begin(), extra.end());
    std::sort(sampled.begin(), sampled.end());

    // Pseudo-labels are recomputed fresh for the sampled clients.
    std::vector<detail::PseudoLabels> pseudo(m);
    double conf_sum = 0.0, conf_count = 0.0, abstain = 0.0, unlabeled_total = 0.0;
    double pl_hits = 0.0, pl_total = 0.0;
    if (labeler == Pseudolabeler::kXclp) {
      Cohort sub;
      sub.class_count = C;
      for (int j : sampled) {
        ClientDataset ds = task.cohort.clients[j];
        ds.features = feats[j];
        sub.clients.push_back(std::move(ds));
      }
      XCLPConfig xcfg = cfg.xclp;
      xcfg.seed = mix64(cfg.seed ^ (0x70000000ULL + round));
      xcfg.top_k = std::min(xcfg.top_k, sub.total_size() - 1);
      XCLPResult xr = run_xclp(sub, xcfg);
      for (std::size_t s = 0; s < sampled.size(); ++s) {
        const auto& a = xr.assignments.at(sub.clients[s].client_id);
        pseudo[sampled[s]] = {a.labels, a.confidences};
      }
    } else if (labeler == Pseudolabeler::kPerClientLp) {
      for (int j : sampled) {
        const auto& ds = task.cohort.clients[j];
        if (ds.labeled_count == 0 || ds.size() < 2) continue;
        Cohort solo;
        solo.class_count = C;
        ClientDataset copy = ds;
        copy.features = feats[j];
        solo.clients.push_back(std::move(copy));
        XCLPConfig xcfg = cfg.xclp;
        xcfg.seed = mix64(cfg.seed ^ (0x71000000ULL + round));
        xcfg.top_k = std::min(xcfg.top_k, ds.size() - 1);
        CentralizedResult cr = run_centralized(solo, xcfg);
        const auto& a = cr.assignments.at(ds.client_id);
        pseudo[j] = {a.labels, a.confidences};
      }
    } else if (labeler == Pseudolabeler::kNetwork) {
      for (int j : sampled) {
        const auto& ds = task.cohort.clients[j];
        detail::PseudoLabels p;
        p.labels.resize(ds.size(), kAbstain);
        p.weights.resize(ds.size(), 0.0);
        for (int i = 0; i < ds.size(); ++i) {
          Eigen::VectorXd probs =
              softmax(result.model.weights * feats[j].row(i).transpose() + result.model.bias);
          p.labels[i] = score_row_label(probs);
          p.weights[i] = entropy_confidence(probs);
        }
        pseudo[j] = std::move(p);
      }
    }

    // Pseudo-label quality metrics over originally-unlabeled rows.
    for (int j : sampled) {
      const auto& ds = task.cohort.clients[j];
      if (pseudo[j].labels.empty()) continue;
      for (int i = ds.labeled_count; i < ds.size(); ++i) {
        unlabeled_total += 1.0;
        if (pseudo[j].labels[i] == kAbstain) {
          abstain += 1.0;
        } else {
          conf_sum += pseudo[j].weights[i];
          conf_count += 1.0;
          if (!task.truth.empty()) {
            pl_total += 1.0;
            if (pseudo[j].labels[i] == task.truth[j][i]) pl_hits += 1.0;
          }
        }
      }
    }

    // Cosine-annealed learning rate over the (scaled) horizon.
    double lr = cfg.learning_rate * 0.5 *
                (1.0 + std::cos(M_PI * std::min(round, horizon) / static_cast<double>(horizon)));

    ModelParams average = ModelParams::zero(C, d);
    for (int j : sampled) {
      ModelParams local = result.model;
      CounterRng rng = CounterRng::derived(cfg.seed, 0x10ca1ULL ^ (static_cast<std::uint64_t>(round) << 16) ^ j);
      detail::client_update(local, feats[j], task.cohort.clients[j], pseudo[j], cfg, lr, rng);
      average += local;
    }
    average *= 1.0 / static_cast<double>(sampled.size());
    result.model = std::move(average);

    RoundMetrics metrics;
    metrics.round = round + 1;
    metrics.test_accuracy =
        evaluate(result.model, task.featurizer, task.test_features, task.test_labels).accuracy;
    metrics.pseudo_label_accuracy = pl_total > 0 ? pl_hits / pl_total : 0.0;
    metrics.mean_confidence = conf_count > 0 ? conf_sum / conf_count : 0.0;
    metrics.abstain_rate = unlabeled_total > 0 ? abstain / unlabeled_total : 0.0;
    result.history.push_back(metrics);
  }
  return result;
}

inline nlohmann::json metrics_to_json(const RoundMetrics& m) {
  return {{"round", m.round},
          {"accuracy", m.test_accuracy},
          {"pseudo_label_accuracy", m.pseudo_label_accuracy},
          {"mean_confidence", m.mean_confidence},
          {"abstain_rate", m.abstain_rate}};
}

}  // namespace xclp

#endif  // XCLP_SSL_PIPELINE_HPP_
