#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "prodsc/checkpoint.hpp"
#include "prodsc/clustering.hpp"
#include "prodsc/network.hpp"
#include "prodsc/objective.hpp"
#include "prodsc/selfexpress.hpp"
#include "prodsc/theorylab.hpp"

namespace prodsc {

struct TrainConfig {
  std::variant<double, std::string> alpha = std::string("auto");
  double beta = 0.0;
  double gamma = 1.0;
  double eta = 1e-3;
  std::size_t batch_size = 200;
  std::size_t feature_dim = 3;
  std::size_t prefeature_dim = 100;
  std::size_t epochs = 100;
  std::size_t warmup_iters = 0;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  double tau = 0.1;
  std::size_t sinkhorn_iters = 30;
  double weight_decay_f = 0.0;
  double weight_decay_h = 0.0;
  bool batchnorm = false;

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (tau <= 0.0) throw ConfigError("tau must be positive");
    if (sinkhorn_iters < 1) throw ConfigError("sinkhorn_iters must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
  }
};

inline double resolve_alpha(const TrainConfig& cfg) {
  if (const double* v = std::get_if<double>(&cfg.alpha)) {
    if (*v <= 0.0) throw ConfigError("alpha must be positive");
    return *v;
  }
  const std::string& s = std::get<std::string>(cfg.alpha);
  if (s != "auto") throw ConfigError("alpha must be a positive number or \"auto\"");
  return static_cast<double>(cfg.feature_dim) / (0.1 * static_cast<double>(cfg.batch_size));
}

inline TrainConfig parse_config(const nlohmann::json& j) {
  static const char* known[] = {"alpha",        "beta",          "gamma",          "eta",
                                "batch_size",   "feature_dim",   "prefeature_dim", "epochs",
                                "warmup_iters", "k",             "seed",           "tau",
                                "sinkhorn_iters", "weight_decay_f", "weight_decay_h", "batchnorm"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* key : known)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown config key: " + it.key());
  }
  TrainConfig cfg;
  try {
    if (j.contains("alpha")) {
      if (j["alpha"].is_string())
        cfg.alpha = j["alpha"].get<std::string>();
      else
        cfg.alpha = j["alpha"].get<double>();
    }
    if (j.contains("beta")) cfg.beta = j["beta"].get<double>();
    if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
    if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("feature_dim")) cfg.feature_dim = j["feature_dim"].get<std::size_t>();
    if (j.contains("prefeature_dim")) cfg.prefeature_dim = j["prefeature_dim"].get<std::size_t>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("warmup_iters")) cfg.warmup_iters = j["warmup_iters"].get<std::size_t>();
    if (j.contains("k")) cfg.k = j["k"].get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
    if (j.contains("sinkhorn_iters")) cfg.sinkhorn_iters = j["sinkhorn_iters"].get<std::size_t>();
    if (j.contains("weight_decay_f")) cfg.weight_decay_f = j["weight_decay_f"].get<double>();
    if (j.contains("weight_decay_h")) cfg.weight_decay_h = j["weight_decay_h"].get<double>();
    if (j.contains("batchnorm")) cfg.batchnorm = j["batchnorm"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  resolve_alpha(cfg);  // surface a bad alpha early
  return cfg;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoFailure("cannot open config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  if (const double* v = std::get_if<double>(&cfg.alpha))
    j["alpha"] = *v;
  else
    j["alpha"] = std::get<std::string>(cfg.alpha);
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["eta"] = cfg.eta;
  j["batch_size"] = cfg.batch_size;
  j["feature_dim"] = cfg.feature_dim;
  j["prefeature_dim"] = cfg.prefeature_dim;
  j["epochs"] = cfg.epochs;
  j["warmup_iters"] = cfg.warmup_iters;
  j["k"] = cfg.k;
  j["seed"] = cfg.seed;
  j["tau"] = cfg.tau;
  j["sinkhorn_iters"] = cfg.sinkhorn_iters;
  j["weight_decay_f"] = cfg.weight_decay_f;
  j["weight_decay_h"] = cfg.weight_decay_h;
  j["batchnorm"] = cfg.batchnorm;
  return j;
}

// Two identically initialized towers: an optional pre-feature stack (one
// hidden FC+ReLU layer, two when batch-norm is on) followed by a linear head
// into the d-dimensional embedding. prefeature_dim = 0 drops the stack.
// Weights start at kInitGain times the usual Xavier scale. The embeddings are
// column-normalized, so the map is invariant to weight magnitude while the
// parameter gradients shrink with it; the enlarged scale keeps the per-step
// relative weight change small enough that the block-diagonal term cannot
// scramble a good arrangement in a single update.
inline constexpr double kInitGain = 3.0;

inline HeadPair build_network(const TrainConfig& cfg, std::size_t input_dim, RngState& rng) {
  HeadPair p;
  std::size_t head_in = input_dim;
  if (cfg.prefeature_dim > 0) {
    if (!cfg.batchnorm) {
      p.prefeature_f.layers.push_back(
          make_layer(input_dim, cfg.prefeature_dim, true, false, rng));
    } else {
      p.prefeature_f.layers.push_back(
          make_layer(input_dim, cfg.prefeature_dim, true, true, rng));
      p.prefeature_f.layers.push_back(
          make_layer(cfg.prefeature_dim, cfg.prefeature_dim, true, true, rng));
    }
    head_in = cfg.prefeature_dim;
  }
  p.head_f.layers.push_back(make_layer(head_in, cfg.feature_dim, false, false, rng));
  for (MlpParams* mlp : {&p.prefeature_f, &p.head_f})
    for (Layer& l : mlp->layers)
      for (double& v : l.W.storage()) v *= kInitGain;
  p.prefeature_h = p.prefeature_f;
  p.head_h = p.head_f;
  return p;
}

struct DiagnosticsRow {
  std::size_t epoch = 0;
  double l1 = 0.0, l2 = 0.0, l3 = 0.0, total = 0.0;
  double align_err = 0.0;
  std::optional<double> csc;
  std::optional<double> g_in, g_off, c_in, c_off;
  std::optional<double> acc, nmi, sre;
};

namespace detail {

inline Matrix gather_columns(const Matrix& x, const std::vector<std::size_t>& idx, std::size_t lo,
                             std::size_t count) {
  Matrix out(x.rows(), count);
  for (std::size_t t = 0; t < count; ++t)
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, t) = x(i, idx[lo + t]);
  return out;
}

inline ClusterArrangement arrangement_from_labels(const LabelVector& labels) {
  std::size_t kmax = 0;
  for (std::size_t v : labels) kmax = std::max(kmax, v + 1);
  ClusterArrangement arr;
  for (std::size_t g = 0; g < kmax; ++g) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == g) {
        arr.permutation.push_back(i);
        ++count;
      }
    if (count > 0) arr.block_sizes.push_back(count);
  }
  return arr;
}

// Mean |entry| over in-block (i != j) and off-block index pairs.
inline void block_means(const Matrix& m, const LabelVector& labels, double& in_mean,
                        double& off_mean) {
  double in_sum = 0.0, off_sum = 0.0;
  std::size_t in_count = 0, off_count = 0;
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (labels[i] == labels[j]) {
        in_sum += std::abs(m(i, j));
        ++in_count;
      } else {
        off_sum += std::abs(m(i, j));
        ++off_count;
      }
    }
  in_mean = in_count ? in_sum / static_cast<double>(in_count) : 0.0;
  off_mean = off_count ? off_sum / static_cast<double>(off_count) : 0.0;
}

// dS -> dY for S = Y^T Y: dY = Y (dS + dS^T).
inline Matrix gram_backward(const Matrix& y, const Matrix& dS) {
  Matrix sym = dS;
  for (std::size_t i = 0; i < sym.rows(); ++i)
    for (std::size_t j = 0; j < sym.cols(); ++j) sym(i, j) = dS(i, j) + dS(j, i);
  return multiply(y, sym);
}

}  // namespace detail

// Warm-up per Algorithm 1's preamble: SGD on the log-det term alone through
// the f-tower, then share the learned weights with the h-tower.
inline void warmup(HeadPair& params, const Matrix& x, const TrainConfig& cfg, RngState& rng) {
  if (cfg.warmup_iters == 0) return;
  const std::size_t n = x.cols();
  if (n < cfg.batch_size) throw BatchTooSmall("warmup: dataset smaller than batch_size");
  const double alpha = resolve_alpha(cfg);
  const OptimState opt{cfg.eta, cfg.weight_decay_f, cfg.weight_decay_h};

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::size_t cursor = n;  // force an initial shuffle
  for (std::size_t it = 0; it < cfg.warmup_iters; ++it) {
    if (cursor + cfg.batch_size > n) {
      rng.shuffle(idx.begin(), idx.end());
      cursor = 0;
    }
    const Matrix xb = detail::gather_columns(x, idx, cursor, cfg.batch_size);
    cursor += cfg.batch_size;

    ForwardCache cache;
    Matrix z, y;
    forward(params, xb, ForwardMode::Train, z, y, &cache);
    L1Result r1 = loss_l1(z, alpha);
    const Matrix dY(y.rows(), y.cols());
    HeadPairGrads grads = backward(params, cache, r1.dZ, dY);
    sgd_step(params, grads, opt);
  }
  copy_f_to_h(params);
}

// One pass over the data in shuffled order; returns diagnostics measured on
// the last full batch before its parameter update.
inline DiagnosticsRow train_epoch(HeadPair& params, const Matrix& x,
                                  const std::optional<LabelVector>& labels, const TrainConfig& cfg,
                                  RngState& rng, RngState& diag_rng, std::size_t epoch) {
  const std::size_t n = x.cols();
  if (n < cfg.batch_size) throw BatchTooSmall("train_epoch: dataset smaller than batch_size");
  const HyperParams hp{resolve_alpha(cfg), cfg.beta, cfg.gamma, cfg.k};
  const OptimState opt{cfg.eta, cfg.weight_decay_f, cfg.weight_decay_h};

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx.begin(), idx.end());
  const std::size_t batches = n / cfg.batch_size;

  DiagnosticsRow row;
  row.epoch = epoch;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * cfg.batch_size;
    const Matrix xb = detail::gather_columns(x, idx, lo, cfg.batch_size);

    ForwardCache cache;
    Matrix z, y;
    forward(params, xb, ForwardMode::Train, z, y, &cache);
    const Matrix s = multiply_at_b(y, y);
    SinkhornCache scache;
    CoefficientMatrix cm = sinkhorn_project(s, cfg.tau, cfg.sinkhorn_iters, true, &scache);
    TotalLossResult loss = total_loss(z, cm.C, hp);

    if (b + 1 == batches) {
      row.l1 = loss.parts.l1;
      row.l2 = loss.parts.l2;
      row.l3 = loss.parts.l3;
      row.total = loss.parts.total;
      const Matrix g = multiply_at_b(z, z);
      const Matrix m = m_matrix(cm.C);
      row.align_err = alignment_error(g, m);
      if (labels) {
        LabelVector batch_labels(cfg.batch_size);
        for (std::size_t t = 0; t < cfg.batch_size; ++t) batch_labels[t] = (*labels)[idx[lo + t]];
        const ClusterArrangement arr = detail::arrangement_from_labels(batch_labels);
        row.csc = csc_value(z, cm.C, arr);
        double gi, go, ci, co;
        detail::block_means(g, batch_labels, gi, go);
        detail::block_means(cm.C, batch_labels, ci, co);
        row.g_in = gi;
        row.g_off = go;
        row.c_in = ci;
        row.c_off = co;
        const Affinity aff = affinity_from(cm);
        const LabelVector pred = spectral_cluster(aff, cfg.k, diag_rng);
        row.acc = accuracy(pred, batch_labels);
        row.nmi = nmi(pred, batch_labels);
        row.sre = sre(cm.C, batch_labels);
      }
    }

    const Matrix dS = sinkhorn_backward(scache, loss.dC);
    const Matrix dY = detail::gram_backward(y, dS);
    HeadPairGrads grads = backward(params, cache, loss.dZ, dY);
    sgd_step(params, grads, opt);
  }
  return row;
}

inline std::string diagnostics_header() {
  return "epoch,l1,l2,l3,total,align_err,csc,g_in,g_off,c_in,c_off,acc,nmi,sre";
}

inline std::string format_diagnostics(const DiagnosticsRow& r) {
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  auto opt = [&num](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  std::string line = std::to_string(r.epoch);
  for (double v : {r.l1, r.l2, r.l3, r.total, r.align_err}) line += "," + num(v);
  for (const auto& v : {r.csc, r.g_in, r.g_off, r.c_in, r.c_off, r.acc, r.nmi, r.sre})
    line += "," + opt(v);
  return line;
}

struct FitResult {
  HeadPair params;
  std::vector<DiagnosticsRow> diagnostics;
};

// Full Algorithm 1 loop. When out_dir is nonempty, writes diagnostics.csv
// (one row per epoch, streamed), the resolved config, and a final checkpoint.
inline FitResult fit(const Matrix& x, const std::optional<LabelVector>& labels,
                     const TrainConfig& cfg, const std::string& out_dir = "") {
  cfg.validate();
  if (labels && labels->size() != x.cols())
    throw LabelLengthMismatch("fit: labels length != number of samples");
  RngState master(cfg.seed);
  RngState init_rng = master.split(0);
  RngState warm_rng = master.split(1);

  FitResult res;
  res.params = build_network(cfg, x.rows(), init_rng);
  warmup(res.params, x, cfg, warm_rng);

  std::ofstream csv;
  if (!out_dir.empty()) {
    csv.open(out_dir + "/diagnostics.csv");
    if (!csv) throw IoFailure("cannot open diagnostics.csv in " + out_dir);
    csv << diagnostics_header() << "\n";
    std::ofstream cfg_os(out_dir + "/config.json");
    if (!cfg_os) throw IoFailure("cannot write config.json in " + out_dir);
    cfg_os << config_to_json(cfg).dump(2) << "\n";
  }
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    RngState epoch_rng = master.split(2 + e);
    RngState diag_rng = master.split((1ULL << 32) + e);
    DiagnosticsRow row = train_epoch(res.params, x, labels, cfg, epoch_rng, diag_rng, e);
    if (csv.is_open()) csv << format_diagnostics(row) << "\n";
    res.diagnostics.push_back(row);
  }
  if (!out_dir.empty()) {
    if (!csv) throw IoFailure("diagnostics write failed");
    save_checkpoint(res.params, out_dir + "/checkpoint.bin");
  }
  return res;
}

// Testing path of Algorithm 1: eval-mode forward, then the same projection
// that produced C during training.
inline CoefficientMatrix infer_coefficients(HeadPair& params, const Matrix& x_test,
                                            const TrainConfig& cfg) {
  Matrix z, y;
  forward(params, x_test, ForwardMode::Eval, z, y);
  const Matrix s = multiply_at_b(y, y);
  return sinkhorn_project(s, cfg.tau, cfg.sinkhorn_iters, true);
}

}  // namespace prodsc
