#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prodsc/dataio.hpp"
#include "prodsc/trainer.hpp"

using namespace prodsc;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.alpha = std::string("auto");
  cfg.beta = 50.0;
  cfg.gamma = 0.5;
  cfg.eta = 5e-3;
  cfg.batch_size = 40;
  cfg.feature_dim = 3;
  cfg.prefeature_dim = 20;
  cfg.epochs = 3;
  cfg.warmup_iters = 10;
  cfg.k = 2;
  cfg.seed = 7;
  cfg.tau = 0.1;
  cfg.sinkhorn_iters = 10;
  return cfg;
}

Dataset tiny_data() {
  SyntheticSpec spec;
  spec.points = 40;
  spec.seed = 7;
  return gen_synthetic(spec);
}

std::vector<double> flatten(const HeadPair& p) {
  std::vector<double> out;
  HeadPair copy = p;
  detail::visit_tensors(copy, [&](std::vector<double>& t) {
    out.insert(out.end(), t.begin(), t.end());
  });
  return out;
}

}  // namespace

TEST_CASE("alpha resolution rule") {
  TrainConfig cfg;
  cfg.alpha = std::string("auto");
  cfg.feature_dim = 3;
  cfg.batch_size = 200;
  REQUIRE(resolve_alpha(cfg) == Catch::Approx(0.15));
  cfg.feature_dim = 128;
  cfg.batch_size = 1024;
  REQUIRE(resolve_alpha(cfg) == Catch::Approx(1.25));
  cfg.alpha = 2.0;
  REQUIRE(resolve_alpha(cfg) == 2.0);
  cfg.alpha = -1.0;
  REQUIRE_THROWS_AS(resolve_alpha(cfg), ConfigError);
  cfg.alpha = std::string("wat");
  REQUIRE_THROWS_AS(resolve_alpha(cfg), ConfigError);
}

TEST_CASE("config parsing") {
  nlohmann::json j = {{"alpha", "auto"}, {"gamma", 0.5}, {"batch_size", 64}, {"seed", 9}};
  TrainConfig cfg = parse_config(j);
  REQUIRE(cfg.gamma == 0.5);
  REQUIRE(cfg.batch_size == 64);
  REQUIRE(cfg.seed == 9);

  nlohmann::json bad = {{"alpha", 1.0}, {"learning_rate", 0.1}};
  REQUIRE_THROWS_AS(parse_config(bad), ConfigError);
  nlohmann::json badval = {{"batch_size", 1}};
  REQUIRE_THROWS_AS(parse_config(badval), ConfigError);

  // round trip through JSON preserves every field
  TrainConfig orig = tiny_config();
  TrainConfig back = parse_config(config_to_json(orig));
  REQUIRE(config_to_json(back) == config_to_json(orig));
}

TEST_CASE("warmup contract") {
  Dataset ds = tiny_data();
  TrainConfig cfg = tiny_config();

  // warmup_iters = 0 leaves everything untouched
  RngState r0(1);
  HeadPair p = build_network(cfg, 3, r0);
  const std::vector<double> before = flatten(p);
  TrainConfig noop = cfg;
  noop.warmup_iters = 0;
  RngState wr(2);
  warmup(p, ds.X, noop, wr);
  REQUIRE(flatten(p) == before);

  // after warm-up the two towers are bit-identical
  RngState wr2(2);
  warmup(p, ds.X, cfg, wr2);
  REQUIRE(p.head_h.layers[0].W.storage() == p.head_f.layers[0].W.storage());
  REQUIRE(p.prefeature_h.layers[0].W.storage() == p.prefeature_f.layers[0].W.storage());

  // warm-up decreases the log-det loss on the data
  auto l1_of = [&](HeadPair& params) {
    Matrix z, y;
    forward(params, ds.X, ForwardMode::Eval, z, y);
    return loss_l1(z, resolve_alpha(cfg)).value;
  };
  RngState r1(1);
  HeadPair fresh = build_network(cfg, 3, r1);
  const double l1_start = l1_of(fresh);
  TrainConfig longer = cfg;
  longer.warmup_iters = 200;
  RngState wr3(2);
  warmup(fresh, ds.X, longer, wr3);
  REQUIRE(l1_of(fresh) < l1_start);

  TrainConfig toolarge = cfg;
  toolarge.batch_size = 100;
  RngState wr4(2);
  REQUIRE_THROWS_AS(warmup(fresh, ds.X, toolarge, wr4), BatchTooSmall);
}

TEST_CASE("epoch mechanics") {
  Dataset ds = tiny_data();
  TrainConfig cfg = tiny_config();
  RngState init(3);
  HeadPair p = build_network(cfg, 3, init);

  // eta = 0: diagnostics produced, parameters unchanged
  TrainConfig frozen = cfg;
  frozen.eta = 0.0;
  const std::vector<double> before = flatten(p);
  RngState er(4), dr(5);
  DiagnosticsRow row = train_epoch(p, ds.X, ds.labels, frozen, er, dr, 0);
  REQUIRE(flatten(p) == before);
  REQUIRE(std::isfinite(row.total));
  REQUIRE(row.csc.has_value());
  REQUIRE(row.acc.has_value());

  // no labels: label-dependent columns stay empty
  RngState er2(4), dr2(5);
  DiagnosticsRow unlabeled = train_epoch(p, ds.X, std::nullopt, frozen, er2, dr2, 0);
  REQUIRE(!unlabeled.csc.has_value());
  REQUIRE(!unlabeled.acc.has_value());
  const std::string line = format_diagnostics(unlabeled);
  REQUIRE(line.find(",,") != std::string::npos);

  // determinism of a single epoch
  RngState ea(6), da(7), eb(6), db(7);
  HeadPair pa = p, pb = p;
  DiagnosticsRow ra = train_epoch(pa, ds.X, ds.labels, cfg, ea, da, 0);
  DiagnosticsRow rb = train_epoch(pb, ds.X, ds.labels, cfg, eb, db, 0);
  REQUIRE(ra.total == rb.total);
  REQUIRE(flatten(pa) == flatten(pb));

  TrainConfig toolarge = cfg;
  toolarge.batch_size = 100;
  RngState er3(4), dr3(5);
  REQUIRE_THROWS_AS(train_epoch(p, ds.X, ds.labels, toolarge, er3, dr3, 0), BatchTooSmall);
}

TEST_CASE("full fit loop") {
  Dataset ds = tiny_data();
  TrainConfig cfg = tiny_config();

  FitResult res = fit(ds.X, ds.labels, cfg);
  REQUIRE(res.diagnostics.size() == cfg.epochs);

  TrainConfig zero = cfg;
  zero.epochs = 0;
  FitResult warmed = fit(ds.X, ds.labels, zero);
  REQUIRE(warmed.diagnostics.empty());

  // identical config + seed gives bit-identical parameters
  FitResult res2 = fit(ds.X, ds.labels, cfg);
  REQUIRE(flatten(res.params) == flatten(res2.params));
  for (std::size_t e = 0; e < cfg.epochs; ++e)
    REQUIRE(format_diagnostics(res.diagnostics[e]) == format_diagnostics(res2.diagnostics[e]));
}

TEST_CASE("coefficient inference on held-out samples") {
  Dataset ds = tiny_data();
  TrainConfig cfg = tiny_config();
  FitResult res = fit(ds.X, ds.labels, cfg);

  TrainConfig infer_cfg = cfg;
  infer_cfg.sinkhorn_iters = 3000;  // near-block-structured kernels mix slowly; run to convergence
  CoefficientMatrix c = infer_coefficients(res.params, ds.X, infer_cfg);
  REQUIRE(c.C.rows() == ds.X.cols());
  for (std::size_t i = 0; i < c.C.rows(); ++i) {
    double rs = 0.0;
    for (std::size_t j = 0; j < c.C.cols(); ++j) rs += c.C(i, j);
    REQUIRE(rs == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(c.C(i, i) == 0.0);
  }
  // eval forward is deterministic: same input, same coefficients
  CoefficientMatrix c2 = infer_coefficients(res.params, ds.X, infer_cfg);
  REQUIRE(c.C.storage() == c2.C.storage());

  Matrix one(3, 1);
  one(0, 0) = 1.0;
  REQUIRE_THROWS_AS(infer_coefficients(res.params, one, cfg), BatchTooSmall);
}
