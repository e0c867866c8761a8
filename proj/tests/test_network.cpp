#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prodsc/checkpoint.hpp"
#include "prodsc/network.hpp"
#include "prodsc/rng.hpp"

using namespace prodsc;

namespace {

HeadPair small_net(bool batchnorm, RngState& rng) {
  HeadPair p;
  p.prefeature_f.layers.push_back(make_layer(3, 6, true, batchnorm, rng));
  p.head_f.layers.push_back(make_layer(6, 4, false, false, rng));
  p.prefeature_h = p.prefeature_f;
  p.head_h = p.head_f;
  return p;
}

// scalar probe loss 1/2(||Z-Tz||^2 + ||Y-Ty||^2) against fixed targets
double probe_loss(HeadPair& params, const Matrix& x, const Matrix& tz, const Matrix& ty) {
  Matrix z, y;
  forward(params, x, ForwardMode::Train, z, y);
  const Matrix rz = subtract(z, tz), ry = subtract(y, ty);
  return 0.5 * (inner_product(rz, rz) + inner_product(ry, ry));
}

}  // namespace

TEST_CASE("forward yields unit columns and eval mode is pure") {
  RngState rng(3);
  HeadPair p = small_net(true, rng);
  const Matrix x = rng.gaussian_matrix(3, 8);

  Matrix z, y;
  forward(p, x, ForwardMode::Train, z, y);  // populates batch-norm running stats
  for (std::size_t j = 0; j < 8; ++j) {
    double nz = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      nz += z(i, j) * z(i, j);
      ny += y(i, j) * y(i, j);
    }
    REQUIRE(std::sqrt(nz) == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(std::sqrt(ny) == Catch::Approx(1.0).margin(1e-10));
  }

  Matrix z1, y1, z2, y2;
  forward(p, x, ForwardMode::Eval, z1, y1);
  forward(p, x, ForwardMode::Eval, z2, y2);
  REQUIRE(z1.storage() == z2.storage());
  REQUIRE(y1.storage() == y2.storage());
}

TEST_CASE("identity linear head passes unit columns through") {
  HeadPair p;
  Layer l;
  l.W = Matrix::identity(3);
  l.b.assign(3, 0.0);
  p.head_f.layers.push_back(l);
  p.head_h.layers.push_back(l);
  RngState rng(4);
  const Matrix x = normalize_columns(rng.gaussian_matrix(3, 5)).Y;
  Matrix z, y;
  forward(p, x, ForwardMode::Eval, z, y);
  REQUIRE(frobenius_norm(subtract(z, x)) <= 1e-12);
}

TEST_CASE("backward base cases") {
  RngState rng(5);
  HeadPair p = small_net(false, rng);
  const Matrix x = rng.gaussian_matrix(3, 6);
  ForwardCache cache;
  Matrix z, y;
  forward(p, x, ForwardMode::Train, z, y, &cache);

  HeadPairGrads g = backward(p, cache, Matrix(4, 6), Matrix(4, 6));
  for (const MlpGrads* mg : {&g.prefeature_f, &g.head_f, &g.prefeature_h, &g.head_h})
    for (const LayerGrad& lg : mg->layers) {
      for (double v : lg.dW.storage()) REQUIRE(v == 0.0);
      for (double v : lg.db) REQUIRE(v == 0.0);
    }

  ForwardCache stale;
  REQUIRE_THROWS_AS(backward(p, stale, Matrix(4, 6), Matrix(4, 6)), StaleCache);

  // bare linear layer: dW = g * input^T
  MlpParams lin;
  lin.layers.push_back(make_layer(3, 2, false, false, rng));
  detail::MlpCache mc;
  const Matrix xin = rng.gaussian_matrix(3, 4);
  detail::mlp_forward(lin, xin, true, &mc);
  const Matrix dout = rng.gaussian_matrix(2, 4);
  MlpGrads mg;
  detail::mlp_backward(lin, mc, dout, mg, true);
  REQUIRE(frobenius_norm(subtract(mg.layers[0].dW, multiply_a_bt(dout, xin))) <= 1e-12);
}

TEST_CASE("gradients match finite differences through the full map") {
  RngState rng(6);
  for (int inst = 0; inst < 10; ++inst) {
    HeadPair p = small_net(inst % 2 == 1, rng);
    const Matrix x = rng.gaussian_matrix(3, 8);
    const Matrix tz = rng.gaussian_matrix(4, 8);
    const Matrix ty = rng.gaussian_matrix(4, 8);

    ForwardCache cache;
    Matrix z, y;
    forward(p, x, ForwardMode::Train, z, y, &cache);
    HeadPairGrads g = backward(p, cache, subtract(z, tz), subtract(y, ty));

    // probe a handful of weights in every tensor
    auto check_tensor = [&](std::vector<double>& w, const std::vector<double>& gw) {
      for (std::size_t t = 0; t < std::min<std::size_t>(w.size(), 4); ++t) {
        const std::size_t i = (t * 7919) % w.size();
        const double h = 1e-6, keep = w[i];
        w[i] = keep + h;
        const double fp = probe_loss(p, x, tz, ty);
        w[i] = keep - h;
        const double fm = probe_loss(p, x, tz, ty);
        w[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        REQUIRE(std::abs(fd - gw[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    };
    MlpParams* mlps[] = {&p.prefeature_f, &p.head_f, &p.prefeature_h, &p.head_h};
    MlpGrads* grads[] = {&g.prefeature_f, &g.head_f, &g.prefeature_h, &g.head_h};
    for (int m = 0; m < 4; ++m)
      for (std::size_t li = 0; li < mlps[m]->layers.size(); ++li) {
        check_tensor(mlps[m]->layers[li].W.storage(), grads[m]->layers[li].dW.storage());
        check_tensor(mlps[m]->layers[li].b, grads[m]->layers[li].db);
      }
  }
}

TEST_CASE("sgd step semantics") {
  RngState rng(8);
  HeadPair p = small_net(false, rng);
  HeadPair before = p;

  // zero gradients, zero decay: parameters unchanged
  ForwardCache cache;
  Matrix z, y;
  forward(p, rng.gaussian_matrix(3, 6), ForwardMode::Train, z, y, &cache);
  HeadPairGrads g = backward(p, cache, Matrix(4, 6), Matrix(4, 6));
  sgd_step(p, g, OptimState{0.1, 0.0, 0.0});
  REQUIRE(p.head_f.layers[0].W.storage() == before.head_f.layers[0].W.storage());

  // decay-only step equals multiplicative shrink by (1 - eta*decay)
  sgd_step(p, g, OptimState{0.1, 0.5, 0.5});
  for (std::size_t i = 0; i < p.head_f.layers[0].W.size(); ++i)
    REQUIRE(p.head_f.layers[0].W.storage()[i] ==
            Catch::Approx(before.head_f.layers[0].W.storage()[i] * (1.0 - 0.1 * 0.5)));
}

TEST_CASE("checkpoint round trip and error paths") {
  RngState rng(10);
  HeadPair p = small_net(true, rng);
  const std::string path = "test_net_ckpt.bin";
  save_checkpoint(p, path);

  RngState rng2(99);
  HeadPair q = small_net(true, rng2);
  load_checkpoint(q, path);
  REQUIRE(q.head_f.layers[0].W.storage() == p.head_f.layers[0].W.storage());
  REQUIRE(q.prefeature_h.layers[0].bn_run_var == p.prefeature_h.layers[0].bn_run_var);

  {
    std::ofstream os("test_net_bad.bin", std::ios::binary);
    os << "NOTMAGIC garbage";
  }
  REQUIRE_THROWS_AS(load_checkpoint(q, "test_net_bad.bin"), BadMagic);

  {
    std::ifstream is(path, std::ios::binary);
    std::vector<char> all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::ofstream os("test_net_trunc.bin", std::ios::binary);
    os.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  REQUIRE_THROWS_AS(load_checkpoint(q, "test_net_trunc.bin"), TruncatedFile);
}
