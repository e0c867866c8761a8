#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "prodsc/matrix.hpp"
#include "prodsc/rng.hpp"
#include "prodsc/selfexpress.hpp"

namespace prodsc {

// One fully-connected layer, features along rows, samples along columns.
// Optional batch-norm sits between the linear map and the ReLU.
struct Layer {
  Matrix W;  // out x in
  std::vector<double> b;
  bool relu = false;
  bool batchnorm = false;
  std::vector<double> bn_scale, bn_shift, bn_run_mean, bn_run_var;
};

struct MlpParams {
  std::vector<Layer> layers;
};

struct HeadPair {
  MlpParams prefeature_f, prefeature_h;
  MlpParams head_f, head_h;  // output dimension d
};

struct LayerGrad {
  Matrix dW;
  std::vector<double> db;
  std::vector<double> d_bn_scale, d_bn_shift;
};

struct MlpGrads {
  std::vector<LayerGrad> layers;
};

struct HeadPairGrads {
  MlpGrads prefeature_f, prefeature_h, head_f, head_h;
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

inline Layer make_layer(std::size_t in_dim, std::size_t out_dim, bool relu, bool batchnorm,
                        RngState& rng) {
  Layer l;
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  l.W = rng.uniform_matrix(out_dim, in_dim, -bound, bound);
  l.b.assign(out_dim, 0.0);
  l.relu = relu;
  l.batchnorm = batchnorm;
  if (batchnorm) {
    l.bn_scale.assign(out_dim, 1.0);
    l.bn_shift.assign(out_dim, 0.0);
    l.bn_run_mean.assign(out_dim, 0.0);
    l.bn_run_var.assign(out_dim, 1.0);
  }
  return l;
}

namespace detail {

struct LayerCache {
  Matrix input;
  Matrix pre_act;   // after linear (+ batch-norm), before ReLU
  Matrix xhat;      // batch-norm normalized values
  std::vector<double> mean, inv_std;
};

struct MlpCache {
  std::vector<LayerCache> layers;
  Matrix output;
};

inline Matrix layer_linear(const Layer& l, const Matrix& x) {
  Matrix h = multiply(l.W, x);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) += l.b[i];
  return h;
}

inline Matrix mlp_forward(MlpParams& p, const Matrix& x, bool train, MlpCache* cache) {
  Matrix cur = x;
  if (cache) cache->layers.assign(p.layers.size(), {});
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    Layer& l = p.layers[li];
    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    if (lc) lc->input = cur;
    Matrix h = layer_linear(l, cur);
    if (l.batchnorm) {
      const std::size_t m = h.rows(), n = h.cols();
      std::vector<double> mean(m, 0.0), var(m, 0.0);
      if (train) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) mean[i] += h(i, j);
          mean[i] /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double dlt = h(i, j) - mean[i];
            var[i] += dlt * dlt;
          }
          var[i] /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < m; ++i) {
          l.bn_run_mean[i] = kBnMomentum * l.bn_run_mean[i] + (1.0 - kBnMomentum) * mean[i];
          l.bn_run_var[i] = kBnMomentum * l.bn_run_var[i] + (1.0 - kBnMomentum) * var[i];
        }
      } else {
        mean = l.bn_run_mean;
        var = l.bn_run_var;
      }
      Matrix xhat(m, n);
      std::vector<double> inv_std(m);
      for (std::size_t i = 0; i < m; ++i) inv_std[i] = 1.0 / std::sqrt(var[i] + kBnEps);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          xhat(i, j) = (h(i, j) - mean[i]) * inv_std[i];
          h(i, j) = l.bn_scale[i] * xhat(i, j) + l.bn_shift[i];
        }
      if (lc) {
        lc->xhat = std::move(xhat);
        lc->mean = std::move(mean);
        lc->inv_std = std::move(inv_std);
      }
    }
    if (lc) lc->pre_act = h;
    if (l.relu)
      for (double& v : h.storage()) v = v > 0.0 ? v : 0.0;
    cur = std::move(h);
  }
  if (cache) cache->output = cur;
  return cur;
}

// Returns dL/d(input); accumulates parameter gradients into `grads`.
inline Matrix mlp_backward(const MlpParams& p, const MlpCache& cache, const Matrix& d_out,
                           MlpGrads& grads, bool train) {
  grads.layers.assign(p.layers.size(), {});
  Matrix g = d_out;
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const Layer& l = p.layers[li];
    const LayerCache& lc = cache.layers[li];
    LayerGrad& lg = grads.layers[li];
    const std::size_t m = g.rows(), n = g.cols();

    if (l.relu) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (lc.pre_act(i, j) <= 0.0) g(i, j) = 0.0;
    }
    if (l.batchnorm) {
      lg.d_bn_scale.assign(m, 0.0);
      lg.d_bn_shift.assign(m, 0.0);
      Matrix dxhat(m, n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          lg.d_bn_scale[i] += g(i, j) * lc.xhat(i, j);
          lg.d_bn_shift[i] += g(i, j);
          dxhat(i, j) = g(i, j) * l.bn_scale[i];
        }
      if (train) {
        // full batch-norm backward with batch statistics
        for (std::size_t i = 0; i < m; ++i) {
          double sum_dx = 0.0, sum_dx_xhat = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            sum_dx += dxhat(i, j);
            sum_dx_xhat += dxhat(i, j) * lc.xhat(i, j);
          }
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j)
            g(i, j) = lc.inv_std[i] *
                      (dxhat(i, j) - inv_n * sum_dx - lc.xhat(i, j) * inv_n * sum_dx_xhat);
        }
      } else {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g(i, j) = dxhat(i, j) * lc.inv_std[i];
      }
    }
    lg.dW = multiply_a_bt(g, lc.input);
    lg.db.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) lg.db[i] += g(i, j);
    g = multiply_at_b(l.W, g);
  }
  return g;
}

// Jacobian of column normalization u = v/||v||: dv = (du - u (u.du)) / ||v||.
inline Matrix normalize_backward(const Matrix& raw, const Matrix& unit, const Matrix& d_unit) {
  Matrix dv(raw.rows(), raw.cols());
  for (std::size_t j = 0; j < raw.cols(); ++j) {
    double nrm = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) nrm += raw(i, j) * raw(i, j);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < raw.rows(); ++i) dot += unit(i, j) * d_unit(i, j);
    for (std::size_t i = 0; i < raw.rows(); ++i)
      dv(i, j) = (d_unit(i, j) - unit(i, j) * dot) / nrm;
  }
  return dv;
}

}  // namespace detail

struct ForwardCache {
  bool valid = false;
  bool train = false;
  detail::MlpCache pre_f, pre_h, head_f, head_h;
  Matrix raw_z, raw_y;  // head outputs before column normalization
  Matrix z, y;          // unit-column outputs
};

enum class ForwardMode { Train, Eval };

// Z = normalize(f(X)), Y = normalize(h(X)). Train mode uses batch statistics
// in batch-norm and updates running stats; eval mode is a pure function.
inline void forward(HeadPair& params, const Matrix& x, ForwardMode mode, Matrix& z, Matrix& y,
                    ForwardCache* cache = nullptr) {
  const bool train = mode == ForwardMode::Train;
  detail::MlpCache local_pf, local_ph, local_hf, local_hh;
  detail::MlpCache* pf = cache ? &cache->pre_f : &local_pf;
  detail::MlpCache* ph = cache ? &cache->pre_h : &local_ph;
  detail::MlpCache* hf = cache ? &cache->head_f : &local_hf;
  detail::MlpCache* hh = cache ? &cache->head_h : &local_hh;

  const Matrix feat_f = params.prefeature_f.layers.empty()
                            ? x
                            : detail::mlp_forward(params.prefeature_f, x, train, cache ? pf : nullptr);
  const Matrix feat_h = params.prefeature_h.layers.empty()
                            ? x
                            : detail::mlp_forward(params.prefeature_h, x, train, cache ? ph : nullptr);
  Matrix raw_z = detail::mlp_forward(params.head_f, feat_f, train, cache ? hf : nullptr);
  Matrix raw_y = detail::mlp_forward(params.head_h, feat_h, train, cache ? hh : nullptr);
  z = normalize_columns(raw_z).Y;
  y = normalize_columns(raw_y).Y;
  if (cache) {
    cache->valid = true;
    cache->train = train;
    cache->raw_z = std::move(raw_z);
    cache->raw_y = std::move(raw_y);
    cache->z = z;
    cache->y = y;
  }
}

// Exact gradients of the composite map through column normalization, ReLU
// and batch-norm. `cache` must come from a matching train-mode forward.
inline HeadPairGrads backward(HeadPair& params, const ForwardCache& cache, const Matrix& dZ,
                              const Matrix& dY) {
  if (!cache.valid || !cache.train) throw StaleCache("backward: cache missing or not from train forward");
  HeadPairGrads grads;
  const Matrix d_raw_z = detail::normalize_backward(cache.raw_z, cache.z, dZ);
  const Matrix d_raw_y = detail::normalize_backward(cache.raw_y, cache.y, dY);
  const Matrix d_feat_f = detail::mlp_backward(params.head_f, cache.head_f, d_raw_z, grads.head_f, true);
  const Matrix d_feat_h = detail::mlp_backward(params.head_h, cache.head_h, d_raw_y, grads.head_h, true);
  if (!params.prefeature_f.layers.empty())
    detail::mlp_backward(params.prefeature_f, cache.pre_f, d_feat_f, grads.prefeature_f, true);
  if (!params.prefeature_h.layers.empty())
    detail::mlp_backward(params.prefeature_h, cache.pre_h, d_feat_h, grads.prefeature_h, true);
  return grads;
}

struct OptimState {
  double eta = 1e-3;
  double weight_decay_f = 0.0;  // Theta side: prefeature_f + head_f
  double weight_decay_h = 0.0;  // Psi side: prefeature_h + head_h
};

namespace detail {

inline void sgd_mlp(MlpParams& p, const MlpGrads& g, double eta, double decay) {
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    Layer& l = p.layers[li];
    if (li >= g.layers.size() || g.layers[li].dW.size() == 0) continue;
    const LayerGrad& lg = g.layers[li];
    for (std::size_t i = 0; i < l.W.size(); ++i)
      l.W.storage()[i] -= eta * (lg.dW.storage()[i] + decay * l.W.storage()[i]);
    for (std::size_t i = 0; i < l.b.size(); ++i)
      l.b[i] -= eta * (lg.db[i] + decay * l.b[i]);
    if (l.batchnorm) {
      for (std::size_t i = 0; i < l.bn_scale.size(); ++i)
        l.bn_scale[i] -= eta * (lg.d_bn_scale[i] + decay * l.bn_scale[i]);
      for (std::size_t i = 0; i < l.bn_shift.size(); ++i)
        l.bn_shift[i] -= eta * (lg.d_bn_shift[i] + decay * l.bn_shift[i]);
    }
  }
}

}  // namespace detail

inline void sgd_step(HeadPair& params, const HeadPairGrads& grads, const OptimState& opt) {
  detail::sgd_mlp(params.prefeature_f, grads.prefeature_f, opt.eta, opt.weight_decay_f);
  detail::sgd_mlp(params.head_f, grads.head_f, opt.eta, opt.weight_decay_f);
  detail::sgd_mlp(params.prefeature_h, grads.prefeature_h, opt.eta, opt.weight_decay_h);
  detail::sgd_mlp(params.head_h, grads.head_h, opt.eta, opt.weight_decay_h);
}

// Copy the Theta-side weights onto the Psi side (warm-up weight sharing).
inline void copy_f_to_h(HeadPair& params) {
  params.prefeature_h = params.prefeature_f;
  params.head_h = params.head_f;
}

}  // namespace prodsc
