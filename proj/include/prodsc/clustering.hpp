#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "prodsc/eigen.hpp"
#include "prodsc/matrix.hpp"
#include "prodsc/rng.hpp"
#include "prodsc/selfexpress.hpp"

namespace prodsc {

using LabelVector = std::vector<std::size_t>;

struct MetricReport {
  double acc = 0.0;  // percent
  double nmi = 0.0;  // percent
  double sre = 0.0;  // percent
};

struct KmeansResult {
  LabelVector labels;
  double inertia = 0.0;
};

namespace detail {

inline double sq_dist(const Matrix& pts, std::size_t i, const std::vector<double>& center) {
  double s = 0.0;
  for (std::size_t p = 0; p < pts.cols(); ++p) {
    const double dlt = pts(i, p) - center[p];
    s += dlt * dlt;
  }
  return s;
}

inline KmeansResult kmeans_once(const Matrix& pts, std::size_t k, RngState& rng) {
  const std::size_t n = pts.rows(), dim = pts.cols();
  std::vector<std::vector<double>> centers;
  centers.reserve(k);

  // k-means++ seeding
  std::vector<double> d2(n, std::numeric_limits<double>::max());
  {
    const std::size_t first = rng.next_index(n);
    centers.emplace_back(pts.data() + first * dim, pts.data() + (first + 1) * dim);
  }
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(pts, i, centers.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total, acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_index(n);
    }
    centers.emplace_back(pts.data() + pick * dim, pts.data() + (pick + 1) * dim);
  }

  LabelVector labels(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = sq_dist(pts, i, centers[c]);
        if (dd < best) {
          best = dd;
          arg = c;
        }
      }
      if (labels[i] != arg) {
        labels[i] = arg;
        changed = true;
      }
    }
    std::vector<std::size_t> count(k, 0);
    for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[labels[i]];
      for (std::size_t p = 0; p < dim; ++p) centers[labels[i]][p] += pts(i, p);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // re-seed an empty cluster from the farthest point
        double best = -1.0;
        std::size_t far = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dd = sq_dist(pts, i, centers[labels[i]]);
          if (dd > best) {
            best = dd;
            far = i;
          }
        }
        for (std::size_t p = 0; p < dim; ++p) centers[c][p] = pts(far, p);
        labels[far] = c;
        changed = true;
      } else {
        for (std::size_t p = 0; p < dim; ++p) centers[c][p] /= static_cast<double>(count[c]);
      }
    }
    if (!changed && iter > 0) break;
  }

  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(pts, i, centers[labels[i]]);
  return {std::move(labels), inertia};
}

}  // namespace detail

// Lloyd iterations with k-means++ init; keeps the best of `restarts` runs,
// each on its own split of the seeded stream.
inline LabelVector kmeans(const Matrix& points, std::size_t k, std::size_t restarts, RngState& rng) {
  if (points.rows() < k) throw ShapeMismatch("kmeans: fewer points than clusters");
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::max();
  for (std::size_t r = 0; r < restarts; ++r) {
    RngState sub = rng.split(r);
    KmeansResult res = detail::kmeans_once(points, k, sub);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best.labels;
}

// Normalized spectral clustering: L_sym = I - D^{-1/2} A D^{-1/2}, bottom-k
// eigenvectors, row renormalization, k-means with 10 restarts.
inline LabelVector spectral_cluster(const Affinity& aff, std::size_t k, RngState& rng) {
  const Matrix& a = aff.A;
  const std::size_t n = a.rows();
  if (k < 2) throw ShapeMismatch("spectral_cluster: k must be >= 2");
  double mass = 0.0;
  for (double v : a.storage()) mass += std::abs(v);
  if (mass <= 0.0) throw DegenerateAffinity("spectral_cluster: all-zero affinity");

  std::vector<double> dinv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    dinv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 1.0;  // isolated rows get D entry 1
  }
  Matrix lsym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lsym(i, j) = (i == j ? 1.0 : 0.0) - dinv_sqrt[i] * a(i, j) * dinv_sqrt[j];

  EigenDecomposition eig = sym_eigen(lsym);
  Matrix embed(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) embed(i, j) = eig.vectors(i, j);
  for (std::size_t i = 0; i < n; ++i) {
    double nrm = 0.0;
    for (std::size_t j = 0; j < k; ++j) nrm += embed(i, j) * embed(i, j);
    nrm = std::sqrt(nrm);
    if (nrm > 0.0)
      for (std::size_t j = 0; j < k; ++j) embed(i, j) /= nrm;
  }
  return kmeans(embed, k, 10, rng);
}

namespace detail {

// Hungarian algorithm on a k x k cost matrix (minimization), O(k^3).
inline std::vector<std::size_t> hungarian(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const double inf = std::numeric_limits<double>::max();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> assign(n);  // row -> column
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) assign[p[j] - 1] = j - 1;
  return assign;
}

inline std::size_t label_count(const LabelVector& a, const LabelVector& b) {
  std::size_t k = 0;
  for (std::size_t v : a) k = std::max(k, v + 1);
  for (std::size_t v : b) k = std::max(k, v + 1);
  return k;
}

}  // namespace detail

// Clustering accuracy (percent): best label bijection via optimal assignment
// over the contingency table.
inline double accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size()) throw LengthMismatch("accuracy: length mismatch");
  const std::size_t n = pred.size();
  if (n == 0) return 0.0;
  const std::size_t k = detail::label_count(pred, truth);
  Matrix contingency(k, k);
  for (std::size_t i = 0; i < n; ++i) contingency(pred[i], truth[i]) += 1.0;
  Matrix cost(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) cost(i, j) = -contingency(i, j);
  const std::vector<std::size_t> assign = detail::hungarian(cost);
  double matched = 0.0;
  for (std::size_t i = 0; i < k; ++i) matched += contingency(i, assign[i]);
  return 100.0 * matched / static_cast<double>(n);
}

// NMI (percent) with arithmetic-mean normalization; 100 when both
// partitions carry zero entropy.
inline double nmi(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size()) throw LengthMismatch("nmi: length mismatch");
  const std::size_t n = pred.size();
  if (n == 0) return 0.0;
  const std::size_t k = detail::label_count(pred, truth);
  // integer counts, probabilities formed at use: keeps zero entropies exact
  std::vector<std::size_t> joint(k * k, 0), ca(k, 0), cb(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[pred[i] * k + truth[i]];
    ++ca[pred[i]];
    ++cb[truth[i]];
  }
  const double dn = static_cast<double>(n);
  double mi = 0.0, ha = 0.0, hb = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (ca[i] > 0) ha -= (ca[i] / dn) * std::log(ca[i] / dn);
    if (cb[i] > 0) hb -= (cb[i] / dn) * std::log(cb[i] / dn);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t nij = joint[i * k + j];
      if (nij > 0)
        mi += (nij / dn) * std::log((dn * static_cast<double>(nij)) /
                                    (static_cast<double>(ca[i]) * static_cast<double>(cb[j])));
    }
  }
  const double denom = 0.5 * (ha + hb);
  if (denom <= 0.0) return 100.0;
  return 100.0 * mi / denom;
}

// Subspace-preserving representation error (percent): mean fraction of each
// column's l1 mass leaking outside its ground-truth group. Zero columns are
// excluded from the average.
inline double sre(const Matrix& c, const LabelVector& truth, std::size_t* zero_columns = nullptr) {
  const std::size_t n = c.cols();
  if (truth.size() != n || c.rows() != n) throw LengthMismatch("sre: C must be N x N with N labels");
  double total = 0.0;
  std::size_t counted = 0, zeros = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double l1 = 0.0, in_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(c(i, j));
      l1 += a;
      if (i != j && truth[i] == truth[j]) in_mass += a;
    }
    if (l1 <= 0.0) {
      ++zeros;
      continue;
    }
    total += 1.0 - in_mass / l1;
    ++counted;
  }
  if (zero_columns) *zero_columns = zeros;
  if (counted == 0) return 0.0;
  return 100.0 * total / static_cast<double>(counted);
}

}  // namespace prodsc
