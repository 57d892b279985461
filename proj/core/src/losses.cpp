#include "s2c/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace s2c::losses {

namespace {

constexpr double kNormEps = 1e-8;

struct PatchCos {
  double cos;         // cosine of this patch
  double na, nb;      // clamped norms
  bool a_clamped, b_clamped;
};

PatchCos patch_cos_at(const LatentMap& a, const LatentMap& b, size_t p,
                      size_t plane) {
  double dot = 0, qa = 0, qb = 0;
  for (int ch = 0; ch < a.c; ++ch) {
    double av = a.features[ch * plane + p];
    double bv = b.features[ch * plane + p];
    dot += av * bv;
    qa += av * av;
    qb += bv * bv;
  }
  PatchCos pc;
  double na = std::sqrt(qa), nb = std::sqrt(qb);
  pc.a_clamped = na < kNormEps;
  pc.b_clamped = nb < kNormEps;
  pc.na = std::max(na, kNormEps);
  pc.nb = std::max(nb, kNormEps);
  pc.cos = dot / (pc.na * pc.nb);
  return pc;
}

}  // namespace

double patch_cosine(const LatentMap& a, const LatentMap& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("patch_cosine: shape mismatch");
  const size_t plane = static_cast<size_t>(a.h) * a.w;
  double sum = 0;
  for (size_t p = 0; p < plane; ++p) sum += patch_cos_at(a, b, p, plane).cos;
  return sum / static_cast<double>(plane);
}

void patch_cosine_backward(const LatentMap& a, const LatentMap& b,
                           double coeff, LatentMap* ga, LatentMap* gb) {
  if (!a.same_shape(b)) throw ShapeMismatch("patch_cosine: shape mismatch");
  if (coeff == 0.0) return;
  const size_t plane = static_cast<size_t>(a.h) * a.w;
  const double scale = coeff / static_cast<double>(plane);
  for (size_t p = 0; p < plane; ++p) {
    PatchCos pc = patch_cos_at(a, b, p, plane);
    for (int ch = 0; ch < a.c; ++ch) {
      double av = a.features[ch * plane + p];
      double bv = b.features[ch * plane + p];
      if (ga) {
        // d cos/d a = b/(na*nb) - cos*a/na^2 (norm treated constant when
        // clamped at the eps guard)
        double g = bv / (pc.na * pc.nb);
        if (!pc.a_clamped) g -= pc.cos * av / (pc.na * pc.na);
        ga->features[ch * plane + p] += scale * g;
      }
      if (gb) {
        double g = av / (pc.na * pc.nb);
        if (!pc.b_clamped) g -= pc.cos * bv / (pc.nb * pc.nb);
        gb->features[ch * plane + p] += scale * g;
      }
    }
  }
}

double triplet_loss(const LatentMap& y1, const LatentMap& bar_y1,
                    const LatentMap& y2, const LatentMap& bar_y2,
                    const TripletConfig& cfg) {
  cfg.validate();
  double c12 = patch_cosine(y1, y2);
  double c1 = patch_cosine(y1, bar_y1);
  double c2 = patch_cosine(y2, bar_y2);
  return std::max(c12 - c1 + cfg.margin, 0.0) +
         std::max(c12 - c2 + cfg.margin, 0.0);
}

double triplet_loss_backward(const LatentMap& y1, const LatentMap& bar_y1,
                             const LatentMap& y2, const LatentMap& bar_y2,
                             const TripletConfig& cfg, LatentMap* g_y1,
                             LatentMap* g_bar_y1, LatentMap* g_y2,
                             LatentMap* g_bar_y2) {
  cfg.validate();
  double c12 = patch_cosine(y1, y2);
  double c1 = patch_cosine(y1, bar_y1);
  double c2 = patch_cosine(y2, bar_y2);
  double t1 = c12 - c1 + cfg.margin;
  double t2 = c12 - c2 + cfg.margin;
  // Subgradient 0 exactly at the hinge.
  if (t1 > 0) {
    patch_cosine_backward(y1, y2, 1.0, g_y1, g_y2);
    patch_cosine_backward(y1, bar_y1, -1.0, g_y1, g_bar_y1);
  }
  if (t2 > 0) {
    patch_cosine_backward(y1, y2, 1.0, g_y1, g_y2);
    patch_cosine_backward(y2, bar_y2, -1.0, g_y2, g_bar_y2);
  }
  return std::max(t1, 0.0) + std::max(t2, 0.0);
}

double info_nce_from_matrices(const std::vector<std::vector<double>>& s1,
                              const std::vector<std::vector<double>>& s2,
                              std::vector<std::vector<double>>* d_s1,
                              std::vector<std::vector<double>>* d_s2) {
  const size_t n = s1.size();
  if (n < 2) throw BatchTooSmall("info_nce: batch size must be >= 2");
  double loss = 0;
  auto one_phase = [&](const std::vector<std::vector<double>>& s,
                       std::vector<std::vector<double>>* ds) {
    double acc = 0;
    for (size_t u = 0; u < n; ++u) {
      double mx = *std::max_element(s[u].begin(), s[u].end());
      double denom = 0;
      for (size_t v = 0; v < n; ++v) denom += std::exp(s[u][v] - mx);
      double lse = mx + std::log(denom);
      acc += -(s[u][u] - lse) / static_cast<double>(n);
      if (ds)
        for (size_t v = 0; v < n; ++v) {
          double soft = std::exp(s[u][v] - mx) / denom;
          (*ds)[u][v] += (soft - (u == v ? 1.0 : 0.0)) / static_cast<double>(n);
        }
    }
    return acc;
  };
  if (d_s1) d_s1->assign(n, std::vector<double>(n, 0.0));
  if (d_s2) d_s2->assign(n, std::vector<double>(n, 0.0));
  loss += one_phase(s1, d_s1);
  loss += one_phase(s2, d_s2);
  return loss;
}

namespace {

std::vector<std::vector<double>> sim_matrix(const LatentBatch& a,
                                            const LatentBatch& b) {
  const size_t n = a.size();
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (size_t u = 0; u < n; ++u)
    for (size_t v = 0; v < n; ++v) s[u][v] = patch_cosine(a[u], b[v]);
  return s;
}

void check_batches(const LatentBatch& y1, const LatentBatch& y2,
                   const LatentBatch& b1, const LatentBatch& b2) {
  if (y1.size() < 2) throw BatchTooSmall("info_nce: batch size must be >= 2");
  if (y1.size() != y2.size() || y1.size() != b1.size() ||
      y1.size() != b2.size())
    throw ShapeMismatch("info_nce: batch lengths differ");
}

}  // namespace

double info_nce(const LatentBatch& y1, const LatentBatch& y2,
                const LatentBatch& bar_y1, const LatentBatch& bar_y2) {
  check_batches(y1, y2, bar_y1, bar_y2);
  return info_nce_from_matrices(sim_matrix(y1, bar_y2), sim_matrix(y2, bar_y1),
                                nullptr, nullptr);
}

double info_nce_backward(const LatentBatch& y1, const LatentBatch& y2,
                         const LatentBatch& bar_y1, const LatentBatch& bar_y2,
                         std::vector<LatentMap>* g_y1,
                         std::vector<LatentMap>* g_y2,
                         std::vector<LatentMap>* g_bar_y1,
                         std::vector<LatentMap>* g_bar_y2) {
  check_batches(y1, y2, bar_y1, bar_y2);
  const size_t n = y1.size();
  std::vector<std::vector<double>> ds1, ds2;
  double loss = info_nce_from_matrices(sim_matrix(y1, bar_y2),
                                       sim_matrix(y2, bar_y1), &ds1, &ds2);
  for (size_t u = 0; u < n; ++u)
    for (size_t v = 0; v < n; ++v) {
      patch_cosine_backward(y1[u], bar_y2[v], ds1[u][v],
                            g_y1 ? &(*g_y1)[u] : nullptr,
                            g_bar_y2 ? &(*g_bar_y2)[v] : nullptr);
      patch_cosine_backward(y2[u], bar_y1[v], ds2[u][v],
                            g_y2 ? &(*g_y2)[u] : nullptr,
                            g_bar_y1 ? &(*g_bar_y1)[v] : nullptr);
    }
  return loss;
}

namespace {

struct GridPartition {
  int gh, gw, n;                 // full grids per axis, selected count
  std::vector<int> order;        // grid indices sorted by ascending density
  std::vector<double> density;
};

GridPartition partition(const ChangeProbMap& yc, const SparsityConfig& cfg) {
  cfg.validate();
  GridPartition gp;
  gp.gh = yc.h / cfg.grid_d;
  gp.gw = yc.w / cfg.grid_d;
  if (gp.gh == 0 || gp.gw == 0)
    throw GridTooLarge("grid_sparsity: no full grid fits the map");
  const int g = gp.gh * gp.gw;
  gp.density.resize(g);
  for (int gr = 0; gr < gp.gh; ++gr)
    for (int gc = 0; gc < gp.gw; ++gc) {
      double sum = 0;
      for (int r = 0; r < cfg.grid_d; ++r)
        for (int c = 0; c < cfg.grid_d; ++c)
          sum += yc.at(gr * cfg.grid_d + r, gc * cfg.grid_d + c);
      gp.density[gr * gp.gw + gc] = sum / (cfg.grid_d * cfg.grid_d);
    }
  gp.order.resize(g);
  std::iota(gp.order.begin(), gp.order.end(), 0);
  // stable: ties broken by grid scan order
  std::stable_sort(gp.order.begin(), gp.order.end(),
                   [&](int a, int b) { return gp.density[a] < gp.density[b]; });
  gp.n = static_cast<int>(std::floor(g * (1.0 - cfg.threshold_T)));
  return gp;
}

}  // namespace

double grid_sparsity(const ChangeProbMap& yc, const SparsityConfig& cfg) {
  GridPartition gp = partition(yc, cfg);
  if (gp.n == 0) return 0.0;
  double mean = 0;
  for (int i = 0; i < gp.n; ++i) mean += gp.density[gp.order[i]];
  mean /= gp.n;
  return std::max(mean, 0.0);
}

double grid_sparsity_backward(const ChangeProbMap& yc,
                              const SparsityConfig& cfg,
                              std::vector<double>* g) {
  GridPartition gp = partition(yc, cfg);
  if (gp.n == 0) return 0.0;
  double mean = 0;
  for (int i = 0; i < gp.n; ++i) mean += gp.density[gp.order[i]];
  mean /= gp.n;
  if (g && mean > 0.0) {
    const double per_pixel = 1.0 / (gp.n * cfg.grid_d * cfg.grid_d);
    for (int i = 0; i < gp.n; ++i) {
      int gi = gp.order[i];
      int gr = gi / gp.gw, gc = gi % gp.gw;
      for (int r = 0; r < cfg.grid_d; ++r)
        for (int c = 0; c < cfg.grid_d; ++c)
          (*g)[static_cast<size_t>(gr * cfg.grid_d + r) * yc.w +
               (gc * cfg.grid_d + c)] += per_pixel;
    }
  }
  return std::max(mean, 0.0);
}

double total_loss(double tri, double info, double spa, const LossWeights& w) {
  w.validate();
  if (!std::isfinite(tri) || !std::isfinite(info) || !std::isfinite(spa))
    throw ValueRange("total_loss: non-finite component");
  return w.gamma * tri + w.alpha * info + w.beta * spa;
}

}  // namespace s2c::losses
