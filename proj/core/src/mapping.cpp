#include "s2c/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "s2c/losses.hpp"

namespace s2c::mapping {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kNormEps = 1e-8;

// Per-patch cosine between two latent maps, plus norms for backward.
void per_patch_cos(const LatentMap& y1, const LatentMap& y2,
                   std::vector<double>& cosv, std::vector<double>& n1,
                   std::vector<double>& n2) {
  const size_t plane = static_cast<size_t>(y1.h) * y1.w;
  cosv.assign(plane, 0.0);
  n1.assign(plane, 0.0);
  n2.assign(plane, 0.0);
  for (size_t p = 0; p < plane; ++p) {
    double dot = 0, qa = 0, qb = 0;
    for (int ch = 0; ch < y1.c; ++ch) {
      double a = y1.features[ch * plane + p];
      double b = y2.features[ch * plane + p];
      dot += a * b;
      qa += a * a;
      qb += b * b;
    }
    n1[p] = std::max(std::sqrt(qa), kNormEps);
    n2[p] = std::max(std::sqrt(qb), kNormEps);
    cosv[p] = dot / (n1[p] * n2[p]);
  }
}

}  // namespace

ChangeProbMap change_prob_map(const LatentMap& y1, const LatentMap& y2,
                              const MappingConfig& cfg) {
  cfg.validate();
  if (!y1.same_shape(y2)) throw ShapeMismatch("change_prob_map: shape mismatch");
  std::vector<double> cosv, n1, n2;
  per_patch_cos(y1, y2, cosv, n1, n2);
  ChangeProbMap out(y1.h, y1.w);
  for (size_t p = 0; p < cosv.size(); ++p)
    out.probs[p] = static_cast<float>(sigmoid(-cosv[p] * cfg.eta));
  return out;
}

ChangeProbMap change_prob_map_fwd(const LatentMap& y1, const LatentMap& y2,
                                  const MappingConfig& cfg) {
  return change_prob_map(y1, y2, cfg);
}

void change_prob_map_backward(const LatentMap& y1, const LatentMap& y2,
                              const MappingConfig& cfg,
                              const std::vector<double>& upstream,
                              LatentMap* g_y1, LatentMap* g_y2) {
  if (!y1.same_shape(y2)) throw ShapeMismatch("change_prob_map: shape mismatch");
  std::vector<double> cosv, n1, n2;
  per_patch_cos(y1, y2, cosv, n1, n2);
  const size_t plane = cosv.size();
  for (size_t p = 0; p < plane; ++p) {
    double prob = sigmoid(-cosv[p] * cfg.eta);
    // d prob / d cos = -eta * prob * (1 - prob)
    double dcos = upstream[p] * (-cfg.eta) * prob * (1.0 - prob);
    if (dcos == 0.0) continue;
    for (int ch = 0; ch < y1.c; ++ch) {
      double a = y1.features[ch * plane + p];
      double b = y2.features[ch * plane + p];
      if (g_y1)
        g_y1->features[ch * plane + p] +=
            dcos * (b / (n1[p] * n2[p]) - cosv[p] * a / (n1[p] * n1[p]));
      if (g_y2)
        g_y2->features[ch * plane + p] +=
            dcos * (a / (n1[p] * n2[p]) - cosv[p] * b / (n2[p] * n2[p]));
    }
  }
}

PromptSet extract_prompts(const ChangeProbMap& yc, double thresh,
                          int max_points, int image_scale) {
  if (!(thresh > 0 && thresh < 1))
    throw ValueRange("extract_prompts: thresh in (0,1)");
  const int h = yc.h, w = yc.w;
  std::vector<int> label(static_cast<size_t>(h) * w, -1);
  struct Comp {
    double peak = 0, wsum = 0, rsum = 0, csum = 0;
  };
  std::vector<Comp> comps;

  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (yc.at(r, c) <= thresh || label[r * w + c] >= 0) continue;
      int id = static_cast<int>(comps.size());
      comps.emplace_back();
      std::deque<std::pair<int, int>> q{{r, c}};
      label[r * w + c] = id;
      while (!q.empty()) {
        auto [cr, cc] = q.front();
        q.pop_front();
        double p = yc.at(cr, cc);
        Comp& comp = comps[id];
        comp.peak = std::max(comp.peak, p);
        comp.wsum += p;
        comp.rsum += p * cr;
        comp.csum += p * cc;
        const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int nr = cr + dr[k], nc = cc + dc[k];
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          if (yc.at(nr, nc) <= thresh || label[nr * w + nc] >= 0) continue;
          label[nr * w + nc] = id;
          q.emplace_back(nr, nc);
        }
      }
    }

  std::vector<int> order(comps.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return comps[a].peak > comps[b].peak;
  });

  PromptSet out;
  for (int idx : order) {
    if (static_cast<int>(out.size()) >= max_points) break;
    const Comp& comp = comps[idx];
    Prompt p;
    p.lat_row = static_cast<int>(std::lround(comp.rsum / comp.wsum));
    p.lat_col = static_cast<int>(std::lround(comp.csum / comp.wsum));
    p.lat_row = std::clamp(p.lat_row, 0, h - 1);
    p.lat_col = std::clamp(p.lat_col, 0, w - 1);
    p.img_row = p.lat_row * image_scale + image_scale / 2;
    p.img_col = p.lat_col * image_scale + image_scale / 2;
    p.peak = comp.peak;
    out.push_back(p);
  }
  return out;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] & b.bits[i]);
    uni += (a.bits[i] | b.bits[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MaskSet xor_merge(const MaskSet& m1, const MaskSet& m2,
                  const RefineConfig& cfg) {
  cfg.validate();
  std::vector<bool> rm1(m1.size(), false), rm2(m2.size(), false);
  // Greedy in index order: each mask removable once.
  for (size_t i = 0; i < m1.size(); ++i) {
    for (size_t j = 0; j < m2.size(); ++j) {
      if (rm1[i] || rm2[j]) continue;
      if (iou(m1.masks[i], m2.masks[j]) > cfg.iou_threshold) {
        rm1[i] = true;
        rm2[j] = true;
      }
    }
  }
  MaskSet out;
  for (size_t i = 0; i < m1.size(); ++i)
    if (!rm1[i]) out.push(m1.masks[i]);
  for (size_t j = 0; j < m2.size(); ++j)
    if (!rm2[j]) out.push(m2.masks[j]);
  return out;
}

ChangeProbMap upsample_nearest(const ChangeProbMap& yc, int out_h, int out_w) {
  ChangeProbMap out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    int sr = std::min(yc.h - 1, r * yc.h / out_h);
    for (int c = 0; c < out_w; ++c) {
      int sc = std::min(yc.w - 1, c * yc.w / out_w);
      out.probs[static_cast<size_t>(r) * out_w + c] = yc.at(sr, sc);
    }
  }
  return out;
}

BinaryMask binarize(const ChangeProbMap& yc, double thresh, int out_h,
                    int out_w) {
  if (!(thresh > 0 && thresh < 1)) throw ValueRange("binarize: thresh in (0,1)");
  ChangeProbMap up = (yc.h == out_h && yc.w == out_w)
                         ? yc
                         : upsample_nearest(yc, out_h, out_w);
  BinaryMask out(out_h, out_w);
  for (size_t i = 0; i < up.probs.size(); ++i)
    out.bits[i] = up.probs[i] > thresh ? 1 : 0;  // strict inequality
  return out;
}

BinaryMask iou_refine(const ChangeProbMap& yc, const MaskSet& m1,
                      const MaskSet& m2, const RefineConfig& cfg, int out_h,
                      int out_w) {
  cfg.validate();
  for (const auto& set : {&m1, &m2})
    for (const auto& m : set->masks)
      if (m.area() == 0) throw EmptyMaskInSet("iou_refine: zero-area mask");

  ChangeProbMap up = upsample_nearest(yc, out_h, out_w);
  MaskSet m12 = xor_merge(m1, m2, cfg);

  BinaryMask out(out_h, out_w);
  BinaryMask covered(out_h, out_w);
  for (const auto& m : m12.masks) {
    if (!(m.h == out_h && m.w == out_w))
      throw ShapeMismatch("iou_refine: mask resolution mismatch");
    double num = 0, den = 0;
    for (size_t i = 0; i < m.bits.size(); ++i)
      if (m.bits[i]) {
        num += up.probs[i];
        den += 1.0;
        covered.bits[i] = 1;
      }
    bool matched = (num / den) > cfg.iou_threshold;
    if (matched)
      for (size_t i = 0; i < m.bits.size(); ++i)
        if (m.bits[i]) out.bits[i] = 1;
  }
  // Outside the candidate union the coarse map remains authoritative.
  for (size_t i = 0; i < out.bits.size(); ++i)
    if (!covered.bits[i] && up.probs[i] > 0.5f) out.bits[i] = 1;
  return out;
}

MaskSet ColorRegionProposer::propose(const RasterImage& img,
                                     const PromptSet& prompts) const {
  MaskSet out;
  const int h = img.height(), w = img.width(), ch = img.channels();
  for (const auto& pr : prompts) {
    int r0 = std::clamp(pr.img_row, 0, h - 1);
    int c0 = std::clamp(pr.img_col, 0, w - 1);
    std::vector<double> seed(ch);
    for (int k = 0; k < ch; ++k) seed[k] = img.at(r0, c0, k);

    BinaryMask m(h, w);
    std::deque<std::pair<int, int>> q{{r0, c0}};
    m.set(r0, c0, true);
    while (!q.empty()) {
      auto [cr, cc] = q.front();
      q.pop_front();
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        int nr = cr + dr[k], nc = cc + dc[k];
        if (nr < 0 || nr >= h || nc < 0 || nc >= w || m.at(nr, nc)) continue;
        double d2 = 0;
        for (int b = 0; b < ch; ++b) {
          double d = img.at(nr, nc, b) - seed[b];
          d2 += d * d;
        }
        if (std::sqrt(d2) <= tol_) {
          m.set(nr, nc, true);
          q.emplace_back(nr, nc);
        }
      }
    }
    out.push(std::move(m));
  }
  return out;
}

}  // namespace s2c::mapping
