#include "s2c/mmcd.hpp"

namespace s2c::mmcd {

DualEncoder::DualEncoder(encoder::EncoderSpec rs, encoder::EncoderParams rp,
                         encoder::EncoderSpec ss, encoder::EncoderParams sp)
    : rgb_spec(std::move(rs)), rgb_params(std::move(rp)),
      sar_spec(std::move(ss)), sar_params(std::move(sp)) {
  if (rgb_spec.latent_channels != sar_spec.latent_channels ||
      rgb_spec.patch_stride != sar_spec.patch_stride)
    throw ShapeMismatch(
        "DualEncoder: branches must agree on latent channels and stride");
}

double het_triplet(const LatentMap& y_rgb, const LatentMap& y_sar,
                   const LatentMap& bar_y_rgb, const TripletConfig& cfg) {
  cfg.validate();
  double neg = losses::patch_cosine(y_rgb, y_sar);
  double pos = losses::patch_cosine(y_rgb, bar_y_rgb);
  return std::max(neg - pos + cfg.margin, 0.0);
}

double het_triplet_backward(const LatentMap& y_rgb, const LatentMap& y_sar,
                            const LatentMap& bar_y_rgb,
                            const TripletConfig& cfg, LatentMap* g_rgb,
                            LatentMap* g_sar, LatentMap* g_bar_rgb) {
  cfg.validate();
  double neg = losses::patch_cosine(y_rgb, y_sar);
  double pos = losses::patch_cosine(y_rgb, bar_y_rgb);
  double t = neg - pos + cfg.margin;
  if (t > 0) {
    losses::patch_cosine_backward(y_rgb, y_sar, 1.0, g_rgb, g_sar);
    losses::patch_cosine_backward(y_rgb, bar_y_rgb, -1.0, g_rgb, g_bar_rgb);
  }
  return std::max(t, 0.0);
}

namespace {

std::vector<std::vector<double>> sim_matrix(const losses::LatentBatch& a,
                                            const losses::LatentBatch& b) {
  const size_t n = a.size();
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (size_t u = 0; u < n; ++u)
    for (size_t v = 0; v < n; ++v) s[u][v] = losses::patch_cosine(a[u], b[v]);
  return s;
}

}  // namespace

double het_info_nce(const losses::LatentBatch& y_rgb,
                    const losses::LatentBatch& y_sar) {
  if (y_rgb.size() != y_sar.size())
    throw ShapeMismatch("het_info_nce: batch lengths differ");
  if (y_rgb.size() < 2)
    throw BatchTooSmall("het_info_nce: batch size must be >= 2");
  return losses::info_nce_from_matrices(sim_matrix(y_rgb, y_sar),
                                        sim_matrix(y_sar, y_rgb), nullptr,
                                        nullptr);
}

double het_info_nce_backward(const losses::LatentBatch& y_rgb,
                             const losses::LatentBatch& y_sar,
                             std::vector<LatentMap>* g_rgb,
                             std::vector<LatentMap>* g_sar) {
  if (y_rgb.size() != y_sar.size())
    throw ShapeMismatch("het_info_nce: batch lengths differ");
  if (y_rgb.size() < 2)
    throw BatchTooSmall("het_info_nce: batch size must be >= 2");
  const size_t n = y_rgb.size();
  std::vector<std::vector<double>> ds1, ds2;
  double loss = losses::info_nce_from_matrices(
      sim_matrix(y_rgb, y_sar), sim_matrix(y_sar, y_rgb), &ds1, &ds2);
  for (size_t u = 0; u < n; ++u)
    for (size_t v = 0; v < n; ++v) {
      losses::patch_cosine_backward(y_rgb[u], y_sar[v], ds1[u][v],
                                    g_rgb ? &(*g_rgb)[u] : nullptr,
                                    g_sar ? &(*g_sar)[v] : nullptr);
      losses::patch_cosine_backward(y_sar[u], y_rgb[v], ds2[u][v],
                                    g_sar ? &(*g_sar)[u] : nullptr,
                                    g_rgb ? &(*g_rgb)[v] : nullptr);
    }
  return loss;
}

BinaryMask mmcd_infer(const DualEncoder& dual, const RasterImage& rgb,
                      const RasterImage& sar, const MappingConfig& mcfg,
                      double thresh) {
  if (rgb.height() != sar.height() || rgb.width() != sar.width())
    throw ShapeMismatch("mmcd_infer: modalities not co-registered");
  LatentMap y1 = encoder::encode(dual.rgb_spec, dual.rgb_params, rgb);
  LatentMap y2 = encoder::encode(dual.sar_spec, dual.sar_params, sar);
  ChangeProbMap yc = mapping::change_prob_map(y1, y2, mcfg);
  return mapping::binarize(yc, thresh, rgb.height(), rgb.width());
}

}  // namespace s2c::mmcd
