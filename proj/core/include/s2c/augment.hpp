#pragma once

#include <map>
#include <string>
#include <vector>

#include "s2c/rng.hpp"
#include "s2c/types.hpp"

namespace s2c::augment {

// Stochastic strong-augmentation pipeline simulating temporal noise between
// acquisitions: spectral ops (RGB shift, PCA color adaptation toward the
// other temporal image) followed by spatial ops (down/up resampling,
// integer shift with edge replication).
struct AugmentConfig {
  double rgb_shift_max = 0.10;
  double pca_blend_lo = 0.0;
  double pca_blend_hi = 1.0;
  double downsample_scale_lo = 0.5;
  double downsample_scale_hi = 1.0;
  int shift_max_px = 8;
  uint64_t seed = 0;

  void validate() const {
    if (pca_blend_lo > pca_blend_hi || downsample_scale_lo > downsample_scale_hi)
      throw ValueRange("AugmentConfig: empty range");
    if (shift_max_px < 0) throw ValueRange("AugmentConfig: shift_max_px < 0");
  }

  // Config whose every draw collapses to the identity transform.
  static AugmentConfig identity() {
    AugmentConfig c;
    c.rgb_shift_max = 0.0;
    c.pca_blend_lo = c.pca_blend_hi = 0.0;
    c.downsample_scale_lo = c.downsample_scale_hi = 1.0;
    c.shift_max_px = 0;
    return c;
  }
};

// Record of every stochastic parameter sampled during strong_augment, keyed
// by op name; enough to replay the pipeline deterministically.
using DrawLog = std::map<std::string, std::vector<double>>;

struct AugmentedPair {
  RasterImage bar_t1;
  RasterImage bar_t2;
  DrawLog draw_log;
};

// Per-channel offset drawn uniformly in [-rgb_shift_max, +rgb_shift_max],
// clipped to [0,1].
RasterImage rgb_shift(const RasterImage& img, double shift_max, Rng& rng);
RasterImage rgb_shift_fixed(const RasterImage& img,
                            const std::vector<double>& offsets);

// PCA color transfer: whiten src channel statistics, recolor with ref's,
// then blend. blend=0 returns src, blend=1 fully recolors.
RasterImage pca_adapt(const RasterImage& src, const RasterImage& ref,
                      double blend);

// Bilinear down-resample to floor(scale*H) x floor(scale*W) and back.
RasterImage downsample_degrade(const RasterImage& img, double scale);

// Translate by (dx, dy) with edge replication. dx moves content right,
// dy moves content down.
RasterImage random_shift(const RasterImage& img, int dx, int dy);

AugmentedPair strong_augment(const ImagePair& pair, const AugmentConfig& cfg,
                             Rng& rng);

// Same geometric transform (flips, optional crop+resize) applied to t1, t2
// and the label.
ImagePair weak_augment(const ImagePair& pair, Rng& rng,
                       bool enable_crop = false);

// Bilinear resample to an arbitrary size; shared by augment and data.
RasterImage resize_bilinear(const RasterImage& img, int out_h, int out_w);

}  // namespace s2c::augment
