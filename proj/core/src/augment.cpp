#include "s2c/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace s2c::augment {

namespace {

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Bilinear sample with pixel-center alignment and edge clamping, on a raw
// H x W x C buffer.
void resize_bilinear_buf(const std::vector<double>& in, int ih, int iw, int c,
                         int oh, int ow, std::vector<double>& out) {
  out.assign(static_cast<size_t>(oh) * ow * c, 0.0);
  const double sy = static_cast<double>(ih) / oh;
  const double sx = static_cast<double>(iw) / ow;
  for (int r = 0; r < oh; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(ih - 1));
    int y0 = static_cast<int>(std::floor(fy));
    int y1 = std::min(y0 + 1, ih - 1);
    double wy = fy - y0;
    for (int col = 0; col < ow; ++col) {
      double fx = (col + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(iw - 1));
      int x0 = static_cast<int>(std::floor(fx));
      int x1 = std::min(x0 + 1, iw - 1);
      double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        auto px = [&](int r_, int c_) {
          return in[(static_cast<size_t>(r_) * iw + c_) * c + ch];
        };
        double top = px(y0, x0) * (1 - wx) + px(y0, x1) * wx;
        double bot = px(y1, x0) * (1 - wx) + px(y1, x1) * wx;
        out[(static_cast<size_t>(r) * ow + col) * c + ch] =
            top * (1 - wy) + bot * wy;
      }
    }
  }
}

// Channel mean and covariance over all pixels of a 3-channel image.
void channel_stats(const RasterImage& img, Eigen::Vector3d& mean,
                   Eigen::Matrix3d& cov) {
  const int64_t n = static_cast<int64_t>(img.height()) * img.width();
  mean.setZero();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      for (int ch = 0; ch < 3; ++ch) mean[ch] += img.at(r, c, ch);
  mean /= static_cast<double>(n);
  cov.setZero();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      Eigen::Vector3d d(img.at(r, c, 0) - mean[0], img.at(r, c, 1) - mean[1],
                        img.at(r, c, 2) - mean[2]);
      cov += d * d.transpose();
    }
  cov /= static_cast<double>(n);
}

Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> decompose(Eigen::Matrix3d cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.eigenvalues().minCoeff() < 1e-8) {
    cov += 1e-6 * Eigen::Matrix3d::Identity();
    es.compute(cov);
  }
  return es;
}

}  // namespace

RasterImage resize_bilinear(const RasterImage& img, int out_h, int out_w) {
  std::vector<double> out;
  resize_bilinear_buf(img.pixels(), img.height(), img.width(), img.channels(),
                      out_h, out_w, out);
  return RasterImage(out_h, out_w, img.channels(), std::move(out));
}

RasterImage rgb_shift_fixed(const RasterImage& img,
                            const std::vector<double>& offsets) {
  RasterImage out = img;
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c)
      for (int ch = 0; ch < out.channels(); ++ch)
        out.at(r, c, ch) = clip01(img.at(r, c, ch) + offsets[ch]);
  return out;
}

RasterImage rgb_shift(const RasterImage& img, double shift_max, Rng& rng) {
  std::vector<double> offs(img.channels());
  for (auto& o : offs) o = rng.uniform(-shift_max, shift_max);
  return rgb_shift_fixed(img, offs);
}

RasterImage pca_adapt(const RasterImage& src, const RasterImage& ref,
                      double blend) {
  if (src.channels() != 3 || ref.channels() != 3)
    throw ShapeMismatch("pca_adapt: both images must be 3-channel");
  if (blend < 0 || blend > 1) throw ValueRange("pca_adapt: blend in [0,1]");
  if (blend == 0.0) return src;

  Eigen::Vector3d mu1, mu2;
  Eigen::Matrix3d cov1, cov2;
  channel_stats(src, mu1, cov1);
  channel_stats(ref, mu2, cov2);
  auto es1 = decompose(cov1);
  auto es2 = decompose(cov2);

  // x' = E2 L2^(1/2) L1^(-1/2) E1^T (x - mu1) + mu2
  Eigen::Matrix3d whiten = es1.eigenvalues()
                               .cwiseMax(1e-12)
                               .cwiseSqrt()
                               .cwiseInverse()
                               .asDiagonal() *
                           es1.eigenvectors().transpose();
  Eigen::Matrix3d recolor = es2.eigenvectors() *
                            es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Eigen::Matrix3d t = recolor * whiten;

  RasterImage out = src;
  for (int r = 0; r < src.height(); ++r)
    for (int c = 0; c < src.width(); ++c) {
      Eigen::Vector3d x(src.at(r, c, 0), src.at(r, c, 1), src.at(r, c, 2));
      Eigen::Vector3d xp = t * (x - mu1) + mu2;
      for (int ch = 0; ch < 3; ++ch)
        out.at(r, c, ch) =
            clip01((1.0 - blend) * x[ch] + blend * xp[ch]);
    }
  return out;
}

RasterImage downsample_degrade(const RasterImage& img, double scale) {
  if (scale < 0.25 || scale > 1.0)
    throw ValueRange("downsample_degrade: scale in [0.25, 1]");
  int dh = static_cast<int>(std::floor(scale * img.height()));
  int dw = static_cast<int>(std::floor(scale * img.width()));
  if (dh == img.height() && dw == img.width()) return img;
  std::vector<double> small, back;
  resize_bilinear_buf(img.pixels(), img.height(), img.width(), img.channels(),
                      dh, dw, small);
  resize_bilinear_buf(small, dh, dw, img.channels(), img.height(), img.width(),
                      back);
  return RasterImage(img.height(), img.width(), img.channels(),
                     std::move(back));
}

RasterImage random_shift(const RasterImage& img, int dx, int dy) {
  if (dx == 0 && dy == 0) return img;
  RasterImage out = img;
  const int h = img.height(), w = img.width();
  for (int r = 0; r < h; ++r) {
    int sr = std::min(std::max(r - dy, 0), h - 1);
    for (int c = 0; c < w; ++c) {
      int sc = std::min(std::max(c - dx, 0), w - 1);
      for (int ch = 0; ch < img.channels(); ++ch)
        out.at(r, c, ch) = img.at(sr, sc, ch);
    }
  }
  return out;
}

namespace {

RasterImage strong_one(const RasterImage& src, const RasterImage& ref,
                       const AugmentConfig& cfg, Rng& rng,
                       const std::string& tag, DrawLog& log) {
  double blend = rng.uniform(cfg.pca_blend_lo, cfg.pca_blend_hi);
  std::vector<double> offs(src.channels());
  for (auto& o : offs) o = rng.uniform(-cfg.rgb_shift_max, cfg.rgb_shift_max);
  double scale = rng.uniform(cfg.downsample_scale_lo, cfg.downsample_scale_hi);
  int dx = cfg.shift_max_px ? rng.uniform_int(-cfg.shift_max_px, cfg.shift_max_px) : 0;
  int dy = cfg.shift_max_px ? rng.uniform_int(-cfg.shift_max_px, cfg.shift_max_px) : 0;

  log[tag + ".pca_blend"] = {blend};
  log[tag + ".rgb_offsets"] = offs;
  log[tag + ".scale"] = {scale};
  log[tag + ".shift"] = {static_cast<double>(dx), static_cast<double>(dy)};

  // cross-image color transfer is only defined between two 3-channel images
  RasterImage x = (src.channels() == 3 && ref.channels() == 3)
                      ? pca_adapt(src, ref, blend)
                      : src;
  x = rgb_shift_fixed(x, offs);
  x = random_shift(x, dx, dy);
  x = downsample_degrade(x, scale);
  return x;
}

}  // namespace

AugmentedPair strong_augment(const ImagePair& pair, const AugmentConfig& cfg,
                             Rng& rng) {
  cfg.validate();
  DrawLog log;
  RasterImage b1 = strong_one(pair.t1, pair.t2, cfg, rng, "t1", log);
  RasterImage b2 = strong_one(pair.t2, pair.t1, cfg, rng, "t2", log);
  return AugmentedPair{std::move(b1), std::move(b2), std::move(log)};
}

namespace {

void flip_buf(std::vector<double>& pix, int h, int w, int c, bool hflip,
              bool vflip) {
  std::vector<double> out(pix.size());
  for (int r = 0; r < h; ++r) {
    int sr = vflip ? h - 1 - r : r;
    for (int col = 0; col < w; ++col) {
      int sc = hflip ? w - 1 - col : col;
      for (int ch = 0; ch < c; ++ch)
        out[(static_cast<size_t>(r) * w + col) * c + ch] =
            pix[(static_cast<size_t>(sr) * w + sc) * c + ch];
    }
  }
  pix = std::move(out);
}

void flip_mask(BinaryMask& m, bool hflip, bool vflip) {
  BinaryMask out(m.h, m.w);
  for (int r = 0; r < m.h; ++r)
    for (int c = 0; c < m.w; ++c)
      out.set(r, c, m.at(vflip ? m.h - 1 - r : r, hflip ? m.w - 1 - c : c));
  m = std::move(out);
}

}  // namespace

ImagePair weak_augment(const ImagePair& pair, Rng& rng, bool enable_crop) {
  bool hflip = rng.bernoulli(0.5);
  bool vflip = rng.bernoulli(0.5);
  const int h = pair.t1.height(), w = pair.t1.width();

  int r0 = 0, c0 = 0, ch_ = h, cw = w;
  if (enable_crop) {
    // >= 50% area: linear fraction in [sqrt(0.5), 1]
    double f = rng.uniform(std::sqrt(0.5), 1.0);
    ch_ = std::max(2, static_cast<int>(std::lround(f * h)));
    cw = std::max(2, static_cast<int>(std::lround(f * w)));
    r0 = rng.uniform_int(0, h - ch_);
    c0 = rng.uniform_int(0, w - cw);
  }

  auto xform_img = [&](const RasterImage& img) {
    std::vector<double> pix = img.pixels();
    flip_buf(pix, h, w, img.channels(), hflip, vflip);
    if (enable_crop && (ch_ != h || cw != w || r0 || c0)) {
      std::vector<double> crop(static_cast<size_t>(ch_) * cw * img.channels());
      for (int r = 0; r < ch_; ++r)
        for (int c = 0; c < cw; ++c)
          for (int k = 0; k < img.channels(); ++k)
            crop[(static_cast<size_t>(r) * cw + c) * img.channels() + k] =
                pix[(static_cast<size_t>(r + r0) * w + (c + c0)) *
                        img.channels() + k];
      resize_bilinear_buf(crop, ch_, cw, img.channels(), h, w, pix);
      for (auto& v : pix) v = clip01(v);
    }
    return RasterImage(h, w, img.channels(), std::move(pix));
  };

  auto xform_mask = [&](const BinaryMask& m) {
    BinaryMask out = m;
    flip_mask(out, hflip, vflip);
    if (enable_crop && (ch_ != h || cw != w || r0 || c0)) {
      BinaryMask res(h, w);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          // nearest-neighbor back-map into the crop window
          int sr = r0 + std::min(ch_ - 1, static_cast<int>((r + 0.5) * ch_ / h));
          int sc = c0 + std::min(cw - 1, static_cast<int>((c + 0.5) * cw / w));
          res.set(r, c, out.at(sr, sc));
        }
      out = std::move(res);
    }
    return out;
  };

  std::optional<BinaryMask> lbl;
  if (pair.label) lbl = xform_mask(*pair.label);
  return ImagePair(xform_img(pair.t1), xform_img(pair.t2), std::move(lbl));
}

}  // namespace s2c::augment
