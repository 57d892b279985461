#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "s2c/errors.hpp"
#include "s2c/tensor.hpp"

namespace s2c {

// Co-registered raster with values in [0,1], layout H x W x C.
class RasterImage {
 public:
  RasterImage(int h, int w, int c, double fill = 0.0)
      : h_(h), w_(w), c_(c), pix_(static_cast<size_t>(h) * w * c, fill) {
    check_dims();
  }
  RasterImage(int h, int w, int c, std::vector<double> pixels)
      : h_(h), w_(w), c_(c), pix_(std::move(pixels)) {
    check_dims();
    if (pix_.size() != static_cast<size_t>(h_) * w_ * c_)
      throw ShapeMismatch("RasterImage: pixel buffer size mismatch");
    validate_values();
  }

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }

  double at(int r, int c, int ch) const {
    return pix_[(static_cast<size_t>(r) * w_ + c) * c_ + ch];
  }
  // Write access skips range checks; call validate_values() when done.
  double& at(int r, int c, int ch) {
    return pix_[(static_cast<size_t>(r) * w_ + c) * c_ + ch];
  }

  const std::vector<double>& pixels() const { return pix_; }
  std::vector<double>& pixels() { return pix_; }

  std::optional<double> resolution_m;

  void validate_values() const {
    for (double v : pix_)
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw ValueRange("RasterImage: pixel outside [0,1] or non-finite");
  }

  bool same_shape(const RasterImage& o) const {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

 private:
  void check_dims() const {
    if (h_ < 32 || w_ < 32)
      throw ShapeMismatch("RasterImage: H and W must be >= 32");
    if (c_ != 1 && c_ != 3)
      throw ShapeMismatch("RasterImage: channels must be 1 or 3");
  }

  int h_, w_, c_;
  std::vector<double> pix_;
};

// Binary H x W mask.
struct BinaryMask {
  int h = 0, w = 0;
  std::vector<uint8_t> bits;  // 0/1

  BinaryMask() = default;
  BinaryMask(int h_, int w_, bool fill = false)
      : h(h_), w(w_), bits(static_cast<size_t>(h_) * w_, fill ? 1 : 0) {}

  bool at(int r, int c) const { return bits[static_cast<size_t>(r) * w + c]; }
  void set(int r, int c, bool v) {
    bits[static_cast<size_t>(r) * w + c] = v ? 1 : 0;
  }
  int64_t area() const {
    int64_t n = 0;
    for (uint8_t b : bits) n += b;
    return n;
  }
  bool same_shape(const BinaryMask& o) const { return h == o.h && w == o.w; }
  bool operator==(const BinaryMask& o) const {
    return h == o.h && w == o.w && bits == o.bits;
  }
};

// Ordered collection of same-shape masks (may be empty).
struct MaskSet {
  std::vector<BinaryMask> masks;

  void push(BinaryMask m) {
    if (!masks.empty() && !masks.front().same_shape(m))
      throw ShapeMismatch("MaskSet: inhomogeneous mask shapes");
    masks.push_back(std::move(m));
  }
  size_t size() const { return masks.size(); }
  bool empty() const { return masks.empty(); }
};

struct ImagePair {
  RasterImage t1;
  RasterImage t2;
  std::optional<BinaryMask> label;  // evaluation only, never used in training

  ImagePair(RasterImage a, RasterImage b,
            std::optional<BinaryMask> lbl = std::nullopt)
      : t1(std::move(a)), t2(std::move(b)), label(std::move(lbl)) {
    if (t1.height() != t2.height() || t1.width() != t2.width())
      throw ShapeMismatch("ImagePair: t1/t2 dimensions differ");
    if (label && (label->h != t1.height() || label->w != t1.width()))
      throw ShapeMismatch("ImagePair: label dimensions differ");
  }
};

// Encoder output: c x h x w feature grid.
struct LatentMap {
  int c = 0, h = 0, w = 0;
  int patch_stride = 1;  // input pixels per latent cell
  std::vector<double> features;  // layout c x h x w

  LatentMap() = default;
  LatentMap(int c_, int h_, int w_, int stride, double fill = 0.0)
      : c(c_), h(h_), w(w_), patch_stride(stride),
        features(static_cast<size_t>(c_) * h_ * w_, fill) {}

  double at(int ch, int r, int col) const {
    return features[(static_cast<size_t>(ch) * h + r) * w + col];
  }
  double& at(int ch, int r, int col) {
    return features[(static_cast<size_t>(ch) * h + r) * w + col];
  }
  bool same_shape(const LatentMap& o) const {
    return c == o.c && h == o.h && w == o.w;
  }
  int64_t numel() const { return static_cast<int64_t>(features.size()); }
};

// h x w change probability map in [0,1]. Stored in float32 so it round-trips
// the tensor file format bit-exactly.
struct ChangeProbMap {
  int h = 0, w = 0;
  std::vector<float> probs;

  ChangeProbMap() = default;
  ChangeProbMap(int h_, int w_, float fill = 0.f)
      : h(h_), w(w_), probs(static_cast<size_t>(h_) * w_, fill) {}

  float at(int r, int c) const { return probs[static_cast<size_t>(r) * w + c]; }
  void set(int r, int c, float v) {
    if (!(v >= 0.f && v <= 1.f))
      throw ValueRange("ChangeProbMap: value outside [0,1]");
    probs[static_cast<size_t>(r) * w + c] = v;
  }
};

struct LossWeights {
  double alpha = 0.2;
  double beta = 1.0;
  // Weight of the temporal-contrast (triplet) term. 1 in the reference
  // configuration; setting it to 0 isolates the spatial-contrast paradigm in
  // ablation runs.
  double gamma = 1.0;

  void validate() const {
    if (!(std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma)) ||
        alpha < 0 || beta < 0 || gamma < 0)
      throw ValueRange("LossWeights: alpha/beta/gamma must be finite and >= 0");
  }
};

struct TripletConfig {
  double margin = 1.0;

  void validate() const {
    if (!(margin >= 0)) throw ValueRange("TripletConfig: margin must be >= 0");
  }
};

struct SparsityConfig {
  double threshold_T = 0.2;
  int grid_d = 16;

  void validate() const {
    if (!(threshold_T > 0 && threshold_T < 1))
      throw ValueRange("SparsityConfig: T must be in (0,1)");
    if (grid_d < 1) throw ValueRange("SparsityConfig: grid_d must be >= 1");
  }
};

struct MappingConfig {
  double eta = 2.6592600369327783;  // ln(1/0.07)

  void validate() const {
    if (!(eta > 0)) throw ValueRange("MappingConfig: eta must be > 0");
  }
};

struct RefineConfig {
  double iou_threshold = 0.5;

  void validate() const {
    if (!(iou_threshold > 0 && iou_threshold < 1))
      throw ValueRange("RefineConfig: iou_threshold must be in (0,1)");
  }
};

// Returns the pair unchanged when all invariants hold.
const ImagePair& validate(const ImagePair& pair);

}  // namespace s2c
