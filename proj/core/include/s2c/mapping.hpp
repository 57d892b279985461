#pragma once

#include <vector>

#include "s2c/types.hpp"

namespace s2c::mapping {

struct Prompt {
  int lat_row = 0, lat_col = 0;  // latent-grid coordinates
  int img_row = 0, img_col = 0;  // upscaled image coordinates
  double peak = 0.0;             // peak probability of the source component
};

using PromptSet = std::vector<Prompt>;

// Anything that can turn spatial prompts into object masks at image
// resolution (a VFM decoder in the full system).
class MaskProposer {
 public:
  virtual ~MaskProposer() = default;
  virtual MaskSet propose(const RasterImage& img,
                          const PromptSet& prompts) const = 0;
};

// Desk-scale proposer: flood-fills the connected region of pixels whose
// color stays within tol of the prompt seed color.
class ColorRegionProposer : public MaskProposer {
 public:
  explicit ColorRegionProposer(double tol = 0.12) : tol_(tol) {}
  MaskSet propose(const RasterImage& img,
                  const PromptSet& prompts) const override;

 private:
  double tol_;
};

// Per-patch sigmoid(-cos * eta); values strictly inside (0,1).
ChangeProbMap change_prob_map(const LatentMap& y1, const LatentMap& y2,
                              const MappingConfig& cfg);

// Same map plus d(prob)/d(latents) chaining support: accumulates
// sum_p g_p * d(prob_p)/d(y1|y2) where g is an h x w upstream gradient.
ChangeProbMap change_prob_map_fwd(const LatentMap& y1, const LatentMap& y2,
                                  const MappingConfig& cfg);
void change_prob_map_backward(const LatentMap& y1, const LatentMap& y2,
                              const MappingConfig& cfg,
                              const std::vector<double>& upstream,
                              LatentMap* g_y1, LatentMap* g_y2);

// Threshold, 4-connected components, probability-weighted centroids, ranked
// by component peak probability. image_scale maps latent cells to pixels.
PromptSet extract_prompts(const ChangeProbMap& yc, double thresh,
                          int max_points, int image_scale = 1);

double iou(const BinaryMask& a, const BinaryMask& b);

// XOR-alike merge: greedy removal (index order) of cross-set pairs whose IoU
// exceeds the threshold, then concatenation of survivors.
MaskSet xor_merge(const MaskSet& m1, const MaskSet& m2,
                  const RefineConfig& cfg);

// Full IoU matching and refinement: xor_merge, then keep masks whose mean
// change probability exceeds the threshold; pixels outside the union of all
// candidate masks fall back to yc > 0.5.
BinaryMask iou_refine(const ChangeProbMap& yc, const MaskSet& m1,
                      const MaskSet& m2, const RefineConfig& cfg, int out_h,
                      int out_w);

// Pixel-wise yc > thresh, nearest-neighbor upsampled to out_h x out_w.
BinaryMask binarize(const ChangeProbMap& yc, double thresh, int out_h,
                    int out_w);

// Nearest-neighbor upsample of a probability map to image resolution.
ChangeProbMap upsample_nearest(const ChangeProbMap& yc, int out_h, int out_w);

}  // namespace s2c::mapping
