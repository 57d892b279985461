#pragma once

#include "s2c/encoder.hpp"
#include "s2c/losses.hpp"
#include "s2c/mapping.hpp"
#include "s2c/types.hpp"

namespace s2c::mmcd {

// Two independent encoders; the optical branch may carry LoRA, the second
// modality uses a plain trainable encoder. Latent geometry must agree.
struct DualEncoder {
  encoder::EncoderSpec rgb_spec;
  encoder::EncoderParams rgb_params;
  encoder::EncoderSpec sar_spec;
  encoder::EncoderParams sar_params;

  DualEncoder(encoder::EncoderSpec rs, encoder::EncoderParams rp,
              encoder::EncoderSpec ss, encoder::EncoderParams sp);
};

// Optical-centric single-sided triplet: anchor y_rgb, positive its augmented
// copy, negative the other modality.
double het_triplet(const LatentMap& y_rgb, const LatentMap& y_sar,
                   const LatentMap& bar_y_rgb, const TripletConfig& cfg);
double het_triplet_backward(const LatentMap& y_rgb, const LatentMap& y_sar,
                            const LatentMap& bar_y_rgb,
                            const TripletConfig& cfg, LatentMap* g_rgb,
                            LatentMap* g_sar, LatentMap* g_bar_rgb);

// Symmetric cross-modal infoNCE on unaugmented latents.
double het_info_nce(const losses::LatentBatch& y_rgb,
                    const losses::LatentBatch& y_sar);
double het_info_nce_backward(const losses::LatentBatch& y_rgb,
                             const losses::LatentBatch& y_sar,
                             std::vector<LatentMap>* g_rgb,
                             std::vector<LatentMap>* g_sar);

// change_prob_map over the two modality latents, then binarize; the
// refinement stage is deliberately absent in the multimodal path.
BinaryMask mmcd_infer(const DualEncoder& dual, const RasterImage& rgb,
                      const RasterImage& sar, const MappingConfig& mcfg,
                      double thresh);

}  // namespace s2c::mmcd
