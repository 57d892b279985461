#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "s2c/rng.hpp"
#include "s2c/tensor.hpp"
#include "s2c/types.hpp"

namespace s2c::encoder {

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  bool trainable = true;
};

// A LoRA site wraps one 1x1 projection: effective weight W + scaling * B*A.
struct LoraSite {
  std::string target;  // base weight tensor name, e.g. "proj.w"
  int rank = 4;
  double scaling = 1.0;
};

struct EncoderSpec {
  std::string name;
  int channels_in = 3;
  int latent_channels = 32;
  int patch_stride = 8;
  int hidden = 32;
  int n_blocks = 3;  // log2(patch_stride)
  std::vector<TensorInfo> manifest;
  std::vector<LoraSite> lora;

  const TensorInfo* find(const std::string& tensor_name) const;
  int64_t trainable_count() const;
};

using EncoderParams = std::map<std::string, Tensor>;
using ParamGrads = std::map<std::string, Tensor>;

struct LoRAConfig {
  int rank = 4;
  double scaling = 1.0;
  std::vector<std::string> target_patterns = {"proj"};  // substring match

  void validate() const {
    if (rank < 1) throw ValueRange("LoRAConfig: rank must be >= 1");
  }
};

// Activations saved during a forward pass for the backward pass.
struct EncodeTape {
  std::vector<Tensor> inputs;    // per conv block, [c_in, h, w]
  std::vector<Tensor> preacts;   // per conv block, pre-activation [c_out, h, w]
  Tensor hidden;                 // input to the 1x1 projection
};

// Small conv stack: per-channel input standardization and binomial
// antialiasing, log2(stride) blocks of (3x3 conv, stride 2, zero pad 1,
// softplus), a 1x1 projection to latent_channels, and global per-channel
// latent centering. Stands in for an off-the-shelf pretrained backbone.
std::pair<EncoderSpec, EncoderParams> reference_encoder(int channels_in,
                                                        int latent_channels,
                                                        int patch_stride,
                                                        Rng& rng);

// Wrap matched 1x1 projection layers with LoRA factors; base tensors are
// frozen, A gets a random fan-in init and B starts at zero so the wrap is
// output-identical.
std::pair<EncoderSpec, EncoderParams> apply_lora(const EncoderSpec& spec,
                                                 const EncoderParams& params,
                                                 const LoRAConfig& cfg,
                                                 Rng& rng);

LatentMap encode(const EncoderSpec& spec, const EncoderParams& params,
                 const RasterImage& img);
LatentMap encode_fwd(const EncoderSpec& spec, const EncoderParams& params,
                     const RasterImage& img, EncodeTape& tape);

// Accumulates d(loss)/d(param) for trainable tensors into grads; frozen
// tensors receive no entry.
void encode_bwd(const EncoderSpec& spec, const EncoderParams& params,
                const EncodeTape& tape, const LatentMap& dlatent,
                ParamGrads& grads);

}  // namespace s2c::encoder
