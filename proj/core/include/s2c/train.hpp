#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "s2c/augment.hpp"
#include "s2c/encoder.hpp"
#include "s2c/losses.hpp"
#include "s2c/rng.hpp"
#include "s2c/types.hpp"

namespace s2c::train {

enum class Mode { kHomogeneous, kMmcd };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double lr0 = 0.01;
  double schedule_power = 1.5;
  double momentum = 0.9;  // Nesterov
  LossWeights weights;    // alpha=0.2, beta=1.0
  SparsityConfig sparsity{0.2, 2};  // desk-scale grid on latent-res maps
  TripletConfig triplet;
  augment::AugmentConfig augment;
  MappingConfig mapping;
  uint64_t seed = 0;
  // Seed of the frozen reference backbone. A backbone checkpoint is a fixed
  // artifact shared across training runs, so this is independent of `seed`
  // (which drives run-to-run stochasticity: batch order, augmentation draws,
  // adapter init).
  uint64_t init_seed = 0xA11CE;
  Mode mode = Mode::kHomogeneous;
  bool weak_aug_enable = true;
  bool weak_aug_crop = false;
  int latent_channels = 32;
  int patch_stride = 8;
  bool use_lora = false;
  encoder::LoRAConfig lora;

  void validate() const {
    if (epochs < 1) throw ValueRange("TrainConfig: epochs >= 1");
    if (batch_size < 2) throw ValueRange("TrainConfig: batch_size >= 2");
    if (!(lr0 > 0)) throw ValueRange("TrainConfig: lr0 > 0");
    weights.validate();
    sparsity.validate();
    triplet.validate();
    augment.validate();
    mapping.validate();
  }
};

struct LossBreakdown {
  double tri = 0, info = 0, spa = 0, total = 0, lr = 0;
};

struct TrainState {
  int64_t iteration = 0;
  int64_t total_iterations = 0;
  encoder::EncoderSpec spec;       // homogeneous / optical branch
  encoder::EncoderParams params;
  std::optional<encoder::EncoderSpec> sar_spec;  // mmcd second branch
  std::optional<encoder::EncoderParams> sar_params;
  encoder::ParamGrads momentum_buf;      // per trainable tensor
  encoder::ParamGrads sar_momentum_buf;
  Rng rng{0};
  double best_f1 = -1.0;
  int best_epoch = -1;
  encoder::EncoderParams best_params;
  std::optional<encoder::EncoderParams> best_sar_params;
};

// Polynomial decay lr0 * (1 - it/total)^power.
double lr_at(int64_t it, int64_t total, const TrainConfig& cfg);

// Nesterov momentum, the "effective weight" form:
//   v <- mu*v - lr*g;  p <- p + mu*v - lr*g
// applied per trainable tensor; frozen tensors are never touched.
void sgd_nesterov_step(encoder::EncoderParams& params,
                       const encoder::EncoderSpec& spec,
                       const encoder::ParamGrads& grads,
                       encoder::ParamGrads& buffers, double lr,
                       double momentum);

// One optimization step over a batch of pairs: weak+strong augmentation,
// encoding, the three losses, backward, Nesterov update.
LossBreakdown train_step(TrainState& state, const std::vector<ImagePair>& batch,
                         const TrainConfig& cfg);

// Mean F1 of binarize(change_prob_map(...), 0.5) against the labels, with
// the parameters passed through a float32 round trip so the number matches
// what a saved checkpoint reproduces.
double evaluate_f1(const encoder::EncoderSpec& spec,
                   const encoder::EncoderParams& params,
                   const std::optional<encoder::EncoderSpec>& sar_spec,
                   const std::optional<encoder::EncoderParams>& sar_params,
                   const std::vector<ImagePair>& dataset,
                   const MappingConfig& mcfg);

// Full training loop with per-epoch validation and best-F1 checkpointing.
// log, when non-null, receives line-delimited iteration and epoch records.
TrainState fit(const std::vector<ImagePair>& dataset,
               const std::vector<ImagePair>& val_dataset,
               const TrainConfig& cfg, std::ostream* log = nullptr);

// Central finite differences against an analytic gradient.
struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
};
GradCheckReport grad_check(
    const std::function<double(const encoder::EncoderParams&)>& loss_fn,
    const std::function<encoder::ParamGrads(const encoder::EncoderParams&)>&
        grad_fn,
    const encoder::EncoderParams& params, double eps);

// Float32 round trip of every tensor (checkpoint-equivalent precision).
encoder::EncoderParams quantize_f32(const encoder::EncoderParams& params);

}  // namespace s2c::train
