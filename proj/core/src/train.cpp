#include "s2c/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "s2c/eval.hpp"
#include "s2c/mapping.hpp"
#include "s2c/mmcd.hpp"

namespace s2c::train {

double lr_at(int64_t it, int64_t total, const TrainConfig& cfg) {
  if (total < 1 || it < 0 || it > total)
    throw ValueRange("lr_at: need 0 <= it <= total, total >= 1");
  double frac = 1.0 - static_cast<double>(it) / static_cast<double>(total);
  return cfg.lr0 * std::pow(frac, cfg.schedule_power);
}

void sgd_nesterov_step(encoder::EncoderParams& params,
                       const encoder::EncoderSpec& spec,
                       const encoder::ParamGrads& grads,
                       encoder::ParamGrads& buffers, double lr,
                       double momentum) {
  for (const auto& [name, g] : grads) {
    const encoder::TensorInfo* info = spec.find(name);
    if (!info || !info->trainable) continue;
    Tensor& p = params.at(name);
    require_same_shape(p, g, "sgd_nesterov_step");
    auto it = buffers.find(name);
    if (it == buffers.end()) it = buffers.emplace(name, Tensor(g.shape)).first;
    Tensor& v = it->second;
    // v <- mu*v - lr*g ; p <- p + mu*v - lr*g  (lookahead form)
    for (size_t i = 0; i < p.data.size(); ++i) {
      v.data[i] = momentum * v.data[i] - lr * g.data[i];
      p.data[i] += momentum * v.data[i] - lr * g.data[i];
    }
  }
}

encoder::EncoderParams quantize_f32(const encoder::EncoderParams& params) {
  encoder::EncoderParams out = params;
  for (auto& [name, t] : out)
    for (auto& v : t.data) v = static_cast<double>(static_cast<float>(v));
  return out;
}

namespace {

LossBreakdown step_homogeneous(TrainState& state,
                               const std::vector<ImagePair>& batch,
                               const TrainConfig& cfg) {
  const size_t n = batch.size();
  std::vector<LatentMap> y1(n), y2(n), b1(n), b2(n);
  std::vector<encoder::EncodeTape> t_y1(n), t_y2(n), t_b1(n), t_b2(n);

  for (size_t i = 0; i < n; ++i) {
    Rng item_rng = state.rng.split(i + 1);
    const ImagePair* pair = &batch[i];
    std::optional<ImagePair> weak;
    if (cfg.weak_aug_enable) {
      ImagePair unlabeled(batch[i].t1, batch[i].t2);  // label never trains
      weak = augment::weak_augment(unlabeled, item_rng, cfg.weak_aug_crop);
      pair = &*weak;
    }
    augment::AugmentedPair aug =
        augment::strong_augment(*pair, cfg.augment, item_rng);
    y1[i] = encoder::encode_fwd(state.spec, state.params, pair->t1, t_y1[i]);
    y2[i] = encoder::encode_fwd(state.spec, state.params, pair->t2, t_y2[i]);
    b1[i] = encoder::encode_fwd(state.spec, state.params, aug.bar_t1, t_b1[i]);
    b2[i] = encoder::encode_fwd(state.spec, state.params, aug.bar_t2, t_b2[i]);
  }

  auto zeros_like = [](const LatentMap& m) {
    return LatentMap(m.c, m.h, m.w, m.patch_stride);
  };
  std::vector<LatentMap> g_y1, g_y2, g_b1, g_b2;
  for (size_t i = 0; i < n; ++i) {
    g_y1.push_back(zeros_like(y1[i]));
    g_y2.push_back(zeros_like(y2[i]));
    g_b1.push_back(zeros_like(b1[i]));
    g_b2.push_back(zeros_like(b2[i]));
  }

  LossBreakdown out;

  // CTC triplet, averaged over the batch.
  {
    std::vector<LatentMap> tg_y1 = g_y1;  // accumulate then rescale
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      LatentMap gy1 = zeros_like(y1[i]), gb1v = zeros_like(b1[i]);
      LatentMap gy2 = zeros_like(y2[i]), gb2v = zeros_like(b2[i]);
      acc += losses::triplet_loss_backward(y1[i], b1[i], y2[i], b2[i],
                                           cfg.triplet, &gy1, &gb1v, &gy2,
                                           &gb2v);
      const double s = cfg.weights.gamma / n;
      for (size_t k = 0; k < gy1.features.size(); ++k) {
        g_y1[i].features[k] += s * gy1.features[k];
        g_y2[i].features[k] += s * gy2.features[k];
        g_b1[i].features[k] += s * gb1v.features[k];
        g_b2[i].features[k] += s * gb2v.features[k];
      }
    }
    out.tri = acc / n;
  }

  // CSC infoNCE across the batch.
  {
    std::vector<LatentMap> gi_y1, gi_y2, gi_b1, gi_b2;
    for (size_t i = 0; i < n; ++i) {
      gi_y1.push_back(zeros_like(y1[i]));
      gi_y2.push_back(zeros_like(y2[i]));
      gi_b1.push_back(zeros_like(b1[i]));
      gi_b2.push_back(zeros_like(b2[i]));
    }
    out.info = losses::info_nce_backward(y1, y2, b1, b2, &gi_y1, &gi_y2,
                                         &gi_b1, &gi_b2);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < gi_y1[i].features.size(); ++k) {
        g_y1[i].features[k] += cfg.weights.alpha * gi_y1[i].features[k];
        g_y2[i].features[k] += cfg.weights.alpha * gi_y2[i].features[k];
        g_b1[i].features[k] += cfg.weights.alpha * gi_b1[i].features[k];
        g_b2[i].features[k] += cfg.weights.alpha * gi_b2[i].features[k];
      }
  }

  // Grid sparsity on the clean-pair change map, averaged over the batch.
  {
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      ChangeProbMap yc = mapping::change_prob_map(y1[i], y2[i], cfg.mapping);
      std::vector<double> dyc(yc.probs.size(), 0.0);
      acc += losses::grid_sparsity_backward(yc, cfg.sparsity, &dyc);
      const double s = cfg.weights.beta / n;
      for (auto& v : dyc) v *= s;
      mapping::change_prob_map_backward(y1[i], y2[i], cfg.mapping, dyc,
                                        &g_y1[i], &g_y2[i]);
    }
    out.spa = acc / n;
  }

  out.total = losses::total_loss(out.tri, out.info, out.spa, cfg.weights);
  if (!std::isfinite(out.total))
    throw ValueRange("train_step: non-finite loss");

  encoder::ParamGrads grads;
  for (size_t i = 0; i < n; ++i) {
    encoder::encode_bwd(state.spec, state.params, t_y1[i], g_y1[i], grads);
    encoder::encode_bwd(state.spec, state.params, t_y2[i], g_y2[i], grads);
    encoder::encode_bwd(state.spec, state.params, t_b1[i], g_b1[i], grads);
    encoder::encode_bwd(state.spec, state.params, t_b2[i], g_b2[i], grads);
  }

  out.lr = lr_at(state.iteration, state.total_iterations, cfg);
  sgd_nesterov_step(state.params, state.spec, grads, state.momentum_buf,
                    out.lr, cfg.momentum);
  state.iteration++;
  return out;
}

LossBreakdown step_mmcd(TrainState& state, const std::vector<ImagePair>& batch,
                        const TrainConfig& cfg) {
  const size_t n = batch.size();
  const encoder::EncoderSpec& sspec = *state.sar_spec;
  encoder::EncoderParams& sparams = *state.sar_params;

  std::vector<LatentMap> y_rgb(n), y_sar(n), b_rgb(n);
  std::vector<encoder::EncodeTape> t_rgb(n), t_sar(n), t_brgb(n);
  for (size_t i = 0; i < n; ++i) {
    Rng item_rng = state.rng.split(i + 1);
    const ImagePair* pair = &batch[i];
    std::optional<ImagePair> weak;
    if (cfg.weak_aug_enable) {
      ImagePair unlabeled(batch[i].t1, batch[i].t2);
      weak = augment::weak_augment(unlabeled, item_rng, cfg.weak_aug_crop);
      pair = &*weak;
    }
    augment::AugmentedPair aug =
        augment::strong_augment(*pair, cfg.augment, item_rng);
    y_rgb[i] = encoder::encode_fwd(state.spec, state.params, pair->t1, t_rgb[i]);
    y_sar[i] = encoder::encode_fwd(sspec, sparams, pair->t2, t_sar[i]);
    b_rgb[i] =
        encoder::encode_fwd(state.spec, state.params, aug.bar_t1, t_brgb[i]);
  }

  auto zeros_like = [](const LatentMap& m) {
    return LatentMap(m.c, m.h, m.w, m.patch_stride);
  };
  std::vector<LatentMap> g_rgb, g_sar, g_brgb;
  for (size_t i = 0; i < n; ++i) {
    g_rgb.push_back(zeros_like(y_rgb[i]));
    g_sar.push_back(zeros_like(y_sar[i]));
    g_brgb.push_back(zeros_like(b_rgb[i]));
  }

  LossBreakdown out;
  {
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      LatentMap gr = zeros_like(y_rgb[i]), gs = zeros_like(y_sar[i]),
                gb = zeros_like(b_rgb[i]);
      acc += mmcd::het_triplet_backward(y_rgb[i], y_sar[i], b_rgb[i],
                                        cfg.triplet, &gr, &gs, &gb);
      const double s = cfg.weights.gamma / n;
      for (size_t k = 0; k < gr.features.size(); ++k) {
        g_rgb[i].features[k] += s * gr.features[k];
        g_sar[i].features[k] += s * gs.features[k];
        g_brgb[i].features[k] += s * gb.features[k];
      }
    }
    out.tri = acc / n;
  }
  {
    std::vector<LatentMap> gi_rgb, gi_sar;
    for (size_t i = 0; i < n; ++i) {
      gi_rgb.push_back(zeros_like(y_rgb[i]));
      gi_sar.push_back(zeros_like(y_sar[i]));
    }
    out.info = mmcd::het_info_nce_backward(y_rgb, y_sar, &gi_rgb, &gi_sar);
    for (size_t i = 0; i < n; ++i)
      for (size_t k = 0; k < gi_rgb[i].features.size(); ++k) {
        g_rgb[i].features[k] += cfg.weights.alpha * gi_rgb[i].features[k];
        g_sar[i].features[k] += cfg.weights.alpha * gi_sar[i].features[k];
      }
  }
  {
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      ChangeProbMap yc =
          mapping::change_prob_map(y_rgb[i], y_sar[i], cfg.mapping);
      std::vector<double> dyc(yc.probs.size(), 0.0);
      acc += losses::grid_sparsity_backward(yc, cfg.sparsity, &dyc);
      const double s = cfg.weights.beta / n;
      for (auto& v : dyc) v *= s;
      mapping::change_prob_map_backward(y_rgb[i], y_sar[i], cfg.mapping, dyc,
                                        &g_rgb[i], &g_sar[i]);
    }
    out.spa = acc / n;
  }
  out.total = losses::total_loss(out.tri, out.info, out.spa, cfg.weights);
  if (!std::isfinite(out.total))
    throw ValueRange("train_step: non-finite loss");

  encoder::ParamGrads grads_rgb, grads_sar;
  for (size_t i = 0; i < n; ++i) {
    encoder::encode_bwd(state.spec, state.params, t_rgb[i], g_rgb[i], grads_rgb);
    encoder::encode_bwd(state.spec, state.params, t_brgb[i], g_brgb[i],
                        grads_rgb);
    encoder::encode_bwd(sspec, sparams, t_sar[i], g_sar[i], grads_sar);
  }

  out.lr = lr_at(state.iteration, state.total_iterations, cfg);
  sgd_nesterov_step(state.params, state.spec, grads_rgb, state.momentum_buf,
                    out.lr, cfg.momentum);
  sgd_nesterov_step(sparams, sspec, grads_sar, state.sar_momentum_buf, out.lr,
                    cfg.momentum);
  state.iteration++;
  return out;
}

}  // namespace

LossBreakdown train_step(TrainState& state, const std::vector<ImagePair>& batch,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (batch.size() < 2) throw BatchTooSmall("train_step: batch size >= 2");
  if (state.total_iterations < 1) state.total_iterations = 1;
  return cfg.mode == Mode::kMmcd ? step_mmcd(state, batch, cfg)
                                 : step_homogeneous(state, batch, cfg);
}

double evaluate_f1(const encoder::EncoderSpec& spec,
                   const encoder::EncoderParams& params,
                   const std::optional<encoder::EncoderSpec>& sar_spec,
                   const std::optional<encoder::EncoderParams>& sar_params,
                   const std::vector<ImagePair>& dataset,
                   const MappingConfig& mcfg) {
  encoder::EncoderParams q = quantize_f32(params);
  std::optional<encoder::EncoderParams> qs;
  if (sar_params) qs = quantize_f32(*sar_params);

  eval::ConfusionCounts acc;
  for (const auto& pair : dataset) {
    if (!pair.label) continue;
    LatentMap a = encoder::encode(spec, q, pair.t1);
    LatentMap b = sar_spec ? encoder::encode(*sar_spec, *qs, pair.t2)
                           : encoder::encode(spec, q, pair.t2);
    ChangeProbMap yc = mapping::change_prob_map(a, b, mcfg);
    BinaryMask pred =
        mapping::binarize(yc, 0.5, pair.t1.height(), pair.t1.width());
    eval::ConfusionCounts c = eval::confusion(pred, *pair.label);
    acc.tp += c.tp;
    acc.fp += c.fp;
    acc.tn += c.tn;
    acc.fn += c.fn;
  }
  if (acc.total() == 0) throw EmptyDataset("evaluate_f1: no labeled pairs");
  return eval::metrics(acc).f1;
}

TrainState fit(const std::vector<ImagePair>& dataset,
               const std::vector<ImagePair>& val_dataset,
               const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (dataset.empty()) throw EmptyDataset("fit: empty dataset");

  TrainState state;
  state.rng = Rng(cfg.seed);
  Rng init_rng(cfg.init_seed);
  auto [spec, params] = encoder::reference_encoder(
      dataset.front().t1.channels(), cfg.latent_channels, cfg.patch_stride,
      init_rng);
  if (cfg.use_lora) {
    Rng lora_rng = state.rng.split(0x10A);
    std::tie(spec, params) = encoder::apply_lora(spec, params, cfg.lora,
                                                 lora_rng);
  }
  state.spec = std::move(spec);
  state.params = std::move(params);
  if (cfg.mode == Mode::kMmcd) {
    Rng sar_rng(cfg.init_seed ^ 0x5A5);
    auto [ss, sp] = encoder::reference_encoder(dataset.front().t2.channels(),
                                               cfg.latent_channels,
                                               cfg.patch_stride, sar_rng);
    state.sar_spec = std::move(ss);
    state.sar_params = std::move(sp);
  }

  const int64_t batches_per_epoch =
      (static_cast<int64_t>(dataset.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  state.total_iterations = static_cast<int64_t>(cfg.epochs) * batches_per_epoch;

  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // deterministic shuffle from the state rng
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[state.rng.uniform_int(0, static_cast<int>(i) - 1)]);

    for (int64_t b = 0; b < batches_per_epoch; ++b) {
      std::vector<ImagePair> batch;
      for (int k = 0; k < cfg.batch_size; ++k) {
        size_t idx = (static_cast<size_t>(b) * cfg.batch_size + k);
        if (idx >= dataset.size()) break;
        batch.push_back(dataset[order[idx]]);
      }
      while (batch.size() < 2)  // degenerate tail batch: wrap around
        batch.push_back(dataset[order[0]]);
      LossBreakdown lb = train_step(state, batch, cfg);
      if (log)
        *log << "iter=" << state.iteration << " lr=" << lb.lr
             << " tri=" << lb.tri << " info=" << lb.info << " spa=" << lb.spa
             << " total=" << lb.total << "\n";
    }

    double f1 = evaluate_f1(state.spec, state.params, state.sar_spec,
                            state.sar_params,
                            val_dataset.empty() ? dataset : val_dataset,
                            cfg.mapping);
    if (f1 > state.best_f1) {
      state.best_f1 = f1;
      state.best_epoch = epoch;
      state.best_params = state.params;
      if (state.sar_params) state.best_sar_params = state.sar_params;
    }
    if (log)
      *log << "epoch=" << epoch << " val_f1=" << f1
           << " best_f1=" << state.best_f1 << "\n";
  }
  return state;
}

GradCheckReport grad_check(
    const std::function<double(const encoder::EncoderParams&)>& loss_fn,
    const std::function<encoder::ParamGrads(const encoder::EncoderParams&)>&
        grad_fn,
    const encoder::EncoderParams& params, double eps) {
  if (eps < 1e-6 || eps > 1e-3)
    throw ValueRange("grad_check: eps in [1e-6, 1e-3]");
  encoder::ParamGrads analytic = grad_fn(params);
  GradCheckReport report;
  encoder::EncoderParams work = params;
  for (const auto& [name, p] : params) {
    GradCheckEntry entry;
    entry.name = name;
    const Tensor* an = nullptr;
    auto it = analytic.find(name);
    if (it != analytic.end()) an = &it->second;
    for (size_t i = 0; i < p.data.size(); ++i) {
      double orig = p.data[i];
      work.at(name).data[i] = orig + eps;
      double fp = loss_fn(work);
      work.at(name).data[i] = orig - eps;
      double fm = loss_fn(work);
      work.at(name).data[i] = orig;
      double fd = (fp - fm) / (2.0 * eps);
      double a = an ? an->data[i] : 0.0;
      double rel = std::abs(fd - a) / std::max(1e-6, std::abs(fd) + std::abs(a));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace s2c::train
