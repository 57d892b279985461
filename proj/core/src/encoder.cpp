#include "s2c/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace s2c::encoder {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}


// 3x3 conv, stride 2, zero pad 1: out dims are ceil(in/2).
void conv3x3_s2_fwd(const Tensor& in, const Tensor& w, const Tensor& b,
                    Tensor& out) {
  const int cin = in.shape[0], ih = in.shape[1], iw = in.shape[2];
  const int cout = w.shape[0];
  const int oh = ceil_div(ih, 2), ow = ceil_div(iw, 2);
  out = Tensor({cout, oh, ow});
  for (int o = 0; o < cout; ++o)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double acc = b.data[o];
        for (int i = 0; i < cin; ++i)
          for (int ky = 0; ky < 3; ++ky) {
            int y = 2 * r + ky - 1;
            if (y < 0 || y >= ih) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int x = 2 * c + kx - 1;
              if (x < 0 || x >= iw) continue;
              acc += w.data[((static_cast<size_t>(o) * cin + i) * 3 + ky) * 3 +
                            kx] *
                     in.data[(static_cast<size_t>(i) * ih + y) * iw + x];
            }
          }
        out.data[(static_cast<size_t>(o) * oh + r) * ow + c] = acc;
      }
}

void conv3x3_s2_bwd(const Tensor& in, const Tensor& w, const Tensor& dout,
                    Tensor* din, Tensor* dw, Tensor* db) {
  const int cin = in.shape[0], ih = in.shape[1], iw = in.shape[2];
  const int cout = w.shape[0];
  const int oh = dout.shape[1], ow = dout.shape[2];
  for (int o = 0; o < cout; ++o)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double g = dout.data[(static_cast<size_t>(o) * oh + r) * ow + c];
        if (db) db->data[o] += g;
        for (int i = 0; i < cin; ++i)
          for (int ky = 0; ky < 3; ++ky) {
            int y = 2 * r + ky - 1;
            if (y < 0 || y >= ih) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int x = 2 * c + kx - 1;
              if (x < 0 || x >= iw) continue;
              size_t wi =
                  ((static_cast<size_t>(o) * cin + i) * 3 + ky) * 3 + kx;
              size_t ii = (static_cast<size_t>(i) * ih + y) * iw + x;
              if (dw) dw->data[wi] += g * in.data[ii];
              if (din) din->data[ii] += g * w.data[wi];
            }
          }
      }
}

// Effective 1x1 projection weight: W (+ scaling * B*A when wrapped).
Tensor effective_proj(const EncoderSpec& spec, const EncoderParams& params) {
  Tensor w = params.at("proj.w");
  for (const auto& site : spec.lora) {
    if (site.target != "proj.w") continue;
    const Tensor& a = params.at("proj.lora_A");
    const Tensor& b = params.at("proj.lora_B");
    const int dout = w.shape[0], din = w.shape[1], r = site.rank;
    for (int o = 0; o < dout; ++o)
      for (int i = 0; i < din; ++i) {
        double acc = 0;
        for (int k = 0; k < r; ++k)
          acc += b.data[static_cast<size_t>(o) * r + k] *
                 a.data[static_cast<size_t>(k) * din + i];
        w.data[static_cast<size_t>(o) * din + i] += site.scaling * acc;
      }
  }
  return w;
}

}  // namespace

const TensorInfo* EncoderSpec::find(const std::string& tensor_name) const {
  for (const auto& t : manifest)
    if (t.name == tensor_name) return &t;
  return nullptr;
}

int64_t EncoderSpec::trainable_count() const {
  int64_t n = 0;
  for (const auto& t : manifest)
    if (t.trainable) n += Tensor::numel_of(t.shape);
  return n;
}

std::pair<EncoderSpec, EncoderParams> reference_encoder(int channels_in,
                                                        int latent_channels,
                                                        int patch_stride,
                                                        Rng& rng) {
  if (patch_stride != 4 && patch_stride != 8 && patch_stride != 16)
    throw ValueRange("reference_encoder: patch_stride must be 4, 8 or 16");
  if (latent_channels < 8)
    throw ValueRange("reference_encoder: latent_channels must be >= 8");

  EncoderSpec spec;
  spec.name = "reference";
  spec.channels_in = channels_in;
  spec.latent_channels = latent_channels;
  spec.patch_stride = patch_stride;
  spec.hidden = std::max(16, latent_channels);
  spec.n_blocks = 0;
  for (int s = patch_stride; s > 1; s /= 2) spec.n_blocks++;

  EncoderParams params;
  auto init_uniform = [&](const std::vector<int>& shape, int fan_in) {
    Tensor t(shape);
    double bound = std::sqrt(1.0 / fan_in);
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };

  // First stage: a fixed oriented-edge / center-surround bank over opponent
  // color channels (the scale-appropriate stand-in for the early layers of a
  // pretrained backbone). Deeper stages get random mixing weights.
  auto v1_bank = [&](int cin, int cout) {
    static const double kSpatial[8][9] = {
        {-1, 0, 1, -2, 0, 2, -1, 0, 1},      // vertical edge
        {-1, -2, -1, 0, 0, 0, 1, 2, 1},      // horizontal edge
        {-2, -1, 0, -1, 0, 1, 0, 1, 2},      // diagonal edge
        {0, -1, -2, 1, 0, -1, 2, 1, 0},      // anti-diagonal edge
        {0, -1, 0, -1, 4, -1, 0, -1, 0},     // laplacian
        {-1, -1, -1, -1, 8, -1, -1, -1, -1}, // center-surround
        {1, 2, 1, 2, 4, 2, 1, 2, 1},         // low-pass
        {1, -2, 1, -2, 4, -2, 1, -2, 1},     // checker high-pass
    };
    static const double kOpponent[4][3] = {
        {1.0, 1.0, 1.0},    // luminance
        {1.0, -1.0, 0.0},   // red-green
        {-0.5, -0.5, 1.0},  // blue-yellow
        {1.0, 0.0, -1.0},   // red-blue
    };
    Tensor t({cout, cin, 3, 3});
    for (int o = 0; o < cout; ++o) {
      const double* k = kSpatial[o % 8];
      const double* cv = kOpponent[(o / 8) % 4];
      double norm = 0;
      for (int ch = 0; ch < cin; ++ch) {
        double cw = (cin == 3) ? cv[ch] : (ch == o % cin ? 1.0 : 0.0);
        for (int j = 0; j < 9; ++j) {
          double v = cw * k[j];
          t.data[(static_cast<size_t>(o) * cin + ch) * 9 + j] = v;
          norm += v * v;
        }
      }
      norm = std::sqrt(std::max(norm, 1e-12));
      for (int ch = 0; ch < cin; ++ch)
        for (int j = 0; j < 9; ++j)
          t.data[(static_cast<size_t>(o) * cin + ch) * 9 + j] /= norm;
    }
    return t;
  };

  for (int blk = 0; blk < spec.n_blocks; ++blk) {
    int cin = (blk == 0) ? channels_in : spec.hidden;
    std::string base = "conv" + std::to_string(blk);
    spec.manifest.push_back({base + ".w", {spec.hidden, cin, 3, 3}, true});
    spec.manifest.push_back({base + ".b", {spec.hidden}, true});
    params[base + ".w"] = (blk == 0) ? v1_bank(cin, spec.hidden)
                                     : init_uniform({spec.hidden, cin, 3, 3},
                                                    cin * 9);
    params[base + ".b"] = Tensor({spec.hidden});
  }
  spec.manifest.push_back({"proj.w", {latent_channels, spec.hidden}, true});
  spec.manifest.push_back({"proj.b", {latent_channels}, true});
  params["proj.w"] = init_uniform({latent_channels, spec.hidden}, spec.hidden);
  params["proj.b"] = Tensor({latent_channels});
  return {std::move(spec), std::move(params)};
}

std::pair<EncoderSpec, EncoderParams> apply_lora(const EncoderSpec& spec,
                                                 const EncoderParams& params,
                                                 const LoRAConfig& cfg,
                                                 Rng& rng) {
  cfg.validate();
  EncoderSpec out_spec = spec;
  EncoderParams out_params = params;

  // Only 1x1 projections are eligible wrap targets.
  std::vector<std::string> matched;
  for (const auto& t : spec.manifest) {
    if (t.name != "proj.w") continue;
    for (const auto& pat : cfg.target_patterns)
      if (t.name.find(pat) != std::string::npos) {
        matched.push_back(t.name);
        break;
      }
  }
  if (matched.empty())
    throw NoTargetMatched("apply_lora: no target pattern matched a layer");

  // Base network is frozen; only the LoRA factors train.
  for (auto& t : out_spec.manifest) t.trainable = false;

  for (const auto& name : matched) {
    const Tensor& w = params.at(name);
    const int dout = w.shape[0], din = w.shape[1];
    Tensor a({cfg.rank, din});
    double bound = std::sqrt(1.0 / din);
    for (auto& v : a.data) v = rng.uniform(-bound, bound);
    Tensor b({dout, cfg.rank});  // zero init: wrap is output-identity
    out_spec.manifest.push_back({"proj.lora_A", {cfg.rank, din}, true});
    out_spec.manifest.push_back({"proj.lora_B", {dout, cfg.rank}, true});
    out_params["proj.lora_A"] = std::move(a);
    out_params["proj.lora_B"] = std::move(b);
    out_spec.lora.push_back({name, cfg.rank, cfg.scaling});
  }
  return {std::move(out_spec), std::move(out_params)};
}

LatentMap encode_fwd(const EncoderSpec& spec, const EncoderParams& params,
                     const RasterImage& img, EncodeTape& tape) {
  if (img.channels() != spec.channels_in)
    throw ShapeMismatch("encode: channel count mismatch");

  // HWC -> CHW, standardizing each input channel to zero mean / unit
  // variance so global radiometric offsets and gains never reach the convs.
  Tensor x({img.channels(), img.height(), img.width()});
  const size_t npx = static_cast<size_t>(img.height()) * img.width();
  for (int ch = 0; ch < img.channels(); ++ch) {
    double mean = 0;
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c) mean += img.at(r, c, ch);
    mean /= static_cast<double>(npx);
    double var = 0;
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c) {
        double d = img.at(r, c, ch) - mean;
        var += d * d;
      }
    double inv_sd = 1.0 / std::sqrt(var / static_cast<double>(npx) + 1e-6);
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c)
        x.data[(static_cast<size_t>(ch) * img.height() + r) * img.width() + c] =
            (img.at(r, c, ch) - mean) * inv_sd;
  }

  // Fixed antialiasing prefilter: two passes of a 3x3 binomial kernel
  // (edge-clamped). The strided conv stack aliases badly without it, which
  // makes patch features needlessly sensitive to small co-registration
  // errors between the two acquisitions.
  for (int pass = 0; pass < 2; ++pass) {
    Tensor blurred(x.shape);
    const int hh = x.shape[1], ww = x.shape[2];
    static const double k3[3] = {0.25, 0.5, 0.25};
    for (int ch = 0; ch < x.shape[0]; ++ch)
      for (int r = 0; r < hh; ++r)
        for (int c = 0; c < ww; ++c) {
          double acc = 0;
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              int rr = std::clamp(r + dr, 0, hh - 1);
              int cc = std::clamp(c + dc, 0, ww - 1);
              acc += k3[dr + 1] * k3[dc + 1] *
                     x.data[(static_cast<size_t>(ch) * hh + rr) * ww + cc];
            }
          blurred.data[(static_cast<size_t>(ch) * hh + r) * ww + c] = acc;
        }
    x = std::move(blurred);
  }

  tape.inputs.clear();
  tape.preacts.clear();
  for (int blk = 0; blk < spec.n_blocks; ++blk) {
    std::string base = "conv" + std::to_string(blk);
    Tensor z;
    conv3x3_s2_fwd(x, params.at(base + ".w"), params.at(base + ".b"), z);
    tape.inputs.push_back(std::move(x));
    x = Tensor(z.shape);
    for (size_t i = 0; i < z.data.size(); ++i) x.data[i] = softplus(z.data[i]);
    tape.preacts.push_back(std::move(z));
  }
  tape.hidden = x;

  const int h = x.shape[1], w = x.shape[2];
  Tensor weff = effective_proj(spec, params);
  const Tensor& pb = params.at("proj.b");
  LatentMap lat(spec.latent_channels, h, w, spec.patch_stride);
  const size_t plane = static_cast<size_t>(h) * w;
  for (int o = 0; o < spec.latent_channels; ++o)
    for (size_t p = 0; p < plane; ++p) {
      double acc = pb.data[o];
      for (int k = 0; k < spec.hidden; ++k)
        acc += weff.data[static_cast<size_t>(o) * spec.hidden + k] *
               x.data[k * plane + p];
      lat.features[o * plane + p] = acc;
    }
  // Global latent centering: subtract each channel's map-wide mean. Without
  // it the activation stack gives every location a large shared feature
  // component and all patch cosines saturate at ~1. A global window keeps
  // the operation effectively local in space (one cell's content barely
  // moves the map-wide mean), so change stays localized to the cells whose
  // receptive field actually covers it.
  for (int o = 0; o < spec.latent_channels; ++o) {
    double m = 0;
    for (size_t p = 0; p < plane; ++p) m += lat.features[o * plane + p];
    m /= static_cast<double>(plane);
    for (size_t p = 0; p < plane; ++p) lat.features[o * plane + p] -= m;
  }
  return lat;
}

LatentMap encode(const EncoderSpec& spec, const EncoderParams& params,
                 const RasterImage& img) {
  EncodeTape tape;
  return encode_fwd(spec, params, img, tape);
}

void encode_bwd(const EncoderSpec& spec, const EncoderParams& params,
                const EncodeTape& tape, const LatentMap& dlatent,
                ParamGrads& grads) {
  auto grad_of = [&](const std::string& name) -> Tensor* {
    const TensorInfo* info = spec.find(name);
    if (!info || !info->trainable) return nullptr;
    auto it = grads.find(name);
    if (it == grads.end())
      it = grads.emplace(name, Tensor(info->shape)).first;
    return &it->second;
  };

  const Tensor& hidden = tape.hidden;
  const int h = hidden.shape[1], w = hidden.shape[2];
  const size_t plane = static_cast<size_t>(h) * w;
  Tensor weff = effective_proj(spec, params);

  // Centering backward: y' = (I - M) y with M the per-channel map-wide
  // mean, so g <- g' - mean(g') per channel.
  std::vector<double> dcent = dlatent.features;
  for (int o = 0; o < spec.latent_channels; ++o) {
    double gm = 0;
    for (size_t p = 0; p < plane; ++p)
      gm += dlatent.features[o * plane + p];
    gm /= static_cast<double>(plane);
    for (size_t p = 0; p < plane; ++p) dcent[o * plane + p] -= gm;
  }

  // Projection backward.
  Tensor dweff({spec.latent_channels, spec.hidden});
  Tensor dhidden(hidden.shape);
  Tensor* dpb = grad_of("proj.b");
  for (int o = 0; o < spec.latent_channels; ++o)
    for (size_t p = 0; p < plane; ++p) {
      double g = dcent[o * plane + p];
      if (g == 0.0) continue;
      if (dpb) dpb->data[o] += g;
      for (int k = 0; k < spec.hidden; ++k) {
        dweff.data[static_cast<size_t>(o) * spec.hidden + k] +=
            g * hidden.data[k * plane + p];
        dhidden.data[k * plane + p] +=
            g * weff.data[static_cast<size_t>(o) * spec.hidden + k];
      }
    }

  bool weff_into_lora = false;
  for (const auto& site : spec.lora) {
    if (site.target != "proj.w") continue;
    weff_into_lora = true;
    const Tensor& a = params.at("proj.lora_A");
    const Tensor& b = params.at("proj.lora_B");
    const int dout = dweff.shape[0], din = dweff.shape[1], r = site.rank;
    if (Tensor* da = grad_of("proj.lora_A"))
      for (int k = 0; k < r; ++k)
        for (int i = 0; i < din; ++i) {
          double acc = 0;
          for (int o = 0; o < dout; ++o)
            acc += b.data[static_cast<size_t>(o) * r + k] *
                   dweff.data[static_cast<size_t>(o) * din + i];
          da->data[static_cast<size_t>(k) * din + i] += site.scaling * acc;
        }
    if (Tensor* db_ = grad_of("proj.lora_B"))
      for (int o = 0; o < dout; ++o)
        for (int k = 0; k < r; ++k) {
          double acc = 0;
          for (int i = 0; i < din; ++i)
            acc += dweff.data[static_cast<size_t>(o) * din + i] *
                   a.data[static_cast<size_t>(k) * din + i];
          db_->data[static_cast<size_t>(o) * r + k] += site.scaling * acc;
        }
  }
  if (Tensor* dpw = grad_of("proj.w")) {
    (void)weff_into_lora;  // base grad is W_eff grad regardless of wrapping
    for (size_t i = 0; i < dweff.data.size(); ++i) dpw->data[i] += dweff.data[i];
  }

  // Conv blocks backward, last to first.
  Tensor dact = std::move(dhidden);
  for (int blk = spec.n_blocks - 1; blk >= 0; --blk) {
    std::string base = "conv" + std::to_string(blk);
    const Tensor& z = tape.preacts[blk];
    Tensor dz(z.shape);
    for (size_t i = 0; i < z.data.size(); ++i)
      dz.data[i] = dact.data[i] * sigmoid(z.data[i]);
    Tensor din(tape.inputs[blk].shape);
    conv3x3_s2_bwd(tape.inputs[blk], params.at(base + ".w"), dz,
                   blk > 0 ? &din : nullptr, grad_of(base + ".w"),
                   grad_of(base + ".b"));
    dact = std::move(din);
  }
}

}  // namespace s2c::encoder
