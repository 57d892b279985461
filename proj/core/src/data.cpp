#include "s2c/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "s2c/augment.hpp"

namespace s2c::data {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

namespace {

double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Smooth blob background shared by t1/t2.
RasterImage gen_background(int h, int w, int n_blobs, Rng& rng) {
  std::vector<double> pix(static_cast<size_t>(h) * w * 3);
  double base[3];
  for (int ch = 0; ch < 3; ++ch) base[ch] = rng.uniform(0.25, 0.65);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        pix[(static_cast<size_t>(r) * w + c) * 3 + ch] = base[ch];

  for (int i = 0; i < n_blobs; ++i) {
    double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    double sig = rng.uniform(4.0, 12.0);
    double amp[3];
    for (int ch = 0; ch < 3; ++ch) amp[ch] = rng.uniform(-0.22, 0.22);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        double g = std::exp(-d2 / (2 * sig * sig));
        for (int ch = 0; ch < 3; ++ch)
          pix[(static_cast<size_t>(r) * w + c) * 3 + ch] += amp[ch] * g;
      }
  }
  for (auto& v : pix) v = std::min(0.92, std::max(0.08, v));
  return RasterImage(h, w, 3, std::move(pix));
}

// Draws one rectangle or ellipse of roughly the target area; returns the
// painted mask.
BinaryMask paint_object(RasterImage& img, int target_area, Rng& rng,
                        double contrast_lo = 0.45, double contrast_hi = 1.0) {
  const int h = img.height(), w = img.width();
  bool ellipse = rng.bernoulli(0.5);
  double aspect = rng.uniform(0.6, 1.7);
  double oh, ow;
  if (ellipse) {
    // area = pi*a*b
    double b = std::sqrt(target_area / (3.14159265 * aspect));
    oh = 2 * b * aspect;
    ow = 2 * b;
  } else {
    ow = std::sqrt(target_area * aspect);
    oh = target_area / ow;
  }
  oh = std::max(2.0, oh);
  ow = std::max(2.0, ow);
  int cy = rng.uniform_int(static_cast<int>(oh / 2) + 2,
                           h - static_cast<int>(oh / 2) - 3);
  int cx = rng.uniform_int(static_cast<int>(ow / 2) + 2,
                           w - static_cast<int>(ow / 2) - 3);
  double color[3];
  // offset the object from the local background color by a spectral distance
  // drawn from [contrast_lo, contrast_hi]
  {
    double dir[3], n2 = 0;
    do {
      n2 = 0;
      for (int ch = 0; ch < 3; ++ch) {
        dir[ch] = rng.uniform(-1, 1);
        n2 += dir[ch] * dir[ch];
      }
    } while (n2 < 1e-4);
    double target = rng.uniform(contrast_lo, contrast_hi);
    double scale = target / std::sqrt(n2);
    for (int ch = 0; ch < 3; ++ch)
      color[ch] = clip01(img.at(cy, cx, ch) + dir[ch] * scale);
  }

  BinaryMask mask(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      bool inside;
      if (ellipse) {
        double dy = (r - cy) / (oh / 2), dx = (c - cx) / (ow / 2);
        inside = dy * dy + dx * dx <= 1.0;
      } else {
        inside = std::abs(r - cy) <= oh / 2 && std::abs(c - cx) <= ow / 2;
      }
      if (!inside) continue;
      mask.set(r, c, true);
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = color[ch];
    }
  return mask;
}

// Subpixel translate with bilinear sampling and edge clamping.
RasterImage subpixel_shift(const RasterImage& img, double dx, double dy) {
  if (dx == 0 && dy == 0) return img;
  const int h = img.height(), w = img.width(), c = img.channels();
  std::vector<double> out(img.pixels().size());
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) {
      double fy = std::min(std::max(r - dy, 0.0), h - 1.0);
      double fx = std::min(std::max(col - dx, 0.0), w - 1.0);
      int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      double wy = fy - y0, wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        double top = img.at(y0, x0, ch) * (1 - wx) + img.at(y0, x1, ch) * wx;
        double bot = img.at(y1, x0, ch) * (1 - wx) + img.at(y1, x1, ch) * wx;
        out[(static_cast<size_t>(r) * w + col) * c + ch] =
            top * (1 - wy) + bot * wy;
      }
    }
  return RasterImage(h, w, c, std::move(out));
}

}  // namespace

RasterImage pseudo_sar(const RasterImage& optical, Rng& rng) {
  // Fixed channel mix and gamma; only the speckle field is stochastic.
  static const double kMix[3] = {0.55, 0.30, 0.15};
  constexpr double kGamma = 1.8;
  const int h = optical.height(), w = optical.width();
  RasterImage out(h, w, 1);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double speckle = std::exp(0.20 * rng.normal());
      double mixed = 0;
      for (int k = 0; k < 3; ++k) mixed += kMix[k] * optical.at(r, c, k);
      double v = std::pow(std::max(mixed, 0.0), kGamma) * speckle;
      out.at(r, c, 0) = clip01(v);
    }
  out.validate_values();
  return out;
}

ImagePair gen_scene(const SyntheticSceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  RasterImage t1 = gen_background(cfg.height, cfg.width,
                                  cfg.n_background_blobs, rng);
  RasterImage t2 = t1;
  BinaryMask label(cfg.height, cfg.width);

  for (int i = 0; i < cfg.n_change_objects; ++i) {
    int area = rng.uniform_int(cfg.min_object_area, cfg.max_object_area);
    bool removed = rng.bernoulli(0.35);  // image with the object
    BinaryMask m = paint_object(removed ? t1 : t2, area, rng,
                                cfg.object_contrast_lo, cfg.object_contrast_hi);
    for (size_t k = 0; k < m.bits.size(); ++k)
      label.bits[k] = label.bits[k] | m.bits[k];
  }
  // Sub-threshold objects: rendered in t2 but never labeled.
  for (int i = 0; i < cfg.n_insignificant_objects; ++i) {
    int area = rng.uniform_int(2, std::max(2, cfg.insignificant_object_area_max));
    paint_object(t2, area, rng, cfg.object_contrast_lo,
                 cfg.object_contrast_hi);
  }

  // Static surface texture: a smooth zero-mean field shared by both dates.
  // It is part of the scene, not temporal noise — pixel differencing only
  // sees it once the pair is misaligned, while patch-level descriptors
  // average over it.
  if (cfg.background_texture > 0) {
    const int h = cfg.height, w = cfg.width;
    std::vector<double> field(static_cast<size_t>(h) * w);
    for (auto& v : field) v = rng.uniform(-1, 1);
    // One binomial smoothing pass gives a ~2 px correlation length.
    std::vector<double> tmp(field.size());
    static const double k3[3] = {0.25, 0.5, 0.25};
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double s = 0;
        for (int t = -1; t <= 1; ++t)
          s += k3[t + 1] * field[static_cast<size_t>(r) * w +
                                 std::clamp(c + t, 0, w - 1)];
        tmp[static_cast<size_t>(r) * w + c] = s;
      }
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double s = 0;
        for (int t = -1; t <= 1; ++t)
          s += k3[t + 1] * tmp[static_cast<size_t>(std::clamp(r + t, 0, h - 1)) *
                                   w + c];
        field[static_cast<size_t>(r) * w + c] = s * cfg.background_texture;
      }
    for (RasterImage* img : {&t1, &t2})
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          for (int ch = 0; ch < 3; ++ch)
            img->at(r, c, ch) =
                clip01(img->at(r, c, ch) + field[static_cast<size_t>(r) * w + c]);
  }

  // Global spectral drift: a per-channel affine radiometric change
  // (gain + offset — atmosphere, sensor calibration, sun elevation) plus a
  // mild smooth illumination ramp shared by all channels. The affine part is
  // constructed so the output range [b, a+b] stays inside [0,1]; it is exact
  // (no clamping artifacts), which matches real radiometric drift where the
  // sensor response changes but the scene is not saturated.
  if (cfg.spectral_drift > 0) {
    double squeeze = std::min(cfg.spectral_drift, 0.7);
    double a[3], b[3];
    for (int ch = 0; ch < 3; ++ch) {
      a[ch] = 1.0 - rng.uniform(0.0, squeeze);
      b[ch] = rng.uniform(0.0, 1.0 - a[ch]);
    }
    double ramp_amp = 0.1 * std::min(cfg.spectral_drift, 1.0);
    double phase = rng.uniform(0, 2 * 3.14159265);
    for (int r = 0; r < cfg.height; ++r)
      for (int c = 0; c < cfg.width; ++c) {
        double ramp = std::sin(phase + 2.5 * 3.14159265 *
                                           (static_cast<double>(r) / cfg.height +
                                            static_cast<double>(c) / cfg.width));
        for (int ch = 0; ch < 3; ++ch)
          t2.at(r, c, ch) = clip01((a[ch] * t2.at(r, c, ch) + b[ch]) *
                                   (1.0 + ramp_amp * ramp));
      }
  }

  if (cfg.misalignment_px > 0) {
    double dx = rng.uniform(-cfg.misalignment_px, cfg.misalignment_px);
    double dy = rng.uniform(-cfg.misalignment_px, cfg.misalignment_px);
    t2 = subpixel_shift(t2, dx, dy);
  }

  if (cfg.sensor_noise > 0) {
    for (RasterImage* img : {&t1, &t2})
      for (int r = 0; r < cfg.height; ++r)
        for (int c = 0; c < cfg.width; ++c)
          for (int ch = 0; ch < img->channels(); ++ch)
            img->at(r, c, ch) =
                clip01(img->at(r, c, ch) + rng.normal(0, cfg.sensor_noise));
  }

  if (cfg.modality == Modality::kPseudoSar) t2 = pseudo_sar(t2, rng);

  t1.validate_values();
  t2.validate_values();
  return ImagePair(std::move(t1), std::move(t2), std::move(label));
}

// ---------------------------------------------------------------------------
// Tensor container ("S2CT")
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', '2', 'C', 'T'};

void put_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32_le(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32_le(out, v);
}

uint32_t get_u32_le(const std::string& s, size_t off) {
  return static_cast<uint32_t>(static_cast<uint8_t>(s[off])) |
         (static_cast<uint32_t>(static_cast<uint8_t>(s[off + 1])) << 8) |
         (static_cast<uint32_t>(static_cast<uint8_t>(s[off + 2])) << 16) |
         (static_cast<uint32_t>(static_cast<uint8_t>(s[off + 3])) << 24);
}

float get_f32_le(const std::string& s, size_t off) {
  uint32_t v = get_u32_le(s, off);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

std::string container_bytes(const json& header, const std::vector<float>& payload) {
  std::string out(kMagic, 4);
  std::string hdr = header.dump();
  put_u32_le(out, static_cast<uint32_t>(hdr.size()));
  out += hdr;
  out.reserve(out.size() + payload.size() * 4);
  for (float f : payload) put_f32_le(out, f);
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Parses the container; returns header and payload floats.
std::pair<json, std::vector<float>> parse_container(const std::string& bytes,
                                                    const std::string& path) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw BadMagic("bad magic in " + path);
  uint32_t hlen = get_u32_le(bytes, 4);
  if (bytes.size() < 8 + static_cast<size_t>(hlen))
    throw TruncatedPayload("truncated header in " + path);
  json header;
  try {
    header = json::parse(bytes.substr(8, hlen));
  } catch (const json::exception&) {
    throw HeaderMismatch("unparseable header in " + path);
  }
  if (header.value("dtype", "") != "float32" ||
      header.value("endian", "") != "little" || !header.contains("shape"))
    throw HeaderMismatch("unsupported header in " + path);
  int64_t n = 1;
  for (int d : header["shape"].get<std::vector<int>>()) n *= d;
  size_t need = 8 + hlen + static_cast<size_t>(n) * 4;
  if (bytes.size() < need)
    throw TruncatedPayload("payload shorter than header claims in " + path);
  std::vector<float> payload(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    payload[static_cast<size_t>(i)] = get_f32_le(bytes, 8 + hlen + 4 * i);
  return {std::move(header), std::move(payload)};
}

}  // namespace

void write_tensor(const std::string& path, const std::vector<int>& shape,
                  const std::vector<float>& values) {
  if (Tensor::numel_of(shape) != static_cast<int64_t>(values.size()))
    throw ShapeMismatch("write_tensor: shape/value count mismatch");
  for (float v : values)
    if (!std::isfinite(v)) throw ValueRange("write_tensor: non-finite value");
  json header = {{"dtype", "float32"}, {"endian", "little"}, {"shape", shape}};
  write_file(path, container_bytes(header, values));
}

std::pair<std::vector<int>, std::vector<float>> read_tensor(
    const std::string& path) {
  auto [header, payload] = parse_container(read_file(path), path);
  return {header["shape"].get<std::vector<int>>(), std::move(payload)};
}

void write_prob_map(const std::string& path, const ChangeProbMap& m) {
  write_tensor(path, {m.h, m.w}, m.probs);
}

ChangeProbMap read_prob_map(const std::string& path) {
  auto [shape, values] = read_tensor(path);
  if (shape.size() != 2) throw HeaderMismatch("prob map must be rank 2");
  ChangeProbMap out(shape[0], shape[1]);
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.f && values[i] <= 1.f))
      throw ValueRange("prob map value outside [0,1]");
    out.probs[i] = values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  json manifest = json::array();
  std::vector<float> payload;
  int64_t total = 0;
  for (const auto& info : ck.spec.manifest) {
    manifest.push_back({{"name", info.name},
                        {"shape", info.shape},
                        {"trainable", info.trainable}});
    const Tensor& t = ck.params.at(info.name);
    if (t.shape != info.shape)
      throw ShapeMismatch("save_checkpoint: tensor/manifest shape mismatch");
    for (double v : t.data) payload.push_back(static_cast<float>(v));
    total += t.numel();
  }
  json lora = json::array();
  for (const auto& site : ck.spec.lora)
    lora.push_back({{"target", site.target},
                    {"rank", site.rank},
                    {"scaling", site.scaling}});
  json header = {
      {"dtype", "float32"},
      {"endian", "little"},
      {"shape", {total}},
      {"checkpoint",
       {{"name", ck.spec.name},
        {"channels_in", ck.spec.channels_in},
        {"latent_channels", ck.spec.latent_channels},
        {"patch_stride", ck.spec.patch_stride},
        {"hidden", ck.spec.hidden},
        {"n_blocks", ck.spec.n_blocks},
        {"manifest", manifest},
        {"lora", lora},
        {"config", ck.config_echo}}}};
  write_file(path, container_bytes(header, payload));
}

Checkpoint load_checkpoint(const std::string& path) {
  auto [header, payload] = parse_container(read_file(path), path);
  if (!header.contains("checkpoint"))
    throw HeaderMismatch("not a checkpoint: " + path);
  const json& ck = header["checkpoint"];
  Checkpoint out;
  out.spec.name = ck.value("name", "");
  out.spec.channels_in = ck["channels_in"].get<int>();
  out.spec.latent_channels = ck["latent_channels"].get<int>();
  out.spec.patch_stride = ck["patch_stride"].get<int>();
  out.spec.hidden = ck["hidden"].get<int>();
  out.spec.n_blocks = ck["n_blocks"].get<int>();
  out.config_echo = ck.value("config", "");
  for (const auto& site : ck["lora"])
    out.spec.lora.push_back({site["target"].get<std::string>(),
                             site["rank"].get<int>(),
                             site["scaling"].get<double>()});
  size_t off = 0;
  for (const auto& info : ck["manifest"]) {
    encoder::TensorInfo ti;
    ti.name = info["name"].get<std::string>();
    ti.shape = info["shape"].get<std::vector<int>>();
    ti.trainable = info["trainable"].get<bool>();
    Tensor t(ti.shape);
    if (off + t.data.size() > payload.size())
      throw TruncatedPayload("checkpoint payload too short: " + path);
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = payload[off + i];
    off += t.data.size();
    out.params[ti.name] = std::move(t);
    out.spec.manifest.push_back(std::move(ti));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNG I/O
// ---------------------------------------------------------------------------

void write_mask_png(const std::string& path, const BinaryMask& m) {
  cv::Mat img(m.h, m.w, CV_8UC1);
  for (int r = 0; r < m.h; ++r)
    for (int c = 0; c < m.w; ++c)
      img.at<uint8_t>(r, c) = m.at(r, c) ? 255 : 0;
  if (!cv::imwrite(path, img)) throw IoError("cannot write " + path);
}

BinaryMask read_mask_png(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw IoError("cannot read " + path);
  BinaryMask m(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c)
      m.set(r, c, img.at<uint8_t>(r, c) >= 128);
  return m;
}

void write_image_png(const std::string& path, const RasterImage& img) {
  cv::Mat out(img.height(), img.width(),
              img.channels() == 3 ? CV_8UC3 : CV_8UC1);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      if (img.channels() == 3) {
        // OpenCV stores BGR
        out.at<cv::Vec3b>(r, c) =
            cv::Vec3b(static_cast<uint8_t>(std::lround(img.at(r, c, 2) * 255)),
                      static_cast<uint8_t>(std::lround(img.at(r, c, 1) * 255)),
                      static_cast<uint8_t>(std::lround(img.at(r, c, 0) * 255)));
      } else {
        out.at<uint8_t>(r, c) =
            static_cast<uint8_t>(std::lround(img.at(r, c, 0) * 255));
      }
    }
  if (!cv::imwrite(path, out)) throw IoError("cannot write " + path);
}

RasterImage read_image_png(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError("cannot read " + path);
  int ch = img.channels() >= 3 ? 3 : 1;
  RasterImage out(img.rows, img.cols, ch);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) {
      if (ch == 3) {
        cv::Vec3b v = img.channels() == 4 ? cv::Vec3b(img.at<cv::Vec4b>(r, c)[0],
                                                      img.at<cv::Vec4b>(r, c)[1],
                                                      img.at<cv::Vec4b>(r, c)[2])
                                          : img.at<cv::Vec3b>(r, c);
        out.at(r, c, 0) = v[2] / 255.0;
        out.at(r, c, 1) = v[1] / 255.0;
        out.at(r, c, 2) = v[0] / 255.0;
      } else {
        out.at(r, c, 0) = img.at<uint8_t>(r, c) / 255.0;
      }
    }
  out.validate_values();
  return out;
}

void write_mask_set(const MaskSet& set, const std::string& dir,
                    const std::string& stem) {
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / (stem + ".masks"));
  if (!manifest) throw IoError("cannot write mask set manifest");
  for (size_t i = 0; i < set.size(); ++i) {
    std::string name = stem + "_" + std::to_string(i) + ".png";
    write_mask_png((fs::path(dir) / name).string(), set.masks[i]);
    manifest << name << "\n";
  }
}

MaskSet read_mask_set(const std::string& manifest_path) {
  std::ifstream manifest(manifest_path);
  if (!manifest) throw IoError("cannot read " + manifest_path);
  fs::path dir = fs::path(manifest_path).parent_path();
  MaskSet out;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    out.push(read_mask_png((dir / line).string()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifests
// ---------------------------------------------------------------------------

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "root=" << m.root << "\n";
  f << "split=" << m.split << "\n";
  for (const auto& e : m.entries)
    f << e.t1_path << "\t" << e.t2_path << "\t" << e.label_path << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  DatasetManifest m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("root=", 0) == 0) {
      m.root = line.substr(5);
    } else if (line.rfind("split=", 0) == 0) {
      m.split = line.substr(6);
    } else {
      std::istringstream ss(line);
      ManifestEntry e;
      if (!std::getline(ss, e.t1_path, '\t') ||
          !std::getline(ss, e.t2_path, '\t'))
        throw IoError("malformed manifest line: " + line);
      std::getline(ss, e.label_path, '\t');
      m.entries.push_back(std::move(e));
    }
  }
  return m;
}

std::vector<ImagePair> load_dataset(const DatasetManifest& m) {
  std::vector<ImagePair> out;
  fs::path root(m.root);
  for (const auto& e : m.entries) {
    RasterImage t1 = read_image_png((root / e.t1_path).string());
    RasterImage t2 = read_image_png((root / e.t2_path).string());
    std::optional<BinaryMask> label;
    if (!e.label_path.empty())
      label = read_mask_png((root / e.label_path).string());
    out.emplace_back(std::move(t1), std::move(t2), std::move(label));
  }
  return out;
}

// ---------------------------------------------------------------------------
// key=value config files
// ---------------------------------------------------------------------------

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

ConfigMap parse_config(const std::string& text) {
  ConfigMap out;
  std::string section;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::string t = trim(line);
    // inline comments start at an unindented '#'/';' or one after whitespace
    for (size_t i = 0; i < t.size(); ++i)
      if ((t[i] == '#' || t[i] == ';') &&
          (i == 0 || std::isspace(static_cast<unsigned char>(t[i - 1])))) {
        t = trim(t.substr(0, i));
        break;
      }
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      out[section];
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError("config: expected key=value, got: " + t);
    out[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config(const std::string& path) {
  return parse_config(read_file(path));
}

}  // namespace s2c::data
