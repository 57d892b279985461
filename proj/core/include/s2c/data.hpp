#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "s2c/encoder.hpp"
#include "s2c/rng.hpp"
#include "s2c/tensor.hpp"
#include "s2c/types.hpp"

namespace s2c::data {

enum class Modality { kOptical, kPseudoSar };

// Synthetic bi-temporal scene: smooth blob background, labeled change
// objects, unlabeled sub-threshold objects, global spectral drift and small
// misalignment on t2.
struct SyntheticSceneConfig {
  int height = 64, width = 64;
  int n_background_blobs = 12;
  int n_change_objects = 3;
  int min_object_area = 64;
  int max_object_area = 256;
  int insignificant_object_area_max = 12;
  int n_insignificant_objects = 4;
  double spectral_drift = 0.12;
  double misalignment_px = 2.0;
  double sensor_noise = 0.0;  // iid per-pixel Gaussian sigma on both images
  double background_texture = 0.0;  // static shared texture amplitude
  // spectral distance between an object and the background it covers
  double object_contrast_lo = 0.45;
  double object_contrast_hi = 1.0;
  Modality modality = Modality::kOptical;
  uint64_t seed = 0;

  void validate() const {
    if (min_object_area <= 0 || max_object_area < min_object_area)
      throw ValueRange("SyntheticSceneConfig: bad object area range");
    if (misalignment_px < 0 || misalignment_px > 8)
      throw ValueRange("SyntheticSceneConfig: misalignment_px in [0,8]");
    if (!(object_contrast_lo > 0) || object_contrast_hi < object_contrast_lo)
      throw ValueRange("SyntheticSceneConfig: bad object contrast range");
  }
};

ImagePair gen_scene(const SyntheticSceneConfig& cfg);

// Deterministic pseudo-SAR transform: channel mix, gamma warp,
// multiplicative speckle. Parameters fixed for reproducibility.
RasterImage pseudo_sar(const RasterImage& optical, Rng& rng);

struct ManifestEntry {
  std::string t1_path, t2_path, label_path;
};

struct DatasetManifest {
  std::string root;
  std::string split;  // train / val / test
  std::vector<ManifestEntry> entries;
};

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);
// Loads all triples, validating shape agreement.
std::vector<ImagePair> load_dataset(const DatasetManifest& m);

// "S2CT" tensor container: magic, JSON header (dtype float32,
// little-endian, shape), raw row-major float payload.
void write_tensor(const std::string& path, const std::vector<int>& shape,
                  const std::vector<float>& values);
std::pair<std::vector<int>, std::vector<float>> read_tensor(
    const std::string& path);

void write_prob_map(const std::string& path, const ChangeProbMap& m);
ChangeProbMap read_prob_map(const std::string& path);

// 8-bit grayscale PNG, 0/255.
void write_mask_png(const std::string& path, const BinaryMask& m);
BinaryMask read_mask_png(const std::string& path);

// RGB image PNG (values quantized to 8 bits).
void write_image_png(const std::string& path, const RasterImage& img);
RasterImage read_image_png(const std::string& path);

// MaskSet: one PNG per mask plus a manifest file listing them.
void write_mask_set(const MaskSet& set, const std::string& dir,
                    const std::string& stem);
MaskSet read_mask_set(const std::string& manifest_path);

// Encoder checkpoint: the tensor container holding the parameter manifest,
// all tensors (manifest order) and a config echo string.
struct Checkpoint {
  encoder::EncoderSpec spec;
  encoder::EncoderParams params;
  std::string config_echo;
};
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Plain-text key=value config with [section] headers.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;
ConfigMap parse_config(const std::string& text);
ConfigMap read_config(const std::string& path);

}  // namespace s2c::data
