#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <string>
#include <vector>

#include "s2c/data.hpp"
#include "s2c/train.hpp"

using namespace s2c;
using namespace s2c::data;
namespace fs = std::filesystem;

namespace {

// fresh scratch directory per test run
fs::path scratch() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("s2c_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string spath(const std::string& name) {
  return (scratch() / name).string();
}

}  // namespace

TEST_CASE("tensor container: bit-exact float32 round trip") {
  std::vector<int> shape = {2, 3};
  std::vector<float> vals = {0.1f, -1.f / 3.f, 1e-30f, 1e30f, 0.f, -0.f};
  write_tensor(spath("t.s2ct"), shape, vals);
  auto [rshape, rvals] = read_tensor(spath("t.s2ct"));
  CHECK(rshape == shape);
  REQUIRE(rvals.size() == vals.size());
  for (size_t i = 0; i < vals.size(); ++i) CHECK(rvals[i] == vals[i]);
}

TEST_CASE("tensor container: corrupted files are rejected") {
  write_tensor(spath("ok.s2ct"), {4}, {1, 2, 3, 4});

  {  // wrong magic
    std::ifstream in(spath("ok.s2ct"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes[0] = 'X';
    std::ofstream out(spath("badmagic.s2ct"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(read_tensor(spath("badmagic.s2ct")), BadMagic);

  {  // truncated payload
    std::ifstream in(spath("ok.s2ct"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 5);
    std::ofstream out(spath("short.s2ct"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(read_tensor(spath("short.s2ct")), TruncatedPayload);

  CHECK_THROWS_AS(read_tensor(spath("does_not_exist.s2ct")), IoError);
}

TEST_CASE("prob map round trip is exact") {
  ChangeProbMap m(4, 5);
  float k = 0;
  for (auto& p : m.probs) p = (k = std::min(1.f, k + 0.07f));
  write_prob_map(spath("m.s2ct"), m);
  ChangeProbMap r = read_prob_map(spath("m.s2ct"));
  CHECK(r.h == m.h);
  CHECK(r.w == m.w);
  CHECK(r.probs == m.probs);
}

TEST_CASE("gen_scene: determinism and label structure") {
  SyntheticSceneConfig cfg;
  cfg.seed = 77;
  ImagePair a = gen_scene(cfg);
  ImagePair b = gen_scene(cfg);
  CHECK(a.t1.pixels() == b.t1.pixels());
  CHECK(a.t2.pixels() == b.t2.pixels());
  REQUIRE(a.label.has_value());
  CHECK(a.label->bits == b.label->bits);
  CHECK(a.t1.height() == cfg.height);
  CHECK(a.t1.width() == cfg.width);

  cfg.seed = 78;
  ImagePair c = gen_scene(cfg);
  CHECK(a.t1.pixels() != c.t1.pixels());

  // labeled change stays near the configured area band (discretized shapes)
  CHECK(a.label->area() >= cfg.min_object_area / 2);
  CHECK(a.label->area() <=
        2 * static_cast<int64_t>(cfg.n_change_objects) * cfg.max_object_area);
}

TEST_CASE("gen_scene: zero change objects give an empty label") {
  SyntheticSceneConfig cfg;
  cfg.n_change_objects = 0;
  cfg.n_insignificant_objects = 0;
  cfg.seed = 11;
  ImagePair p = gen_scene(cfg);
  REQUIRE(p.label.has_value());
  CHECK(p.label->area() == 0);
  // drift and misalignment still make the images differ
  CHECK(p.t1.pixels() != p.t2.pixels());
}

TEST_CASE("gen_scene: pseudo-SAR modality produces a 1-channel t2 counterpart") {
  SyntheticSceneConfig cfg;
  cfg.modality = Modality::kPseudoSar;
  cfg.seed = 12;
  ImagePair p = gen_scene(cfg);
  CHECK(p.t1.channels() == 3);
  CHECK(p.t2.channels() == 1);
  p.t2.validate_values();
}

TEST_CASE("mask PNG round trip") {
  BinaryMask m(40, 33);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 33; ++c) m.set(r, c, (r * 7 + c * 3) % 5 == 0);
  write_mask_png(spath("mask.png"), m);
  BinaryMask r = read_mask_png(spath("mask.png"));
  CHECK(r == m);
}

TEST_CASE("image PNG round trip within 8-bit quantization") {
  RasterImage img(32, 32, 3);
  Rng rng(13);
  for (auto& v : img.pixels()) v = rng.uniform(0, 1);
  write_image_png(spath("img.png"), img);
  RasterImage r = read_image_png(spath("img.png"));
  CHECK(r.height() == 32);
  CHECK(r.width() == 32);
  CHECK(r.channels() == 3);
  for (size_t i = 0; i < img.pixels().size(); ++i)
    CHECK(r.pixels()[i] == doctest::Approx(img.pixels()[i]).epsilon(1.0 / 255));
  // a written-then-read image re-round-trips exactly
  write_image_png(spath("img2.png"), r);
  RasterImage r2 = read_image_png(spath("img2.png"));
  CHECK(r2.pixels() == r.pixels());
}

TEST_CASE("mask set round trip preserves order and content") {
  MaskSet set;
  BinaryMask a(32, 32), b(32, 32);
  a.set(1, 2, true);
  b.set(30, 31, true);
  b.set(0, 0, true);
  set.push(a);
  set.push(b);
  fs::create_directories(scratch() / "ms");
  write_mask_set(set, (scratch() / "ms").string(), "proposals");
  MaskSet r = read_mask_set((scratch() / "ms" / "proposals.masks").string());
  REQUIRE(r.size() == 2);
  CHECK(r.masks[0] == a);
  CHECK(r.masks[1] == b);
}

TEST_CASE("dataset manifest round trip and loading") {
  fs::create_directories(scratch() / "ds");
  SyntheticSceneConfig cfg;
  DatasetManifest m;
  m.root = (scratch() / "ds").string();
  m.split = "val";
  for (int i = 0; i < 2; ++i) {
    cfg.seed = 900 + static_cast<uint64_t>(i);
    ImagePair p = gen_scene(cfg);
    std::string t1 = "p" + std::to_string(i) + "_t1.png";
    std::string t2 = "p" + std::to_string(i) + "_t2.png";
    std::string lb = "p" + std::to_string(i) + "_label.png";
    write_image_png((fs::path(m.root) / t1).string(), p.t1);
    write_image_png((fs::path(m.root) / t2).string(), p.t2);
    write_mask_png((fs::path(m.root) / lb).string(), *p.label);
    m.entries.push_back({t1, t2, lb});
  }
  write_manifest(m, spath("val.manifest"));
  DatasetManifest r = read_manifest(spath("val.manifest"));
  CHECK(r.root == m.root);
  CHECK(r.split == "val");
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[1].t2_path == "p1_t2.png");

  auto pairs = load_dataset(r);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].t1.height() == cfg.height);
  CHECK(pairs[0].label.has_value());
}

TEST_CASE("checkpoint round trip restores the manifest and float32 params") {
  Rng rng(14);
  auto [spec, params] = encoder::reference_encoder(3, 16, 8, rng);
  Checkpoint ck{spec, params, "epochs=2\nseed=14"};
  save_checkpoint(spath("enc.ckpt"), ck);
  Checkpoint r = load_checkpoint(spath("enc.ckpt"));

  CHECK(r.config_echo == ck.config_echo);
  REQUIRE(r.spec.manifest.size() == spec.manifest.size());
  for (size_t i = 0; i < spec.manifest.size(); ++i) {
    CHECK(r.spec.manifest[i].name == spec.manifest[i].name);
    CHECK(r.spec.manifest[i].shape == spec.manifest[i].shape);
    CHECK(r.spec.manifest[i].trainable == spec.manifest[i].trainable);
  }
  CHECK(r.spec.latent_channels == 16);
  CHECK(r.spec.patch_stride == 8);

  auto q = train::quantize_f32(params);
  for (const auto& [name, t] : q) {
    REQUIRE(r.params.count(name) == 1);
    CHECK(r.params.at(name).shape == t.shape);
    CHECK(r.params.at(name).data == t.data);  // float32 precision, bit exact
  }
}

TEST_CASE("checkpoint preserves LoRA sites and frozen flags") {
  Rng rng(15);
  auto [spec, params] = encoder::reference_encoder(3, 16, 8, rng);
  encoder::LoRAConfig lcfg;
  auto [lspec, lparams] = encoder::apply_lora(spec, params, lcfg, rng);
  save_checkpoint(spath("lora.ckpt"), {lspec, lparams, ""});
  Checkpoint r = load_checkpoint(spath("lora.ckpt"));
  REQUIRE(r.spec.lora.size() == 1);
  CHECK(r.spec.lora[0].target == "proj.w");
  CHECK(r.spec.lora[0].rank == lcfg.rank);
  CHECK(r.spec.trainable_count() == lspec.trainable_count());
  CHECK(r.params.count("proj.lora_A") == 1);
  CHECK(r.params.count("proj.lora_B") == 1);
}

TEST_CASE("config parsing: sections, comments, whitespace") {
  std::string text =
      "# top comment\n"
      "[train]\n"
      "epochs = 5\n"
      "lr0=0.02   ; trailing comment\n"
      "\n"
      "[data]\n"
      "root = /tmp/x\n";
  ConfigMap m = parse_config(text);
  CHECK(m.at("train").at("epochs") == "5");
  CHECK(m.at("train").at("lr0") == "0.02");
  CHECK(m.at("data").at("root") == "/tmp/x");
  CHECK(m.count("nope") == 0);

  std::ofstream(spath("c.cfg")) << text;
  ConfigMap f = read_config(spath("c.cfg"));
  CHECK(f == m);
}
