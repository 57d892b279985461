// Command-line front end: dataset synthesis, training, inference, mask
// refinement, evaluation and alpha/beta sweeps over the change-detection
// pipeline in s2c::core.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "s2c/data.hpp"
#include "s2c/encoder.hpp"
#include "s2c/eval.hpp"
#include "s2c/mapping.hpp"
#include "s2c/mmcd.hpp"
#include "s2c/train.hpp"

namespace fs = std::filesystem;
using namespace s2c;

namespace {

struct GlobalOpts {
  uint64_t seed = 0;
  std::string config_path;
  std::string mode = "homogeneous";

  train::Mode mode_enum() const {
    if (mode == "homogeneous") return train::Mode::kHomogeneous;
    if (mode == "mmcd") return train::Mode::kMmcd;
    throw CLI::ValidationError("--mode must be homogeneous or mmcd");
  }
};

template <typename T>
void cfg_get(const data::ConfigMap& c, const std::string& sec,
             const std::string& key, T& out) {
  auto s = c.find(sec);
  if (s == c.end()) return;
  auto k = s->second.find(key);
  if (k == s->second.end()) return;
  std::istringstream ss(k->second);
  ss >> out;
  if (ss.fail()) throw IoError("config: bad value for " + sec + "." + key);
}

train::TrainConfig make_train_config(const GlobalOpts& g) {
  train::TrainConfig cfg;
  cfg.seed = g.seed;
  cfg.mode = g.mode_enum();
  if (g.config_path.empty()) return cfg;
  data::ConfigMap c = data::read_config(g.config_path);
  cfg_get(c, "train", "epochs", cfg.epochs);
  cfg_get(c, "train", "batch_size", cfg.batch_size);
  cfg_get(c, "train", "lr0", cfg.lr0);
  cfg_get(c, "train", "schedule_power", cfg.schedule_power);
  cfg_get(c, "train", "momentum", cfg.momentum);
  cfg_get(c, "train", "latent_channels", cfg.latent_channels);
  cfg_get(c, "train", "patch_stride", cfg.patch_stride);
  cfg_get(c, "train", "use_lora", cfg.use_lora);
  cfg_get(c, "train", "lora_rank", cfg.lora.rank);
  cfg_get(c, "train", "weak_aug", cfg.weak_aug_enable);
  cfg_get(c, "train", "weak_aug_crop", cfg.weak_aug_crop);
  cfg_get(c, "loss", "alpha", cfg.weights.alpha);
  cfg_get(c, "loss", "beta", cfg.weights.beta);
  cfg_get(c, "loss", "margin", cfg.triplet.margin);
  cfg_get(c, "sparsity", "threshold", cfg.sparsity.threshold_T);
  cfg_get(c, "sparsity", "grid_d", cfg.sparsity.grid_d);
  cfg_get(c, "mapping", "eta", cfg.mapping.eta);
  cfg_get(c, "augment", "rgb_shift_max", cfg.augment.rgb_shift_max);
  cfg_get(c, "augment", "pca_blend_lo", cfg.augment.pca_blend_lo);
  cfg_get(c, "augment", "pca_blend_hi", cfg.augment.pca_blend_hi);
  cfg_get(c, "augment", "downsample_scale_lo", cfg.augment.downsample_scale_lo);
  cfg_get(c, "augment", "shift_max_px", cfg.augment.shift_max_px);
  return cfg;
}

data::SyntheticSceneConfig make_scene_config(const GlobalOpts& g) {
  data::SyntheticSceneConfig cfg;
  if (g.mode == "mmcd") cfg.modality = data::Modality::kPseudoSar;
  if (g.config_path.empty()) return cfg;
  data::ConfigMap c = data::read_config(g.config_path);
  cfg_get(c, "synth", "height", cfg.height);
  cfg_get(c, "synth", "width", cfg.width);
  cfg_get(c, "synth", "n_background_blobs", cfg.n_background_blobs);
  cfg_get(c, "synth", "n_change_objects", cfg.n_change_objects);
  cfg_get(c, "synth", "min_object_area", cfg.min_object_area);
  cfg_get(c, "synth", "max_object_area", cfg.max_object_area);
  cfg_get(c, "synth", "insignificant_object_area_max",
          cfg.insignificant_object_area_max);
  cfg_get(c, "synth", "n_insignificant_objects", cfg.n_insignificant_objects);
  cfg_get(c, "synth", "spectral_drift", cfg.spectral_drift);
  cfg_get(c, "synth", "misalignment_px", cfg.misalignment_px);
  return cfg;
}

std::string echo_config(const GlobalOpts& g) {
  std::ostringstream ss;
  ss << "seed=" << g.seed << "\nmode=" << g.mode << "\n";
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    ss << in.rdbuf();
  }
  return ss.str();
}

int cmd_synth(const GlobalOpts& g, const std::string& out_dir, int n,
              const std::string& split) {
  data::SyntheticSceneConfig cfg = make_scene_config(g);
  fs::create_directories(out_dir);
  data::DatasetManifest m;
  m.root = out_dir;
  m.split = split;
  for (int i = 0; i < n; ++i) {
    cfg.seed = g.seed * 1000003ULL + static_cast<uint64_t>(i);
    ImagePair p = data::gen_scene(cfg);
    std::string stem = split + "_" + std::to_string(i);
    data::ManifestEntry e{stem + "_t1.png", stem + "_t2.png",
                          stem + "_label.png"};
    data::write_image_png((fs::path(out_dir) / e.t1_path).string(), p.t1);
    data::write_image_png((fs::path(out_dir) / e.t2_path).string(), p.t2);
    data::write_mask_png((fs::path(out_dir) / e.label_path).string(),
                         *p.label);
    m.entries.push_back(e);
  }
  std::string manifest_path =
      (fs::path(out_dir) / (split + ".manifest")).string();
  data::write_manifest(m, manifest_path);
  std::cout << "wrote " << n << " pairs, manifest " << manifest_path << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& train_manifest,
              const std::string& val_manifest, const std::string& out_ckpt,
              const std::string& sar_out_ckpt, const std::string& log_path) {
  train::TrainConfig cfg = make_train_config(g);
  auto train_ds = data::load_dataset(data::read_manifest(train_manifest));
  std::vector<ImagePair> val_ds;
  if (!val_manifest.empty())
    val_ds = data::load_dataset(data::read_manifest(val_manifest));

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw IoError("cannot open log file: " + log_path);
    log = &log_file;
  }

  train::TrainState st = train::fit(train_ds, val_ds, cfg, log);
  data::save_checkpoint(out_ckpt,
                        {st.spec, st.best_params, echo_config(g)});
  if (st.best_sar_params) {
    if (sar_out_ckpt.empty())
      throw IoError("mmcd training needs --sar-out for the second branch");
    data::save_checkpoint(sar_out_ckpt, {*st.sar_spec, *st.best_sar_params,
                                         echo_config(g)});
  }
  std::cout << "best_f1=" << st.best_f1 << " best_epoch=" << st.best_epoch
            << " checkpoint=" << out_ckpt << "\n";
  return 0;
}

int cmd_infer(const GlobalOpts& g, const std::string& ckpt_path,
              const std::string& sar_ckpt_path, const std::string& t1_path,
              const std::string& t2_path, const std::string& out_prob,
              const std::string& out_mask, double thresh) {
  data::Checkpoint ck = data::load_checkpoint(ckpt_path);
  RasterImage t1 = data::read_image_png(t1_path);
  RasterImage t2 = data::read_image_png(t2_path);
  MappingConfig mcfg;
  if (!g.config_path.empty())
    cfg_get(data::read_config(g.config_path), "mapping", "eta", mcfg.eta);

  LatentMap y1 = encoder::encode(ck.spec, ck.params, t1);
  LatentMap y2;
  if (g.mode_enum() == train::Mode::kMmcd) {
    if (sar_ckpt_path.empty())
      throw IoError("--mode mmcd requires --sar-ckpt");
    data::Checkpoint sck = data::load_checkpoint(sar_ckpt_path);
    y2 = encoder::encode(sck.spec, sck.params, t2);
  } else {
    y2 = encoder::encode(ck.spec, ck.params, t2);
  }
  ChangeProbMap yc = mapping::change_prob_map(y1, y2, mcfg);
  if (!out_prob.empty()) data::write_prob_map(out_prob, yc);
  if (!out_mask.empty()) {
    BinaryMask m = mapping::binarize(yc, thresh, t1.height(), t1.width());
    data::write_mask_png(out_mask, m);
  }
  std::cout << "latent " << yc.h << "x" << yc.w << ", prob="
            << (out_prob.empty() ? "-" : out_prob) << " mask="
            << (out_mask.empty() ? "-" : out_mask) << "\n";
  return 0;
}

int cmd_refine(const std::string& prob_path, const std::string& m1_path,
               const std::string& m2_path, const std::string& out_mask,
               double iou_thresh, int out_h, int out_w) {
  ChangeProbMap yc = data::read_prob_map(prob_path);
  MaskSet m1, m2;
  if (!m1_path.empty()) m1 = data::read_mask_set(m1_path);
  if (!m2_path.empty()) m2 = data::read_mask_set(m2_path);
  if (out_h <= 0 || out_w <= 0) {
    const MaskSet& any = m1.empty() ? m2 : m1;
    if (any.empty())
      throw IoError("refine: need --height/--width when both sets are empty");
    out_h = any.masks.front().h;
    out_w = any.masks.front().w;
  }
  RefineConfig rcfg;
  rcfg.iou_threshold = iou_thresh;
  BinaryMask refined = mapping::iou_refine(yc, m1, m2, rcfg, out_h, out_w);
  data::write_mask_png(out_mask, refined);
  std::cout << "refined mask " << out_h << "x" << out_w << " area="
            << refined.area() << " -> " << out_mask << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path) {
  BinaryMask pred = data::read_mask_png(pred_path);
  BinaryMask truth = data::read_mask_png(truth_path);
  eval::Metrics m = eval::metrics(eval::confusion(pred, truth));
  std::cout.precision(10);
  std::cout << "OA=" << m.oa << " Precision=" << m.precision
            << " Recall=" << m.recall << " F1=" << m.f1 << "\n";
  return 0;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw IoError("empty list: " + csv);
  return out;
}

int cmd_sweep(const GlobalOpts& g, const std::string& train_manifest,
              const std::string& val_manifest, const std::string& alphas_csv,
              const std::string& betas_csv, const std::string& seeds_csv) {
  auto train_ds = data::load_dataset(data::read_manifest(train_manifest));
  auto val_ds = data::load_dataset(data::read_manifest(val_manifest));
  std::vector<std::pair<double, double>> grid;
  for (double a : parse_list(alphas_csv))
    for (double b : parse_list(betas_csv)) grid.emplace_back(a, b);
  std::vector<uint64_t> seeds;
  for (double s : parse_list(seeds_csv))
    seeds.push_back(static_cast<uint64_t>(s));

  auto run = [&](double alpha, double beta, uint64_t seed) {
    train::TrainConfig cfg = make_train_config(g);
    cfg.weights.alpha = alpha;
    cfg.weights.beta = beta;
    cfg.seed = seed;
    return train::fit(train_ds, val_ds, cfg, nullptr).best_f1;
  };
  auto rows = eval::sweep(grid, run, seeds);
  std::cout << "alpha\tbeta\tmean_f1\ttrials\n";
  std::cout.precision(6);
  for (const auto& row : rows) {
    std::cout << row.alpha << "\t" << row.beta << "\t" << row.mean_f1 << "\t";
    for (size_t i = 0; i < row.trial_f1.size(); ++i)
      std::cout << (i ? "," : "") << row.trial_f1[i];
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bi-temporal change detection: synthesis, training, inference"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "global RNG seed");
  app.add_option("--config", g.config_path, "key=value config file")
      ->check(CLI::ExistingFile);
  app.add_option("--mode", g.mode, "homogeneous | mmcd")
      ->check(CLI::IsMember({"homogeneous", "mmcd"}));

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string out_dir, split = "train";
  int n_scenes = 8;
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--n", n_scenes, "number of pairs");
  synth->add_option("--split", split, "split tag")
      ->check(CLI::IsMember({"train", "val", "test"}));

  // train
  auto* tr = app.add_subcommand("train", "fit the encoder on a manifest");
  std::string train_manifest, val_manifest, out_ckpt, sar_out_ckpt, log_path;
  tr->add_option("--train", train_manifest, "training manifest")->required();
  tr->add_option("--val", val_manifest, "validation manifest");
  tr->add_option("--out", out_ckpt, "checkpoint output path")->required();
  tr->add_option("--sar-out", sar_out_ckpt, "second-branch checkpoint (mmcd)");
  tr->add_option("--log", log_path, "training log file (default stdout)");

  // infer
  auto* inf = app.add_subcommand("infer", "checkpoint + image pair -> change map");
  std::string ckpt_path, sar_ckpt_path, t1_path, t2_path, out_prob, out_mask;
  double thresh = 0.5;
  inf->add_option("--ckpt", ckpt_path, "encoder checkpoint")->required();
  inf->add_option("--sar-ckpt", sar_ckpt_path, "second-branch checkpoint (mmcd)");
  inf->add_option("--t1", t1_path, "first image (PNG)")->required();
  inf->add_option("--t2", t2_path, "second image (PNG)")->required();
  inf->add_option("--out-prob", out_prob, "probability map output (.s2ct)");
  inf->add_option("--out-mask", out_mask, "binarized mask output (PNG)");
  inf->add_option("--thresh", thresh, "binarization threshold");

  // refine
  auto* ref = app.add_subcommand("refine", "probability map + mask proposals -> refined mask");
  std::string prob_path, m1_path, m2_path, refined_path;
  double iou_thresh = 0.5;
  int out_h = 0, out_w = 0;
  ref->add_option("--prob", prob_path, "probability map (.s2ct)")->required();
  ref->add_option("--m1", m1_path, "first mask-set manifest (.masks)");
  ref->add_option("--m2", m2_path, "second mask-set manifest (.masks)");
  ref->add_option("--out", refined_path, "refined mask output (PNG)")->required();
  ref->add_option("--iou-thresh", iou_thresh, "IoU / matching threshold");
  ref->add_option("--height", out_h, "output height");
  ref->add_option("--width", out_w, "output width");

  // eval
  auto* ev = app.add_subcommand("eval", "compare predicted mask to ground truth");
  std::string pred_path, truth_path;
  ev->add_option("--pred", pred_path, "predicted mask (PNG)")->required();
  ev->add_option("--truth", truth_path, "ground-truth mask (PNG)")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "alpha/beta grid of train+eval runs");
  std::string alphas_csv = "0.2", betas_csv = "1", seeds_csv = "0";
  std::string sw_train, sw_val;
  sw->add_option("--train", sw_train, "training manifest")->required();
  sw->add_option("--val", sw_val, "validation manifest")->required();
  sw->add_option("--alphas", alphas_csv, "comma-separated alpha values");
  sw->add_option("--betas", betas_csv, "comma-separated beta values");
  sw->add_option("--seeds", seeds_csv, "comma-separated trial seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // --help exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage errors
  }

  try {
    if (*synth) return cmd_synth(g, out_dir, n_scenes, split);
    if (*tr)
      return cmd_train(g, train_manifest, val_manifest, out_ckpt,
                       sar_out_ckpt, log_path);
    if (*inf)
      return cmd_infer(g, ckpt_path, sar_ckpt_path, t1_path, t2_path,
                       out_prob, out_mask, thresh);
    if (*ref)
      return cmd_refine(prob_path, m1_path, m2_path, refined_path, iou_thresh,
                        out_h, out_w);
    if (*ev) return cmd_eval(pred_path, truth_path);
    if (*sw) return cmd_sweep(g, sw_train, sw_val, alphas_csv, betas_csv,
                              seeds_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
