// shvit: train, evaluate and inspect Sh-ViT models at desk scale.
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shvit/config.hpp"
#include "shvit/error.hpp"
#include "shvit/log.hpp"
#include "shvit/synth.hpp"
#include "shvit/trainer.hpp"
#include "shvit/version.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Every config key becomes `--<key> [value]`; a bare boolean key means true.
struct KeyOptions {
  std::map<std::string, std::vector<std::string>> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app) {
    for (const std::string& key : shvit::RunConfig::keys()) {
      options[key] = app.add_option("--" + key, values[key], "config override")
                         ->expected(0, 1)
                         ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
                         ->group("Config overrides");
    }
  }

  shvit::ConfigOverrides collect() const {
    shvit::ConfigOverrides out;
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      const auto& v = values.at(key);
      out.emplace_back(key, v.empty() || v.back().empty() ? "true" : v.back());
    }
    return out;
  }
};

struct Common {
  std::string config_file;
  KeyOptions keys;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_file, "config file (flat `key = value` lines)")->check(CLI::ExistingFile);
    keys.attach(app);
  }

  shvit::RunConfig resolve() const {
    std::optional<std::string> file;
    if (!config_file.empty()) file = config_file;
    return shvit::resolve_config(file, keys.collect());
  }
};

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const shvit::NumericError& e) {
    shvit::log::error(std::string("numeric failure: ") + e.what());
    return kNumeric;
  } catch (const shvit::ConfigError& e) {
    shvit::log::error(std::string("config error: ") + e.what());
    return kUsage;
  } catch (const std::exception& e) {
    shvit::log::error(e.what());
    return kData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sh-ViT person re-identification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "shvit " + shvit::version());
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  // train
  Common train_opts;
  auto* train = app.add_subcommand("train", "train a model; writes checkpoints and metrics to output.dir");
  train_opts.attach(*train);

  // eval
  Common eval_opts;
  shvit::EvalRequest eval_req;
  bool no_camera_filter = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with the Market-1501 protocol");
  eval_opts.attach(*eval);
  eval->add_option("--checkpoint", eval_req.checkpoint, "model checkpoint (.shvit)")->required()->check(CLI::ExistingFile);
  eval->add_option("--query-dir", eval_req.query_dir, "query images (default: <data.root>/query)");
  eval->add_option("--gallery-dir", eval_req.gallery_dir, "gallery images (default: <data.root>/bounding_box_test)");
  eval->add_flag("--no-camera-filter", no_camera_filter, "keep same-identity same-camera gallery entries");

  // preview
  Common preview_opts;
  std::string preview_image, preview_out = "preview";
  std::uint64_t preview_seed = 0;
  std::size_t preview_n = 8;
  auto* preview = app.add_subcommand("preview", "write augmented variants of one image");
  preview_opts.attach(*preview);
  preview->add_option("--image", preview_image, "input PPM image")->required()->check(CLI::ExistingFile);
  preview->add_option("--seed", preview_seed, "seed of the first variant");
  preview->add_option("-n,--count", preview_n, "number of variants")->check(CLI::PositiveNumber);
  preview->add_option("-o,--out", preview_out, "output directory");

  // stats
  std::string stats_dir, stats_out = "stats.txt";
  bool stats_lenient = false;
  auto* stats = app.add_subcommand("stats", "per-channel mean/std of a dataset");
  stats->add_option("dataset", stats_dir, "dataset root or image directory")->required();
  stats->add_option("-o,--out", stats_out, "stats file to write");
  stats->add_flag("--lenient", stats_lenient, "skip malformed file names instead of failing");

  // synth
  shvit::SynthConfig synth_cfg;
  std::string synth_root;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset in Market-1501 layout");
  synth->add_option("root", synth_root, "output root")->required();
  synth->add_option("--num-ids", synth_cfg.num_ids, "training identities");
  synth->add_option("--per-id", synth_cfg.per_id, "training images per identity");
  synth->add_option("--cameras", synth_cfg.cameras, "number of cameras");
  synth->add_option("--height", synth_cfg.height, "image height");
  synth->add_option("--width", synth_cfg.width, "image width");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--test-ids", synth_cfg.test_ids, "query/gallery identities");
  synth->add_option("--test-per-id", synth_cfg.test_per_id, "query/gallery images per identity");
  synth->add_flag("--heldout-same-ids", synth_cfg.heldout_same_ids, "query/gallery reuse training identities");
  synth->add_option("--val-per-id", synth_cfg.val_per_id, "validation images per training identity");
  synth->add_option("--occlusion-prob", synth_cfg.occlusion_prob, "probability of an occluding block");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (verbose) shvit::log::set_level(shvit::log::Level::debug);
  if (quiet) shvit::log::set_level(shvit::log::Level::warn);

  if (*train) {
    return run_guarded([&] {
      const shvit::RunConfig cfg = train_opts.resolve();
      const shvit::TrainResult r = shvit::train(cfg);
      std::fprintf(stderr, "final train_acc %.4f, best epoch %zu; outputs in %s\n", r.history.back().train_acc,
                   r.best_epoch, cfg.output_dir.c_str());
    });
  }
  if (*eval) {
    return run_guarded([&] {
      shvit::RunConfig cfg = eval_opts.resolve();
      if (no_camera_filter) cfg.camera_filter = false;
      cfg.validate();
      shvit::run_eval(cfg, eval_req);
    });
  }
  if (*preview) {
    return run_guarded([&] {
      const shvit::RunConfig cfg = preview_opts.resolve();
      cfg.augment.validate();
      for (const auto& p : shvit::run_preview(cfg, preview_image, preview_seed, preview_n, preview_out))
        shvit::log::info("wrote " + p);
    });
  }
  if (*stats) {
    return run_guarded([&] {
      const shvit::ChannelStats st = shvit::run_stats(stats_dir, !stats_lenient);
      shvit::write_stats_file(st, stats_out);
      for (std::size_t c = 0; c < 3; ++c)
        if (st.zero_std[c]) shvit::log::warn("channel " + std::to_string(c) + " has zero standard deviation");
      shvit::log::info("wrote " + stats_out);
    });
  }
  if (*synth) {
    return run_guarded([&] {
      const shvit::SynthSummary s = shvit::generate_synthetic_dataset(synth_root, synth_cfg);
      std::fprintf(stderr, "train %zu, query %zu, gallery %zu, val %zu images under %s\n", s.train, s.query,
                   s.gallery, s.val, synth_root.c_str());
    });
  }
  return kUsage;
}
