#include "shvit/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "shvit/dataset.hpp"
#include "shvit/error.hpp"
#include "shvit/fileio.hpp"
#include "shvit/log.hpp"
#include "shvit/ops.hpp"
#include "shvit/ppm.hpp"
#include "shvit/version.hpp"

namespace shvit {
namespace fs = std::filesystem;

namespace {

// Independent RNG streams, all derived from train.seed.
enum Stream : std::uint64_t {
  kInit = 1,
  kDistillToken = 2,
  kOrder = 3,
  kAugment = 4,
  kShuffle = 5,
  kEvalShuffle = 6,
};

std::string file_name(const std::string& path) { return fs::path(path).filename().string(); }

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += p + "\n";
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,loss,train_acc\n";
  char buf[96];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", m.epoch, m.loss, m.train_acc);
    out += buf;
  }
  return out;
}

void write_run_files(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  write_file_atomic((dir / "config.txt").string(), cfg.to_text());
  write_file_atomic((dir / "seed.txt").string(), std::to_string(cfg.seed) + "\n");
  write_file_atomic((dir / "VERSION").string(), "shvit " + version() + "\n");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {kOrder, epoch}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return order;
}

}  // namespace

Checkpoint make_model_checkpoint(const RunConfig& cfg, const VisionTransformer& model, const OptimizerState* optim) {
  Checkpoint ck;
  ck.kind = "model";
  // The output location is not part of what the checkpoint describes; leaving
  // it out keeps checkpoints of identical runs byte-identical.
  RunConfig stored = cfg;
  stored.output_dir.clear();
  ck.config_text = stored.to_text();
  ck.meta["tool_version"] = version();
  ck.meta["seed"] = std::to_string(cfg.seed);
  store_stats(ck, cfg.augment.stats);
  store_parameters(ck, model);
  if (optim) store_optimizer(ck, *optim, model);
  return ck;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  if (ck.kind != "model") throw DataError(checkpoint_path + ": expected a model checkpoint, found '" + ck.kind + "'");
  RunConfig cfg = parse_config_text(ck.config_text);
  VisionTransformer model(cfg.model, 0);
  if (ck.find("param.distill_token")) model.attach_distill_token(0);
  load_parameters(ck, model);
  ChannelStats stats = load_stats(ck).value_or(cfg.augment.stats);
  return {std::move(cfg), std::move(model), stats};
}

Checkpoint make_logits_checkpoint(const std::vector<std::string>& file_names, const Tensor& logits) {
  if (logits.rank() != 2 || logits.dim(0) != file_names.size())
    throw ShapeError("logits checkpoint: need one row per file name");
  Checkpoint ck;
  ck.kind = "logits";
  ck.meta["paths"] = join(file_names);
  ck.meta["tool_version"] = version();
  ck.arrays.push_back({"logits", logits.shape(), std::vector<double>(logits.data().begin(), logits.data().end())});
  return ck;
}

std::unique_ptr<TeacherOracle> load_teacher(const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  if (ck.kind == "logits") {
    const NamedArray* a = ck.find("logits");
    if (!a || a->shape.size() != 2) throw DataError(checkpoint_path + ": logits checkpoint without a logits matrix");
    return std::make_unique<RecordedTeacher>(split_lines(ck.meta.count("paths") ? ck.meta.at("paths") : ""),
                                             Tensor(a->shape, a->values));
  }
  return std::make_unique<ModelTeacher>(load_model(checkpoint_path).model);
}

TrainResult train(const RunConfig& input) {
  RunConfig cfg = input;
  cfg.validate();
  if (cfg.data_root.empty()) throw ConfigError("data.root is required for training");

  const DatasetSplit split = load_split(cfg.data_root, SplitName::train, cfg.strict);
  const LabelMap label_map = build_label_map(split.samples);
  if (label_map.size() < 2) throw DataError("training split needs at least two identities");
  std::vector<std::size_t> labels;
  std::vector<SampleMeta> samples;
  for (const auto& s : split.samples) {
    if (s.identity < 0) continue;
    samples.push_back(s);
    labels.push_back(label_map.index_of(s.identity));
  }
  const std::vector<Image> images = load_images(samples);
  for (const auto& img : images)
    if (img.height != cfg.model.image_height || img.width != cfg.model.image_width || img.channels != cfg.model.channels)
      throw DataError("image size " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                      " does not match the model input " + std::to_string(cfg.model.image_height) + "x" +
                      std::to_string(cfg.model.image_width));

  if (!cfg.stats_file.empty()) {
    cfg.augment.stats = read_stats_file(cfg.stats_file);
  } else {
    cfg.augment.stats = compute_dataset_stats(images);
  }
  for (std::size_t c = 0; c < 3; ++c)
    if (cfg.augment.stats.zero_std[c])
      throw DataError("channel " + std::to_string(c) + " has zero standard deviation; cannot normalize");
  if (cfg.model.num_classes != label_map.size()) {
    log::info("model.num_classes set to " + std::to_string(label_map.size()) + " (identities in the training split)");
    cfg.model.num_classes = label_map.size();
  }

  std::unique_ptr<TeacherOracle> teacher;
  if (cfg.distill.mode != DistillMode::off) {
    teacher = load_teacher(cfg.distill.teacher_checkpoint);
    if (teacher->num_classes() != cfg.model.num_classes)
      throw ConfigError("teacher predicts " + std::to_string(teacher->num_classes()) + " classes, student " +
                        std::to_string(cfg.model.num_classes));
  }

  VisionTransformer model(cfg.model, derive_seed(cfg.seed, {kInit}));
  if (teacher && cfg.distill.use_token) model.attach_distill_token(derive_seed(cfg.seed, {kDistillToken}));
  OptimizerState optim(cfg.optim);

  const bool write_outputs = !cfg.output_dir.empty();
  if (write_outputs) {
    fs::create_directories(cfg.output_dir);
    write_run_files(cfg);
    write_stats_file(cfg.augment.stats, (fs::path(cfg.output_dir) / "stats.txt").string());
  }
  log::info(std::to_string(samples.size()) + " images, " + std::to_string(label_map.size()) +
                         " identities, " + std::to_string(model.num_parameters()) + " parameters");

  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  const std::size_t n = samples.size();
  std::vector<Tensor> params = model.parameters();
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0, batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      try {
        Graph g;
        std::vector<Tensor> class_rows, distill_rows, teacher_rows;
        std::vector<std::size_t> batch_labels;
        for (std::size_t pos = start; pos < end; ++pos) {
          const std::size_t idx = order[pos];
          Rng aug_rng(derive_seed(cfg.seed, {kAugment, epoch, idx}));
          const Tensor input = to_tensor(apply_pipeline(images[idx], cfg.augment, aug_rng));
          Rng shuffle_rng(derive_seed(cfg.seed, {kShuffle, epoch, idx}));
          ForwardOptions opt;
          opt.mode = RunMode::train;
          opt.shuffle = cfg.shuffle;
          opt.rng = &shuffle_rng;
          const ForwardOutput out = model.forward(g, input, opt);
          const std::size_t C = cfg.model.num_classes;
          class_rows.push_back(ops::reshape(g, out.logits, {1, C}));
          if (teacher) {
            distill_rows.push_back(ops::reshape(g, out.distill_logits.defined() ? out.distill_logits : out.logits, {1, C}));
            const Tensor t = teacher->logits(input, file_name(samples[idx].path));
            teacher_rows.push_back(Tensor(Shape{1, C}, std::vector<double>(t.data().begin(), t.data().end())));
          }
          batch_labels.push_back(labels[idx]);
          const auto pred = argmax_rows(Tensor(Shape{1, C}, std::vector<double>(out.logits.data().begin(), out.logits.data().end())));
          if (pred[0] == labels[idx]) ++correct;
        }
        const Tensor logits = ops::concat_rows(g, class_rows);
        Tensor loss;
        if (teacher) {
          Graph scratch(Graph::Mode::inference);
          const Tensor teacher_logits = ops::concat_rows(scratch, teacher_rows);
          loss = distill_loss(g, logits, ops::concat_rows(g, distill_rows), teacher_logits, batch_labels, cfg.distill);
        } else {
          loss = ops::cross_entropy(g, logits, batch_labels);
        }
        loss_sum += loss.item();
        g.backward(loss);
        optimizer_step(optim, params);
        model.zero_grad();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) + ": " + e.what());
      }
      ++step;
      ++batches;
    }
    EpochMetrics m{epoch, loss_sum / static_cast<double>(batches), static_cast<double>(correct) / static_cast<double>(n)};
    history.push_back(m);
    char line[128];
    std::snprintf(line, sizeof line, "epoch %zu/%zu  loss %.4f  train_acc %.3f", epoch, cfg.epochs, m.loss, m.train_acc);
    log::info(line);

    const bool improved = best_epoch == 0 || m.train_acc > history[best_epoch - 1].train_acc ||
                          (m.train_acc == history[best_epoch - 1].train_acc && m.loss < history[best_epoch - 1].loss);
    if (improved) best_epoch = epoch;
    if (write_outputs) {
      write_file_atomic((fs::path(cfg.output_dir) / "metrics.csv").string(), metrics_csv(history));
      if (improved) {
        Checkpoint ck = make_model_checkpoint(cfg, model, &optim);
        ck.meta["epoch"] = std::to_string(epoch);
        save_checkpoint(ck, (fs::path(cfg.output_dir) / "best.shvit").string());
      }
    }
  }

  if (write_outputs) {
    Checkpoint ck = make_model_checkpoint(cfg, model, &optim);
    ck.meta["epoch"] = std::to_string(cfg.epochs);
    save_checkpoint(ck, (fs::path(cfg.output_dir) / "final.shvit").string());
  }
  return {std::move(cfg), std::move(history), best_epoch, std::move(model)};
}

EvalResult run_eval(const RunConfig& cfg, const EvalRequest& req) {
  if (req.checkpoint.empty()) throw ConfigError("eval needs a checkpoint");
  const std::string qdir = !req.query_dir.empty() ? req.query_dir
                           : !cfg.data_root.empty() ? (fs::path(cfg.data_root) / split_directory(SplitName::query)).string()
                                                    : throw ConfigError("eval needs data.root or an explicit query directory");
  const std::string gdir = !req.gallery_dir.empty() ? req.gallery_dir
                           : !cfg.data_root.empty() ? (fs::path(cfg.data_root) / split_directory(SplitName::gallery)).string()
                                                    : throw ConfigError("eval needs data.root or an explicit gallery directory");

  const LoadedModel loaded = load_model(req.checkpoint);
  const DatasetSplit query_split = load_directory(qdir, cfg.strict);
  const DatasetSplit gallery_split = load_directory(gdir, cfg.strict);

  // Images that fail to decode (or have the wrong size) are left out of the
  // evaluation and listed, rather than aborting the whole run.
  std::vector<std::string> excluded;
  struct Prepared {
    std::vector<SampleMeta> samples;
    std::vector<Image> images;
  };
  auto prepare = [&](const DatasetSplit& s) {
    Prepared out;
    for (const SampleMeta& meta : s.samples) {
      try {
        Image img = decode_image(meta.path);
        if (img.height != loaded.config.model.image_height || img.width != loaded.config.model.image_width)
          throw DataError(meta.path + ": image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                          ", the checkpoint's model expects " + std::to_string(loaded.config.model.image_height) +
                          "x" + std::to_string(loaded.config.model.image_width));
        out.images.push_back(normalize(img, loaded.stats));
        out.samples.push_back(meta);
      } catch (const DataError& e) {
        log::warn(std::string("excluded from evaluation: ") + e.what());
        excluded.push_back(meta.path);
      }
    }
    if (out.images.empty()) throw DataError("no usable images in " + s.samples.front().path + " and siblings");
    return out;
  };
  const Prepared query = prepare(query_split);
  const Prepared gallery = prepare(gallery_split);
  const std::uint64_t feature_seed = derive_seed(loaded.config.seed, {kEvalShuffle});
  const Tensor qf = extract_features(loaded.model, query.images, cfg.eval_batch_size, loaded.config.shuffle, feature_seed);
  const Tensor gf =
      extract_features(loaded.model, gallery.images, cfg.eval_batch_size, loaded.config.shuffle, feature_seed);
  const DistanceMatrix dist = distance_matrix(qf, gf, cfg.metric);
  const EvalResult result = evaluate(dist, query.samples, gallery.samples, {cfg.max_rank, cfg.camera_filter});

  const std::string summary = format_summary(result);
  log::info(summary);
  if (!cfg.output_dir.empty()) {
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    write_eval_csv(result, (dir / "eval.csv").string());
    write_per_query_csv(result, query.samples, (dir / "per_query_ap.csv").string());
    write_file_atomic((dir / "summary.txt").string(), summary + "\n");
    std::string excluded_text;
    for (const auto& path : excluded) excluded_text += path + "\n";
    write_file_atomic((dir / "excluded.txt").string(), excluded_text);
    write_file_atomic((dir / "config.txt").string(), cfg.to_text());
    write_file_atomic((dir / "VERSION").string(), "shvit " + version() + "\n");
  }
  return result;
}

std::vector<std::string> run_preview(const RunConfig& cfg, const std::string& image_path, std::uint64_t seed,
                                     std::size_t n, const std::string& out_dir) {
  if (n == 0) throw ConfigError("preview: n must be positive");
  const Image img = decode_image(image_path);
  AugmentConfig aug = cfg.augment;
  if (!cfg.stats_file.empty()) aug.stats = read_stats_file(cfg.stats_file);
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(seed + k);
    const Image variant = denormalize(apply_pipeline(img, aug, rng), aug.stats);
    char name[48];
    std::snprintf(name, sizeof name, "preview_%03zu.ppm", k);
    paths.push_back((fs::path(out_dir) / name).string());
    write_ppm(variant, paths.back());
  }
  return paths;
}

ChannelStats run_stats(const std::string& dir, bool strict) {
  const fs::path train_dir = fs::path(dir) / split_directory(SplitName::train);
  const DatasetSplit split = load_directory(fs::is_directory(train_dir) ? train_dir.string() : dir, strict);
  StatsAccumulator acc;
  for (const auto& s : split.samples) acc.add(decode_image(s.path));
  return acc.finish();
}

}  // namespace shvit
