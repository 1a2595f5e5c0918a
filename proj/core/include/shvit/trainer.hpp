#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "shvit/augment.hpp"
#include "shvit/checkpoint.hpp"
#include "shvit/config.hpp"
#include "shvit/distill.hpp"
#include "shvit/reid_eval.hpp"
#include "shvit/vit.hpp"

namespace shvit {

struct EpochMetrics {
  std::size_t epoch = 0;  ///< 1-based
  double loss = 0.0;      ///< mean batch loss
  double train_acc = 0.0; ///< fraction of training-mode predictions that were correct
};

struct TrainResult {
  RunConfig config;  ///< as resolved for the run (stats and class count filled in)
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  VisionTransformer model;
};

/// Trains on `<data.root>/bounding_box_train`.
///
/// Each epoch visits the samples in a seeded order, in batches; per sample it
/// augments, runs the training-mode forward pass with the shuffle branch and
/// accumulates CE (or the distillation objective). One optimizer step per
/// batch. Every random draw is derived from (train.seed, epoch, sample index),
/// so results do not depend on batch composition or timing.
///
/// When output.dir is non-empty it receives config.txt, seed.txt, VERSION,
/// stats.txt, metrics.csv, best.shvit and final.shvit. Raises NumericError
/// (with epoch/step context) as soon as any value stops being finite.
TrainResult train(const RunConfig& cfg);

struct LoadedModel {
  RunConfig config;
  VisionTransformer model;
  ChannelStats stats;
};

Checkpoint make_model_checkpoint(const RunConfig& cfg, const VisionTransformer& model,
                                 const OptimizerState* optim);
LoadedModel load_model(const std::string& checkpoint_path);

/// Recorded-logits checkpoint (kind "logits"): one row per file name.
Checkpoint make_logits_checkpoint(const std::vector<std::string>& file_names, const Tensor& logits);
/// A model checkpoint gives a ModelTeacher; a logits checkpoint a RecordedTeacher
/// keyed by file name.
std::unique_ptr<TeacherOracle> load_teacher(const std::string& checkpoint_path);

struct EvalRequest {
  std::string checkpoint;
  std::string query_dir;    ///< empty: <data.root>/query
  std::string gallery_dir;  ///< empty: <data.root>/bounding_box_test
};

/// extract -> distance -> evaluate, using cfg's eval.* settings and the
/// checkpoint's model and stats. Images that cannot be decoded, or whose
/// size does not match the model, are skipped with a warning. Writes
/// eval.csv, per_query_ap.csv, summary.txt, excluded.txt and config.txt into
/// output.dir when it is non-empty.
EvalResult run_eval(const RunConfig& cfg, const EvalRequest& req);

/// Writes `n` augmented variants of `image_path` (seeds seed..seed+n-1),
/// denormalized for viewing, as <out_dir>/preview_<k>.ppm. Returns the paths.
std::vector<std::string> run_preview(const RunConfig& cfg, const std::string& image_path, std::uint64_t seed,
                                     std::size_t n, const std::string& out_dir);

/// Per-channel stats over every .ppm image of `dir` (or of its
/// bounding_box_train subdirectory when present).
ChannelStats run_stats(const std::string& dir, bool strict);

}  // namespace shvit
