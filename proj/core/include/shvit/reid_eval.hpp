#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "shvit/image.hpp"
#include "shvit/tensor.hpp"
#include "shvit/vit.hpp"

namespace shvit {

struct SampleMeta {
  int identity = 0;  ///< -1 marks a junk/distractor image
  int camera = 1;    ///< >= 1
  std::string path;
};

enum class Metric { cosine, euclidean };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& name);

struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  ///< row-major, rows = queries
  Metric metric = Metric::cosine;

  double at(std::size_t q, std::size_t g) const { return values[q * cols + g]; }
};

/// Row i: L2-normalized descriptor of images[i] ([n x 2d]). Eval mode; the
/// shuffle branch runs only when the config's apply_in_eval is set, seeded
/// per row so the result does not depend on batch_size.
Tensor extract_features(const VisionTransformer& model, const std::vector<Image>& images,
                        std::size_t batch_size, const ShuffleConfig& shuffle = {},
                        std::uint64_t seed = 0);

/// Cosine: 1 - <q, g> / (|q| |g|), which is 1 - <q, g> for unit rows.
/// Euclidean: |q - g|_2.
DistanceMatrix distance_matrix(const Tensor& queries, const Tensor& gallery, Metric metric);

struct EvalOptions {
  std::size_t max_rank = 50;
  /// Exclude gallery entries sharing both identity and camera with the query.
  bool cross_camera_filter = true;
};

struct EvalResult {
  std::vector<double> cmc;           ///< cmc[k-1] = Rank-k accuracy, k = 1..max_rank
  double map = 0.0;
  std::vector<double> per_query_ap;  ///< valid queries only, in query order
  std::vector<std::size_t> valid_queries;
  std::size_t num_valid_queries = 0;
};

/// Market-1501 single-query protocol.
///
/// Per query: drop gallery entries with identity -1, and (with the filter on)
/// entries with the query's identity and camera. Rank the rest by ascending
/// distance, ties broken by gallery index. AP is the mean, over relevant hits,
/// of the precision at each hit's rank. Queries with no relevant entry left
/// are excluded from CMC and mAP (and a warning is logged).
EvalResult evaluate(const DistanceMatrix& dist, const std::vector<SampleMeta>& queries,
                    const std::vector<SampleMeta>& gallery, const EvalOptions& opt = {});

/// "k,cmc" rows for k = 1..max_rank, then "map,<value>".
void write_eval_csv(const EvalResult& result, const std::string& path);
/// "query_index,path,ap" per valid query.
void write_per_query_csv(const EvalResult& result, const std::vector<SampleMeta>& queries,
                         const std::string& path);
/// Rank-1/5/10 and mAP as percentages.
std::string format_summary(const EvalResult& result);

}  // namespace shvit
