#include "shvit/reid_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "shvit/error.hpp"
#include "shvit/fileio.hpp"
#include "shvit/log.hpp"

namespace shvit {

std::string to_string(Metric m) { return m == Metric::cosine ? "cosine" : "euclidean"; }

Metric metric_from_string(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "euclidean") return Metric::euclidean;
  throw ConfigError("unknown metric '" + name + "' (expected cosine or euclidean)");
}

Tensor extract_features(const VisionTransformer& model, const std::vector<Image>& images,
                        std::size_t batch_size, const ShuffleConfig& shuffle, std::uint64_t seed) {
  if (images.empty()) throw DataError("extract_features: no images");
  if (batch_size == 0) throw ConfigError("extract_features: batch_size must be positive");
  const std::size_t dim = model.config().descriptor_dim();
  std::vector<double> rows(images.size() * dim);
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + batch_size);
    for (std::size_t i = start; i < end; ++i) {
      Graph g(Graph::Mode::inference);
      Rng rng(derive_seed(seed, {i}));
      ForwardOptions opt;
      opt.mode = RunMode::eval;
      opt.shuffle = shuffle;
      opt.rng = &rng;
      const ForwardOutput out = model.forward(g, to_tensor(images[i]), opt);
      std::copy(out.descriptor.data().begin(), out.descriptor.data().end(), rows.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
  }
  return Tensor(Shape{images.size(), dim}, std::move(rows));
}

DistanceMatrix distance_matrix(const Tensor& queries, const Tensor& gallery, Metric metric) {
  if (queries.rank() != 2 || gallery.rank() != 2 || queries.dim(1) != gallery.dim(1))
    throw ShapeError("distance_matrix: descriptor widths differ, " + shape_to_string(queries.shape()) +
                     " vs " + shape_to_string(gallery.shape()));
  const std::size_t Q = queries.dim(0), G = gallery.dim(0), d = queries.dim(1);
  DistanceMatrix D{Q, G, std::vector<double>(Q * G), metric};
  auto qd = queries.data();
  auto gd = gallery.data();
  std::vector<double> gnorm(G);
  for (std::size_t j = 0; j < G; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += gd[j * d + k] * gd[j * d + k];
    gnorm[j] = std::sqrt(s);
  }
  for (std::size_t i = 0; i < Q; ++i) {
    const double* q = &qd[i * d];
    double qn = 0.0;
    for (std::size_t k = 0; k < d; ++k) qn += q[k] * q[k];
    qn = std::sqrt(qn);
    for (std::size_t j = 0; j < G; ++j) {
      const double* x = &gd[j * d];
      double v = 0.0;
      if (metric == Metric::cosine) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += q[k] * x[k];
        const double denom = qn * gnorm[j];
        if (!(denom > 0.0)) throw NumericError("distance_matrix: zero descriptor under cosine metric");
        v = 1.0 - dot / denom;
      } else {
        for (std::size_t k = 0; k < d; ++k) v += (q[k] - x[k]) * (q[k] - x[k]);
        v = std::sqrt(v);
      }
      if (!std::isfinite(v)) throw NumericError("distance_matrix: non-finite distance");
      D.values[i * G + j] = v;
    }
  }
  return D;
}

EvalResult evaluate(const DistanceMatrix& dist, const std::vector<SampleMeta>& queries,
                    const std::vector<SampleMeta>& gallery, const EvalOptions& opt) {
  if (queries.size() != dist.rows || gallery.size() != dist.cols)
    throw ShapeError("evaluate: metadata sizes (" + std::to_string(queries.size()) + ", " +
                     std::to_string(gallery.size()) + ") do not match distance matrix (" +
                     std::to_string(dist.rows) + ", " + std::to_string(dist.cols) + ")");
  if (opt.max_rank == 0) throw ConfigError("evaluate: max_rank must be positive");
  EvalResult res;
  std::vector<double> hits_at(opt.max_rank, 0.0);
  std::vector<std::size_t> order;
  std::size_t skipped = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const SampleMeta& qm = queries[q];
    order.clear();
    for (std::size_t gi = 0; gi < gallery.size(); ++gi) {
      const SampleMeta& gm = gallery[gi];
      if (gm.identity == -1) continue;
      if (opt.cross_camera_filter && gm.identity == qm.identity && gm.camera == qm.camera) continue;
      order.push_back(gi);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dist.at(q, a) < dist.at(q, b);
    });
    std::size_t relevant = 0, first_hit = 0;
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (gallery[order[r]].identity != qm.identity) continue;
      ++relevant;
      if (relevant == 1) first_hit = r;
      precision_sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
    }
    if (relevant == 0 || qm.identity == -1) {
      ++skipped;
      continue;
    }
    res.per_query_ap.push_back(precision_sum / static_cast<double>(relevant));
    res.valid_queries.push_back(q);
    for (std::size_t k = first_hit; k < opt.max_rank; ++k) hits_at[k] += 1.0;
  }
  res.num_valid_queries = res.valid_queries.size();
  if (skipped > 0)
    log::warn("evaluate: " + std::to_string(skipped) +
              " quer" + (skipped == 1 ? "y has" : "ies have") +
              " no valid relevant gallery entry and " + (skipped == 1 ? "was" : "were") + " excluded");
  res.cmc.assign(opt.max_rank, 0.0);
  if (res.num_valid_queries > 0) {
    const double nv = static_cast<double>(res.num_valid_queries);
    for (std::size_t k = 0; k < opt.max_rank; ++k) res.cmc[k] = hits_at[k] / nv;
    res.map = std::accumulate(res.per_query_ap.begin(), res.per_query_ap.end(), 0.0) / nv;
  }
  return res;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_eval_csv(const EvalResult& result, const std::string& path) {
  std::ostringstream os;
  os << "k,cmc\n";
  for (std::size_t k = 0; k < result.cmc.size(); ++k) os << (k + 1) << ',' << fmt_double(result.cmc[k]) << '\n';
  os << "map," << fmt_double(result.map) << '\n';
  write_file_atomic(path, os.str());
}

void write_per_query_csv(const EvalResult& result, const std::vector<SampleMeta>& queries,
                         const std::string& path) {
  std::ostringstream os;
  os << "query_index,path,ap\n";
  for (std::size_t i = 0; i < result.valid_queries.size(); ++i) {
    const std::size_t q = result.valid_queries[i];
    os << q << ',' << (q < queries.size() ? queries[q].path : std::string()) << ','
       << fmt_double(result.per_query_ap[i]) << '\n';
  }
  write_file_atomic(path, os.str());
}

std::string format_summary(const EvalResult& result) {
  auto rank = [&](std::size_t k) {
    if (result.cmc.empty()) return 0.0;
    return 100.0 * result.cmc[std::min(k, result.cmc.size()) - 1];
  };
  char buf[160];
  std::snprintf(buf, sizeof buf, "Rank1(%%) %.1f  Rank5(%%) %.1f  Rank10(%%) %.1f  mAP(%%) %.1f  (%zu queries)",
                rank(1), rank(5), rank(10), 100.0 * result.map, result.num_valid_queries);
  return buf;
}

}  // namespace shvit
