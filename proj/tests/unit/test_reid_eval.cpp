#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "shvit/error.hpp"
#include "shvit/log.hpp"
#include "shvit/reid_eval.hpp"
#include "shvit/vit.hpp"

using namespace shvit;
using oracle::brute_force_eval;

namespace {

DistanceMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  DistanceMatrix d;
  d.rows = rows.size();
  d.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) d.values.insert(d.values.end(), r.begin(), r.end());
  return d;
}

struct Instance {
  std::vector<std::vector<double>> dist;
  std::vector<SampleMeta> q, g;
};

// <=10 queries, <=30 gallery, ids in {-1, 0..3}, cameras 1..3. Distances are
// drawn from a small integer set so exact ties are common.
Instance random_instance(std::mt19937_64& eng) {
  Instance in;
  const std::size_t nq = 1 + eng() % 10, ng = 1 + eng() % 30;
  auto meta = [&](bool junk_allowed) {
    SampleMeta m;
    m.identity = static_cast<int>(eng() % 4);
    if (junk_allowed && eng() % 6 == 0) m.identity = -1;
    m.camera = 1 + static_cast<int>(eng() % 3);
    return m;
  };
  for (std::size_t i = 0; i < nq; ++i) in.q.push_back(meta(false));
  for (std::size_t j = 0; j < ng; ++j) in.g.push_back(meta(true));
  in.dist.assign(nq, std::vector<double>(ng));
  for (auto& r : in.dist)
    for (double& v : r) v = static_cast<double>(eng() % 7) / 4.0;
  return in;
}

SampleMeta m(int id, int cam) { return SampleMeta{id, cam, ""}; }

ModelConfig tiny() {
  ModelConfig c;
  c.image_height = 8;
  c.image_width = 4;
  c.embed_dim = 16;
  c.num_heads = 2;
  c.num_classes = 3;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// evaluate

TEST(Evaluate, HandEnumeratedAveragePrecision) {
  // Ranked [relevant, irrelevant, relevant]: AP = (1/1 + 2/3) / 2.
  const auto d = from_rows({{0.1, 0.2, 0.3}});
  const EvalResult r = evaluate(d, {m(1, 1)}, {m(1, 2), m(2, 2), m(1, 3)}, {.max_rank = 3});
  EXPECT_EQ(r.map, (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_NEAR(r.map, 0.8333333333333333, 1e-15);
  EXPECT_EQ(r.cmc[0], 1.0);
  EXPECT_EQ(r.num_valid_queries, 1u);
}

TEST(Evaluate, AllRelevantGivesPerfectScores) {
  const auto d = from_rows({{0.5, 0.1, 0.9, 0.3}});
  const EvalResult r = evaluate(d, {m(4, 1)}, {m(4, 2), m(4, 2), m(4, 3), m(4, 2)}, {.max_rank = 4});
  EXPECT_EQ(r.map, 1.0);
  for (double c : r.cmc) EXPECT_EQ(c, 1.0);
}

TEST(Evaluate, SameCameraOnlyRelevantExcludesTheQuery) {
  const auto d = from_rows({{0.1, 0.2}, {0.1, 0.2}});
  const auto before = log::warning_count();
  const EvalResult r = evaluate(d, {m(1, 1), m(2, 1)}, {m(1, 1), m(2, 2)}, {.max_rank = 2});
  EXPECT_EQ(r.num_valid_queries, 1u);
  EXPECT_EQ(r.valid_queries, (std::vector<std::size_t>{1}));
  EXPECT_GT(log::warning_count(), before);
  // Disabling the filter makes the first query valid again.
  const EvalResult all = evaluate(d, {m(1, 1), m(2, 1)}, {m(1, 1), m(2, 2)}, {.max_rank = 2, .cross_camera_filter = false});
  EXPECT_EQ(all.num_valid_queries, 2u);
}

TEST(Evaluate, JunkGalleryEntriesAreIgnored) {
  const auto d = from_rows({{0.0, 0.5}});
  const EvalResult r = evaluate(d, {m(1, 1)}, {m(-1, 2), m(1, 2)}, {.max_rank = 2});
  EXPECT_EQ(r.cmc[0], 1.0);
  EXPECT_EQ(r.map, 1.0);
}

TEST(Evaluate, TiesBreakByGalleryIndex) {
  const auto d = from_rows({{0.5, 0.5}});
  const EvalResult first = evaluate(d, {m(1, 1)}, {m(1, 2), m(2, 2)}, {.max_rank = 2});
  const EvalResult second = evaluate(d, {m(1, 1)}, {m(2, 2), m(1, 2)}, {.max_rank = 2});
  EXPECT_EQ(first.map, 1.0);
  EXPECT_EQ(second.map, 0.5);
}

TEST(Evaluate, MatchesBruteForceOn200Instances) {
  std::mt19937_64 eng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(eng);
    const std::size_t K = 1 + eng() % 12;
    const bool filter = trial % 4 != 3;
    const EvalResult r = evaluate(from_rows(in.dist), in.q, in.g, {.max_rank = K, .cross_camera_filter = filter});
    const auto ref = brute_force_eval(in.dist, in.q, in.g, K, filter);
    ASSERT_EQ(r.num_valid_queries, ref.valid) << "trial " << trial;
    ASSERT_EQ(r.cmc, ref.cmc) << "trial " << trial;
    ASSERT_EQ(r.per_query_ap, ref.ap) << "trial " << trial;
    ASSERT_EQ(r.map, ref.map) << "trial " << trial;
  }
}

TEST(Evaluate, CmcIsMonotoneAndReachesOne) {
  std::mt19937_64 eng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance in = random_instance(eng);
    const EvalResult r = evaluate(from_rows(in.dist), in.q, in.g, {.max_rank = 30});
    for (std::size_t k = 1; k < r.cmc.size(); ++k) ASSERT_GE(r.cmc[k], r.cmc[k - 1]);
    if (r.num_valid_queries == 0) continue;
    EXPECT_EQ(r.cmc.back(), 1.0);
    double sum = 0;
    for (double ap : r.per_query_ap) sum += ap;
    EXPECT_NEAR(r.map, sum / static_cast<double>(r.num_valid_queries), 1e-15);
  }
}

TEST(Evaluate, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 eng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance in = random_instance(eng);
    DistanceMatrix d = from_rows(in.dist), t = d;
    for (double& v : t.values) v = std::exp(3.0 * v) - 7.0;
    const EvalResult a = evaluate(d, in.q, in.g, {.max_rank = 10});
    const EvalResult b = evaluate(t, in.q, in.g, {.max_rank = 10});
    ASSERT_EQ(a.cmc, b.cmc);
    ASSERT_EQ(a.map, b.map);
  }
}

TEST(Evaluate, MetadataLengthMismatchThrows) {
  const auto d = from_rows({{0.1, 0.2}});
  EXPECT_THROW(evaluate(d, {m(1, 1)}, {m(1, 2)}), ShapeError);
}

// ---------------------------------------------------------------------------
// distances

TEST(Distance, SelfDistanceIsZeroAndOrthogonalIsOne) {
  const Tensor e = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
  const DistanceMatrix d = distance_matrix(e, e, Metric::cosine);
  EXPECT_NEAR(d.at(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(d.at(1, 1), 0.0, 1e-12);
  EXPECT_NEAR(d.at(0, 1), 1.0, 1e-12);
  const DistanceMatrix de = distance_matrix(e, e, Metric::euclidean);
  EXPECT_NEAR(de.at(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(de.at(0, 1), std::sqrt(2.0), 1e-12);
}

TEST(Distance, MatchesScalarLoops) {
  std::mt19937_64 eng(9);
  std::normal_distribution<double> n;
  std::vector<double> qv(16 * 8), gv(16 * 8);
  for (double& v : qv) v = n(eng);
  for (double& v : gv) v = n(eng);
  const Tensor q = Tensor::matrix(16, 8, qv), g = Tensor::matrix(16, 8, gv);
  const DistanceMatrix dc = distance_matrix(q, g, Metric::cosine);
  const DistanceMatrix de = distance_matrix(q, g, Metric::euclidean);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) {
      double dot = 0, nq = 0, ng = 0, sq = 0;
      for (std::size_t k = 0; k < 8; ++k) {
        dot += qv[i * 8 + k] * gv[j * 8 + k];
        nq += qv[i * 8 + k] * qv[i * 8 + k];
        ng += gv[j * 8 + k] * gv[j * 8 + k];
        sq += (qv[i * 8 + k] - gv[j * 8 + k]) * (qv[i * 8 + k] - gv[j * 8 + k]);
      }
      EXPECT_NEAR(dc.at(i, j), 1.0 - dot / std::sqrt(nq * ng), 1e-12);
      EXPECT_NEAR(de.at(i, j), std::sqrt(sq), 1e-12);
    }
}

TEST(Distance, WidthMismatchThrows) {
  EXPECT_THROW(distance_matrix(Tensor({2, 3}), Tensor({2, 4}), Metric::cosine), ShapeError);
}

TEST(Distance, MetricNames) {
  EXPECT_EQ(metric_from_string("euclidean"), Metric::euclidean);
  EXPECT_EQ(to_string(Metric::cosine), "cosine");
  EXPECT_THROW(metric_from_string("manhattan"), ConfigError);
}

// ---------------------------------------------------------------------------
// feature extraction

TEST(ExtractFeatures, RowsAreUnitAndBatchInvariant) {
  const VisionTransformer model(tiny(), 3);
  std::vector<Image> images;
  for (std::uint64_t s = 0; s < 11; ++s) images.push_back(oracle::random_image(8, 4, s));
  images.push_back(images[2]);
  const Tensor one = extract_features(model, images, 1);
  const Tensor eight = extract_features(model, images, 8);
  ASSERT_EQ(one.dim(0), images.size());
  ASSERT_EQ(one.dim(1), 32u);
  for (std::size_t r = 0; r < one.dim(0); ++r) {
    double n = 0;
    for (std::size_t c = 0; c < 32; ++c) n += one.at(r, c) * one.at(r, c);
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
  }
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_NEAR(one[i], eight[i], 1e-12);
  for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(one.at(2, c), one.at(11, c));
}

TEST(ExtractFeatures, ShuffleInEvalIsBatchInvariant) {
  const VisionTransformer model(tiny(), 4);
  ShuffleConfig sc;
  sc.enabled = true;
  sc.apply_in_eval = true;
  std::vector<Image> images;
  for (std::uint64_t s = 0; s < 9; ++s) images.push_back(oracle::random_image(8, 4, 50 + s));
  const Tensor a = extract_features(model, images, 1, sc, 77);
  const Tensor b = extract_features(model, images, 4, sc, 77);
  EXPECT_TRUE(bitwise_equal(a, b));
}

// ---------------------------------------------------------------------------
// output

TEST(EvalCsv, Layout) {
  const auto d = from_rows({{0.1, 0.2, 0.3}});
  std::vector<SampleMeta> q{m(1, 1)};
  q[0].path = "q.ppm";
  const EvalResult r = evaluate(d, q, {m(1, 2), m(2, 2), m(1, 3)}, {.max_rank = 3});
  oracle::TempDir dir("evalcsv");
  write_eval_csv(r, dir / "eval.csv");
  write_per_query_csv(r, q, dir / "ap.csv");
  std::ifstream in(dir / "eval.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,cmc");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].substr(0, 2), "1,");
  EXPECT_EQ(rows[3].substr(0, 4), "map,");
  EXPECT_NEAR(std::stod(rows[3].substr(4)), 0.8333333333333333, 1e-15);
  std::ifstream ap(dir / "ap.csv");
  std::getline(ap, line);
  EXPECT_EQ(line, "query_index,path,ap");
  std::getline(ap, line);
  EXPECT_EQ(line.substr(0, 7), "0,q.ppm");
  EXPECT_NE(format_summary(r).find("mAP"), std::string::npos);
}
