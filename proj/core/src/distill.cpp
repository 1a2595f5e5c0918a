#include "shvit/distill.hpp"

#include <algorithm>
#include <cmath>

#include "shvit/error.hpp"
#include "shvit/ops.hpp"

namespace shvit {

std::string to_string(DistillMode mode) {
  switch (mode) {
    case DistillMode::off: return "off";
    case DistillMode::soft: return "soft";
    case DistillMode::hard: return "hard";
  }
  return "off";
}

DistillMode distill_mode_from_string(const std::string& name) {
  if (name == "off") return DistillMode::off;
  if (name == "soft") return DistillMode::soft;
  if (name == "hard") return DistillMode::hard;
  throw ConfigError("unknown distill.mode '" + name + "' (expected off, soft or hard)");
}

void DistillConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("distill.temperature must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill.alpha must be in [0, 1]");
}

namespace {

void softmax_row(const double* z, std::size_t c, double inv_t, double* out) {
  double mx = z[0] * inv_t;
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z[j] * inv_t);
  double s = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    out[j] = std::exp(z[j] * inv_t - mx);
    s += out[j];
  }
  for (std::size_t j = 0; j < c; ++j) out[j] /= s;
}

}  // namespace

Tensor soft_distill_term(Graph& g, const Tensor& student, const Tensor& teacher, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("soft_distill_term: temperature must be positive");
  if (!student.defined() || !teacher.defined() || student.rank() != 2 || student.shape() != teacher.shape())
    throw ShapeError("soft_distill_term: student and teacher logits must be matching [b x c] matrices");
  const std::size_t b = student.dim(0), c = student.dim(1);
  const double inv_t = 1.0 / temperature;
  std::vector<double> ps(b * c), pt(b * c);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    softmax_row(&student.data()[i * c], c, inv_t, &ps[i * c]);
    softmax_row(&teacher.data()[i * c], c, inv_t, &pt[i * c]);
    for (std::size_t j = 0; j < c; ++j) {
      const double t = pt[i * c + j];
      if (t > 0.0) total += t * (std::log(t) - std::log(ps[i * c + j]));
    }
  }
  const double t2 = temperature * temperature;
  Tensor out = Tensor::scalar(t2 * total / static_cast<double>(b));
  out.check_finite("soft_distill_term");
  Tensor s = student;
  if (g.needs_grad({&s})) {
    g.record(out, [s, out, ps = std::move(ps), pt = std::move(pt), b, c, temperature]() mutable {
      // d/dz_s of T^2 KL = T (p_s - p_t), averaged over the batch.
      const double k = out.grad()[0] * temperature / static_cast<double>(b);
      auto dS = s.mutable_grad();
      for (std::size_t i = 0; i < b * c; ++i) dS[i] += k * (ps[i] - pt[i]);
    });
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  if (!logits.defined() || logits.rank() != 2) throw ShapeError("argmax_rows: expected a matrix");
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<std::size_t> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    const double* z = &logits.data()[i * c];
    out[i] = static_cast<std::size_t>(std::max_element(z, z + c) - z);
  }
  return out;
}

Tensor distill_loss(Graph& g, const Tensor& class_logits, const Tensor& distill_logits,
                    const Tensor& teacher_logits, std::span<const std::size_t> labels,
                    const DistillConfig& cfg) {
  cfg.validate();
  if (cfg.mode == DistillMode::off || cfg.alpha == 0.0) return ops::cross_entropy(g, class_logits, labels);
  if (class_logits.shape() != teacher_logits.shape() || distill_logits.shape() != teacher_logits.shape())
    throw ShapeError("distill_loss: student " + shape_to_string(class_logits.shape()) + " / " +
                     shape_to_string(distill_logits.shape()) + " vs teacher " +
                     shape_to_string(teacher_logits.shape()));
  // Work on a detached copy: the teacher never receives gradient.
  const Tensor teacher = teacher_logits.clone();
  Tensor ce = ops::cross_entropy(g, class_logits, labels);
  Tensor term;
  if (cfg.mode == DistillMode::soft) {
    term = soft_distill_term(g, distill_logits, teacher, cfg.temperature);
  } else {
    const auto pseudo = argmax_rows(teacher);
    term = ops::cross_entropy(g, distill_logits, pseudo);
  }
  return ops::add(g, ops::scale(g, ce, 1.0 - cfg.alpha), ops::scale(g, term, cfg.alpha));
}

ModelTeacher::ModelTeacher(VisionTransformer model) : model_(model.clone()) {}

Tensor ModelTeacher::logits(const Tensor& image, const std::string&) const {
  Graph g(Graph::Mode::inference);
  ForwardOptions opt;
  opt.mode = RunMode::eval;
  opt.shuffle.apply_in_eval = false;
  return model_.forward(g, image, opt).logits;
}

RecordedTeacher::RecordedTeacher(std::vector<std::string> paths, const Tensor& logits) {
  if (!logits.defined() || logits.rank() != 2 || logits.dim(0) != paths.size())
    throw ShapeError("RecordedTeacher: need one logits row per path");
  classes_ = logits.dim(1);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto row = logits.data().subspan(i * classes_, classes_);
    if (!rows_.emplace(paths[i], std::vector<double>(row.begin(), row.end())).second)
      throw DataError("RecordedTeacher: duplicate path " + paths[i]);
  }
}

Tensor RecordedTeacher::logits(const Tensor&, const std::string& path) const {
  const auto it = rows_.find(path);
  if (it == rows_.end()) throw DataError("RecordedTeacher: no logits recorded for " + path);
  return Tensor::vector(it->second);
}

}  // namespace shvit
