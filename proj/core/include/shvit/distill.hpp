#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shvit/graph.hpp"
#include "shvit/tensor.hpp"
#include "shvit/vit.hpp"

namespace shvit {

enum class DistillMode { off, soft, hard };

std::string to_string(DistillMode mode);
DistillMode distill_mode_from_string(const std::string& name);

struct DistillConfig {
  DistillMode mode = DistillMode::off;
  double alpha = 0.5;
  double temperature = 3.0;
  /// Attach a distillation token (and head) to the student.
  bool use_token = true;
  std::string teacher_checkpoint;

  void validate() const;
};

/// T^2 * mean over the batch of KL(softmax(teacher/T) || softmax(student/T)).
/// Differentiable with respect to `student` only.
Tensor soft_distill_term(Graph& g, const Tensor& student, const Tensor& teacher, double temperature);

/// Per-row argmax; ties resolve to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);

/// Combined objective, all inputs [b x c]:
///   off  -> CE(class_logits, labels)
///   soft -> (1 - a) CE(class_logits, labels) + a T^2 KL(p_teacher || p_student)
///   hard -> (1 - a) CE(class_logits, labels) + a CE(distill_logits, argmax teacher)
/// where the distillation term reads `distill_logits` (the distillation-token
/// head; pass class_logits again when there is no token). No gradient reaches
/// `teacher_logits`. alpha == 0 returns plain CE.
Tensor distill_loss(Graph& g, const Tensor& class_logits, const Tensor& distill_logits,
                    const Tensor& teacher_logits, std::span<const std::size_t> labels,
                    const DistillConfig& cfg);

/// Source of teacher logits for one sample.
class TeacherOracle {
 public:
  virtual ~TeacherOracle() = default;
  virtual std::size_t num_classes() const = 0;
  /// [num_classes] logits for the (already augmented) image at `path`.
  virtual Tensor logits(const Tensor& image, const std::string& path) const = 0;
};

/// Frozen model evaluated in eval mode.
class ModelTeacher final : public TeacherOracle {
 public:
  explicit ModelTeacher(VisionTransformer model);
  std::size_t num_classes() const override { return model_.config().num_classes; }
  Tensor logits(const Tensor& image, const std::string& path) const override;

 private:
  VisionTransformer model_;
};

/// Logits recorded ahead of time, keyed by sample path.
class RecordedTeacher final : public TeacherOracle {
 public:
  RecordedTeacher(std::vector<std::string> paths, const Tensor& logits);
  std::size_t num_classes() const override { return classes_; }
  Tensor logits(const Tensor& image, const std::string& path) const override;

 private:
  std::size_t classes_;
  std::map<std::string, std::vector<double>> rows_;
};

}  // namespace shvit
