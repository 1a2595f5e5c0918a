#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shvit {

class Graph;

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, the way parameters are shared
/// between a model and the optimizer updating it. Use clone() for a deep,
/// detached copy. An empty shape denotes a scalar holding one element.
class Tensor {
 public:
  /// Null handle; most operations reject it.
  Tensor() = default;

  /// Zero-filled (or `fill`-filled) tensor. Every dimension must be positive.
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  bool is_scalar() const { return size() == 1; }

  std::span<const double> data() const;
  /// Writable view. Intended for leaves (parameters, inputs); mutating a
  /// tensor that a recorded graph still references invalidates that graph.
  std::span<double> mutable_data() const;

  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  /// Turning gradients on allocates a zeroed gradient buffer.
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  void zero_grad() const;

  Tensor clone() const;
  /// Same storage?
  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

  /// Throws NumericError naming `context` if any stored value is NaN/Inf.
  void check_finite(const char* context) const;

  // Graph bookkeeping; used by operations, not by library users.
  const Graph* producer() const;
  void set_producer(const Graph* graph);

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    const Graph* producer = nullptr;
  };
  std::shared_ptr<Impl> impl_;

  Impl& impl() const;
};

/// Bitwise comparison of shape and values.
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace shvit
