#include "shvit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "shvit/error.hpp"

namespace shvit {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<Impl>()) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("Tensor: zero-sized dimension in " + shape_to_string(shape));
  impl_->data.assign(shape_size(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<Impl>()) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("Tensor: zero-sized dimension in " + shape_to_string(shape));
  if (shape_size(shape) != values.size())
    throw ShapeError("Tensor: shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw Error("use of an undefined Tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size())
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return impl().data.size(); }

std::span<const double> Tensor::data() const { return impl().data; }
std::span<double> Tensor::mutable_data() const { return impl().data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("Tensor::item on " + shape_to_string(shape()));
  return impl().data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const Impl& d = impl();
  if (d.shape.size() != 2) throw ShapeError("Tensor::at needs a matrix, got " + shape_to_string(d.shape));
  return d.data[row * d.shape[1] + col];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  Impl& d = impl();
  d.requires_grad = on;
  if (on && d.grad.size() != d.data.size()) d.grad.assign(d.data.size(), 0.0);
  if (!on) d.grad.clear();
  return *this;
}

bool Tensor::has_grad() const { return !impl().grad.empty(); }
std::span<const double> Tensor::grad() const { return impl().grad; }
std::span<double> Tensor::mutable_grad() const { return impl().grad; }

void Tensor::zero_grad() const {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone() const {
  const Impl& d = impl();
  return Tensor(d.shape, d.data);
}

void Tensor::check_finite(const char* context) const {
  for (double v : impl().data)
    if (!std::isfinite(v)) throw NumericError(std::string(context) + ": non-finite value");
}

const Graph* Tensor::producer() const { return impl().producer; }
void Tensor::set_producer(const Graph* graph) { impl().producer = graph; }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("max_abs_diff: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace shvit
