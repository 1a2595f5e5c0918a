#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "shvit/tensor.hpp"

namespace shvit {

/// Reverse-mode tape.
///
/// Operations append a record (output handle + backward closure) as they
/// execute; backward() replays the records in reverse. A graph serves one
/// forward/backward pass: after backward() it is spent, and a second call
/// throws until the caller records a fresh forward pass on a new Graph.
///
/// A graph constructed with Mode::inference records nothing, so forward
/// passes under it carry no gradient bookkeeping.
class Graph {
 public:
  enum class Mode { record, inference };

  explicit Graph(Mode mode = Mode::record) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == Mode::record; }

  /// True when the op whose inputs are `inputs` must be recorded.
  bool needs_grad(std::initializer_list<const Tensor*> inputs) const;

  /// Marks `output` as produced here (allocating its gradient) and queues
  /// `backward_fn`, which reads output's gradient and accumulates into the
  /// inputs' gradients.
  void record(Tensor& output, std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and runs every record once in reverse order.
  /// Throws GraphError for a non-scalar loss, a loss this graph did not
  /// produce, or a graph that has already been differentiated.
  void backward(Tensor& loss);

  std::size_t num_records() const { return records_.size(); }
  bool spent() const { return spent_; }

 private:
  struct Record {
    Tensor output;
    std::function<void()> backward_fn;
  };

  Mode mode_;
  bool spent_ = false;
  std::vector<Record> records_;
};

}  // namespace shvit
