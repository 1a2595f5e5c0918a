#include "shvit/graph.hpp"

#include "shvit/error.hpp"

namespace shvit {

bool Graph::needs_grad(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  for (const Tensor* t : inputs)
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  return false;
}

void Graph::record(Tensor& output, std::function<void()> backward_fn) {
  if (spent_) throw GraphError("Graph::record: graph already differentiated; start a new pass");
  output.set_requires_grad(true);
  output.set_producer(this);
  records_.push_back(Record{output, std::move(backward_fn)});
}

void Graph::backward(Tensor& loss) {
  if (spent_) throw GraphError("Graph::backward: called twice without a new forward pass");
  if (!loss.defined() || loss.size() != 1)
    throw GraphError("Graph::backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
  if (loss.producer() != this || !loss.requires_grad())
    throw GraphError("Graph::backward: loss was not produced by this graph (detached)");
  loss.mutable_grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->backward_fn();
  // Releasing the closures drops the references they hold on intermediates.
  records_.clear();
  spent_ = true;
}

}  // namespace shvit
