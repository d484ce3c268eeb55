#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusenet/parameters.hpp"
#include "fusenet/tensor.hpp"

namespace fusenet {

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = 0;
};

/// Define-by-run tape. Each op appends one node; backward walks the tape in exact reverse
/// order, so gradients are reproducible bit for bit. One thread at a time.
template <typename T>
class Graph {
 public:
  /// Called with the node's upstream gradient and one accumulator per input
  /// (nullptr for inputs that do not require a gradient).
  using BackwardFn =
      std::function<void(const Graph&, const Tensor<T>& out_grad, std::span<Tensor<T>* const> in_grads)>;

  explicit Graph(ParameterStore<T>* params = nullptr) : params_(params) {}

  Var constant(Tensor<T> value);
  Var variable(Tensor<T> value);
  /// Leaf bound to a named parameter. Frozen parameters enter the tape as constants.
  Var parameter(const std::string& name);

  /// Appends an op node. Ops call this; `backward` may be empty when no input needs a gradient.
  Var record(std::string_view op, Tensor<T> value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  /// Accumulated gradient; an all-zero tensor if nothing reached the node.
  Tensor<T> grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::string_view op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar `loss`. Parameter gradients are added into the store.
  void backward(Var loss);

 private:
  struct Node {
    std::string_view op;
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Tensor<T>& grad_buffer(Node& node);

  ParameterStore<T>* params_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace fusenet
