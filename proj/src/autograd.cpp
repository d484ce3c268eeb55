#include "fusenet/autograd.hpp"

namespace fusenet {

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  if (!value.all_finite()) throw NumericError("non-finite value in graph input");
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  Var v = constant(std::move(value));
  nodes_.back().op = "variable";
  nodes_.back().requires_grad = true;
  return v;
}

template <typename T>
Var Graph<T>::parameter(const std::string& name) {
  if (params_ == nullptr) throw ConfigError("graph has no parameter store");
  Parameter<T>& p = params_->get(name);
  Node node;
  node.op = "parameter";
  node.value = p.value;
  node.requires_grad = !p.frozen();
  node.param = &p;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Graph<T>::record(std::string_view op, Tensor<T> value, std::vector<Var> inputs,
                     BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite output from ") + std::string(op));
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw Error("graph input refers to a later node");
    node.inputs.push_back(in.id);
    node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (node.has_grad) return node.grad;
  return Tensor<T>(node.value.shape());
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(Node& node) {
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got " + shape_string(root.value.shape()));
  }
  if (!root.requires_grad) return;
  grad_buffer(root).fill(T{1});

  std::vector<Tensor<T>*> in_grads;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.requires_grad) continue;
    if (node.param != nullptr) {
      auto dst = node.param->grad.data();
      auto src = node.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      node.param->grad_ready = true;
      continue;
    }
    if (!node.backward) continue;
    in_grads.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      Node& input = nodes_[node.inputs[k]];
      if (input.requires_grad) in_grads[k] = &grad_buffer(input);
    }
    node.backward(*this, node.grad, in_grads);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace fusenet
