#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fusenet/autograd.hpp"

namespace fusenet {

/// Across-channel local response normalization:
///   b[c] = a[c] / (k + (alpha / n) * sum_{c' in window(c)} a[c']^2)^beta
/// with the window of `local_size` channels centred on c and clipped at the edges.
struct LrnParams {
  std::size_t local_size = 5;
  double k = 2.0;
  double alpha = 1e-4;
  double beta = 0.75;

  void validate() const;
};

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// Output extent of a sliding window, or 0 when the window does not fit.
std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

// All ops validate shapes eagerly and throw DimensionError naming the axis at fault.

template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, Conv2dOptions options);

/// Ties route the gradient to the lowest flat index inside the window.
template <typename T>
Var maxpool2d(Graph<T>& g, Var input, std::size_t kernel, std::size_t stride);

/// Subgradient at exactly zero is 0.
template <typename T>
Var relu(Graph<T>& g, Var input);

template <typename T>
Var lrn(Graph<T>& g, Var input, const LrnParams& params);

/// x[N,D] * W[M,D]^T + b[M].
template <typename T>
Var fully_connected(Graph<T>& g, Var input, Var weight, Var bias);

/// Row-wise softmax over [N,C] with max subtraction.
template <typename T>
Var softmax(Graph<T>& g, Var input);

/// Mean over the batch of -log softmax(scores)[label], computed with a fused log-sum-exp.
template <typename T>
Var cross_entropy_loss(Graph<T>& g, Var scores, std::span<const std::size_t> labels);

/// Mean over the batch of -log probs[label] for rows that are already distributions.
template <typename T>
Var nll_loss(Graph<T>& g, Var probs, std::span<const std::size_t> labels);

template <typename T>
Var concat(Graph<T>& g, Var a, Var b, std::size_t axis);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var mul(Graph<T>& g, Var a, Var b);

template <typename T>
Var scale(Graph<T>& g, Var input, T factor);

/// Sum of every element, as a scalar of shape [1].
template <typename T>
Var sum(Graph<T>& g, Var input);

/// [N, ...] -> [N, prod(...)].
template <typename T>
Var flatten(Graph<T>& g, Var input);

}  // namespace fusenet
