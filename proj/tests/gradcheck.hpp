#pragma once

#include <functional>
#include <random>
#include <vector>

#include "fusenet/ops.hpp"
#include "oracles.hpp"

namespace fusenet::testing {

using OpBuilder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t points = 0;
};

/// Checks d/d(inputs) of sum(op(inputs) * R) for a fixed random projection R at `points`
/// randomly chosen input coordinates.
inline GradCheckResult check_op_gradient(std::vector<Tensor<double>> inputs, const OpBuilder& op,
                                         std::mt19937_64& rng, std::size_t points) {
  Tensor<double> projection;
  auto run = [&](bool keep_graph, std::vector<Tensor<double>>* grads) {
    Graph<double> g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.variable(t));
    Var out = op(g, vars);
    if (projection.empty()) projection = random_tensor<double>(g.value(out).shape(), rng, 0.5, 1.5);
    Var loss = sum(g, mul(g, out, g.constant(projection)));
    if (keep_graph) {
      g.backward(loss);
      for (Var v : vars) grads->push_back(g.grad(v));
    }
    return g.value(loss)[0];
  };
  std::vector<Tensor<double>> analytic;
  run(true, &analytic);

  GradCheckResult result;
  std::size_t total = 0;
  for (const auto& t : inputs) total += t.size();
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t p = 0; p < points; ++p) {
    std::size_t flat = pick(rng), which = 0;
    while (flat >= inputs[which].size()) flat -= inputs[which++].size();
    const double numeric = central_difference([&] { return run(false, nullptr); }, inputs[which][flat]);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[which][flat], numeric));
    ++result.points;
  }
  return result;
}

}  // namespace fusenet::testing

#include "fusenet/model.hpp"

namespace fusenet::testing {

/// Finite-difference check of a whole network's loss w.r.t. `points` randomly chosen scalar
/// parameters (64-bit).
inline GradCheckResult check_model_gradient(Model<double>& model, const Tensor<double>& image,
                                            const Tensor<double>& spectrogram, const std::vector<std::size_t>& labels,
                                            std::mt19937_64& rng, std::size_t points) {
  auto& params = model.parameters();
  auto loss_value = [&](bool with_backward) {
    Graph<double> g(&params);
    Var loss = model.loss(g, model.forward(g, image, spectrogram), labels);
    if (with_backward) g.backward(loss);
    return g.value(loss)[0];
  };
  params.zero_grad();
  loss_value(true);

  std::vector<Parameter<double>*> all;
  for (auto& p : params) all.push_back(&p);
  std::uniform_int_distribution<std::size_t> pick_param(0, all.size() - 1);

  GradCheckResult result;
  for (std::size_t i = 0; i < points; ++i) {
    Parameter<double>& p = *all[pick_param(rng)];
    std::uniform_int_distribution<std::size_t> pick_index(0, p.value.size() - 1);
    const std::size_t k = pick_index(rng);
    const double numeric = central_difference([&] { return loss_value(false); }, p.value[k]);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(p.grad[k], numeric));
    ++result.points;
  }
  params.zero_grad();
  return result;
}

/// Small-channel desk-32 geometry for fast double-precision checks.
inline StreamConfig tiny_config(std::size_t classes) {
  StreamConfig cfg = StreamConfig::desk32(classes);
  cfg.conv = {{{4, 5, 2, 2}, {5, 3, 1, 1}, {6, 3, 1, 1}, {6, 3, 1, 1}, {4, 3, 1, 1}}};
  cfg.fc = {10, 8};
  return cfg;
}

}  // namespace fusenet::testing
