#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusenet/tensor.hpp"

namespace fusenet {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> velocity;
  /// Per-parameter learning-rate multiplier; 0 freezes the parameter.
  T lr_mult = T{1};
  /// Set by backward once a gradient has been accumulated since the last step.
  bool grad_ready = false;

  bool frozen() const noexcept { return lr_mult == T{0}; }
};

/// Named parameter registry. Iteration order is insertion order; references stay valid
/// for the lifetime of the store.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<T>& add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;

  std::size_t size() const noexcept { return params_.size(); }
  std::vector<std::string> names() const;
  /// Total number of scalar weights.
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void set_lr_mult(const std::set<std::string>& names, T mult);
  void set_all_lr_mult(T mult);
  void zero_grad();

 private:
  void reindex();

  std::deque<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SgdOptions {
  double lr = 0.001;
  double momentum = 0.0;
  double weight_decay = 0.0;
};

/// p <- p - lr * lr_mult * v with v = momentum * v + (grad + weight_decay * p).
/// Frozen parameters are left bit-unchanged. Gradients are zeroed afterwards.
template <typename T>
void sgd_step(ParameterStore<T>& params, const SgdOptions& options);

/// Fan-in scaled uniform initialization, U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void init_he_uniform(Tensor<T>& t, std::size_t fan_in, std::mt19937_64& rng);

/// Copy every parameter of `src` whose name exists in `dst`; returns the names copied.
/// Throws if a name listed in `required` is missing on either side or shapes differ.
template <typename T>
std::vector<std::string> transplant(const ParameterStore<T>& src, ParameterStore<T>& dst,
                                    const std::set<std::string>& required);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace fusenet
