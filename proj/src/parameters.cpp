#include "fusenet/parameters.hpp"

#include <cmath>

namespace fusenet {

template <typename T>
ParameterStore<T>::ParameterStore(const ParameterStore& other) : params_(other.params_) {
  reindex();
}

template <typename T>
ParameterStore<T>& ParameterStore<T>::operator=(const ParameterStore& other) {
  if (this != &other) {
    params_ = other.params_;
    reindex();
  }
  return *this;
}

template <typename T>
void ParameterStore<T>::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_[params_[i].name] = i;
}

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  Parameter<T> p;
  p.name = name;
  p.grad = Tensor<T>(value.shape());
  p.value = std::move(value);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return params_[it->second];
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return params_[it->second];
}

template <typename T>
std::vector<std::string> ParameterStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParameterStore<T>::set_lr_mult(const std::set<std::string>& names, T mult) {
  for (const auto& name : names) get(name).lr_mult = mult;
}

template <typename T>
void ParameterStore<T>::set_all_lr_mult(T mult) {
  for (auto& p : params_) p.lr_mult = mult;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(T{0});
    p.grad_ready = false;
  }
}

template <typename T>
void sgd_step(ParameterStore<T>& params, const SgdOptions& options) {
  const T lr = static_cast<T>(options.lr);
  const T momentum = static_cast<T>(options.momentum);
  const T decay = static_cast<T>(options.weight_decay);
  for (auto& p : params) {
    if (p.frozen()) continue;
    if (!p.grad_ready) throw Error("sgd_step: no gradient for trainable parameter " + p.name);
  }
  for (auto& p : params) {
    if (!p.frozen() && lr != T{0}) {
      const T step = lr * p.lr_mult;
      auto value = p.value.data();
      auto grad = p.grad.data();
      if (momentum == T{0}) {
        for (std::size_t i = 0; i < value.size(); ++i) value[i] -= step * (grad[i] + decay * value[i]);
      } else {
        if (p.velocity.shape() != p.value.shape()) p.velocity = Tensor<T>(p.value.shape());
        auto vel = p.velocity.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
          vel[i] = momentum * vel[i] + grad[i] + decay * value[i];
          value[i] -= step * vel[i];
        }
      }
    }
    p.grad.fill(T{0});
    p.grad_ready = false;
  }
}

template <typename T>
void init_he_uniform(Tensor<T>& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
}

template <typename T>
std::vector<std::string> transplant(const ParameterStore<T>& src, ParameterStore<T>& dst,
                                    const std::set<std::string>& required) {
  for (const auto& name : required) {
    if (!src.contains(name) || !dst.contains(name)) {
      throw ConfigError("transplant: parameter name mismatch for " + name);
    }
  }
  std::vector<std::string> copied;
  for (const auto& p : src) {
    if (!dst.contains(p.name)) continue;
    auto& target = dst.get(p.name);
    if (target.value.shape() != p.value.shape()) {
      throw DimensionError("transplant: shape mismatch for " + p.name + " (" +
                           shape_string(p.value.shape()) + " vs " +
                           shape_string(target.value.shape()) + ")");
    }
    target.value = p.value;
    copied.push_back(p.name);
  }
  return copied;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void sgd_step(ParameterStore<float>&, const SgdOptions&);
template void sgd_step(ParameterStore<double>&, const SgdOptions&);
template void init_he_uniform(Tensor<float>&, std::size_t, std::mt19937_64&);
template void init_he_uniform(Tensor<double>&, std::size_t, std::mt19937_64&);
template std::vector<std::string> transplant(const ParameterStore<float>&, ParameterStore<float>&,
                                             const std::set<std::string>&);
template std::vector<std::string> transplant(const ParameterStore<double>&, ParameterStore<double>&,
                                             const std::set<std::string>&);

}  // namespace fusenet
