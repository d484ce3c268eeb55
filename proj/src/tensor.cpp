#include "fusenet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace fusenet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, const std::vector<T>& data)
    : Tensor(std::move(shape), AlignedVector<T>(data.begin(), data.end())) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, AlignedVector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::initializer_list<T> data)
    : Tensor(std::move(shape), AlignedVector<T>(data)) {}

template <typename T>
T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

template <typename T>
const T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> Tensor<T>::sample(std::size_t n) const {
  return slice(*this, 0, n, n + 1);
}

template <typename T>
Tensor<T> slice(const Tensor<T>& t, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= t.rank()) throw DimensionError("slice axis out of range", std::to_string(axis));
  if (begin > end || end > t.dim(axis)) {
    throw DimensionError("slice bounds exceed axis extent", std::to_string(axis));
  }
  const auto& shape = t.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Shape out_shape = shape;
  out_shape[axis] = end - begin;
  AlignedVector<T> out;
  out.reserve(shape_size(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    const T* base = t.raw() + (o * shape[axis] + begin) * inner;
    out.insert(out.end(), base, base + (end - begin) * inner);
  }
  return Tensor<T>(std::move(out_shape), std::move(out));
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>* const> items) {
  if (items.empty()) throw DimensionError("cannot stack an empty list");
  const Shape& first = items.front()->shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), first.begin(), first.end());
  AlignedVector<T> data;
  data.reserve(shape_size(shape));
  for (const Tensor<T>* item : items) {
    if (item->shape() != first) {
      throw DimensionError("stack: item shape " + shape_string(item->shape()) + " differs from " +
                           shape_string(first));
    }
    data.insert(data.end(), item->values().begin(), item->values().end());
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& t) {
  if (t.rank() != 2) throw DimensionError("argmax_rows expects a rank-2 tensor");
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  std::vector<std::size_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = t.raw() + r * cols;
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[r] = best;
  }
  return out;
}

template <typename T>
std::uint64_t content_hash(const Tensor<T>& t) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.raw());
  for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> slice(const Tensor<float>&, std::size_t, std::size_t, std::size_t);
template Tensor<double> slice(const Tensor<double>&, std::size_t, std::size_t, std::size_t);
template Tensor<float> stack(std::span<const Tensor<float>* const>);
template Tensor<double> stack(std::span<const Tensor<double>* const>);
template std::vector<std::size_t> argmax_rows(const Tensor<float>&);
template std::vector<std::size_t> argmax_rows(const Tensor<double>&);
template std::uint64_t content_hash(const Tensor<float>&);
template std::uint64_t content_hash(const Tensor<double>&);

}  // namespace fusenet
