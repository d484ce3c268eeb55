#include "fusenet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace fusenet {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + shape_string(s));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": rank mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                               shape_string(b) + " on axis " + std::to_string(i),
                           std::to_string(i));
    }
  }
}

struct ConvGeometry {
  std::size_t channels, height, width, kh, kw, stride, pad, out_h, out_w;
};

template <typename T>
void im2col(const T* image, const ConvGeometry& geo, T* cols) {
  const std::size_t plane = geo.out_h * geo.out_w;
  for (std::size_t c = 0; c < geo.channels; ++c) {
    for (std::size_t ky = 0; ky < geo.kh; ++ky) {
      for (std::size_t kx = 0; kx < geo.kw; ++kx) {
        T* row = cols + ((c * geo.kh + ky) * geo.kw + kx) * plane;
        for (std::size_t oy = 0; oy < geo.out_h; ++oy) {
          const long iy = static_cast<long>(oy * geo.stride + ky) - static_cast<long>(geo.pad);
          T* dst = row + oy * geo.out_w;
          if (iy < 0 || iy >= static_cast<long>(geo.height)) {
            std::fill(dst, dst + geo.out_w, T{0});
            continue;
          }
          const T* src = image + (c * geo.height + static_cast<std::size_t>(iy)) * geo.width;
          for (std::size_t ox = 0; ox < geo.out_w; ++ox) {
            const long ix = static_cast<long>(ox * geo.stride + kx) - static_cast<long>(geo.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(geo.width)) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& geo, T* image) {
  const std::size_t plane = geo.out_h * geo.out_w;
  for (std::size_t c = 0; c < geo.channels; ++c) {
    for (std::size_t ky = 0; ky < geo.kh; ++ky) {
      for (std::size_t kx = 0; kx < geo.kw; ++kx) {
        const T* row = cols + ((c * geo.kh + ky) * geo.kw + kx) * plane;
        for (std::size_t oy = 0; oy < geo.out_h; ++oy) {
          const long iy = static_cast<long>(oy * geo.stride + ky) - static_cast<long>(geo.pad);
          if (iy < 0 || iy >= static_cast<long>(geo.height)) continue;
          T* dst = image + (c * geo.height + static_cast<std::size_t>(iy)) * geo.width;
          const T* src = row + oy * geo.out_w;
          for (std::size_t ox = 0; ox < geo.out_w; ++ox) {
            const long ix = static_cast<long>(ox * geo.stride + kx) - static_cast<long>(geo.pad);
            if (ix >= 0 && ix < static_cast<long>(geo.width)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void LrnParams::validate() const {
  if (local_size == 0 || local_size % 2 == 0) throw ConfigError("lrn local_size must be odd and positive");
  if (!(k >= 0.0)) throw ConfigError("lrn k must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("lrn alpha must be > 0");
  if (!(beta > 0.0)) throw ConfigError("lrn beta must be > 0");
}

std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || kernel == 0 || kernel > in + 2 * pad) return 0;
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, Conv2dOptions options) {
  const Tensor<T>& x = g.value(input);
  const Tensor<T>& w = g.value(weight);
  const Tensor<T>& b = g.value(bias);
  require_rank(x.shape(), 4, "conv2d", "input");
  require_rank(w.shape(), 4, "conv2d", "weight");
  require_rank(b.shape(), 1, "conv2d", "bias");
  if (options.stride == 0) throw DimensionError("conv2d: stride must be >= 1", "stride");
  if (w.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, kernel expects " +
                             std::to_string(w.dim(1)),
                         "C");
  }
  if (b.dim(0) != w.dim(0)) throw DimensionError("conv2d: bias length differs from kernel count", "K");
  if (w.dim(2) > x.dim(2) + 2 * options.pad) throw DimensionError("conv2d: kernel taller than padded input", "H");
  if (w.dim(3) > x.dim(3) + 2 * options.pad) throw DimensionError("conv2d: kernel wider than padded input", "W");

  const ConvGeometry geo{x.dim(1), x.dim(2), x.dim(3), w.dim(2), w.dim(3), options.stride, options.pad,
                         window_extent(x.dim(2), w.dim(2), options.stride, options.pad),
                         window_extent(x.dim(3), w.dim(3), options.stride, options.pad)};
  const std::size_t batch = x.dim(0), kernels = w.dim(0);
  const std::size_t patch = geo.channels * geo.kh * geo.kw;
  const std::size_t plane = geo.out_h * geo.out_w;

  Tensor<T> out({batch, kernels, geo.out_h, geo.out_w});
  AlignedVector<T> cols(patch * plane);
  ConstMapMat<T> wmat(w.raw(), kernels, patch);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(b.raw(), kernels);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.raw() + n * geo.channels * geo.height * geo.width, geo, cols.data());
    MapMat<T> o(out.raw() + n * kernels * plane, kernels, plane);
    o.noalias() = wmat * ConstMapMat<T>(cols.data(), patch, plane);
    o.colwise() += bvec;
  }

  auto backward = [input, weight, geo, batch, kernels, patch, plane](
                      const Graph<T>& graph, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    const Tensor<T>& xv = graph.value(input);
    const Tensor<T>& wv = graph.value(weight);
    ConstMapMat<T> wm(wv.raw(), kernels, patch);
    AlignedVector<T> cols_buf(patch * plane);
    RowMat<T> dcols(patch, plane);
    const std::size_t image_size = geo.channels * geo.height * geo.width;
    for (std::size_t n = 0; n < batch; ++n) {
      ConstMapMat<T> go(gout.raw() + n * kernels * plane, kernels, plane);
      if (grads[1] != nullptr) {
        im2col(xv.raw() + n * image_size, geo, cols_buf.data());
        MapMat<T> dw(grads[1]->raw(), kernels, patch);
        dw.noalias() += go * ConstMapMat<T>(cols_buf.data(), patch, plane).transpose();
      }
      if (grads[2] != nullptr) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grads[2]->raw(), kernels);
        db += go.rowwise().sum();
      }
      if (grads[0] != nullptr) {
        dcols.noalias() = wm.transpose() * go;
        col2im(dcols.data(), geo, grads[0]->raw() + n * image_size);
      }
    }
  };
  return g.record("conv2d", std::move(out), {input, weight, bias}, std::move(backward));
}

template <typename T>
Var maxpool2d(Graph<T>& g, Var input, std::size_t kernel, std::size_t stride) {
  const Tensor<T>& x = g.value(input);
  require_rank(x.shape(), 4, "maxpool2d", "input");
  if (stride == 0 || kernel == 0) throw DimensionError("maxpool2d: kernel and stride must be >= 1", "stride");
  if (kernel > x.dim(2)) throw DimensionError("maxpool2d: window taller than input", "H");
  if (kernel > x.dim(3)) throw DimensionError("maxpool2d: window wider than input", "W");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
  Tensor<T> out({x.dim(0), x.dim(1), oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.raw() + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * stride) * w + ox * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = (oy * stride + ky) * w + ox * stride + kx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = src[best];
        argmax[o] = p * h * w + best;
      }
    }
  }
  auto backward = [argmax = std::move(argmax)](const Graph<T>&, const Tensor<T>& gout,
                                               std::span<Tensor<T>* const> grads) {
    Tensor<T>& dx = *grads[0];
    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += gout[o];
  };
  return g.record("maxpool2d", std::move(out), {input}, std::move(backward));
}

template <typename T>
Var relu(Graph<T>& g, Var input) {
  const Tensor<T>& x = g.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  auto backward = [input](const Graph<T>& graph, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    const Tensor<T>& xv = graph.value(input);
    Tensor<T>& dx = *grads[0];
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > T{0}) dx[i] += gout[i];
    }
  };
  return g.record("relu", std::move(out), {input}, std::move(backward));
}

template <typename T>
Var lrn(Graph<T>& g, Var input, const LrnParams& params) {
  params.validate();
  const Tensor<T>& x = g.value(input);
  require_rank(x.shape(), 4, "lrn", "input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  const std::size_t half = params.local_size / 2;
  const T k = static_cast<T>(params.k);
  const T alpha_n = static_cast<T>(params.alpha / static_cast<double>(params.local_size));
  const T beta = static_cast<T>(params.beta);

  // scale[c] = k + (alpha/n) * windowed sum of squares
  Tensor<T> scale(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    const T* a = x.raw() + n * channels * plane;
    T* s = scale.raw() + n * channels * plane;
    T* b = out.raw() + n * channels * plane;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t lo = c >= half ? c - half : 0;
      const std::size_t hi = std::min(channels - 1, c + half);
      for (std::size_t i = 0; i < plane; ++i) {
        T acc = T{0};
        for (std::size_t cc = lo; cc <= hi; ++cc) acc += a[cc * plane + i] * a[cc * plane + i];
        s[c * plane + i] = k + alpha_n * acc;
        b[c * plane + i] = a[c * plane + i] * std::pow(s[c * plane + i], -beta);
      }
    }
  }
  auto backward = [input, scale = std::move(scale), batch, channels, plane, half, alpha_n, beta](
                      const Graph<T>& graph, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    const Tensor<T>& xv = graph.value(input);
    Tensor<T>& dx = *grads[0];
    // t[c] = g[c] * a[c] * scale[c]^(-beta-1)
    AlignedVector<T> t(channels * plane);
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = n * channels * plane;
      const T* a = xv.raw() + off;
      const T* s = scale.raw() + off;
      const T* go = gout.raw() + off;
      T* d = dx.raw() + off;
      for (std::size_t i = 0; i < channels * plane; ++i) t[i] = go[i] * a[i] * std::pow(s[i], -beta - T{1});
      const T coeff = T{2} * beta * alpha_n;
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t lo = c >= half ? c - half : 0;
        const std::size_t hi = std::min(channels - 1, c + half);
        for (std::size_t i = 0; i < plane; ++i) {
          T acc = T{0};
          for (std::size_t cc = lo; cc <= hi; ++cc) acc += t[cc * plane + i];
          const std::size_t j = c * plane + i;
          d[j] += go[j] * std::pow(s[j], -beta) - coeff * a[j] * acc;
        }
      }
    }
  };
  return g.record("lrn", std::move(out), {input}, std::move(backward));
}

template <typename T>
Var fully_connected(Graph<T>& g, Var input, Var weight, Var bias) {
  const Tensor<T>& x = g.value(input);
  const Tensor<T>& w = g.value(weight);
  const Tensor<T>& b = g.value(bias);
  require_rank(x.shape(), 2, "fully_connected", "input");
  require_rank(w.shape(), 2, "fully_connected", "weight");
  require_rank(b.shape(), 1, "fully_connected", "bias");
  if (x.dim(1) != w.dim(1)) {
    throw DimensionError("fully_connected: input width " + std::to_string(x.dim(1)) +
                             " differs from weight width " + std::to_string(w.dim(1)),
                         "D");
  }
  if (b.dim(0) != w.dim(0)) throw DimensionError("fully_connected: bias length differs from output width", "M");
  const std::size_t n = x.dim(0), d = x.dim(1), m = w.dim(0);
  Tensor<T> out({n, m});
  MapMat<T> o(out.raw(), n, m);
  o.noalias() = ConstMapMat<T>(x.raw(), n, d) * ConstMapMat<T>(w.raw(), m, d).transpose();
  o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.raw(), m);

  auto backward = [input, weight, n, d, m](const Graph<T>& graph, const Tensor<T>& gout,
                                           std::span<Tensor<T>* const> grads) {
    ConstMapMat<T> go(gout.raw(), n, m);
    if (grads[0] != nullptr) {
      MapMat<T>(grads[0]->raw(), n, d).noalias() += go * ConstMapMat<T>(graph.value(weight).raw(), m, d);
    }
    if (grads[1] != nullptr) {
      MapMat<T>(grads[1]->raw(), m, d).noalias() +=
          go.transpose() * ConstMapMat<T>(graph.value(input).raw(), n, d);
    }
    if (grads[2] != nullptr) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grads[2]->raw(), m) += go.colwise().sum();
    }
  };
  return g.record("fully_connected", std::move(out), {input, weight, bias}, std::move(backward));
}

template <typename T>
Var softmax(Graph<T>& g, Var input) {
  const Tensor<T>& x = g.value(input);
  require_rank(x.shape(), 2, "softmax", "input");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (cols == 0) throw DimensionError("softmax: needs at least one class", "C");
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.raw() + r * cols;
    T* o = out.raw() + r * cols;
    const T peak = *std::max_element(in, in + cols);
    T total = T{0};
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  Tensor<T> saved = out;
  auto backward = [y = std::move(saved), rows, cols](const Graph<T>&, const Tensor<T>& gout,
                                                     std::span<Tensor<T>* const> grads) {
    Tensor<T>& dx = *grads[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const T* yr = y.raw() + r * cols;
      const T* gr = gout.raw() + r * cols;
      T dot = T{0};
      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
      for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += yr[c] * (gr[c] - dot);
    }
  };
  return g.record("softmax", std::move(out), {input}, std::move(backward));
}

namespace {

void check_labels(std::span<const std::size_t> labels, std::size_t rows, std::size_t cols, const char* op) {
  if (labels.size() != rows) {
    throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(rows) + " rows",
                         "N");
  }
  for (std::size_t label : labels) {
    if (label >= cols) {
      throw ConfigError(std::string(op) + ": label " + std::to_string(label) + " out of range [0," +
                        std::to_string(cols) + ")");
    }
  }
}

}  // namespace

template <typename T>
Var cross_entropy_loss(Graph<T>& g, Var scores, std::span<const std::size_t> labels) {
  const Tensor<T>& x = g.value(scores);
  require_rank(x.shape(), 2, "cross_entropy_loss", "scores");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  check_labels(labels, rows, cols, "cross_entropy_loss");
  Tensor<T> probs(x.shape());
  T loss = T{0};
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.raw() + r * cols;
    const T peak = *std::max_element(in, in + cols);
    T total = T{0};
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(in[c] - peak);
    const T lse = peak + std::log(total);
    loss += lse - in[labels[r]];
    for (std::size_t c = 0; c < cols; ++c) probs[r * cols + c] = std::exp(in[c] - lse);
  }
  loss /= static_cast<T>(rows);
  std::vector<std::size_t> saved_labels(labels.begin(), labels.end());
  auto backward = [probs = std::move(probs), saved_labels = std::move(saved_labels), rows, cols](
                      const Graph<T>&, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    Tensor<T>& dx = *grads[0];
    const T factor = gout[0] / static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const T target = c == saved_labels[r] ? T{1} : T{0};
        dx[r * cols + c] += factor * (probs[r * cols + c] - target);
      }
    }
  };
  return g.record("cross_entropy_loss", Tensor<T>({1}, {loss}), {scores}, std::move(backward));
}

template <typename T>
Var nll_loss(Graph<T>& g, Var probs, std::span<const std::size_t> labels) {
  const Tensor<T>& p = g.value(probs);
  require_rank(p.shape(), 2, "nll_loss", "probs");
  const std::size_t rows = p.dim(0), cols = p.dim(1);
  check_labels(labels, rows, cols, "nll_loss");
  T loss = T{0};
  for (std::size_t r = 0; r < rows; ++r) loss -= std::log(p[r * cols + labels[r]]);
  loss /= static_cast<T>(rows);
  std::vector<std::size_t> saved_labels(labels.begin(), labels.end());
  auto backward = [probs, saved_labels = std::move(saved_labels), rows, cols](
                      const Graph<T>& graph, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    const Tensor<T>& pv = graph.value(probs);
    Tensor<T>& dp = *grads[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = r * cols + saved_labels[r];
      dp[i] -= gout[0] / (static_cast<T>(rows) * pv[i]);
    }
  };
  return g.record("nll_loss", Tensor<T>({1}, {loss}), {probs}, std::move(backward));
}

template <typename T>
Var concat(Graph<T>& g, Var a, Var b, std::size_t axis) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  if (x.rank() != y.rank()) throw DimensionError("concat: rank mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  if (axis >= x.rank()) throw DimensionError("concat: axis out of range", std::to_string(axis));
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis && x.dim(i) != y.dim(i)) {
      throw DimensionError("concat: non-concatenated axis " + std::to_string(i) + " differs (" +
                               std::to_string(x.dim(i)) + " vs " + std::to_string(y.dim(i)) + ")",
                           std::to_string(i));
    }
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t xa = x.dim(axis) * inner, ya = y.dim(axis) * inner;
  Shape shape = x.shape();
  shape[axis] += y.dim(axis);
  AlignedVector<T> data;
  data.reserve(shape_size(shape));
  for (std::size_t o = 0; o < outer; ++o) {
    data.insert(data.end(), x.raw() + o * xa, x.raw() + (o + 1) * xa);
    data.insert(data.end(), y.raw() + o * ya, y.raw() + (o + 1) * ya);
  }
  auto backward = [outer, xa, ya](const Graph<T>&, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = gout.raw() + o * (xa + ya);
      if (grads[0] != nullptr) {
        T* dst = grads[0]->raw() + o * xa;
        for (std::size_t i = 0; i < xa; ++i) dst[i] += src[i];
      }
      if (grads[1] != nullptr) {
        T* dst = grads[1]->raw() + o * ya;
        for (std::size_t i = 0; i < ya; ++i) dst[i] += src[xa + i];
      }
    }
  };
  return g.record("concat", Tensor<T>(std::move(shape), std::move(data)), {a, b}, std::move(backward));
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_same_shape(x.shape(), y.shape(), "add");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  auto backward = [](const Graph<T>&, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    for (Tensor<T>* d : grads) {
      if (d == nullptr) continue;
      for (std::size_t i = 0; i < gout.size(); ++i) (*d)[i] += gout[i];
    }
  };
  return g.record("add", std::move(out), {a, b}, std::move(backward));
}

template <typename T>
Var mul(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_same_shape(x.shape(), y.shape(), "mul");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  auto backward = [a, b](const Graph<T>& graph, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    const Tensor<T>& xv = graph.value(a);
    const Tensor<T>& yv = graph.value(b);
    if (grads[0] != nullptr) {
      for (std::size_t i = 0; i < gout.size(); ++i) (*grads[0])[i] += yv[i] * gout[i];
    }
    if (grads[1] != nullptr) {
      for (std::size_t i = 0; i < gout.size(); ++i) (*grads[1])[i] += xv[i] * gout[i];
    }
  };
  return g.record("mul", std::move(out), {a, b}, std::move(backward));
}

template <typename T>
Var scale(Graph<T>& g, Var input, T factor) {
  const Tensor<T>& x = g.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  auto backward = [factor](const Graph<T>&, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    for (std::size_t i = 0; i < gout.size(); ++i) (*grads[0])[i] += factor * gout[i];
  };
  return g.record("scale", std::move(out), {input}, std::move(backward));
}

template <typename T>
Var sum(Graph<T>& g, Var input) {
  const Tensor<T>& x = g.value(input);
  T total = T{0};
  for (T v : x.data()) total += v;
  auto backward = [](const Graph<T>&, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    for (auto& v : grads[0]->data()) v += gout[0];
  };
  return g.record("sum", Tensor<T>({1}, {total}), {input}, std::move(backward));
}

template <typename T>
Var flatten(Graph<T>& g, Var input) {
  const Tensor<T>& x = g.value(input);
  if (x.rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t width = rows == 0 ? 0 : x.size() / rows;
  auto backward = [](const Graph<T>&, const Tensor<T>& gout, std::span<Tensor<T>* const> grads) {
    for (std::size_t i = 0; i < gout.size(); ++i) (*grads[0])[i] += gout[i];
  };
  return g.record("flatten", x.reshaped({rows, width}), {input}, std::move(backward));
}

#define FUSENET_INSTANTIATE_OPS(T)                                                         \
  template Var conv2d(Graph<T>&, Var, Var, Var, Conv2dOptions);                          \
  template Var maxpool2d(Graph<T>&, Var, std::size_t, std::size_t);                       \
  template Var relu(Graph<T>&, Var);                                                     \
  template Var lrn(Graph<T>&, Var, const LrnParams&);                                    \
  template Var fully_connected(Graph<T>&, Var, Var, Var);                                \
  template Var softmax(Graph<T>&, Var);                                                  \
  template Var cross_entropy_loss(Graph<T>&, Var, std::span<const std::size_t>);         \
  template Var nll_loss(Graph<T>&, Var, std::span<const std::size_t>);                   \
  template Var concat(Graph<T>&, Var, Var, std::size_t);                                 \
  template Var add(Graph<T>&, Var, Var);                                                 \
  template Var mul(Graph<T>&, Var, Var);                                                 \
  template Var scale(Graph<T>&, Var, T);                                                 \
  template Var sum(Graph<T>&, Var);                                                      \
  template Var flatten(Graph<T>&, Var);

FUSENET_INSTANTIATE_OPS(float)
FUSENET_INSTANTIATE_OPS(double)

#undef FUSENET_INSTANTIATE_OPS

}  // namespace fusenet
