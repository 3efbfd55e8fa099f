#include "eavit/tensor/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "eavit/errors.h"
#include "eavit/tensor/parallel.h"

namespace eavit::tensor {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

// Returns the active tape's state when any input needs a gradient.
template <typename T>
std::shared_ptr<detail::TapeState<T>> recording(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::current();
  if (tape == nullptr) return nullptr;
  for (const Tensor<T>* in : inputs) {
    if (in->requires_grad()) return tape->state();
  }
  return nullptr;
}

template <typename T>
void attach(Tensor<T>& out, const std::shared_ptr<detail::TapeState<T>>& state,
            std::function<void()> step) {
  out.node()->requires_grad = true;
  out.node()->origin = state;
  state->steps.push_back(std::move(step));
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// View of a shape as [outer, length, inner] around one axis.
struct AxisView {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  parallel_rows(m, k * n, [=](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      T* crow = c + i * n;
      const T* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = arow[p];
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  parallel_rows(m, k * n, [=](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const T* arow = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        c[i * n + j] += acc;
      }
    }
  });
}

// C[k x n] += A[m x k]^T * B[m x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  parallel_rows(k, m * n, [=](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      T* crow = c + i * n;
      for (std::size_t p = 0; p < m; ++p) {
        const T av = a[p * k + i];
        if (av == T(0)) continue;
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(-2);
  const std::size_t k = a.dim(-1);
  if (b.dim(-2) != k) {
    throw ShapeError("matmul inner dimensions disagree: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t n = b.dim(-1);

  if (b.rank() == 2) {
    const std::size_t rows = a.numel() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    Tensor<T> out(out_shape);
    gemm_nn(a.data().data(), b.data().data(), out.data().data(), rows, k, n);
    if (auto state = recording({&a, &b})) {
      attach(out, state, [an = a.node(), bn = b.node(), on = out.node(), rows, k, n] {
        if (on->grad.empty()) return;
        if (an->requires_grad) gemm_nt(on->grad.data(), bn->data.data(), an->grad_buffer(), rows, n, k);
        if (bn->requires_grad) gemm_tn(an->data.data(), on->grad.data(), bn->grad_buffer(), rows, k, n);
      });
    }
    return out;
  }

  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("batched matmul needs [B,m,k] x [B,k,n], got " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0);
  Tensor<T> out(Shape{batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(a.data().data() + s * m * k, b.data().data() + s * k * n, out.data().data() + s * m * n, m,
            k, n);
  }
  if (auto state = recording({&a, &b})) {
    attach(out, state, [an = a.node(), bn = b.node(), on = out.node(), batch, m, k, n] {
      if (on->grad.empty()) return;
      for (std::size_t s = 0; s < batch; ++s) {
        const T* g = on->grad.data() + s * m * n;
        if (an->requires_grad) gemm_nt(g, bn->data.data() + s * k * n, an->grad_buffer() + s * m * k, m, n, k);
        if (bn->requires_grad) gemm_tn(an->data.data() + s * m * k, g, bn->grad_buffer() + s * k * n, m, k, n);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("transpose needs rank >= 2, got " + to_string(x.shape()));
  const std::size_t rows = x.dim(-2);
  const std::size_t cols = x.dim(-1);
  const std::size_t batch = x.numel() / (rows * cols);
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  Tensor<T> out(out_shape);
  auto swap_into = [=](const T* src, T* dst, bool accumulate) {
    for (std::size_t s = 0; s < batch; ++s) {
      const T* in = src + s * rows * cols;
      T* o = dst + s * rows * cols;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
          if (accumulate)
            o[j * rows + i] += in[i * cols + j];
          else
            o[j * rows + i] = in[i * cols + j];
        }
    }
  };
  swap_into(x.data().data(), out.data().data(), false);
  if (auto state = recording({&x})) {
    // The gradient of [.., cols, rows] maps back with the roles swapped.
    attach(out, state, [xn = x.node(), on = out.node(), batch, rows, cols] {
      if (on->grad.empty()) return;
      T* dst = xn->grad_buffer();
      for (std::size_t s = 0; s < batch; ++s) {
        const T* g = on->grad.data() + s * rows * cols;
        T* o = dst + s * rows * cols;
        for (std::size_t j = 0; j < cols; ++j)
          for (std::size_t i = 0; i < rows; ++i) o[i * cols + j] += g[j * rows + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      T* dst = xn->grad_buffer();
      for (std::size_t i = 0; i < on->grad.size(); ++i) dst[i] += on->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    throw ShapeError("add: " + to_string(bs) + " does not broadcast onto " + to_string(as));
  }
  const std::size_t period = b.numel();
  Tensor<T> out(as);
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  T* od = out.data().data();
  for (std::size_t i = 0; i < a.numel(); ++i) od[i] = ad[i] + bd[i % period];
  if (auto state = recording({&a, &b})) {
    attach(out, state, [an = a.node(), bn = b.node(), on = out.node(), period] {
      if (on->grad.empty()) return;
      const std::size_t total = on->grad.size();
      if (an->requires_grad) {
        T* g = an->grad_buffer();
        for (std::size_t i = 0; i < total; ++i) g[i] += on->grad[i];
      }
      if (bn->requires_grad) {
        T* g = bn->grad_buffer();
        for (std::size_t i = 0; i < total; ++i) g[i % period] += on->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (auto state = recording({&a, &b})) {
    attach(out, state, [an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.empty()) return;
      const std::size_t total = on->grad.size();
      if (an->requires_grad) {
        T* g = an->grad_buffer();
        for (std::size_t i = 0; i < total; ++i) g[i] += on->grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        T* g = bn->grad_buffer();
        for (std::size_t i = 0; i < total; ++i) g[i] += on->grad[i] * an->data[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * factor;
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node(), factor] {
      if (on->grad.empty()) return;
      T* g = xn->grad_buffer();
      for (std::size_t i = 0; i < on->grad.size(); ++i) g[i] += on->grad[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T v = x.data()[i];
    out.data()[i] = T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2));
  }
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      constexpr T kInvSqrt2Pi = std::numbers::inv_sqrtpi_v<T> * kInvSqrt2;
      T* g = xn->grad_buffer();
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        const T v = xn->data[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * kInvSqrt2));
        const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
        g[i] += on->grad[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      T* g = xn->grad_buffer();
      for (std::size_t i = 0; i < xn->data.size(); ++i) g[i] += on->grad[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, int axis) {
  const AxisView v = axis_view(x.shape(), normalize_axis(axis, x.rank()));
  Tensor<T> out(x.shape());
  const T* xd = x.data().data();
  T* od = out.data().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.length * v.inner + in;
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < v.length; ++l) peak = std::max(peak, xd[base + l * v.inner]);
      T total = 0;
      for (std::size_t l = 0; l < v.length; ++l) {
        const T e = std::exp(xd[base + l * v.inner] - peak);
        od[base + l * v.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < v.length; ++l) od[base + l * v.inner] /= total;
    }
  }
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node(), v] {
      if (on->grad.empty()) return;
      T* g = xn->grad_buffer();
      const T* y = on->data.data();
      const T* dy = on->grad.data();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
          const std::size_t base = o * v.length * v.inner + in;
          T dot = 0;
          for (std::size_t l = 0; l < v.length; ++l) dot += dy[base + l * v.inner] * y[base + l * v.inner];
          for (std::size_t l = 0; l < v.length; ++l) {
            const std::size_t idx = base + l * v.inner;
            g[idx] += y[idx] * (dy[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l1_normalize_axis(const Tensor<T>& x, int axis, double eps) {
  const AxisView v = axis_view(x.shape(), normalize_axis(axis, x.rank()));
  const T e = static_cast<T>(eps);
  const T share = e / static_cast<T>(v.length);
  Tensor<T> out(x.shape());
  // Per-slice denominators, kept for the backward pass.
  std::vector<T> denom(v.outer * v.inner);
  const T* xd = x.data().data();
  T* od = out.data().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.length * v.inner + in;
      T total = 0;
      for (std::size_t l = 0; l < v.length; ++l) total += xd[base + l * v.inner];
      const T d = total + e;
      denom[o * v.inner + in] = d;
      for (std::size_t l = 0; l < v.length; ++l) {
        const std::size_t idx = base + l * v.inner;
        od[idx] = (xd[idx] + share) / d;
      }
    }
  }
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node(), v, denom = std::move(denom)] {
      if (on->grad.empty()) return;
      T* g = xn->grad_buffer();
      const T* y = on->data.data();
      const T* dy = on->grad.data();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
          const std::size_t base = o * v.length * v.inner + in;
          T dot = 0;
          for (std::size_t l = 0; l < v.length; ++l) dot += dy[base + l * v.inner] * y[base + l * v.inner];
          const T d = denom[o * v.inner + in];
          for (std::size_t l = 0; l < v.length; ++l) {
            const std::size_t idx = base + l * v.inner;
            g[idx] += (dy[idx] - dot) / d;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps) {
  const std::size_t width = x.dim(-1);
  if (gain.numel() != width || bias.numel() != width) {
    throw ShapeError("layer_norm: gain/bias of " + to_string(gain.shape()) + "/" +
                     to_string(bias.shape()) + " do not match last axis of " + to_string(x.shape()));
  }
  const std::size_t rows = x.numel() / width;
  Tensor<T> out(x.shape());
  std::vector<T> normed(x.numel());
  std::vector<T> inv_std(rows);
  const T* xd = x.data().data();
  const T* gd = gain.data().data();
  const T* bd = bias.data().data();
  T* od = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xd + r * width;
    T mu = 0;
    for (std::size_t j = 0; j < width; ++j) mu += row[j];
    mu /= static_cast<T>(width);
    T var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(width);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < width; ++j) {
      const T h = (row[j] - mu) * is;
      normed[r * width + j] = h;
      od[r * width + j] = h * gd[j] + bd[j];
    }
  }
  if (auto state = recording({&x, &gain, &bias})) {
    attach(out, state,
           [xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node(), rows, width,
            normed = std::move(normed), inv_std = std::move(inv_std)] {
             if (on->grad.empty()) return;
             const T* dy = on->grad.data();
             if (gn->requires_grad || bn->requires_grad) {
               T* gg = gn->requires_grad ? gn->grad_buffer() : nullptr;
               T* bg = bn->requires_grad ? bn->grad_buffer() : nullptr;
               for (std::size_t r = 0; r < rows; ++r) {
                 for (std::size_t j = 0; j < width; ++j) {
                   const std::size_t idx = r * width + j;
                   if (gg) gg[j] += dy[idx] * normed[idx];
                   if (bg) bg[j] += dy[idx];
                 }
               }
             }
             if (!xn->requires_grad) return;
             T* g = xn->grad_buffer();
             const T inv_w = T(1) / static_cast<T>(width);
             for (std::size_t r = 0; r < rows; ++r) {
               T mean_dh = 0;
               T mean_dh_h = 0;
               for (std::size_t j = 0; j < width; ++j) {
                 const std::size_t idx = r * width + j;
                 const T dh = dy[idx] * gn->data[j];
                 mean_dh += dh;
                 mean_dh_h += dh * normed[idx];
               }
               mean_dh *= inv_w;
               mean_dh_h *= inv_w;
               for (std::size_t j = 0; j < width; ++j) {
                 const std::size_t idx = r * width + j;
                 const T dh = dy[idx] * gn->data[j];
                 g[idx] += inv_std[r] * (dh - mean_dh - normed[idx] * mean_dh_h);
               }
             }
           });
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t ax = normalize_axis(axis, parts.front().rank());
  Shape out_shape = parts.front().shape();
  out_shape[ax] = 0;
  std::vector<AxisView> views;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != out_shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < probe.size(); ++i) {
      if (i != ax && probe[i] != out_shape[i]) {
        throw ShapeError("concat: " + to_string(probe) + " incompatible with " +
                         to_string(parts.front().shape()));
      }
    }
    out_shape[ax] += probe[ax];
    views.push_back(axis_view(probe, ax));
  }
  Tensor<T> out(out_shape);
  const AxisView ov = axis_view(out_shape, ax);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    offsets.push_back(offset);
    const std::size_t block = views[p].length * views[p].inner;
    const T* src = parts[p].data().data();
    T* dst = out.data().data();
    for (std::size_t o = 0; o < ov.outer; ++o) {
      std::copy_n(src + o * block, block, dst + o * ov.length * ov.inner + offset * ov.inner);
    }
    offset += views[p].length;
  }
  Tape<T>* tape = Tape<T>::current();
  const bool any = std::any_of(parts.begin(), parts.end(), [](const Tensor<T>& p) { return p.requires_grad(); });
  if (tape != nullptr && any) {
    std::vector<NodePtr<T>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    attach(out, tape->state(), [nodes = std::move(nodes), on = out.node(), views, offsets, ov] {
      if (on->grad.empty()) return;
      for (std::size_t p = 0; p < nodes.size(); ++p) {
        if (!nodes[p]->requires_grad) continue;
        const std::size_t block = views[p].length * views[p].inner;
        T* g = nodes[p]->grad_buffer();
        for (std::size_t o = 0; o < ov.outer; ++o) {
          const T* src = on->grad.data() + o * ov.length * ov.inner + offsets[p] * ov.inner;
          for (std::size_t i = 0; i < block; ++i) g[o * block + i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, x.rank());
  if (length == 0 || start + length > x.shape()[ax]) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range for axis of length " + std::to_string(x.shape()[ax]));
  }
  const AxisView v = axis_view(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  Tensor<T> out(out_shape);
  const std::size_t block = length * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(x.data().data() + o * v.length * v.inner + start * v.inner, block,
                out.data().data() + o * block);
  }
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node(), v, start, block] {
      if (on->grad.empty()) return;
      T* g = xn->grad_buffer();
      for (std::size_t o = 0; o < v.outer; ++o) {
        T* dst = g + o * v.length * v.inner + start * v.inner;
        const T* src = on->grad.data() + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> repeat_leading(const Tensor<T>& x, std::size_t count) {
  if (count == 0) throw ShapeError("repeat_leading: count must be positive");
  Shape out_shape{count};
  out_shape.insert(out_shape.end(), x.shape().begin(), x.shape().end());
  Tensor<T> out(out_shape);
  const std::size_t n = x.numel();
  for (std::size_t c = 0; c < count; ++c) std::copy_n(x.data().data(), n, out.data().data() + c * n);
  if (auto state = recording({&x})) {
    attach(out, state, [xn = x.node(), on = out.node(), n, count] {
      if (on->grad.empty()) return;
      T* g = xn->grad_buffer();
      for (std::size_t c = 0; c < count; ++c)
        for (std::size_t i = 0; i < n; ++i) g[i] += on->grad[c * n + i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  const std::size_t classes = logits.dim(-1);
  const std::size_t batch = logits.numel() / classes;
  if (logits.rank() > 2 || labels.size() != batch) {
    throw ShapeError("cross_entropy: logits " + to_string(logits.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<T> probs(logits.numel());
  T loss = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    const T* row = logits.data().data() + b * classes;
    const T peak = *std::max_element(row, row + classes);
    T total = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(row[c] - peak);
      total += probs[b * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] /= total;
    loss += -(row[label] - peak - std::log(total));
  }
  Tensor<T> out = Tensor<T>::scalar(loss / static_cast<T>(batch));
  if (auto state = recording({&logits})) {
    std::vector<int> owned(labels.begin(), labels.end());
    attach(out, state, [ln = logits.node(), on = out.node(), probs = std::move(probs),
                        owned = std::move(owned), batch, classes] {
      if (on->grad.empty()) return;
      const T scale = on->grad[0] / static_cast<T>(batch);
      T* g = ln->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < classes; ++c) {
          const T target = static_cast<int>(c) == owned[b] ? T(1) : T(0);
          g[b * classes + c] += scale * (probs[b * classes + c] - target);
        }
      }
    });
  }
  return out;
}

#define EAVIT_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> transpose(const Tensor<T>&);                                           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                       \
  template Tensor<T> gelu(const Tensor<T>&);                                                \
  template Tensor<T> sum(const Tensor<T>&);                                                 \
  template Tensor<T> mean(const Tensor<T>&);                                                \
  template Tensor<T> softmax_axis(const Tensor<T>&, int);                                   \
  template Tensor<T> l1_normalize_axis(const Tensor<T>&, int, double);                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                            \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                \
  template Tensor<T> repeat_leading(const Tensor<T>&, std::size_t);                         \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);

EAVIT_INSTANTIATE_OPS(float)
EAVIT_INSTANTIATE_OPS(double)

#undef EAVIT_INSTANTIATE_OPS

}  // namespace eavit::tensor
