// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmse/error.hpp"
#include "dmse/tensor.hpp"

namespace dmse::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad) : s_(std::make_shared<Storage>()) {
  s_->values.assign(numel(shape), fill);
  s_->shape = std::move(shape);
  s_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) : s_(std::make_shared<Storage>()) {
  DMSE_REQUIRE(values.size() == numel(shape), "tensor: value count " + std::to_string(values.size()) +
                                                  " does not match shape " + to_string(shape));
  s_->shape = std::move(shape);
  s_->values = std::move(values);
  s_->requires_grad = requires_grad;
}

template <typename T>
T Tensor<T>::item() const {
  DMSE_REQUIRE(defined() && size() == 1, "tensor: item() needs exactly one element");
  return s_->values[0];
}

template <typename T>
std::vector<T>& Tensor<T>::grad_buffer() const {
  if (s_->grad.empty()) s_->grad.assign(s_->values.size(), T(0));
  return s_->grad;
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
  return Tensor(s_->shape, s_->values, requires_grad);
}

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  std::vector<U> v(s_->values.begin(), s_->values.end());
  return Tensor<U>(s_->shape, std::move(v), s_->requires_grad);
}

template <typename T>
bool Tape<T>::tracks(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  for (const auto* t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

template <typename T>
void Tape<T>::push(std::function<void()> backward) {
  if (consumed_) throw InvalidArgument("tape: recording onto a consumed tape; call reset()");
  records_.push_back(std::move(backward));
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  DMSE_REQUIRE(loss.defined() && loss.size() == 1, "backward: loss must be a scalar");
  DMSE_REQUIRE(loss.requires_grad(), "backward: loss is not on the tape");
  if (consumed_) throw InvalidArgument("backward: tape already consumed; call reset() first");
  consumed_ = true;
  loss.grad_buffer()[0] += T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

template <typename T>
void Tape<T>::reset() {
  records_.clear();
  consumed_ = false;
}

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  DMSE_REQUIRE(a.defined() && b.defined(), std::string(op) + ": undefined operand");
  DMSE_REQUIRE(a.shape() == b.shape(),
               std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(Tape<T>& tape, const Tensor<T>& x, F f, D df) {
  DMSE_REQUIRE(x.defined(), "unary op: undefined operand");
  Tensor<T> out(x.shape());
  auto xv = x.values();
  auto yv = out.values_mut();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = f(xv[i]);
  if (tape.tracks({&x})) {
    out.set_requires_grad(true);
    tape.push([x, out, df]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xv = x.values();
      auto yv = out.values();
      auto& gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "add");
  Tensor<T> out(a.shape());
  auto o = out.values_mut();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] + b.values()[i];
  if (tape.tracks({&a, &b})) {
    out.set_requires_grad(true);
    tape.push([a, b, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto& gt = t->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  Tensor<T> out(a.shape());
  auto o = out.values_mut();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] - b.values()[i];
  if (tape.tracks({&a, &b})) {
    out.set_requires_grad(true);
    tape.push([a, b, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  Tensor<T> out(a.shape());
  auto o = out.values_mut();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * b.values()[i];
  if (tape.tracks({&a, &b})) {
    out.set_requires_grad(true);
    tape.push([a, b, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad_buffer();
        auto bv = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad_buffer();
        auto av = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& a, T factor) {
  return unary(tape, a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  DMSE_REQUIRE(x.defined() && bias.defined() && x.rank() >= 1 && bias.rank() == 1 &&
                   bias.dim(0) == x.shape().back(),
               "add_bias: bias length must equal the last dimension");
  const std::size_t n = bias.dim(0);
  Tensor<T> out(x.shape());
  auto o = out.values_mut();
  auto xv = x.values();
  auto bv = bias.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] + bv[i % n];
  if (tape.tracks({&x, &bias})) {
    out.set_requires_grad(true);
    tape.push([x, bias, out, n]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto& gb = bias.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x) {
  return unary(
      tape, x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(Tape<T>& tape, const Tensor<T>& x) {
  return unary(tape, x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  DMSE_REQUIRE(x.defined(), "sum: undefined operand");
  long double acc = 0.0L;
  for (T v : x.values()) acc += v;
  Tensor<T> out(Shape{}, static_cast<T>(acc));
  if (tape.tracks({&x})) {
    out.set_requires_grad(true);
    tape.push([x, out]() {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      auto& gx = x.grad_buffer();
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  DMSE_REQUIRE(x.defined() && x.size() > 0, "mean: empty operand");
  return scale(tape, sum(tape, x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> elu(Tape<T>& tape, const Tensor<T>& x) {
  return unary(
      tape, x, [](T v) { return v > T(0) ? v : std::expm1(v); },
      [](T v, T y) { return v > T(0) ? T(1) : y + T(1); });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  return unary(
      tape, x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
  return unary(tape, x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> softplus(Tape<T>& tape, const Tensor<T>& x) {
  return unary(
      tape, x, [](T v) { return v > T(20) ? v : std::log1p(std::exp(v)); },
      [](T v, T) {
        if (v > T(20)) return T(1);
        return T(1) / (T(1) + std::exp(-v));
      });
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  DMSE_REQUIRE(x.defined() && axis < x.rank(), "softmax: invalid axis");
  const auto& s = x.shape();
  const std::size_t len = s[axis];
  const std::size_t inner = numel(Shape(s.begin() + static_cast<long>(axis) + 1, s.end()));
  const std::size_t outer = x.size() / (len * inner);
  Tensor<T> out(s);
  auto xv = x.values();
  auto yv = out.values_mut();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = xv[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      T z = T(0);
      for (std::size_t k = 0; k < len; ++k) {
        const T e = std::exp(xv[base + k * inner] - mx);
        yv[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < len; ++k) yv[base + k * inner] /= z;
    }
  if (tape.tracks({&x})) {
    out.set_requires_grad(true);
    tape.push([x, out, len, inner, outer]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto y = out.values();
      auto& gx = x.grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * len * inner + in;
          T dot = T(0);
          for (std::size_t k = 0; k < len; ++k) dot += g[base + k * inner] * y[base + k * inner];
          for (std::size_t k = 0; k < len; ++k) {
            const std::size_t i = base + k * inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  DMSE_REQUIRE(x.defined() && numel(shape) == x.size(),
               "reshape: " + to_string(x.shape()) + " -> " + to_string(shape) + " changes element count");
  Tensor<T> out(std::move(shape), x.vec());
  if (tape.tracks({&x})) {
    out.set_requires_grad(true);
    tape.push([x, out]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto& gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

namespace {

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// For each output linear index, the source linear index under `axes`.
std::vector<std::size_t> permutation_map(const Shape& in, const std::vector<std::size_t>& axes) {
  const std::size_t r = in.size();
  const auto in_st = strides_of(in);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[axes[i]];
  const std::size_t n = numel(in);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_st[axes[i]];
    map[lin] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  DMSE_REQUIRE(x.defined() && axes.size() == x.rank(), "permute: axis count must equal rank");
  std::vector<bool> seen(axes.size(), false);
  for (auto a : axes) {
    DMSE_REQUIRE(a < axes.size() && !seen[a], "permute: axes must be a permutation");
    seen[a] = true;
  }
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = x.dim(axes[i]);
  auto map = std::make_shared<std::vector<std::size_t>>(permutation_map(x.shape(), axes));
  Tensor<T> out(out_shape);
  auto xv = x.values();
  auto yv = out.values_mut();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = xv[(*map)[i]];
  if (tape.tracks({&x})) {
    out.set_requires_grad(true);
    tape.push([x, out, map]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto& gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[(*map)[i]] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& xs, std::size_t axis) {
  DMSE_REQUIRE(!xs.empty() && xs[0].defined() && axis < xs[0].rank(), "concat: invalid inputs or axis");
  const Shape& s0 = xs[0].shape();
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& t : xs) {
    DMSE_REQUIRE(t.defined() && t.rank() == s0.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < s0.size(); ++d)
      DMSE_REQUIRE(d == axis || t.dim(d) == s0[d], "concat: shape mismatch off the concat axis");
    out_shape[axis] += t.dim(axis);
  }
  const std::size_t inner = numel(Shape(s0.begin() + static_cast<long>(axis) + 1, s0.end()));
  const std::size_t outer = numel(Shape(s0.begin(), s0.begin() + static_cast<long>(axis)));
  const std::size_t out_row = out_shape[axis] * inner;
  Tensor<T> out(out_shape);
  auto yv = out.values_mut();
  std::size_t offset = 0;
  bool track = false;
  for (const auto& t : xs) {
    const std::size_t row = t.dim(axis) * inner;
    auto v = t.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(v.begin() + static_cast<long>(o * row), v.begin() + static_cast<long>((o + 1) * row),
                yv.begin() + static_cast<long>(o * out_row + offset));
    offset += row;
    track = track || tape.tracks({&t});
  }
  if (track) {
    out.set_requires_grad(true);
    tape.push([xs, out, axis, inner, outer, out_row]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      std::size_t offset = 0;
      for (const auto& t : xs) {
        const std::size_t row = t.dim(axis) * inner;
        if (t.requires_grad()) {
          auto& gt = t.grad_buffer();
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < row; ++i) gt[o * row + i] += g[o * out_row + offset + i];
        }
        offset += row;
      }
    });
  }
  return out;
}

namespace {

// c[m,n] += a[m,k] b[k,n] with optional transposes expressed by strides.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,n] += a[m,k] * b[n,k]^T
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc = T(0);
      const T* ar = a + i * k;
      const T* br = b + j * k;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      c[i * n + j] += acc;
    }
}

// c[k,n] += a[m,k]^T * g[m,n]
template <typename T>
void gemm_tn_acc(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  DMSE_REQUIRE(a.defined() && b.defined() && a.rank() >= 2 && b.rank() >= 2, "matmul: operands need rank >= 2");
  const std::size_t m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2), n = b.dim(b.rank() - 1);
  DMSE_REQUIRE(k == kb, "matmul: inner dimensions differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  DMSE_REQUIRE(batch_a == batch_b || batch_a.empty() || batch_b.empty(),
               "matmul: batch dimensions not compatible " + to_string(a.shape()) + " x " + to_string(b.shape()));
  const Shape& batch = batch_a.empty() ? batch_b : batch_a;
  const std::size_t nb = numel(batch);
  const std::size_t sa = batch_a.empty() ? 0 : m * k;
  const std::size_t sb = batch_b.empty() ? 0 : k * n;
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);
  {
    const T* av = a.values().data();
    const T* bv = b.values().data();
    T* cv = out.values_mut().data();
    for (std::size_t i = 0; i < nb; ++i) gemm_acc(av + i * sa, bv + i * sb, cv + i * m * n, m, k, n);
  }
  if (tape.tracks({&a, &b})) {
    out.set_requires_grad(true);
    tape.push([a, b, out, nb, sa, sb, m, k, n]() {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad()) {
        T* ga = a.grad_buffer().data();
        const T* bv = b.values().data();
        for (std::size_t i = 0; i < nb; ++i) gemm_nt_acc(g + i * m * n, bv + i * sb, ga + i * sa, m, n, k);
      }
      if (b.requires_grad()) {
        T* gb = b.grad_buffer().data();
        const T* av = a.values().data();
        for (std::size_t i = 0; i < nb; ++i) gemm_tn_acc(av + i * sa, g + i * m * n, gb + i * sb, m, k, n);
      }
    });
  }
  return out;
}

#define DMSE_INSTANTIATE_TENSOR_OPS(T)                                                            \
  template class Tensor<T>;                                                                       \
  template class Tape<T>;                                                                         \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                        \
  template Tensor<T> add_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> abs(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> square(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> elu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                                         \
  template Tensor<T> tanh(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> softplus(Tape<T>&, const Tensor<T>&);                                        \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&, std::size_t);                            \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                  \
  template Tensor<T> permute(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);        \
  template Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>&, std::size_t);                \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);

DMSE_INSTANTIATE_TENSOR_OPS(float)
DMSE_INSTANTIATE_TENSOR_OPS(double)

template Tensor<double> Tensor<float>::cast<double>() const;
template Tensor<float> Tensor<double>::cast<float>() const;
template Tensor<float> Tensor<float>::cast<float>() const;
template Tensor<double> Tensor<double>::cast<double>() const;

}  // namespace dmse::ad
