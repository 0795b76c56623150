// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minimal reverse-mode autodiff over dense row-major tensors. The operator
// set is closed over what the enhancement network needs; there is no
// general broadcasting.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dmse::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Shared handle: copies alias the same values and gradient buffer.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape.at(i); }
  std::size_t size() const { return s_->values.size(); }

  std::span<const T> values() const { return s_->values; }
  // In-place writes are for leaves (parameter updates, finite differences).
  std::span<T> values_mut() const { return s_->values; }
  const std::vector<T>& vec() const { return s_->values; }
  T item() const;

  bool requires_grad() const { return s_ && s_->requires_grad; }
  void set_requires_grad(bool on) const { s_->requires_grad = on; }
  bool has_grad() const { return !s_->grad.empty(); }
  std::span<const T> grad() const { return s_->grad; }
  // Allocates a zero gradient on first use.
  std::vector<T>& grad_buffer() const;
  void zero_grad() const { s_->grad.clear(); }

  Tensor clone(bool requires_grad = false) const;
  template <typename U>
  Tensor<U> cast() const;

 private:
  struct Storage {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

// Ordered list of backward closures in execution order; reverse iteration
// is a valid topological order.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  bool tracks(std::initializer_list<const Tensor<T>*> inputs) const;
  void push(std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every record once in reverse. A
  // consumed tape must be reset() before the next backward.
  void backward(const Tensor<T>& loss);
  void reset();
  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<std::function<void()>> records_;
  bool recording_;
  bool consumed_ = false;
};

// ---- elementwise and reductions ----
template <typename T> Tensor<T> add(Tape<T>&, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(Tape<T>&, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(Tape<T>&, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(Tape<T>&, const Tensor<T>& a, T factor);
// x + b with b broadcast along the last axis.
template <typename T> Tensor<T> add_bias(Tape<T>&, const Tensor<T>& x, const Tensor<T>& bias);
template <typename T> Tensor<T> abs(Tape<T>&, const Tensor<T>& x);
template <typename T> Tensor<T> square(Tape<T>&, const Tensor<T>& x);
template <typename T> Tensor<T> sum(Tape<T>&, const Tensor<T>& x);
template <typename T> Tensor<T> mean(Tape<T>&, const Tensor<T>& x);

// ---- activations ----
template <typename T> Tensor<T> elu(Tape<T>&, const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(Tape<T>&, const Tensor<T>& x);
template <typename T> Tensor<T> tanh(Tape<T>&, const Tensor<T>& x);
// log(1 + e^x); switches to identity above 20.
template <typename T> Tensor<T> softplus(Tape<T>&, const Tensor<T>& x);
// Max-subtracted softmax along `axis`.
template <typename T> Tensor<T> softmax(Tape<T>&, const Tensor<T>& x, std::size_t axis);

// ---- layout ----
template <typename T> Tensor<T> reshape(Tape<T>&, const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(Tape<T>&, const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <typename T> Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>& xs, std::size_t axis);

// a [..., m, k] x b [..., k, n]. Batch dims must match, or one operand is
// rank 2 and is shared across the other's batch.
template <typename T> Tensor<T> matmul(Tape<T>&, const Tensor<T>& a, const Tensor<T>& b);

// ---- attention ----
// softmax(scale * Q K^T) V along the time axis of [B, C, T, F] maps. The C
// channels split into `heads` groups; every (batch, head, bin) triple is an
// independent sequence with C/heads-dimensional embeddings. Weights are
// recomputed during backward instead of stored.
template <typename T>
Tensor<T> time_attention(Tape<T>&, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                         T scale = T(1));

// The softmax weights of time_attention as [B, heads, F, T, T]; not differentiable.
template <typename T>
Tensor<T> time_attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, T scale = T(1));

// ---- convolution ----
struct AxisPadding {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

struct Conv2dGeometry {
  std::size_t stride_t = 1, stride_f = 1;
  std::size_t dilation_t = 1, dilation_f = 1;
  AxisPadding pad_t, pad_f;

  // (kt - 1) * dilation frames of left padding on time, none on the right.
  static AxisPadding causal_time(std::size_t kt, std::size_t dilation = 1) { return {(kt - 1) * dilation, 0}; }
};

// Output length along one axis; throws when the kernel does not fit.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t dilation,
                             AxisPadding pad);

// Cross-correlation. x [B, Cin, T, F] or [Cin, T, F]; kernel
// [Cout, Cin, kt, kf]; optional bias [Cout].
template <typename T>
Tensor<T> conv2d(Tape<T>&, const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 const Conv2dGeometry& geom);

// Adjoint of conv2d with the same geometry and kernel [Cin_conv, Cout_conv,
// kt, kf] read as [in, out]: maps a conv2d output of shape (T', F') back to
// (out_t, out_f), which must satisfy conv_output_size(out) == in.
template <typename T>
Tensor<T> conv2d_transpose(Tape<T>&, const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           const Conv2dGeometry& geom, std::size_t out_t, std::size_t out_f);

// ---- normalization ----
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(Shape{channels}, T(0)), running_var(Shape{channels}, T(1)) {}
};

enum class Mode { train, eval };

// Per-channel normalization over (B, T, F). Train mode uses batch
// statistics and updates running stats with `momentum`; eval mode applies
// the running stats as a fixed affine map.
template <typename T>
Tensor<T> batch_norm(Tape<T>&, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormState<T>& state, Mode mode, T momentum = T(0.1), T eps = T(1e-5));

// ---- recurrence ----
template <typename T>
struct LstmOutput {
  Tensor<T> outputs;  // [B, T, H]
  Tensor<T> h_final;  // [B, H], not differentiable
  Tensor<T> c_final;  // [B, H], not differentiable
};

// Gate order [input, forget, candidate, output] along the 4H axis.
// x [B, T, D] or [T, D]; w_ih [D, 4H]; w_hh [H, 4H]; bias [4H]. h0/c0 are
// optional [B, H] initial states (zero when undefined) and differentiable.
template <typename T>
LstmOutput<T> lstm(Tape<T>&, const Tensor<T>& x, const Tensor<T>& w_ih, const Tensor<T>& w_hh,
                   const Tensor<T>& bias, const Tensor<T>& h0 = {}, const Tensor<T>& c0 = {});

// ---- optimization ----
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

// One bias-corrected Adam update at step index `step` (1-based).
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state, long step,
               const AdamConfig& config);

// Adam over a fixed list of parameter tensors; missing gradients count as zero.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Tensor<T>> params, AdamConfig config = {});
  void step();
  void zero_grad();
  long steps() const { return t_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamMoments<T>> moments_;
  AdamConfig config_;
  long t_ = 0;
};

// ---- finite-difference checking ----
struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "input[k] element i"
};

struct GradCheckOptions {
  double eps = 1e-5;
  double denom_floor = 1e-6;      // |a - n| / max(|a|, |n|, floor)
  std::size_t max_per_input = 0;  // 0 = every element, else a seeded sample
  std::uint64_t seed = 1;
};

// `loss` builds a scalar on the given tape from the current values of
// `inputs`; analytic gradients are compared with central differences.
GradCheckResult gradcheck(const std::function<Tensor<double>(Tape<double>&)>& loss,
                          const std::vector<Tensor<double>>& inputs, const GradCheckOptions& options = {});

}  // namespace dmse::ad
