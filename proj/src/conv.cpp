// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <memory>

#include "dmse/error.hpp"
#include "dmse/tensor.hpp"

namespace dmse::ad {

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t dilation,
                             AxisPadding pad) {
  DMSE_REQUIRE(kernel >= 1 && stride >= 1 && dilation >= 1, "conv: kernel, stride and dilation must be >= 1");
  const std::size_t padded = in + pad.lo + pad.hi;
  const std::size_t span = dilation * (kernel - 1) + 1;
  DMSE_REQUIRE(padded >= span, "conv: kernel does not fit the padded input");
  return (padded - span) / stride + 1;
}

namespace {

// Correlation geometry: conv-input index = out * stride + tap * dilation - pad.lo.
struct CorrDims {
  std::size_t batch, c_in, c_out, t_in, f_in, t_out, f_out, kt, kf;
  Conv2dGeometry g;
};

// Output indices o in [lo, hi) whose input index o*stride + offset lies in [0, in).
inline void valid_range(long offset, std::size_t stride, std::size_t in, std::size_t out, std::size_t& lo,
                        std::size_t& hi) {
  const long s = static_cast<long>(stride);
  long l = 0;
  if (offset < 0) l = (-offset + s - 1) / s;
  long h = (static_cast<long>(in) - offset + s - 1) / s;  // first o with o*s + offset >= in
  if (h < 0) h = 0;
  h = std::min<long>(h, static_cast<long>(out));
  lo = static_cast<std::size_t>(std::min(l, h));
  hi = static_cast<std::size_t>(h);
}

enum class Pass { forward, input_grad, weight_grad };

// One loop nest for all three passes. forward: y += w * x. input_grad:
// x += w * y. weight_grad: w += x * y.
template <typename T, Pass P>
void correlate(const CorrDims& d, T* x, T* w, T* y) {
  const auto& g = d.g;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t co = 0; co < d.c_out; ++co)
      for (std::size_t ci = 0; ci < d.c_in; ++ci) {
        T* xc = x + (b * d.c_in + ci) * d.t_in * d.f_in;
        T* yc = y + (b * d.c_out + co) * d.t_out * d.f_out;
        for (std::size_t i = 0; i < d.kt; ++i) {
          const long off_t = static_cast<long>(i * g.dilation_t) - static_cast<long>(g.pad_t.lo);
          std::size_t t_lo, t_hi;
          valid_range(off_t, g.stride_t, d.t_in, d.t_out, t_lo, t_hi);
          for (std::size_t j = 0; j < d.kf; ++j) {
            const long off_f = static_cast<long>(j * g.dilation_f) - static_cast<long>(g.pad_f.lo);
            std::size_t f_lo, f_hi;
            valid_range(off_f, g.stride_f, d.f_in, d.f_out, f_lo, f_hi);
            if (f_lo >= f_hi) continue;
            T& wv = w[((co * d.c_in + ci) * d.kt + i) * d.kf + j];
            T wacc = T(0);
            for (std::size_t to = t_lo; to < t_hi; ++to) {
              const std::size_t ti = static_cast<std::size_t>(static_cast<long>(to * g.stride_t) + off_t);
              T* xr = xc + ti * d.f_in;
              T* yr = yc + to * d.f_out;
              const long fbase = off_f;
              if (g.stride_f == 1) {
                T* xs = xr + (static_cast<long>(f_lo) + fbase);
                T* ys = yr + f_lo;
                const std::size_t n = f_hi - f_lo;
                if constexpr (P == Pass::forward) {
                  for (std::size_t k = 0; k < n; ++k) ys[k] += wv * xs[k];
                } else if constexpr (P == Pass::input_grad) {
                  for (std::size_t k = 0; k < n; ++k) xs[k] += wv * ys[k];
                } else {
                  for (std::size_t k = 0; k < n; ++k) wacc += xs[k] * ys[k];
                }
              } else {
                const std::size_t sf = g.stride_f;
                for (std::size_t fo = f_lo; fo < f_hi; ++fo) {
                  const std::size_t fi = static_cast<std::size_t>(static_cast<long>(fo * sf) + fbase);
                  if constexpr (P == Pass::forward) {
                    yr[fo] += wv * xr[fi];
                  } else if constexpr (P == Pass::input_grad) {
                    xr[fi] += wv * yr[fo];
                  } else {
                    wacc += xr[fi] * yr[fo];
                  }
                }
              }
            }
            if constexpr (P == Pass::weight_grad) wv += wacc;
          }
        }
      }
}

template <typename T>
void add_channel_bias(T* y, const T* bias, std::size_t batch, std::size_t channels, std::size_t plane) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      T* p = y + (b * channels + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) p[k] += bias[c];
    }
}

template <typename T>
void bias_grad(const T* g, T* gb, std::size_t batch, std::size_t channels, std::size_t plane) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const T* p = g + (b * channels + c) * plane;
      T acc = T(0);
      for (std::size_t k = 0; k < plane; ++k) acc += p[k];
      gb[c] += acc;
    }
}

struct Layout4 {
  std::size_t batch, channels, t, f;
  bool batched;
};

template <typename T>
Layout4 layout_of(const Tensor<T>& x, const char* op) {
  DMSE_REQUIRE(x.defined() && (x.rank() == 3 || x.rank() == 4),
               std::string(op) + ": input must be [C,T,F] or [B,C,T,F]");
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2), false};
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), true};
}

Shape make_shape(const Layout4& l, std::size_t c, std::size_t t, std::size_t f) {
  return l.batched ? Shape{l.batch, c, t, f} : Shape{c, t, f};
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 const Conv2dGeometry& geom) {
  const Layout4 l = layout_of(x, "conv2d");
  DMSE_REQUIRE(kernel.defined() && kernel.rank() == 4, "conv2d: kernel must be [Cout,Cin,kt,kf]");
  DMSE_REQUIRE(kernel.dim(1) == l.channels, "conv2d: kernel Cin " + std::to_string(kernel.dim(1)) +
                                                " does not match input channels " + std::to_string(l.channels));
  const std::size_t c_out = kernel.dim(0);
  DMSE_REQUIRE(!bias.defined() || (bias.rank() == 1 && bias.dim(0) == c_out), "conv2d: bias must be [Cout]");
  CorrDims d{l.batch, l.channels, c_out, l.t, l.f, 0, 0, kernel.dim(2), kernel.dim(3), geom};
  d.t_out = conv_output_size(l.t, d.kt, geom.stride_t, geom.dilation_t, geom.pad_t);
  d.f_out = conv_output_size(l.f, d.kf, geom.stride_f, geom.dilation_f, geom.pad_f);

  Tensor<T> out(make_shape(l, c_out, d.t_out, d.f_out));
  correlate<T, Pass::forward>(d, const_cast<T*>(x.values().data()), const_cast<T*>(kernel.values().data()),
                              out.values_mut().data());
  if (bias.defined()) add_channel_bias(out.values_mut().data(), bias.values().data(), l.batch, c_out, d.t_out * d.f_out);

  if (tape.tracks({&x, &kernel, &bias})) {
    out.set_requires_grad(true);
    tape.push([x, kernel, bias, out, d]() {
      if (!out.has_grad()) return;
      T* g = const_cast<T*>(out.grad().data());
      if (x.requires_grad())
        correlate<T, Pass::input_grad>(d, x.grad_buffer().data(), const_cast<T*>(kernel.values().data()), g);
      if (kernel.requires_grad())
        correlate<T, Pass::weight_grad>(d, const_cast<T*>(x.values().data()), kernel.grad_buffer().data(), g);
      if (bias.defined() && bias.requires_grad())
        bias_grad(g, bias.grad_buffer().data(), d.batch, d.c_out, d.t_out * d.f_out);
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_transpose(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           const Conv2dGeometry& geom, std::size_t out_t, std::size_t out_f) {
  const Layout4 l = layout_of(x, "conv2d_transpose");
  DMSE_REQUIRE(kernel.defined() && kernel.rank() == 4, "conv2d_transpose: kernel must be [Cin,Cout,kt,kf]");
  DMSE_REQUIRE(kernel.dim(0) == l.channels, "conv2d_transpose: kernel Cin does not match input channels");
  const std::size_t c_out = kernel.dim(1);
  DMSE_REQUIRE(!bias.defined() || (bias.rank() == 1 && bias.dim(0) == c_out), "conv2d_transpose: bias must be [Cout]");
  // Conv roles: the transpose input lives in conv-output space.
  CorrDims d{l.batch, c_out, l.channels, out_t, out_f, l.t, l.f, kernel.dim(2), kernel.dim(3), geom};
  DMSE_REQUIRE(conv_output_size(out_t, d.kt, geom.stride_t, geom.dilation_t, geom.pad_t) == l.t &&
                   conv_output_size(out_f, d.kf, geom.stride_f, geom.dilation_f, geom.pad_f) == l.f,
               "conv2d_transpose: requested output size is not the adjoint of the input size");

  Tensor<T> out(make_shape(l, c_out, out_t, out_f));
  correlate<T, Pass::input_grad>(d, out.values_mut().data(), const_cast<T*>(kernel.values().data()),
                                 const_cast<T*>(x.values().data()));
  if (bias.defined()) add_channel_bias(out.values_mut().data(), bias.values().data(), l.batch, c_out, out_t * out_f);

  if (tape.tracks({&x, &kernel, &bias})) {
    out.set_requires_grad(true);
    tape.push([x, kernel, bias, out, d]() {
      if (!out.has_grad()) return;
      T* g = const_cast<T*>(out.grad().data());
      if (x.requires_grad())
        correlate<T, Pass::forward>(d, g, const_cast<T*>(kernel.values().data()), x.grad_buffer().data());
      if (kernel.requires_grad())
        correlate<T, Pass::weight_grad>(d, g, kernel.grad_buffer().data(), const_cast<T*>(x.values().data()));
      if (bias.defined() && bias.requires_grad())
        bias_grad(g, bias.grad_buffer().data(), d.batch, d.c_in, d.t_in * d.f_in);
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormState<T>& state, Mode mode, T momentum, T eps) {
  const Layout4 l = layout_of(x, "batch_norm");
  const std::size_t c = l.channels;
  DMSE_REQUIRE(gamma.defined() && beta.defined() && gamma.size() == c && beta.size() == c,
               "batch_norm: scale/shift length must equal channel count");
  DMSE_REQUIRE(state.running_mean.size() == c && state.running_var.size() == c,
               "batch_norm: running statistics length must equal channel count");
  const std::size_t plane = l.t * l.f;
  const std::size_t count = l.batch * plane;
  auto xv = x.values();

  auto mean = std::make_shared<std::vector<T>>(c);
  auto inv_std = std::make_shared<std::vector<T>>(c);
  if (mode == Mode::train) {
    DMSE_REQUIRE(count >= 2, "batch_norm: train mode needs at least two values per channel");
    auto rm = state.running_mean.values_mut();
    auto rv = state.running_var.values_mut();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < l.batch; ++b) {
        const T* p = xv.data() + (b * c + ch) * plane;
        for (std::size_t k = 0; k < plane; ++k) s += p[k];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < l.batch; ++b) {
        const T* p = xv.data() + (b * c + ch) * plane;
        for (std::size_t k = 0; k < plane; ++k) ss += (p[k] - mu) * (p[k] - mu);
      }
      const double var = ss / static_cast<double>(count);
      (*mean)[ch] = static_cast<T>(mu);
      (*inv_std)[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      const double unbiased = ss / static_cast<double>(count - 1);
      rm[ch] = static_cast<T>((1.0 - momentum) * rm[ch] + momentum * mu);
      rv[ch] = static_cast<T>((1.0 - momentum) * rv[ch] + momentum * unbiased);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      (*mean)[ch] = state.running_mean.values()[ch];
      (*inv_std)[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var.values()[ch]) + eps));
    }
  }

  Tensor<T> out(x.shape());
  auto yv = out.values_mut();
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  for (std::size_t b = 0; b < l.batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * plane;
      const T mu = (*mean)[ch], is = (*inv_std)[ch], ga = gamma.values()[ch], be = beta.values()[ch];
      for (std::size_t k = 0; k < plane; ++k) {
        const T h = (xv[base + k] - mu) * is;
        (*xhat)[base + k] = h;
        yv[base + k] = ga * h + be;
      }
    }

  if (tape.tracks({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape.push([x, gamma, beta, out, xhat, inv_std, mode, l, c, plane, count]() {
      if (!out.has_grad()) return;
      auto g = out.grad();
      const auto& xh = *xhat;
      std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
      for (std::size_t b = 0; b < l.batch; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t base = (b * c + ch) * plane;
          for (std::size_t k = 0; k < plane; ++k) {
            sum_g[ch] += g[base + k];
            sum_gx[ch] += g[base + k] * xh[base + k];
          }
        }
      if (gamma.requires_grad()) {
        auto& gg = gamma.grad_buffer();
        for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += static_cast<T>(sum_gx[ch]);
      }
      if (beta.requires_grad()) {
        auto& gb = beta.grad_buffer();
        for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += static_cast<T>(sum_g[ch]);
      }
      if (x.requires_grad()) {
        auto& gx = x.grad_buffer();
        const double n = static_cast<double>(count);
        for (std::size_t b = 0; b < l.batch; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (b * c + ch) * plane;
            const double k1 = static_cast<double>(gamma.values()[ch]) * (*inv_std)[ch];
            if (mode == Mode::train) {
              const double mg = sum_g[ch] / n, mgx = sum_gx[ch] / n;
              for (std::size_t k = 0; k < plane; ++k)
                gx[base + k] += static_cast<T>(k1 * (g[base + k] - mg - xh[base + k] * mgx));
            } else {
              for (std::size_t k = 0; k < plane; ++k) gx[base + k] += static_cast<T>(k1 * g[base + k]);
            }
          }
      }
    });
  }
  return out;
}

#define DMSE_INSTANTIATE_CONV(T)                                                                          \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                            const Conv2dGeometry&);                                                       \
  template Tensor<T> conv2d_transpose(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                      const Conv2dGeometry&, std::size_t, std::size_t);                   \
  template Tensor<T> batch_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                BatchNormState<T>&, Mode, T, T);

DMSE_INSTANTIATE_CONV(float)
DMSE_INSTANTIATE_CONV(double)

}  // namespace dmse::ad
