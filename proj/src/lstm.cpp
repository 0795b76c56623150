// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <memory>

#include "dmse/error.hpp"
#include "dmse/tensor.hpp"

namespace dmse::ad {
namespace {

template <typename T>
inline T sigm(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

// Saved activations for backpropagation through time.
template <typename T>
struct LstmCache {
  std::vector<T> gates;   // [B, T, 4H] post-activation (i, f, g, o)
  std::vector<T> cells;   // [B, T, H]
  std::vector<T> tanh_c;  // [B, T, H]
};

}  // namespace

template <typename T>
LstmOutput<T> lstm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w_ih, const Tensor<T>& w_hh,
                   const Tensor<T>& bias, const Tensor<T>& h0, const Tensor<T>& c0) {
  DMSE_REQUIRE(x.defined() && (x.rank() == 2 || x.rank() == 3), "lstm: input must be [T,D] or [B,T,D]");
  const bool batched = x.rank() == 3;
  const std::size_t nb = batched ? x.dim(0) : 1;
  const std::size_t steps = x.dim(batched ? 1 : 0);
  const std::size_t d_in = x.dim(batched ? 2 : 1);
  DMSE_REQUIRE(w_hh.defined() && w_hh.rank() == 2 && w_hh.dim(1) == 4 * w_hh.dim(0),
               "lstm: w_hh must be [H, 4H]");
  const std::size_t h = w_hh.dim(0);
  const std::size_t g4 = 4 * h;
  DMSE_REQUIRE(w_ih.defined() && w_ih.rank() == 2 && w_ih.dim(0) == d_in && w_ih.dim(1) == g4,
               "lstm: w_ih must be [D, 4H] with D = " + std::to_string(d_in));
  DMSE_REQUIRE(bias.defined() && bias.rank() == 1 && bias.dim(0) == g4, "lstm: bias must be [4H]");
  DMSE_REQUIRE(!h0.defined() || h0.size() == nb * h, "lstm: h0 must be [B, H]");
  DMSE_REQUIRE(!c0.defined() || c0.size() == nb * h, "lstm: c0 must be [B, H]");

  auto cache = std::make_shared<LstmCache<T>>();
  cache->gates.assign(nb * steps * g4, T(0));
  cache->cells.assign(nb * steps * h, T(0));
  cache->tanh_c.assign(nb * steps * h, T(0));

  Tensor<T> out(batched ? Shape{nb, steps, h} : Shape{steps, h});
  Tensor<T> h_fin(Shape{nb, h}), c_fin(Shape{nb, h});
  const T* xv = x.values().data();
  const T* wi = w_ih.values().data();
  const T* wh = w_hh.values().data();
  const T* bv = bias.values().data();
  T* yv = out.values_mut().data();

  std::vector<T> z(g4), h_prev(h), c_prev(h);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < h; ++k) {
      h_prev[k] = h0.defined() ? h0.values()[b * h + k] : T(0);
      c_prev[k] = c0.defined() ? c0.values()[b * h + k] : T(0);
    }
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy(bv, bv + g4, z.begin());
      const T* xt = xv + (b * steps + t) * d_in;
      for (std::size_t p = 0; p < d_in; ++p) {
        const T a = xt[p];
        if (a == T(0)) continue;
        const T* row = wi + p * g4;
        for (std::size_t j = 0; j < g4; ++j) z[j] += a * row[j];
      }
      for (std::size_t p = 0; p < h; ++p) {
        const T a = h_prev[p];
        if (a == T(0)) continue;
        const T* row = wh + p * g4;
        for (std::size_t j = 0; j < g4; ++j) z[j] += a * row[j];
      }
      T* gt = cache->gates.data() + (b * steps + t) * g4;
      T* ct = cache->cells.data() + (b * steps + t) * h;
      T* tc = cache->tanh_c.data() + (b * steps + t) * h;
      T* yt = yv + (b * steps + t) * h;
      for (std::size_t k = 0; k < h; ++k) {
        const T ig = sigm(z[k]);
        const T fg = sigm(z[h + k]);
        const T cg = std::tanh(z[2 * h + k]);
        const T og = sigm(z[3 * h + k]);
        gt[k] = ig;
        gt[h + k] = fg;
        gt[2 * h + k] = cg;
        gt[3 * h + k] = og;
        const T c = fg * c_prev[k] + ig * cg;
        ct[k] = c;
        tc[k] = std::tanh(c);
        yt[k] = og * tc[k];
      }
      std::copy(yt, yt + h, h_prev.begin());
      std::copy(ct, ct + h, c_prev.begin());
    }
    std::copy(h_prev.begin(), h_prev.end(), h_fin.values_mut().begin() + static_cast<long>(b * h));
    std::copy(c_prev.begin(), c_prev.end(), c_fin.values_mut().begin() + static_cast<long>(b * h));
  }

  if (tape.tracks({&x, &w_ih, &w_hh, &bias, &h0, &c0})) {
    out.set_requires_grad(true);
    tape.push([x, w_ih, w_hh, bias, h0, c0, out, cache, nb, steps, d_in, h, g4]() {
      if (!out.has_grad()) return;
      const T* gy = out.grad().data();
      const T* xv = x.values().data();
      const T* yv = out.values().data();
      const T* wi = w_ih.values().data();
      const T* wh = w_hh.values().data();
      T* gx = x.requires_grad() ? x.grad_buffer().data() : nullptr;
      T* gwi = w_ih.requires_grad() ? w_ih.grad_buffer().data() : nullptr;
      T* gwh = w_hh.requires_grad() ? w_hh.grad_buffer().data() : nullptr;
      T* gb = bias.requires_grad() ? bias.grad_buffer().data() : nullptr;

      std::vector<T> dz(g4), dh_next(h), dc_next(h);
      for (std::size_t b = 0; b < nb; ++b) {
        std::fill(dh_next.begin(), dh_next.end(), T(0));
        std::fill(dc_next.begin(), dc_next.end(), T(0));
        for (std::size_t t = steps; t-- > 0;) {
          const std::size_t bt = b * steps + t;
          const T* gt = cache->gates.data() + bt * g4;
          const T* tc = cache->tanh_c.data() + bt * h;
          const T* c_prev = t > 0 ? cache->cells.data() + (bt - 1) * h : nullptr;
          const T* h_prev = t > 0 ? yv + (bt - 1) * h : nullptr;
          for (std::size_t k = 0; k < h; ++k) {
            const T ig = gt[k], fg = gt[h + k], cg = gt[2 * h + k], og = gt[3 * h + k];
            const T dhk = gy[bt * h + k] + dh_next[k];
            const T dc = dhk * og * (T(1) - tc[k] * tc[k]) + dc_next[k];
            const T cp = c_prev ? c_prev[k] : (c0.defined() ? c0.values()[b * h + k] : T(0));
            dz[k] = dc * cg * ig * (T(1) - ig);
            dz[h + k] = dc * cp * fg * (T(1) - fg);
            dz[2 * h + k] = dc * ig * (T(1) - cg * cg);
            dz[3 * h + k] = dhk * tc[k] * og * (T(1) - og);
            dc_next[k] = dc * fg;
          }
          if (gb)
            for (std::size_t j = 0; j < g4; ++j) gb[j] += dz[j];
          const T* xt = xv + bt * d_in;
          if (gwi)
            for (std::size_t p = 0; p < d_in; ++p) {
              const T a = xt[p];
              if (a == T(0)) continue;
              T* row = gwi + p * g4;
              for (std::size_t j = 0; j < g4; ++j) row[j] += a * dz[j];
            }
          if (gx) {
            T* gxt = gx + bt * d_in;
            for (std::size_t p = 0; p < d_in; ++p) {
              const T* row = wi + p * g4;
              T acc = T(0);
              for (std::size_t j = 0; j < g4; ++j) acc += row[j] * dz[j];
              gxt[p] += acc;
            }
          }
          for (std::size_t p = 0; p < h; ++p) {
            const T a = h_prev ? h_prev[p] : (h0.defined() ? h0.values()[b * h + p] : T(0));
            const T* row = wh + p * g4;
            T acc = T(0);
            for (std::size_t j = 0; j < g4; ++j) acc += row[j] * dz[j];
            dh_next[p] = acc;
            if (gwh && a != T(0)) {
              T* grow = gwh + p * g4;
              for (std::size_t j = 0; j < g4; ++j) grow[j] += a * dz[j];
            }
          }
        }
        if (h0.defined() && h0.requires_grad()) {
          auto& g = h0.grad_buffer();
          for (std::size_t k = 0; k < h; ++k) g[b * h + k] += dh_next[k];
        }
        if (c0.defined() && c0.requires_grad()) {
          auto& g = c0.grad_buffer();
          for (std::size_t k = 0; k < h; ++k) g[b * h + k] += dc_next[k];
        }
      }
    });
  }
  return {out, h_fin, c_fin};
}

template LstmOutput<float> lstm(Tape<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template LstmOutput<double> lstm(Tape<double>&, const Tensor<double>&, const Tensor<double>&,
                                 const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                 const Tensor<double>&);

}  // namespace dmse::ad
