// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <vector>

#include "dmse/error.hpp"
#include "dmse/tensor.hpp"

namespace dmse::ad {

namespace {

struct AttnDims {
  std::size_t b, c, t, f, heads, d;
};

AttnDims attn_dims(const Shape& s, std::size_t heads, const char* op) {
  DMSE_REQUIRE(s.size() == 4, std::string(op) + ": inputs must be [B,C,T,F]");
  DMSE_REQUIRE(heads >= 1 && s[1] % heads == 0, std::string(op) + ": heads must divide channels");
  return {s[0], s[1], s[2], s[3], heads, s[1] / heads};
}

// Copies the d x T slab of (batch, head, bin) into a contiguous buffer.
template <typename T>
void gather(const T* src, const AttnDims& a, std::size_t b, std::size_t h, std::size_t f, T* dst) {
  for (std::size_t e = 0; e < a.d; ++e) {
    const T* p = src + ((b * a.c + h * a.d + e) * a.t) * a.f + f;
    for (std::size_t t = 0; t < a.t; ++t) dst[e * a.t + t] = p[t * a.f];
  }
}

template <typename T>
void scatter_add(T* dst, const AttnDims& a, std::size_t b, std::size_t h, std::size_t f, const T* src) {
  for (std::size_t e = 0; e < a.d; ++e) {
    T* p = dst + ((b * a.c + h * a.d + e) * a.t) * a.f + f;
    for (std::size_t t = 0; t < a.t; ++t) p[t * a.f] += src[e * a.t + t];
  }
}

// P[t][s] = softmax_s(scale * sum_e q[e][t] k[e][s]).
template <typename T>
void weights(const T* q, const T* k, const AttnDims& a, T scale, T* p) {
  const std::size_t n = a.t;
  for (std::size_t t = 0; t < n; ++t) {
    T* row = p + t * n;
    std::fill(row, row + n, T(0));
    for (std::size_t e = 0; e < a.d; ++e) {
      const T qv = scale * q[e * n + t];
      const T* kr = k + e * n;
      for (std::size_t s = 0; s < n; ++s) row[s] += qv * kr[s];
    }
    const T mx = *std::max_element(row, row + n);
    T z = T(0);
    for (std::size_t s = 0; s < n; ++s) {
      row[s] = std::exp(row[s] - mx);
      z += row[s];
    }
    const T inv = T(1) / z;
    for (std::size_t s = 0; s < n; ++s) row[s] *= inv;
  }
}

}  // namespace

template <typename T>
Tensor<T> time_attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t heads, T scale) {
  DMSE_REQUIRE(q.defined() && k.defined() && q.shape() == k.shape(), "time_attention: q and k shapes differ");
  const AttnDims a = attn_dims(q.shape(), heads, "time_attention");
  Tensor<T> out(Shape{a.b, a.heads, a.f, a.t, a.t});
  std::vector<T> qb(a.d * a.t), kb(a.d * a.t);
  T* p = out.values_mut().data();
  for (std::size_t b = 0; b < a.b; ++b)
    for (std::size_t h = 0; h < a.heads; ++h)
      for (std::size_t f = 0; f < a.f; ++f) {
        gather(q.values().data(), a, b, h, f, qb.data());
        gather(k.values().data(), a, b, h, f, kb.data());
        weights(qb.data(), kb.data(), a, scale, p + ((b * a.heads + h) * a.f + f) * a.t * a.t);
      }
  return out;
}

template <typename T>
Tensor<T> time_attention(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                         std::size_t heads, T scale) {
  DMSE_REQUIRE(q.defined() && k.defined() && v.defined() && q.shape() == k.shape() && q.shape() == v.shape(),
               "time_attention: q, k and v must share a shape");
  const AttnDims a = attn_dims(q.shape(), heads, "time_attention");
  const std::size_t n = a.t;
  Tensor<T> out(q.shape());
  {
    std::vector<T> qb(a.d * n), kb(a.d * n), vb(a.d * n), ab(a.d * n), p(n * n);
    for (std::size_t b = 0; b < a.b; ++b)
      for (std::size_t h = 0; h < a.heads; ++h)
        for (std::size_t f = 0; f < a.f; ++f) {
          gather(q.values().data(), a, b, h, f, qb.data());
          gather(k.values().data(), a, b, h, f, kb.data());
          gather(v.values().data(), a, b, h, f, vb.data());
          weights(qb.data(), kb.data(), a, scale, p.data());
          for (std::size_t e = 0; e < a.d; ++e)
            for (std::size_t t = 0; t < n; ++t) {
              const T* pr = p.data() + t * n;
              const T* vr = vb.data() + e * n;
              T acc = T(0);
              for (std::size_t s = 0; s < n; ++s) acc += pr[s] * vr[s];
              ab[e * n + t] = acc;
            }
          scatter_add(out.values_mut().data(), a, b, h, f, ab.data());
        }
  }
  if (tape.tracks({&q, &k, &v})) {
    out.set_requires_grad(true);
    tape.push([q, k, v, out, a, scale]() {
      if (!out.has_grad()) return;
      const std::size_t n = a.t;
      std::vector<T> qb(a.d * n), kb(a.d * n), vb(a.d * n), gb(a.d * n), p(n * n), ds(n * n);
      std::vector<T> dq(a.d * n), dk(a.d * n), dv(a.d * n);
      T* gq = q.requires_grad() ? q.grad_buffer().data() : nullptr;
      T* gk = k.requires_grad() ? k.grad_buffer().data() : nullptr;
      T* gv = v.requires_grad() ? v.grad_buffer().data() : nullptr;
      for (std::size_t b = 0; b < a.b; ++b)
        for (std::size_t h = 0; h < a.heads; ++h)
          for (std::size_t f = 0; f < a.f; ++f) {
            gather(q.values().data(), a, b, h, f, qb.data());
            gather(k.values().data(), a, b, h, f, kb.data());
            gather(v.values().data(), a, b, h, f, vb.data());
            gather(out.grad().data(), a, b, h, f, gb.data());
            weights(qb.data(), kb.data(), a, scale, p.data());
            std::fill(dk.begin(), dk.end(), T(0));
            std::fill(dv.begin(), dv.end(), T(0));
            for (std::size_t t = 0; t < n; ++t) {
              const T* pr = p.data() + t * n;
              T* dr = ds.data() + t * n;
              // dP row, then the softmax Jacobian.
              std::fill(dr, dr + n, T(0));
              for (std::size_t e = 0; e < a.d; ++e) {
                const T g = gb[e * n + t];
                const T* vr = vb.data() + e * n;
                T* dvr = dv.data() + e * n;
                for (std::size_t s = 0; s < n; ++s) {
                  dr[s] += g * vr[s];
                  dvr[s] += g * pr[s];
                }
              }
              T dot = T(0);
              for (std::size_t s = 0; s < n; ++s) dot += pr[s] * dr[s];
              for (std::size_t s = 0; s < n; ++s) dr[s] = scale * pr[s] * (dr[s] - dot);
              for (std::size_t e = 0; e < a.d; ++e) {
                const T* kr = kb.data() + e * n;
                T acc = T(0);
                for (std::size_t s = 0; s < n; ++s) acc += dr[s] * kr[s];
                dq[e * n + t] = acc;
                const T qv = qb[e * n + t];
                T* dkr = dk.data() + e * n;
                for (std::size_t s = 0; s < n; ++s) dkr[s] += qv * dr[s];
              }
            }
            if (gq) scatter_add(gq, a, b, h, f, dq.data());
            if (gk) scatter_add(gk, a, b, h, f, dk.data());
            if (gv) scatter_add(gv, a, b, h, f, dv.data());
          }
    });
  }
  return out;
}

template Tensor<float> time_attention(Tape<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                      std::size_t, float);
template Tensor<double> time_attention(Tape<double>&, const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&, std::size_t, double);
template Tensor<float> time_attention_weights(const Tensor<float>&, const Tensor<float>&, std::size_t, float);
template Tensor<double> time_attention_weights(const Tensor<double>&, const Tensor<double>&, std::size_t, double);

}  // namespace dmse::ad
