// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "dmse/error.hpp"

namespace dmse::detail {
namespace {

// FFTW planning is not thread-safe; executing a plan on new-array is.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  ~PlanPair() {
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
  }
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

const PlanPair& plans_for(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<PlanPair>> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto& slot = cache[n];
  if (!slot) {
    auto p = std::make_unique<PlanPair>();
    double* r = fftw_alloc_real(n);
    fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    p->forward = fftw_plan_dft_r2c_1d(len, r, c, FFTW_ESTIMATE);
    p->inverse = fftw_plan_dft_c2r_1d(len, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
    if (!p->forward || !p->inverse) throw InvalidArgument("fft: cannot plan size " + std::to_string(n));
    slot = std::move(p);
  }
  return *slot;
}

struct Buffers {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  explicit Buffers(std::size_t n)
      : real(fftw_alloc_real(n)), spec(fftw_alloc_complex(n / 2 + 1)) {}
  ~Buffers() {
    fftw_free(real);
    fftw_free(spec);
  }
  Buffers(const Buffers&) = delete;
  Buffers& operator=(const Buffers&) = delete;
};

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  DMSE_REQUIRE(n >= 2 && out.size() == n / 2 + 1, "rfft: size mismatch");
  const PlanPair& p = plans_for(n);
  Buffers b(n);
  std::copy(in.begin(), in.end(), b.real);
  fftw_execute_dft_r2c(p.forward, b.real, b.spec);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {b.spec[k][0], b.spec[k][1]};
}

void irfft(std::span<const std::complex<double>> in, std::span<double> out) {
  const std::size_t n = out.size();
  DMSE_REQUIRE(n >= 2 && in.size() == n / 2 + 1, "irfft: size mismatch");
  const PlanPair& p = plans_for(n);
  Buffers b(n);
  for (std::size_t k = 0; k < in.size(); ++k) {
    b.spec[k][0] = in[k].real();
    b.spec[k][1] = in[k].imag();
  }
  // c2r ignores the imaginary parts of DC and Nyquist.
  fftw_execute_dft_c2r(p.inverse, b.spec, b.real);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = b.real[i] * scale;
}

}  // namespace dmse::detail
