// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace dmse::detail {

// Real-to-complex FFT of length n: writes n/2 + 1 bins, unnormalized.
void rfft(std::span<const double> in, std::span<std::complex<double>> out);

// Inverse of rfft including the 1/n factor.
void irfft(std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace dmse::detail
