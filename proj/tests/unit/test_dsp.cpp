// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>

#include "dmse/dsp.hpp"
#include "dmse/error.hpp"
#include "test_util.hpp"

namespace dmse {
namespace {

using testing::random_signal;

TEST(HannWindow, PeriodicDefinition) {
  const auto w = hann_window(512);
  ASSERT_EQ(w.size(), 512u);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[256], 1.0, 1e-15);
  for (std::size_t k = 0; k < w.size(); ++k)
    EXPECT_NEAR(w[k], 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / 512.0)), 1e-15);
}

TEST(HannWindow, OverlapAddsToUnityAtHalfHop) {
  const auto w = hann_window(512);
  for (std::size_t k = 0; k < 256; ++k) EXPECT_NEAR(w[k] + w[k + 256], 1.0, 1e-14);
}

TEST(HannWindow, SquaredOverlapIsNotConstant) {
  // sin^4 + cos^4 ranges over [0.5, 1]; the synthesis normalizer must be
  // the actual squared-window sum.
  const auto w = hann_window(512);
  double lo = 2.0, hi = 0.0;
  for (std::size_t k = 0; k < 256; ++k) {
    const double s = w[k] * w[k] + w[k + 256] * w[k + 256];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  EXPECT_NEAR(lo, 0.5, 1e-12);
  EXPECT_NEAR(hi, 1.0, 1e-12);
}

TEST(Stft, FrameCountDropsPartialTail) {
  StftConfig c;
  EXPECT_EQ(frame_count(511, c), 0u);
  EXPECT_EQ(frame_count(512, c), 1u);
  EXPECT_EQ(frame_count(767, c), 1u);
  EXPECT_EQ(frame_count(768, c), 2u);
  EXPECT_EQ(frame_count(32000, c), 124u);
}

TEST(Stft, ShapeIsFramesByBins) {
  const auto x = random_signal(16000, 1);
  const auto s = stft(x);
  EXPECT_EQ(s.frames(), frame_count(16000, StftConfig{}));
  EXPECT_EQ(s.bins(), 257u);
}

TEST(Stft, BinCenteredSinusoidHasHannMainLobeOnly) {
  // 1 kHz at 16 kHz with nfft 512 is exactly bin 32.
  std::vector<double> x(4096);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::sin(2.0 * std::numbers::pi * 1000.0 * n / 16000.0);
  const auto s = stft(x);
  for (std::size_t t = 0; t < s.frames(); ++t) {
    const double peak = std::abs(s.data(t, 32));
    EXPECT_NEAR(peak, 128.0, 1e-9);  // N/4 for a unit sinusoid under Hann
    EXPECT_NEAR(std::abs(s.data(t, 31)), 0.5 * peak, 1e-9);
    EXPECT_NEAR(std::abs(s.data(t, 33)), 0.5 * peak, 1e-9);
    for (std::size_t f = 0; f < s.bins(); ++f)
      if (f < 31 || f > 33) EXPECT_LE(std::abs(s.data(t, f)), 1e-10 * peak) << "bin " << f;
  }
}

TEST(Stft, RoundTripInteriorIsExact) {
  const auto x = random_signal(32000, 7);
  const auto start = std::chrono::steady_clock::now();
  const auto y = istft(stft(x));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(y.size(), (frame_count(x.size(), StftConfig{}) - 1) * 256 + 512);
  double err = 0.0;
  for (std::size_t n = 512; n + 512 < y.size(); ++n) err = std::max(err, std::abs(y[n] - x[n]));
  EXPECT_LT(err, 1e-10);
  EXPECT_LT(secs, 1.0);
}

TEST(Stft, RoundTripEdgesStayFinite) {
  const auto x = random_signal(4096, 3);
  const auto y = istft(stft(x));
  for (double v : y) ASSERT_TRUE(std::isfinite(v));
  // The first hop is covered by one window only: floored normalizer, no blow-up.
  for (std::size_t n = 0; n < 256; ++n) EXPECT_LE(std::abs(y[n]), 100.0 * std::abs(x[n]) + 1e-9);
}

TEST(Stft, RejectsShortSignalAndBadConfig) {
  std::vector<double> x(100, 0.0);
  EXPECT_THROW(stft(x), InvalidArgument);
  StftConfig bad;
  bad.hop = 0;
  EXPECT_THROW(stft(random_signal(2048, 1), bad), InvalidArgument);
  bad = StftConfig{};
  bad.fft_size = 256;  // shorter than the frame
  EXPECT_THROW(stft(random_signal(2048, 1), bad), InvalidArgument);
}

TEST(Stft, IstftRejectsMalformedGrid) {
  Spectrogram s{ComplexGrid(3, 100), StftConfig{}};
  EXPECT_THROW(istft(s), InvalidArgument);
  Spectrogram empty{ComplexGrid(0, 257), StftConfig{}};
  EXPECT_THROW(istft(empty), InvalidArgument);
}

TEST(MagPhase, PolarInvertsMagPhase) {
  const auto s = stft(random_signal(4096, 11));
  const auto mp = mag_phase(s);
  for (double p : mp.phase.data()) {
    EXPECT_GT(p, -std::numbers::pi);
    EXPECT_LE(p, std::numbers::pi);
  }
  const auto back = polar(mp.magnitude, mp.phase, s.config);
  for (std::size_t i = 0; i < s.data.size(); ++i) EXPECT_LT(std::abs(back.data.data()[i] - s.data.data()[i]), 1e-9);
}

TEST(MagPhase, ZeroMagnitudeHasZeroPhase) {
  Spectrogram s{ComplexGrid(1, 257), StftConfig{}};
  s.data(0, 3) = cplx(-1.0, 0.0);
  const auto mp = mag_phase(s);
  EXPECT_EQ(mp.phase(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(mp.phase(0, 3), std::numbers::pi);
}

}  // namespace
}  // namespace dmse
