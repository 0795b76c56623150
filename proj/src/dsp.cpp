// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dmse/error.hpp"
#include "fft.hpp"

namespace dmse {

void StftConfig::validate() const {
  DMSE_REQUIRE(sample_rate > 0 && frame_len > 0 && hop > 0 && fft_size > 0,
               "stft config: all sizes must be positive");
  DMSE_REQUIRE(frame_len >= 2, "stft config: frame_len must be >= 2");
  DMSE_REQUIRE(hop <= frame_len, "stft config: hop must not exceed frame_len");
  DMSE_REQUIRE(fft_size >= frame_len, "stft config: fft_size must be >= frame_len");
}

std::vector<double> hann_window(std::size_t n) {
  DMSE_REQUIRE(n >= 2, "hann_window: n must be >= 2");
  std::vector<double> w(n);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = 0.5 * (1.0 - std::cos(step * static_cast<double>(k)));
  return w;
}

std::size_t frame_count(std::size_t num_samples, const StftConfig& config) {
  if (num_samples < config.frame_len) return 0;
  return 1 + (num_samples - config.frame_len) / config.hop;
}

Spectrogram stft(std::span<const double> signal, const StftConfig& config) {
  config.validate();
  if (signal.size() < config.frame_len)
    throw InvalidArgument("stft: signal shorter than one frame (" + std::to_string(signal.size()) +
                          " < " + std::to_string(config.frame_len) + ")");
  const std::size_t frames = frame_count(signal.size(), config);
  const auto window = hann_window(config.frame_len);

  Spectrogram spec{ComplexGrid(frames, config.bins()), config};
  std::vector<double> buf(config.fft_size, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t offset = t * config.hop;
    for (std::size_t n = 0; n < config.frame_len; ++n) buf[n] = signal[offset + n] * window[n];
    detail::rfft(buf, spec.data.row(t));
  }
  return spec;
}

std::vector<double> istft(const Spectrogram& spec) {
  const StftConfig& config = spec.config;
  config.validate();
  DMSE_REQUIRE(spec.data.frames() >= 1, "istft: spectrogram has no frames");
  DMSE_REQUIRE(spec.data.bins() == config.bins(), "istft: bin count does not match fft_size");
  DMSE_REQUIRE(spec.data.size() == spec.data.frames() * spec.data.bins(), "istft: malformed grid");

  const std::size_t frames = spec.data.frames();
  const std::size_t length = (frames - 1) * config.hop + config.frame_len;
  const auto window = hann_window(config.frame_len);

  std::vector<double> out(length, 0.0);
  std::vector<double> norm(length, 0.0);
  std::vector<double> buf(config.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    detail::irfft(spec.data.row(t), buf);
    const std::size_t offset = t * config.hop;
    for (std::size_t n = 0; n < config.frame_len; ++n) {
      out[offset + n] += buf[n] * window[n];
      norm[offset + n] += window[n] * window[n];
    }
  }
  // Edge samples covered only by a window tail are floored instead of
  // divided by a vanishing weight.
  const double peak = *std::max_element(norm.begin(), norm.end());
  const double floor = 1e-2 * peak;
  for (std::size_t i = 0; i < length; ++i) out[i] /= std::max(norm[i], floor);
  return out;
}

MagPhase mag_phase(const Spectrogram& spec) {
  const auto& g = spec.data;
  MagPhase mp{RealGrid(g.frames(), g.bins()), RealGrid(g.frames(), g.bins())};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cplx c = g.data()[i];
    const double m = std::abs(c);
    mp.magnitude.data()[i] = m;
    double ph = (m == 0.0) ? 0.0 : std::arg(c);
    if (ph == -std::numbers::pi) ph = std::numbers::pi;
    mp.phase.data()[i] = ph;
  }
  return mp;
}

Spectrogram polar(const RealGrid& magnitude, const RealGrid& phase, const StftConfig& config) {
  DMSE_REQUIRE(magnitude.same_shape(phase), "polar: magnitude/phase shape mismatch");
  DMSE_REQUIRE(magnitude.bins() == config.bins(), "polar: bin count does not match config");
  Spectrogram spec{ComplexGrid(magnitude.frames(), magnitude.bins()), config};
  for (std::size_t i = 0; i < magnitude.size(); ++i)
    spec.data.data()[i] = std::polar(magnitude.data()[i], phase.data()[i]);
  return spec;
}

}  // namespace dmse
