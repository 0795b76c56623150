// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmse/dsp.hpp"
#include "dmse/error.hpp"
#include "dmse/eval.hpp"
#include "fft.hpp"

namespace dmse {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Drops frames whose clean energy is more than `range_db` below the loudest
// and overlap-adds the survivors of both signals.
void remove_silent_frames(std::span<const double> x, std::span<const double> y, const StoiConfig& cfg,
                          std::vector<double>& x_out, std::vector<double>& y_out) {
  const std::size_t n = cfg.frame_len, hop = cfg.hop;
  const auto w = hann_window(n);
  const std::size_t frames = x.size() < n ? 0 : 1 + (x.size() - n) / hop;
  std::vector<double> energy_db(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < n; ++k) e += (w[k] * x[m * hop + k]) * (w[k] * x[m * hop + k]);
    energy_db[m] = 20.0 * std::log10(std::sqrt(e) + kEps);
  }
  const double peak = frames ? *std::max_element(energy_db.begin(), energy_db.end()) : 0.0;
  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < frames; ++m)
    if (energy_db[m] > peak - cfg.dynamic_range_db) keep.push_back(m);
  const std::size_t len = keep.empty() ? 0 : (keep.size() - 1) * hop + n;
  x_out.assign(len, 0.0);
  y_out.assign(len, 0.0);
  for (std::size_t j = 0; j < keep.size(); ++j)
    for (std::size_t k = 0; k < n; ++k) {
      x_out[j * hop + k] += w[k] * x[keep[j] * hop + k];
      y_out[j * hop + k] += w[k] * y[keep[j] * hop + k];
    }
}

struct Band {
  std::size_t lo, hi;  // bin range [lo, hi)
};

std::vector<Band> third_octave_bands(const StoiConfig& cfg, int rate) {
  const std::size_t bins = cfg.fft_size / 2 + 1;
  auto nearest = [&](double hz) {
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bins; ++k) {
      const double d = std::abs(static_cast<double>(k) * rate / static_cast<double>(cfg.fft_size) - hz);
      if (d < dist) {
        dist = d;
        best = k;
      }
    }
    return best;
  };
  std::vector<Band> bands;
  for (std::size_t b = 0; b < cfg.num_bands; ++b) {
    const double k = static_cast<double>(b);
    const double lo = cfg.min_center_hz * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi = cfg.min_center_hz * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    bands.push_back({nearest(lo), nearest(hi)});
  }
  return bands;
}

// Band envelopes, [band][frame].
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x, const StoiConfig& cfg,
                                                const std::vector<Band>& bands) {
  const std::size_t n = cfg.frame_len, hop = cfg.hop;
  const auto w = hann_window(n);
  const std::size_t frames = x.size() < n ? 0 : 1 + (x.size() - n) / hop;
  std::vector<std::vector<double>> env(bands.size(), std::vector<double>(frames));
  std::vector<double> buf(cfg.fft_size);
  std::vector<cplx> spec(cfg.fft_size / 2 + 1);
  for (std::size_t m = 0; m < frames; ++m) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) buf[k] = w[k] * x[m * hop + k];
    detail::rfft(buf, spec);
    for (std::size_t b = 0; b < bands.size(); ++b) {
      double e = 0.0;
      for (std::size_t k = bands[b].lo; k < bands[b].hi; ++k) e += std::norm(spec[k]);
      env[b][m] = std::sqrt(e);
    }
  }
  return env;
}

}  // namespace

double stoi(std::span<const double> clean, std::span<const double> processed, int sample_rate,
            const StoiConfig& config) {
  DMSE_REQUIRE(clean.size() == processed.size(), "stoi: length mismatch");
  DMSE_REQUIRE(!clean.empty(), "stoi: empty input");
  DMSE_REQUIRE(sample_rate == config.sample_rate, "stoi: sample rate " + std::to_string(sample_rate) +
                                                      " unsupported (expected " +
                                                      std::to_string(config.sample_rate) + ")");
  std::vector<double> x, y;
  remove_silent_frames(clean, processed, config, x, y);
  const auto bands = third_octave_bands(config, sample_rate);
  const auto ex = band_envelopes(x, config, bands);
  const auto ey = band_envelopes(y, config, bands);
  const std::size_t frames = ex.empty() ? 0 : ex[0].size();
  const std::size_t seg = config.segment_frames;
  if (frames < seg)
    throw InvalidArgument("stoi: need at least " + std::to_string(seg) + " non-silent frames, got " +
                          std::to_string(frames));

  const double clip = 1.0 + std::pow(10.0, -config.clip_db / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(seg), ys(seg);
  for (std::size_t end = seg; end <= frames; ++end) {
    for (std::size_t b = 0; b < bands.size(); ++b) {
      double nx = 0.0, ny = 0.0;
      for (std::size_t j = 0; j < seg; ++j) {
        xs[j] = ex[b][end - seg + j];
        ys[j] = ey[b][end - seg + j];
        nx += xs[j] * xs[j];
        ny += ys[j] * ys[j];
      }
      const double alpha = std::sqrt(nx) / (std::sqrt(ny) + kEps);
      double mx = 0.0, my = 0.0;
      for (std::size_t j = 0; j < seg; ++j) {
        ys[j] = std::min(alpha * ys[j], clip * xs[j]);
        mx += xs[j];
        my += ys[j];
      }
      mx /= static_cast<double>(seg);
      my /= static_cast<double>(seg);
      double sxy = 0.0, sxx = 0.0, syy = 0.0;
      for (std::size_t j = 0; j < seg; ++j) {
        const double a = xs[j] - mx, c = ys[j] - my;
        sxy += a * c;
        sxx += a * a;
        syy += c * c;
      }
      total += sxy / ((std::sqrt(sxx) + kEps) * (std::sqrt(syy) + kEps));
      ++count;
    }
  }
  return std::clamp(total / static_cast<double>(count), 0.0, 1.0);
}

}  // namespace dmse
