// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/snr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dmse/error.hpp"
#include "dmse/wav.hpp"

namespace dmse {

void SnrStats::validate() const {
  DMSE_REQUIRE(!mu.empty() && mu.size() == sigma.size(), "snr stats: mu/sigma lengths differ or are empty");
  for (double s : sigma) DMSE_REQUIRE(s >= kSigmaMinDb && std::isfinite(s), "snr stats: sigma below floor");
  for (double m : mu) DMSE_REQUIRE(std::isfinite(m), "snr stats: non-finite mean");
}

double erf_inv(double y) {
  DMSE_REQUIRE(y > -1.0 && y < 1.0, "erf_inv: argument must lie in (-1, 1)");
  if (y == 0.0) return 0.0;
  // Giles' single-precision approximation as a starting point.
  const double w0 = -std::log((1.0 - y) * (1.0 + y));
  double x;
  if (w0 < 5.0) {
    const double w = w0 - 2.5;
    double p = 2.81022636e-08;
    p = 3.43273939e-07 + p * w;
    p = -3.5233877e-06 + p * w;
    p = -4.39150654e-06 + p * w;
    p = 0.00021858087 + p * w;
    p = -0.00125372503 + p * w;
    p = -0.00417768164 + p * w;
    p = 0.246640727 + p * w;
    p = 1.50140941 + p * w;
    x = p * y;
  } else {
    const double w = std::sqrt(w0) - 3.0;
    double p = -0.000200214257;
    p = 0.000100950558 + p * w;
    p = 0.00134934322 + p * w;
    p = -0.00367342844 + p * w;
    p = 0.00573950773 + p * w;
    p = -0.0076224613 + p * w;
    p = 0.00943887047 + p * w;
    p = 1.00167406 + p * w;
    p = 2.83297682 + p * w;
    x = p * y;
  }
  const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);
  for (int i = 0; i < 3; ++i) {
    const double err = std::erf(x) - y;
    x -= err / (two_over_sqrt_pi * std::exp(-x * x));
  }
  return x;
}

SnrGrid instantaneous_snr(const RealGrid& clean_mag, const RealGrid& noise_mag) {
  DMSE_REQUIRE(clean_mag.same_shape(noise_mag), "instantaneous_snr: shape mismatch");
  SnrGrid out{RealGrid(clean_mag.frames(), clean_mag.bins()), SnrDomain::db};
  for (std::size_t i = 0; i < clean_mag.size(); ++i) {
    const double s = clean_mag.data()[i];
    const double n = std::max(noise_mag.data()[i], kSpectralFloor);
    // log10(0) = -inf clamps to the lower bound.
    const double db = 20.0 * std::log10(s / n);
    out.values.data()[i] = std::clamp(db, -kSnrClampDb, kSnrClampDb);
  }
  return out;
}

SnrGrid instantaneous_snr(const Spectrogram& clean, const Spectrogram& noise) {
  DMSE_REQUIRE(clean.data.same_shape(noise.data), "instantaneous_snr: shape mismatch");
  return instantaneous_snr(mag_phase(clean).magnitude, mag_phase(noise).magnitude);
}

SnrStatsAccumulator::SnrStatsAccumulator(std::size_t bins) : mean_(bins, 0.0), m2_(bins, 0.0) {
  DMSE_REQUIRE(bins > 0, "stats accumulator: zero bins");
}

void SnrStatsAccumulator::add(const SnrGrid& xi) {
  DMSE_REQUIRE(xi.domain == SnrDomain::db, "stats accumulator: expects dB grid");
  DMSE_REQUIRE(xi.values.bins() == mean_.size(), "stats accumulator: bin count mismatch");
  for (std::size_t t = 0; t < xi.values.frames(); ++t) {
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    const auto row = xi.values.row(t);
    for (std::size_t f = 0; f < mean_.size(); ++f) {
      const double delta = row[f] - mean_[f];
      mean_[f] += delta * inv;
      m2_[f] += delta * (row[f] - mean_[f]);
    }
  }
}

SnrStats SnrStatsAccumulator::finish() const {
  DMSE_REQUIRE(count_ > 0, "stats accumulator: no frames accumulated");
  SnrStats s{mean_, std::vector<double>(mean_.size()), count_};
  for (std::size_t f = 0; f < mean_.size(); ++f)
    s.sigma[f] = std::max(std::sqrt(std::max(m2_[f], 0.0) / static_cast<double>(count_)), kSigmaMinDb);
  return s;
}

SnrStats compute_stats(const Manifest& manifest, const StftConfig& stft_config) {
  DMSE_REQUIRE(!manifest.entries.empty(), "compute_stats: manifest has no scenes");
  SnrStatsAccumulator acc(stft_config.bins());
  for (const auto& e : manifest.entries) {
    const Wav clean = read_wav(manifest.resolve(e.clean), stft_config.sample_rate);
    const Wav noise = read_wav(manifest.resolve(e.noise), stft_config.sample_rate);
    if (clean.num_samples() != noise.num_samples())
      throw FormatError("compute_stats: " + e.id + ": clean/noise length mismatch");
    acc.add(instantaneous_snr(stft(clean.channels[0], stft_config), stft(noise.channels[0], stft_config)));
  }
  return acc.finish();
}

namespace {

constexpr const char* kStatsMagic = "# dmse-snr-stats 1";

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

void write_stats(const SnrStats& stats, const std::filesystem::path& path) {
  stats.validate();
  std::ostringstream os;
  os << kStatsMagic << '\n' << "bins " << stats.bins() << '\n' << "sample_count " << stats.sample_count << '\n';
  for (std::size_t f = 0; f < stats.bins(); ++f) os << f << ' ' << fmt(stats.mu[f]) << ' ' << fmt(stats.sigma[f]) << '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write stats " + path.string());
  out << os.str();
}

SnrStats read_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stats " + path.string());
  std::string line, key;
  if (!std::getline(in, line) || line != kStatsMagic) throw FormatError(path.string() + ": not a dmse stats file");
  std::size_t bins = 0;
  SnrStats s;
  if (!(in >> key >> bins) || key != "bins" || bins == 0) throw FormatError(path.string() + ": bad bins header");
  if (!(in >> key >> s.sample_count) || key != "sample_count") throw FormatError(path.string() + ": bad sample_count header");
  s.mu.resize(bins);
  s.sigma.resize(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    std::string idx, mu, sigma;
    if (!(in >> idx >> mu >> sigma)) throw FormatError(path.string() + ": truncated at bin " + std::to_string(f));
    std::size_t i = 0;
    auto p1 = std::from_chars(idx.data(), idx.data() + idx.size(), i);
    auto p2 = std::from_chars(mu.data(), mu.data() + mu.size(), s.mu[f]);
    auto p3 = std::from_chars(sigma.data(), sigma.data() + sigma.size(), s.sigma[f]);
    if (p1.ec != std::errc() || p2.ec != std::errc() || p3.ec != std::errc() || i != f)
      throw FormatError(path.string() + ": malformed line for bin " + std::to_string(f));
  }
  s.validate();
  return s;
}

SnrGrid map_snr(const SnrGrid& xi_db, const SnrStats& stats) {
  DMSE_REQUIRE(xi_db.domain == SnrDomain::db, "map_snr: expects a dB grid");
  DMSE_REQUIRE(xi_db.values.bins() == stats.bins(), "map_snr: stats bin count mismatch");
  SnrGrid out{RealGrid(xi_db.values.frames(), xi_db.values.bins()), SnrDomain::mapped};
  for (std::size_t t = 0; t < out.values.frames(); ++t)
    for (std::size_t f = 0; f < out.values.bins(); ++f) {
      const double z = (xi_db.values(t, f) - stats.mu[f]) / (stats.sigma[f] * std::numbers::sqrt2);
      out.values(t, f) = 0.5 * (1.0 + std::erf(z));
    }
  return out;
}

SnrGrid unmap_snr(const SnrGrid& mapped, const SnrStats& stats) {
  DMSE_REQUIRE(mapped.domain == SnrDomain::mapped, "unmap_snr: expects a mapped grid");
  DMSE_REQUIRE(mapped.values.bins() == stats.bins(), "unmap_snr: stats bin count mismatch");
  SnrGrid out{RealGrid(mapped.values.frames(), mapped.values.bins()), SnrDomain::linear};
  for (std::size_t t = 0; t < out.values.frames(); ++t)
    for (std::size_t f = 0; f < out.values.bins(); ++f) {
      const double p = std::clamp(mapped.values(t, f), kMappedClip, 1.0 - kMappedClip);
      const double db = stats.sigma[f] * std::numbers::sqrt2 * erf_inv(2.0 * p - 1.0) + stats.mu[f];
      out.values(t, f) = std::pow(10.0, db / 10.0);
    }
  return out;
}

GainGrid mmse_gain(const SnrGrid& xi_lin) {
  DMSE_REQUIRE(xi_lin.domain == SnrDomain::linear, "mmse_gain: expects a linear grid");
  GainGrid g{RealGrid(xi_lin.values.frames(), xi_lin.values.bins())};
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double x = std::max(xi_lin.values.data()[i], 0.0);
    g.values.data()[i] = x / (x + 1.0);
  }
  return g;
}

std::vector<double> reconstruct(const RealGrid& est_mag, const GainGrid& gain, const Spectrogram& noisy) {
  DMSE_REQUIRE(est_mag.same_shape(gain.values) && est_mag.same_shape(noisy.data),
               "reconstruct: shape mismatch");
  const auto phase = mag_phase(noisy).phase;
  RealGrid mag(est_mag.frames(), est_mag.bins());
  for (std::size_t i = 0; i < mag.size(); ++i) mag.data()[i] = gain.values.data()[i] * est_mag.data()[i];
  return istft(polar(mag, phase, noisy.config));
}

}  // namespace dmse
