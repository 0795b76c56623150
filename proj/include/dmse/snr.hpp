// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dmse/dataset.hpp"
#include "dmse/dsp.hpp"

namespace dmse {

inline constexpr double kSnrClampDb = 40.0;
inline constexpr double kSpectralFloor = 1e-12;
inline constexpr double kSigmaMinDb = 1e-3;
inline constexpr double kMappedClip = 1e-7;

// Per-bin Gaussian fit of the instantaneous SNR in dB.
struct SnrStats {
  std::vector<double> mu;
  std::vector<double> sigma;
  std::uint64_t sample_count = 0;  // frames accumulated per bin

  std::size_t bins() const { return mu.size(); }
  void validate() const;
};

enum class SnrDomain { db, mapped, linear };

struct SnrGrid {
  RealGrid values;
  SnrDomain domain = SnrDomain::db;
};

struct GainGrid {
  RealGrid values;  // in [0, 1)
};

// Inverse error function: initial rational estimate refined by Newton
// steps on std::erf. |error| < 1e-12 on (-1, 1).
double erf_inv(double y);

// 20 log10(|S| / max(|N|, floor)), clamped to [-40, 40] dB.
SnrGrid instantaneous_snr(const Spectrogram& clean, const Spectrogram& noise);
SnrGrid instantaneous_snr(const RealGrid& clean_mag, const RealGrid& noise_mag);

// Streaming per-bin mean/std accumulator (Welford).
class SnrStatsAccumulator {
 public:
  explicit SnrStatsAccumulator(std::size_t bins);
  void add(const SnrGrid& xi_db);
  SnrStats finish() const;  // population std, floored at kSigmaMinDb

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::uint64_t count_ = 0;
};

// Reads clean/noise references of every manifest entry.
SnrStats compute_stats(const Manifest& manifest, const StftConfig& stft = {});

void write_stats(const SnrStats& stats, const std::filesystem::path& path);
SnrStats read_stats(const std::filesystem::path& path);

// Gaussian CDF of the dB SNR per bin: 0.5 (1 + erf((x - mu) / (sigma sqrt 2))).
SnrGrid map_snr(const SnrGrid& xi_db, const SnrStats& stats);

// 10^((sigma sqrt2 erfinv(2 p - 1) + mu) / 10), p clipped to [1e-7, 1 - 1e-7].
SnrGrid unmap_snr(const SnrGrid& mapped, const SnrStats& stats);

GainGrid mmse_gain(const SnrGrid& xi_lin);

// gain * est_mag with the noisy phase, resynthesized by istft.
std::vector<double> reconstruct(const RealGrid& est_mag, const GainGrid& gain, const Spectrogram& noisy);

}  // namespace dmse
