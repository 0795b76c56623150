// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmse/dataset.hpp"

namespace dmse {

inline constexpr double kSiSdrClampDb = 100.0;
inline constexpr double kSegSnrMinDb = -10.0;
inline constexpr double kSegSnrMaxDb = 35.0;
inline constexpr double kSegSnrSilenceDb = -40.0;  // relative to the loudest reference frame

double si_sdr(std::span<const double> reference, std::span<const double> estimate);

double segmental_snr(std::span<const double> reference, std::span<const double> estimate,
                     std::size_t frame = 512, std::size_t hop = 256);

// One-third-octave intelligibility score computed directly at 16 kHz.
struct StoiConfig {
  int sample_rate = 16000;
  std::size_t frame_len = 512;
  std::size_t hop = 256;
  std::size_t fft_size = 1024;
  std::size_t num_bands = 15;
  double min_center_hz = 150.0;
  std::size_t segment_frames = 24;  // 384 ms
  double clip_db = -15.0;
  double dynamic_range_db = 40.0;
};

double stoi(std::span<const double> clean, std::span<const double> processed, int sample_rate = 16000,
            const StoiConfig& config = {});

struct MetricRecord {
  std::string id;
  double si_sdr = 0.0;
  double seg_snr = 0.0;
  double stoi = 0.0;
};

struct MetricReport {
  std::vector<MetricRecord> records;
  double mean_si_sdr = 0.0;
  double mean_seg_snr = 0.0;
  double mean_stoi = 0.0;
  std::vector<std::string> errors;

  void finalize();  // recomputes the means
};

enum class EstimateSource { noisy, clean, directory };

inline std::string enhanced_file_name(const std::string& id) { return id + "_enhanced.wav"; }

// Scores the primary-channel estimate of every scene against its clean reference.
MetricReport evaluate_manifest(const Manifest& manifest, EstimateSource source,
                               const std::filesystem::path& estimates_dir = {});

// Columns id, si_sdr, seg_snr, stoi; a final "mean" row.
void write_report(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_report(const std::filesystem::path& path);

}  // namespace dmse
