// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dmse {

enum class SampleFormat { pcm16, float32 };

struct Wav {
  int sample_rate = 16000;
  std::vector<std::vector<double>> channels;  // channels[c][n], nominal range [-1, 1]

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_samples() const { return channels.empty() ? 0 : channels.front().size(); }
};

// Accepts RIFF/WAVE PCM 16-bit or IEEE float 32-bit, 1 or 2 channels.
// Rejects any sample rate other than `expected_rate` (no resampler).
Wav read_wav(const std::filesystem::path& path, int expected_rate = 16000);

void write_wav(const std::filesystem::path& path, const Wav& wav,
               SampleFormat format = SampleFormat::float32);

}  // namespace dmse
