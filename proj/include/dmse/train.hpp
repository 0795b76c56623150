// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dmse/dataset.hpp"
#include "dmse/model.hpp"
#include "dmse/snr.hpp"

namespace dmse {

struct TrainOptions {
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  double alpha = 10.0;
  std::filesystem::path checkpoint;  // rewritten after every epoch when set
  std::filesystem::path loss_log;    // rewritten after every epoch when set
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_f = 0.0;
  double l_snr = 0.0;
  double total = 0.0;  // mean over batches
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  std::vector<EpochLog> epochs;
  Checkpoint checkpoint;
};

// Network inputs and regression targets of one scene, all [T, F].
struct TrainingExample {
  std::string id;
  RealGrid primary;        // log1p |X1|
  RealGrid reference;      // log1p |X2|
  RealGrid target_mag;     // |S|
  RealGrid target_mapped;  // mapped instantaneous SNR
};

TrainingExample prepare_example(const Manifest& manifest, const ManifestEntry& entry, const SnrStats& stats,
                                const StftConfig& stft = {});

TrainResult train(const Manifest& manifest, const SnrStats& stats, const ModelConfig& config,
                  const TrainOptions& options, const StftConfig& stft = {}, const EpochCallback& on_epoch = {});

// "# seed N" then one "epoch l_f l_snr total" line per epoch.
void write_loss_log(const std::vector<EpochLog>& log, std::uint64_t seed, const std::filesystem::path& path);
std::vector<EpochLog> read_loss_log(const std::filesystem::path& path);

struct EnhanceResult {
  std::vector<double> enhanced;  // same length as the input
  std::vector<RealGrid> masks;   // per-block T x C gate summaries when captured
};

// Without a decoder the noisy primary magnitude is used; without an SNR
// head the gain is 1.
EnhanceResult enhance(const StereoSignal& noisy, const Checkpoint& checkpoint, const SnrStats& stats,
                      const StftConfig& stft = {}, bool capture_masks = false);

}  // namespace dmse
