// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dmse/dataset.hpp"
#include "dmse/dsp.hpp"
#include "dmse/model.hpp"
#include "dmse/train.hpp"

namespace dmse {

struct DataGenOptions {
  std::size_t num_scenes = 60;
  std::string noise = "random";  // white | pink | random
  std::string speech_dir;        // empty: synthetic speech
  std::string noise_dir;         // empty: synthetic noise
};

struct PathConfig {
  std::string dataset = "data";
  std::string stats = "data/snr_stats.txt";
  std::string checkpoint = "model.ckpt";
  std::string loss_log = "loss.log";
  std::string report = "report.tsv";
};

// Everything a pipeline run needs. Every field has a default; JSON documents
// may set any subset, but unknown keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;
  StftConfig stft;
  DatasetConfig dataset;
  DataGenOptions generate;
  ModelConfig model = ModelConfig::tiny();
  TrainOptions train;  // checkpoint and loss_log come from `paths`
  PathConfig paths;

  void validate() const;
  bool operator==(const PipelineConfig& o) const;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& config);  // pretty JSON with every key

// Sets one dotted key (e.g. "model.heads") from a JSON literal or bare string.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);

}  // namespace dmse
