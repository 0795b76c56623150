// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmse/tensor.hpp"

namespace dmse {

struct GradCheckCase {
  std::string name;
  ad::GradCheckResult result;
  bool passed = false;
};

struct GradCheckSuiteOptions {
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  std::size_t model_params = 20;  // sampled entries for the end-to-end case
  bool include_model = true;
};

// Finite-difference checks of every differentiable op in 64-bit mode plus
// the total loss of a tiny model.
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

struct OracleGainOptions {
  std::size_t mixtures = 10;
  double snr_db = 0.0;
  double duration_s = 2.0;
  std::uint64_t seed = 1;
};

struct OracleGainResult {
  std::vector<double> noisy_seg_snr;
  std::vector<double> enhanced_seg_snr;
  double mean_improvement_db = 0.0;
};

// Gain from the true instantaneous SNR applied to white-noise mixtures of
// synthetic speech, scored by segmental SNR against the clean signal.
OracleGainResult run_oracle_gain(const OracleGainOptions& options = {});

}  // namespace dmse
