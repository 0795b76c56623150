// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Dual-channel convolutional recurrent network with cross-channel attention
// gates between the two channel-wise encoders, an LSTM bottleneck, a
// magnitude decoder with primary-channel skips and a mapped-SNR head.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dmse/dsp.hpp"
#include "dmse/tensor.hpp"

namespace dmse {

struct ModelConfig {
  std::vector<std::size_t> channels{8, 16, 32, 32, 64};  // one entry per encoder block
  std::size_t kernel_t = 2;
  std::size_t kernel_f = 3;
  std::size_t stride_f = 2;
  std::vector<std::size_t> freq_dilation{1, 1, 1, 1, 1};
  std::size_t heads = 4;
  std::size_t lstm_layers = 2;
  std::size_t lstm_hidden = 128;
  std::size_t input_bins = 257;
  bool use_mhca = true;
  bool use_snr_head = true;
  bool use_decoder = true;
  bool attention_scaling = false;  // divide scores by sqrt(head dim)

  // Desk-scale preset used for quick training runs (about 130k parameters).
  static ModelConfig tiny();

  std::size_t num_blocks() const { return channels.size(); }
  void validate() const;
  // Frequency bins entering each block plus the bottleneck: size num_blocks + 1.
  std::vector<std::size_t> level_bins() const;
  ad::Conv2dGeometry encoder_geometry(std::size_t block) const;
  ad::Conv2dGeometry decoder_geometry(std::size_t block) const;

  std::string serialize() const;  // key=value lines
  static ModelConfig deserialize(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ModelParams {
  std::map<std::string, ad::Tensor<T>> weights;
  std::map<std::string, ad::BatchNormState<T>> norms;  // running statistics

  const ad::Tensor<T>& at(const std::string& name) const;
  ad::BatchNormState<T>& norm(const std::string& name);
  std::vector<ad::Tensor<T>> trainable() const;  // in name order
  std::size_t parameter_count() const;
  template <typename U>
  ModelParams<U> cast() const;
};

// Fan-in scaled uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for convolution
// and projection weights, U(-1/sqrt(H), 1/sqrt(H)) for LSTM weights; zero
// biases except LSTM forget gates (1); batch-norm scale 1 and shift 0.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

// log(1 + |X|) of one channel as [T, F].
RealGrid input_features(const Spectrogram& spec);

// Stacks equal-shaped [T, F] grids into [B, 1, T, F].
template <typename T>
ad::Tensor<T> stack_features(const std::vector<const RealGrid*>& grids);

template <typename T>
ad::Tensor<T> encoder_block_forward(ad::Tape<T>& tape, const ad::Tensor<T>& x, ModelParams<T>& params,
                                    const ModelConfig& config, int channel, std::size_t block, ad::Mode mode);

template <typename T>
struct MhcaOutput {
  ad::Tensor<T> z1, z2;        // gated features
  ad::Tensor<T> gate1, gate2;  // sigmoid(x + A), in (0, 1)
};

// Primary direction: Q from x1, K and V from x2, attention over time per
// head with frequency as a batch axis; the reverse direction swaps roles.
template <typename T>
MhcaOutput<T> mhca_forward(ad::Tape<T>& tape, const ad::Tensor<T>& x1, const ad::Tensor<T>& x2,
                           const ModelParams<T>& params, const ModelConfig& config, std::size_t block);

// Single-direction attention component A = softmax(Q K^T) V, [B, C, T, F].
template <typename T>
ad::Tensor<T> cross_attention(ad::Tape<T>& tape, const ad::Tensor<T>& query_src, const ad::Tensor<T>& kv_src,
                              const ModelParams<T>& params, const ModelConfig& config, const std::string& prefix);

template <typename T>
ad::Tensor<T> bottleneck_forward(ad::Tape<T>& tape, const ad::Tensor<T>& enc1, const ad::Tensor<T>& enc2,
                                 const ModelParams<T>& params, const ModelConfig& config);

template <typename T>
ad::Tensor<T> decoder_forward(ad::Tape<T>& tape, const ad::Tensor<T>& bottleneck,
                              const std::vector<ad::Tensor<T>>& skips, ModelParams<T>& params,
                              const ModelConfig& config, ad::Mode mode);

template <typename T>
ad::Tensor<T> snr_head_forward(ad::Tape<T>& tape, const ad::Tensor<T>& bottleneck, const ModelParams<T>& params,
                               const ModelConfig& config);

struct ForwardOptions {
  bool force_unit_gate = false;  // run MHCA but gate with Z = 1
};

template <typename T>
struct ModelOutput {
  ad::Tensor<T> est_mag;     // [B, T, F], undefined without decoder
  ad::Tensor<T> snr_mapped;  // [B, T, F], undefined without SNR head
  std::vector<ad::Tensor<T>> masks;  // primary-direction gates, one per block
};

// Inputs are [B, 1, T, F] features of the primary and reference channel.
template <typename T>
ModelOutput<T> model_forward(ad::Tape<T>& tape, const ad::Tensor<T>& primary, const ad::Tensor<T>& reference,
                             ModelParams<T>& params, const ModelConfig& config, ad::Mode mode,
                             const ForwardOptions& options = {});

struct LossReport {
  double l_f = 0.0;
  double l_snr = 0.0;
  double total = 0.0;
  double alpha = 10.0;
};

template <typename T>
struct LossTerms {
  ad::Tensor<T> total;
  LossReport report;
};

// Masked mean |S - S_hat| plus alpha times masked MSE in the mapped SNR
// domain. frame_mask is [B, T] with 1 for real frames and 0 for padding.
template <typename T>
LossTerms<T> compute_loss(ad::Tape<T>& tape, const ad::Tensor<T>& est_mag, const ad::Tensor<T>& snr_est,
                          const ad::Tensor<T>& target_mag, const ad::Tensor<T>& target_mapped,
                          const ad::Tensor<T>& frame_mask, T alpha);

struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "DMSECKPT", u32 version, u64 seed, u32 epoch, u32 config length +
// config text, u32 tensor count, then per tensor: u32 name length + name,
// u32 rank, u32 dims..., little-endian f32 values.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Gate matrices averaged over frequency: one T x C grid per block.
std::vector<RealGrid> mask_summaries(const std::vector<ad::Tensor<float>>& masks);
std::vector<std::filesystem::path> export_masks(const std::vector<RealGrid>& summaries,
                                                const std::filesystem::path& dir);
RealGrid read_mask_file(const std::filesystem::path& path);

}  // namespace dmse
