// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dmse/error.hpp"
#include "dmse/wav.hpp"

namespace dmse {

using ad::Shape;
using ad::Tensor;

namespace {

std::vector<double> read_mono(const std::filesystem::path& path, int rate, std::size_t channel = 0) {
  Wav w = read_wav(path, rate);
  if (w.num_channels() <= channel)
    throw InvalidArgument(path.string() + ": expected at least " + std::to_string(channel + 1) + " channel(s)");
  return std::move(w.channels[channel]);
}

RealGrid magnitude(const Spectrogram& spec) {
  RealGrid g(spec.frames(), spec.bins());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = std::abs(spec.data.data()[i]);
  return g;
}

struct Batch {
  Tensor<float> primary, reference;  // [B, 1, T, F]
  Tensor<float> target_mag, target_mapped;  // [B, T, F]
  Tensor<float> mask;                       // [B, T]
};

Batch make_batch(const std::vector<const TrainingExample*>& items) {
  const std::size_t b = items.size();
  const std::size_t f = items.front()->primary.bins();
  std::size_t t = 0;
  for (const auto* e : items) t = std::max(t, e->primary.frames());
  std::vector<float> p(b * t * f, 0.f), r(p.size(), 0.f), m(p.size(), 0.f), s(p.size(), 0.f), mask(b * t, 0.f);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& e = *items[i];
    for (std::size_t k = 0; k < e.primary.size(); ++k) {
      const std::size_t dst = i * t * f + k;
      p[dst] = static_cast<float>(e.primary.data()[k]);
      r[dst] = static_cast<float>(e.reference.data()[k]);
      m[dst] = static_cast<float>(e.target_mag.data()[k]);
      s[dst] = static_cast<float>(e.target_mapped.data()[k]);
    }
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(i * t), e.primary.frames(), 1.f);
  }
  return {Tensor<float>(Shape{b, 1, t, f}, std::move(p)), Tensor<float>(Shape{b, 1, t, f}, std::move(r)),
          Tensor<float>(Shape{b, t, f}, std::move(m)), Tensor<float>(Shape{b, t, f}, std::move(s)),
          Tensor<float>(Shape{b, t}, std::move(mask))};
}

}  // namespace

TrainingExample prepare_example(const Manifest& manifest, const ManifestEntry& entry, const SnrStats& stats,
                                const StftConfig& stft) {
  for (const auto* rel : {&entry.noisy, &entry.clean, &entry.noise})
    if (rel->empty()) throw InvalidArgument(entry.id + ": manifest entry lacks a reference path");
  Wav noisy = read_wav(manifest.resolve(entry.noisy), stft.sample_rate);
  if (noisy.num_channels() != 2) throw InvalidArgument(entry.id + ": noisy file must have 2 channels");
  const auto clean = read_mono(manifest.resolve(entry.clean), stft.sample_rate);
  const auto noise = read_mono(manifest.resolve(entry.noise), stft.sample_rate);
  if (clean.size() != noisy.num_samples() || noise.size() != noisy.num_samples())
    throw InvalidArgument(entry.id + ": reference lengths differ from the mixture");

  const auto s_clean = dmse::stft(clean, stft);
  const auto s_noise = dmse::stft(noise, stft);
  TrainingExample ex;
  ex.id = entry.id;
  ex.primary = input_features(dmse::stft(noisy.channels[0], stft));
  ex.reference = input_features(dmse::stft(noisy.channels[1], stft));
  ex.target_mag = magnitude(s_clean);
  ex.target_mapped = map_snr(instantaneous_snr(s_clean, s_noise), stats).values;
  return ex;
}

void write_loss_log(const std::vector<EpochLog>& log, std::uint64_t seed, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write loss log " + path.string());
  os << "# seed " << seed << '\n';
  char buf[64];
  auto num = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  for (const auto& e : log) os << e.epoch << '\t' << num(e.l_f) << '\t' << num(e.l_snr) << '\t' << num(e.total) << '\n';
  if (!os) throw IoError("failed writing loss log " + path.string());
}

std::vector<EpochLog> read_loss_log(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open loss log " + path.string());
  std::vector<EpochLog> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    EpochLog e;
    if (!(ls >> e.epoch >> e.l_f >> e.l_snr >> e.total)) throw FormatError(path.string() + ": malformed line");
    out.push_back(e);
  }
  return out;
}

TrainResult train(const Manifest& manifest, const SnrStats& stats, const ModelConfig& config,
                  const TrainOptions& options, const StftConfig& stft, const EpochCallback& on_epoch) {
  config.validate();
  stats.validate();
  stft.validate();
  DMSE_REQUIRE(options.epochs >= 1 && options.batch >= 1, "train: epochs and batch must be >= 1");
  DMSE_REQUIRE(options.lr > 0.0, "train: learning rate must be positive");
  DMSE_REQUIRE(config.input_bins == stft.bins(), "train: model input_bins does not match the STFT");
  DMSE_REQUIRE(stats.bins() == stft.bins(), "train: SNR statistics do not match the STFT");
  DMSE_REQUIRE(!manifest.entries.empty(), "train: manifest has no scenes");

  std::vector<TrainingExample> examples;
  std::vector<std::string> errors;
  for (const auto& entry : manifest.entries) {
    try {
      examples.push_back(prepare_example(manifest, entry, stats, stft));
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "train: " + std::to_string(errors.size()) + " of " + std::to_string(manifest.entries.size()) +
                      " scenes unusable; first: " + errors.front();
    throw InvalidArgument(msg);
  }

  TrainResult result;
  result.checkpoint.config = config;
  result.checkpoint.seed = options.seed;
  auto& params = result.checkpoint.params;
  params = init_params<float>(config, options.seed);
  ad::Adam<float> adam(params.trainable(), ad::AdamConfig{options.lr});

  std::mt19937_64 rng(options.seed ^ 0x5eedba7c4ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const float alpha = static_cast<float>(options.alpha);

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      std::vector<const TrainingExample*> items;
      for (std::size_t i = start; i < std::min(order.size(), start + options.batch); ++i)
        items.push_back(&examples[order[i]]);
      const Batch batch = make_batch(items);

      ad::Tape<float> tape;
      adam.zero_grad();
      const auto out = model_forward(tape, batch.primary, batch.reference, params, config, ad::Mode::train);
      const auto loss =
          compute_loss(tape, out.est_mag, out.snr_mapped, batch.target_mag, batch.target_mapped, batch.mask, alpha);
      if (!std::isfinite(loss.report.total))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1) + " (l_f=" + std::to_string(loss.report.l_f) +
                           ", l_snr=" + std::to_string(loss.report.l_snr) + ")");
      tape.backward(loss.total);
      adam.step();
      log.l_f += loss.report.l_f;
      log.l_snr += loss.report.l_snr;
      log.total += loss.report.total;
      ++batches;
    }
    log.l_f /= static_cast<double>(batches);
    log.l_snr /= static_cast<double>(batches);
    log.total /= static_cast<double>(batches);
    result.epochs.push_back(log);
    result.checkpoint.epoch = static_cast<std::uint32_t>(epoch);
    if (!options.checkpoint.empty()) save_checkpoint(result.checkpoint, options.checkpoint);
    if (!options.loss_log.empty()) write_loss_log(result.epochs, options.seed, options.loss_log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

EnhanceResult enhance(const StereoSignal& noisy, const Checkpoint& checkpoint, const SnrStats& stats,
                      const StftConfig& stft, bool capture_masks) {
  const ModelConfig& config = checkpoint.config;
  stft.validate();
  DMSE_REQUIRE(noisy[0].size() == noisy[1].size(), "enhance: channel lengths differ");
  DMSE_REQUIRE(noisy[0].size() >= stft.frame_len, "enhance: input shorter than one STFT frame");
  DMSE_REQUIRE(config.input_bins == stft.bins(), "enhance: checkpoint input_bins does not match the STFT");
  if (config.use_snr_head) {
    stats.validate();
    DMSE_REQUIRE(stats.bins() == stft.bins(), "enhance: SNR statistics do not match the checkpoint");
  }

  const auto spec1 = dmse::stft(noisy[0], stft);
  const auto spec2 = dmse::stft(noisy[1], stft);
  const auto f1 = input_features(spec1), f2 = input_features(spec2);
  const auto x1 = stack_features<float>({&f1});
  const auto x2 = stack_features<float>({&f2});

  ModelParams<float> params = checkpoint.params;  // shared handles; eval mode never writes
  ad::Tape<float> tape(false);
  const auto out = model_forward(tape, x1, x2, params, config, ad::Mode::eval);

  const std::size_t t = spec1.frames(), f = spec1.bins();
  RealGrid est(t, f);
  if (config.use_decoder) {
    for (std::size_t i = 0; i < est.size(); ++i) est.data()[i] = out.est_mag.values()[i];
  } else {
    for (std::size_t i = 0; i < est.size(); ++i) est.data()[i] = std::abs(spec1.data.data()[i]);
  }
  GainGrid gain{RealGrid(t, f, 1.0)};
  if (config.use_snr_head) {
    SnrGrid mapped{RealGrid(t, f), SnrDomain::mapped};
    for (std::size_t i = 0; i < mapped.values.size(); ++i) mapped.values.data()[i] = out.snr_mapped.values()[i];
    gain = mmse_gain(unmap_snr(mapped, stats));
  }
  EnhanceResult result;
  result.enhanced = reconstruct(est, gain, spec1);
  result.enhanced.resize(noisy[0].size(), 0.0);
  if (capture_masks) result.masks = mask_summaries(out.masks);
  return result;
}

}  // namespace dmse
