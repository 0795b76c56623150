// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/dmse.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "dmse/config.hpp"
#include "dmse/error.hpp"
#include "dmse/eval.hpp"
#include "dmse/snr.hpp"
#include "dmse/suites.hpp"
#include "dmse/train.hpp"
#include "dmse/wav.hpp"

struct dmse_config {
  dmse::PipelineConfig value;
};

struct dmse_model {
  dmse::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
dmse_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return DMSE_OK;
  } catch (const dmse::InvalidArgument& e) {
    g_last_error = e.what();
    return DMSE_ERR_INVALID_ARGUMENT;
  } catch (const dmse::IoError& e) {
    g_last_error = e.what();
    return DMSE_ERR_IO;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DMSE_ERR_IO;
  } catch (const dmse::FormatError& e) {
    g_last_error = e.what();
    return DMSE_ERR_FORMAT;
  } catch (const dmse::NumericError& e) {
    g_last_error = e.what();
    return DMSE_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal: ") + e.what();
    return DMSE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal: unknown exception";
    return DMSE_ERR_INTERNAL;
  }
}

void require_ptr(const void* p, const char* what) {
  if (!p) throw dmse::InvalidArgument(std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dmse::SnrStats stats_for(const dmse::Checkpoint& ckpt, const char* stats_path) {
  if (stats_path && *stats_path) return dmse::read_stats(stats_path);
  if (ckpt.config.use_snr_head) throw dmse::InvalidArgument("enhance: model has an SNR head; stats file required");
  return {};
}

std::unique_ptr<dmse::SignalSource> speech_source(const dmse::PipelineConfig& c) {
  if (c.generate.speech_dir.empty()) return std::make_unique<dmse::SyntheticSpeech>(c.stft.sample_rate);
  auto src = std::make_unique<dmse::WavDirectorySource>(c.generate.speech_dir, c.stft.sample_rate);
  if (src->size() == 0) throw dmse::InvalidArgument("no usable speech files in " + c.generate.speech_dir);
  return src;
}

std::unique_ptr<dmse::SignalSource> noise_source(const dmse::PipelineConfig& c) {
  if (!c.generate.noise_dir.empty()) {
    auto src = std::make_unique<dmse::WavDirectorySource>(c.generate.noise_dir, c.stft.sample_rate);
    if (src->size() == 0) throw dmse::InvalidArgument("no usable noise files in " + c.generate.noise_dir);
    return src;
  }
  const auto color = c.generate.noise == "white"  ? dmse::NoiseColor::white
                     : c.generate.noise == "pink" ? dmse::NoiseColor::pink
                                                  : dmse::NoiseColor::random;
  return std::make_unique<dmse::SyntheticNoise>(color);
}

}  // namespace

extern "C" {

const char* dmse_version(void) { return "1.0.0"; }

const char* dmse_last_error(void) { return g_last_error.c_str(); }

const char* dmse_status_name(dmse_status status) {
  switch (status) {
    case DMSE_OK: return "ok";
    case DMSE_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case DMSE_ERR_IO: return "io";
    case DMSE_ERR_FORMAT: return "format";
    case DMSE_ERR_NUMERIC: return "numeric";
    case DMSE_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void dmse_string_free(char* s) { std::free(s); }

dmse_status dmse_config_create(dmse_config** out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = new dmse_config{};
  });
}

dmse_status dmse_config_load(const char* path, dmse_config** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = new dmse_config{dmse::load_config(path)};
  });
}

dmse_status dmse_config_parse(const char* json, dmse_config** out) {
  return guarded([&] {
    require_ptr(json, "json");
    require_ptr(out, "out");
    *out = new dmse_config{dmse::parse_config(json)};
  });
}

void dmse_config_destroy(dmse_config* config) { delete config; }

dmse_status dmse_config_set(dmse_config* config, const char* key, const char* value) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(key, "key");
    require_ptr(value, "value");
    dmse::set_config_value(config->value, key, value);
  });
}

dmse_status dmse_config_dump(const dmse_config* config, char** out_json) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(out_json, "out_json");
    *out_json = copy_string(dmse::dump_config(config->value));
  });
}

dmse_status dmse_config_path(const dmse_config* config, const char* name, char** out_path) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(name, "name");
    require_ptr(out_path, "out_path");
    const auto& p = config->value.paths;
    const std::string n = name;
    const std::string* v = n == "dataset"      ? &p.dataset
                           : n == "stats"      ? &p.stats
                           : n == "checkpoint" ? &p.checkpoint
                           : n == "loss_log"   ? &p.loss_log
                           : n == "report"     ? &p.report
                                               : nullptr;
    if (!v) throw dmse::InvalidArgument("unknown path entry '" + n + "'");
    *out_path = copy_string(*v);
  });
}

dmse_status dmse_make_dataset(const dmse_config* config, const char* out_dir, size_t* out_scenes,
                              size_t* out_errors) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(out_dir, "out_dir");
    const auto& c = config->value;
    const auto speech = speech_source(c);
    const auto noise = noise_source(c);
    const auto scenes = dmse::random_scenes(c.generate.num_scenes, c.seed, c.dataset);
    const auto m = dmse::generate_dataset(scenes, *speech, *noise, out_dir, c.dataset, c.seed);
    if (out_scenes) *out_scenes = m.entries.size();
    if (out_errors) *out_errors = m.errors.size();
  });
}

dmse_status dmse_compute_stats(const dmse_config* config, const char* manifest_path, const char* stats_path) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(stats_path, "stats_path");
    const auto m = dmse::read_manifest(manifest_path);
    dmse::write_stats(dmse::compute_stats(m, config->value.stft), stats_path);
  });
}

dmse_status dmse_train(const dmse_config* config, const char* manifest_path, const char* stats_path,
                       const char* checkpoint_path, const char* loss_log_path, dmse_epoch_callback callback,
                       void* user) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(stats_path, "stats_path");
    require_ptr(checkpoint_path, "checkpoint_path");
    const auto& c = config->value;
    dmse::TrainOptions opt = c.train;
    opt.seed = c.seed;
    opt.checkpoint = checkpoint_path;
    if (loss_log_path) opt.loss_log = loss_log_path;
    const auto manifest = dmse::read_manifest(manifest_path);
    const auto stats = dmse::read_stats(stats_path);
    dmse::EpochCallback cb;
    if (callback) cb = [&](const dmse::EpochLog& e) { callback(e.epoch, e.l_f, e.l_snr, e.total, user); };
    dmse::train(manifest, stats, c.model, opt, c.stft, cb);
  });
}

dmse_status dmse_model_load(const char* checkpoint_path, dmse_model** out) {
  return guarded([&] {
    require_ptr(checkpoint_path, "checkpoint_path");
    require_ptr(out, "out");
    *out = new dmse_model{dmse::load_checkpoint(checkpoint_path)};
  });
}

void dmse_model_destroy(dmse_model* model) { delete model; }

dmse_status dmse_model_parameter_count(const dmse_model* model, size_t* out) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(out, "out");
    *out = model->checkpoint.params.parameter_count();
  });
}

dmse_status dmse_model_epoch(const dmse_model* model, uint32_t* out) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(out, "out");
    *out = model->checkpoint.epoch;
  });
}

dmse_status dmse_enhance_file(const dmse_model* model, const dmse_config* config, const char* stats_path,
                              const char* input_wav, const char* output_wav, const char* mask_dir,
                              size_t* out_mask_files) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(config, "config");
    require_ptr(input_wav, "input_wav");
    require_ptr(output_wav, "output_wav");
    const auto& stft = config->value.stft;
    const auto stats = stats_for(model->checkpoint, stats_path);
    dmse::Wav in = dmse::read_wav(input_wav, stft.sample_rate);
    if (in.num_channels() != 2)
      throw dmse::InvalidArgument(std::string(input_wav) + ": expected 2 channels, got " +
                                  std::to_string(in.num_channels()));
    const dmse::StereoSignal noisy{in.channels[0], in.channels[1]};
    const bool dump = mask_dir && *mask_dir;
    auto res = dmse::enhance(noisy, model->checkpoint, stats, stft, dump);
    dmse::write_wav(output_wav, dmse::Wav{stft.sample_rate, {std::move(res.enhanced)}});
    std::size_t files = 0;
    if (dump) files = dmse::export_masks(res.masks, mask_dir).size();
    if (out_mask_files) *out_mask_files = files;
  });
}

dmse_status dmse_enhance_manifest(const dmse_model* model, const dmse_config* config, const char* stats_path,
                                  const char* manifest_path, const char* out_dir, size_t* out_count) {
  return guarded([&] {
    require_ptr(model, "model");
    require_ptr(config, "config");
    require_ptr(manifest_path, "manifest_path");
    require_ptr(out_dir, "out_dir");
    const auto& stft = config->value.stft;
    const auto stats = stats_for(model->checkpoint, stats_path);
    const auto m = dmse::read_manifest(manifest_path);
    std::filesystem::create_directories(out_dir);
    std::size_t n = 0;
    for (const auto& e : m.entries) {
      dmse::Wav in = dmse::read_wav(m.resolve(e.noisy), stft.sample_rate);
      if (in.num_channels() != 2) throw dmse::InvalidArgument(e.id + ": expected a 2-channel mixture");
      const dmse::StereoSignal noisy{in.channels[0], in.channels[1]};
      auto res = dmse::enhance(noisy, model->checkpoint, stats, stft);
      dmse::write_wav(std::filesystem::path(out_dir) / dmse::enhanced_file_name(e.id),
                      dmse::Wav{stft.sample_rate, {std::move(res.enhanced)}});
      ++n;
    }
    if (out_count) *out_count = n;
  });
}

dmse_status dmse_evaluate(const char* manifest_path, dmse_estimate_source source, const char* estimates_dir,
                          const char* report_path, dmse_metric_summary* out) {
  return guarded([&] {
    require_ptr(manifest_path, "manifest_path");
    dmse::EstimateSource src;
    switch (source) {
      case DMSE_ESTIMATE_NOISY: src = dmse::EstimateSource::noisy; break;
      case DMSE_ESTIMATE_CLEAN: src = dmse::EstimateSource::clean; break;
      case DMSE_ESTIMATE_DIRECTORY: src = dmse::EstimateSource::directory; break;
      default: throw dmse::InvalidArgument("unknown estimate source");
    }
    const auto m = dmse::read_manifest(manifest_path);
    const auto report = dmse::evaluate_manifest(m, src, estimates_dir ? estimates_dir : "");
    if (report_path && *report_path) dmse::write_report(report, report_path);
    if (out) *out = {report.records.size(), report.errors.size(), report.mean_si_sdr, report.mean_seg_snr,
                     report.mean_stoi};
  });
}

dmse_status dmse_gradcheck(uint64_t seed, double tolerance, dmse_gradcheck_callback callback, void* user,
                           int* out_all_passed) {
  return guarded([&] {
    dmse::GradCheckSuiteOptions opt;
    opt.seed = seed;
    if (tolerance > 0.0) opt.tolerance = tolerance;
    const auto cases = dmse::run_gradcheck_suite(opt);
    bool all = true;
    for (const auto& c : cases) {
      all = all && c.passed;
      if (callback) callback(c.name.c_str(), c.result.max_rel_error, c.result.checked, c.passed ? 1 : 0, user);
    }
    if (out_all_passed) *out_all_passed = all ? 1 : 0;
  });
}

dmse_status dmse_oracle_gain(size_t mixtures, double snr_db, uint64_t seed, double* out_mean_improvement_db) {
  return guarded([&] {
    require_ptr(out_mean_improvement_db, "out_mean_improvement_db");
    dmse::OracleGainOptions opt;
    opt.mixtures = mixtures;
    opt.snr_db = snr_db;
    opt.seed = seed;
    *out_mean_improvement_db = dmse::run_oracle_gain(opt).mean_improvement_db;
  });
}

}  // extern "C"
