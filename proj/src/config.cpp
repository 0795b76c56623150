// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmse/error.hpp"

namespace dmse {

using nlohmann::json;

namespace {

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

json to_json(const PipelineConfig& c) {
  const auto& m = c.model;
  const auto& d = c.dataset;
  return json{
      {"seed", c.seed},
      {"stft", {{"sample_rate", c.stft.sample_rate}, {"frame_len", c.stft.frame_len}, {"hop", c.stft.hop},
                {"fft_size", c.stft.fft_size}}},
      {"room", {{"dimensions", d.room.dimensions}, {"reflection", d.room.reflection},
                {"max_order", d.room.max_order}, {"sound_speed", d.room.sound_speed}}},
      {"dataset", {{"mic_spacing", d.mic_spacing}, {"array_midpoint", point_json(d.array_midpoint)},
                   {"grid_step_deg", d.grid_step_deg}, {"source_radius", d.source_radius},
                   {"snr_min_db", d.snr_min_db}, {"snr_max_db", d.snr_max_db}, {"duration_s", d.duration_s},
                   {"peak_level", d.peak_level}, {"num_scenes", c.generate.num_scenes},
                   {"noise", c.generate.noise}, {"speech_dir", c.generate.speech_dir},
                   {"noise_dir", c.generate.noise_dir}}},
      {"model", {{"channels", m.channels}, {"kernel_t", m.kernel_t}, {"kernel_f", m.kernel_f},
                 {"stride_f", m.stride_f}, {"freq_dilation", m.freq_dilation}, {"heads", m.heads},
                 {"lstm_layers", m.lstm_layers}, {"lstm_hidden", m.lstm_hidden}, {"use_mhca", m.use_mhca},
                 {"use_snr_head", m.use_snr_head}, {"use_decoder", m.use_decoder},
                 {"attention_scaling", m.attention_scaling}}},
      {"train", {{"lr", c.train.lr}, {"epochs", c.train.epochs}, {"batch", c.train.batch},
                 {"alpha", c.train.alpha}}},
      {"paths", {{"dataset", c.paths.dataset}, {"stats", c.paths.stats}, {"checkpoint", c.paths.checkpoint},
                 {"loss_log", c.paths.loss_log}, {"report", c.paths.report}}},
  };
}

template <typename V>
void read(const json& obj, const char* key, V& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<V>();
  } catch (const json::exception&) {
    throw InvalidArgument("config: bad type for '" + where + "." + key + "'");
  }
}

void read_point(const json& obj, const char* key, Point3& p, const std::string& where) {
  std::array<double, 3> a{p.x, p.y, p.z};
  read(obj, key, a, where);
  p = {a[0], a[1], a[2]};
}

// Rejects keys of `obj` that do not appear in `defaults`, recursively.
void check_keys(const json& obj, const json& defaults, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument("config: '" + (where.empty() ? "<root>" : where) + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    auto d = defaults.find(it.key());
    if (d == defaults.end()) throw InvalidArgument("config: unknown key '" + path + "'");
    if (d->is_object()) check_keys(*it, *d, path);
  }
}

PipelineConfig from_json(const json& j) {
  PipelineConfig c;
  check_keys(j, to_json(c), "");
  read(j, "seed", c.seed, "");
  auto section = [&](const char* name) -> json {
    auto it = j.find(name);
    return it == j.end() ? json::object() : *it;
  };
  const json s = section("stft");
  read(s, "sample_rate", c.stft.sample_rate, "stft");
  read(s, "frame_len", c.stft.frame_len, "stft");
  read(s, "hop", c.stft.hop, "stft");
  read(s, "fft_size", c.stft.fft_size, "stft");

  const json r = section("room");
  read(r, "dimensions", c.dataset.room.dimensions, "room");
  read(r, "reflection", c.dataset.room.reflection, "room");
  read(r, "max_order", c.dataset.room.max_order, "room");
  read(r, "sound_speed", c.dataset.room.sound_speed, "room");

  const json d = section("dataset");
  read(d, "mic_spacing", c.dataset.mic_spacing, "dataset");
  read_point(d, "array_midpoint", c.dataset.array_midpoint, "dataset");
  read(d, "grid_step_deg", c.dataset.grid_step_deg, "dataset");
  read(d, "source_radius", c.dataset.source_radius, "dataset");
  read(d, "snr_min_db", c.dataset.snr_min_db, "dataset");
  read(d, "snr_max_db", c.dataset.snr_max_db, "dataset");
  read(d, "duration_s", c.dataset.duration_s, "dataset");
  read(d, "peak_level", c.dataset.peak_level, "dataset");
  read(d, "num_scenes", c.generate.num_scenes, "dataset");
  read(d, "noise", c.generate.noise, "dataset");
  read(d, "speech_dir", c.generate.speech_dir, "dataset");
  read(d, "noise_dir", c.generate.noise_dir, "dataset");

  const json m = section("model");
  read(m, "channels", c.model.channels, "model");
  read(m, "kernel_t", c.model.kernel_t, "model");
  read(m, "kernel_f", c.model.kernel_f, "model");
  read(m, "stride_f", c.model.stride_f, "model");
  read(m, "freq_dilation", c.model.freq_dilation, "model");
  read(m, "heads", c.model.heads, "model");
  read(m, "lstm_layers", c.model.lstm_layers, "model");
  read(m, "lstm_hidden", c.model.lstm_hidden, "model");
  read(m, "use_mhca", c.model.use_mhca, "model");
  read(m, "use_snr_head", c.model.use_snr_head, "model");
  read(m, "use_decoder", c.model.use_decoder, "model");
  read(m, "attention_scaling", c.model.attention_scaling, "model");
  // A channel list without dilations gets one dilation-1 entry per block.
  if (m.contains("channels") && !m.contains("freq_dilation")) c.model.freq_dilation.assign(c.model.channels.size(), 1);

  const json t = section("train");
  read(t, "lr", c.train.lr, "train");
  read(t, "epochs", c.train.epochs, "train");
  read(t, "batch", c.train.batch, "train");
  read(t, "alpha", c.train.alpha, "train");

  const json p = section("paths");
  read(p, "dataset", c.paths.dataset, "paths");
  read(p, "stats", c.paths.stats, "paths");
  read(p, "checkpoint", c.paths.checkpoint, "paths");
  read(p, "loss_log", c.paths.loss_log, "paths");
  read(p, "report", c.paths.report, "paths");
  c.validate();
  return c;
}

}  // namespace

void PipelineConfig::validate() const {
  stft.validate();
  dataset.room.validate();
  DMSE_REQUIRE(dataset.room.sample_rate == stft.sample_rate, "config: room and STFT sample rates differ");
  DMSE_REQUIRE(dataset.snr_min_db <= dataset.snr_max_db, "config: snr_min_db exceeds snr_max_db");
  DMSE_REQUIRE(dataset.duration_s > 0.0, "config: duration_s must be positive");
  DMSE_REQUIRE(generate.noise == "white" || generate.noise == "pink" || generate.noise == "random",
               "config: dataset.noise must be white, pink or random");
  model.validate();
  DMSE_REQUIRE(model.input_bins == stft.bins(), "config: model input bins do not match the STFT");
  DMSE_REQUIRE(train.lr > 0.0 && train.epochs >= 1 && train.batch >= 1, "config: bad training hyperparameters");
}

bool PipelineConfig::operator==(const PipelineConfig& o) const { return to_json(*this) == to_json(o); }

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return from_json(j);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const PipelineConfig& config) { return to_json(config).dump(2) + "\n"; }

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
  json j = to_json(config);
  json::json_pointer ptr("/" + [&] {
    std::string s = key;
    for (auto& ch : s)
      if (ch == '.') ch = '/';
    return s;
  }());
  if (!j.contains(ptr)) throw InvalidArgument("config: unknown key '" + key + "'");
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = value;
  }
  j[ptr] = v;
  if (key == "model.channels" && v.is_array() && j["model"]["freq_dilation"].size() != v.size())
    j["model"]["freq_dilation"] = std::vector<std::size_t>(v.size(), 1);
  const PipelineConfig parsed = from_json(j);
  config = parsed;
}

}  // namespace dmse
