// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dmse/error.hpp"
#include "dmse/wav.hpp"

namespace dmse {
namespace fs = std::filesystem;

void validate_scene(const SceneSpec& scene, const DatasetConfig& config) {
  const int step = config.grid_step_deg;
  DMSE_REQUIRE(step > 0 && 360 % step == 0, "scene: grid step must divide 360");
  auto on_grid = [step](int a) { return a >= 0 && a < 360 && a % step == 0; };
  DMSE_REQUIRE(on_grid(scene.speech_angle), "scene: speech angle not on the source grid");
  DMSE_REQUIRE(on_grid(scene.noise_angle), "scene: noise angle not on the source grid");
  DMSE_REQUIRE(scene.speech_angle != scene.noise_angle, "scene: speech and noise share a position");
  DMSE_REQUIRE(scene.source_radius > 0.0, "scene: source radius must be positive");
  DMSE_REQUIRE(scene.snr_db >= config.snr_min_db && scene.snr_db <= config.snr_max_db,
               "scene: snr outside the configured range");
}

std::vector<SceneSpec> random_scenes(std::size_t count, std::uint64_t seed, const DatasetConfig& config) {
  DMSE_REQUIRE(config.grid_step_deg > 0 && 360 % config.grid_step_deg == 0, "scenes: grid step must divide 360");
  const int slots = 360 / config.grid_step_deg;
  DMSE_REQUIRE(slots >= 2, "scenes: need at least two grid positions");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> slot(0, slots - 1);
  std::uniform_int_distribution<int> other(1, slots - 1);
  std::uniform_real_distribution<double> snr(config.snr_min_db, config.snr_max_db);
  std::vector<SceneSpec> out(count);
  for (auto& s : out) {
    const int a = slot(rng);
    const int b = (a + other(rng)) % slots;
    s.speech_angle = a * config.grid_step_deg;
    s.noise_angle = b * config.grid_step_deg;
    s.source_radius = config.source_radius;
    s.snr_db = snr(rng);
    s.seed = rng();
  }
  return out;
}

std::vector<double> SyntheticSpeech::draw(std::size_t n, std::mt19937_64& rng) const {
  using std::numbers::pi;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double fs = rate_;
  const double nyquist_guard = std::min(7000.0, 0.45 * fs);

  std::vector<double> out(n, 0.0);
  const double f0_speaker = range(90.0, 220.0);
  const double vibrato_rate = range(3.0, 6.0);
  std::size_t t = 0;
  while (t < n) {
    t += static_cast<std::size_t>(range(0.03, 0.15) * fs);
    const auto len = static_cast<std::size_t>(range(0.15, 0.35) * fs);
    if (t >= n) break;
    const double glide_a = range(0.85, 1.15), glide_b = range(0.85, 1.15);
    const double formants[3] = {range(300, 900), range(900, 2500), range(2400, 3500)};
    const double widths[3] = {80.0, 120.0, 200.0};
    const double weights[3] = {1.0, range(0.4, 0.9), range(0.2, 0.5)};
    const double level = range(0.5, 1.0);

    const double f0_mean = f0_speaker * 0.5 * (glide_a + glide_b);
    const int harmonics = static_cast<int>(nyquist_guard / (f0_mean * 1.2));
    std::vector<double> amp(harmonics), phase0(harmonics);
    for (int k = 0; k < harmonics; ++k) {
      const double f = (k + 1) * f0_mean;
      double a = 0.03;
      for (int i = 0; i < 3; ++i) a += weights[i] * std::exp(-0.5 * std::pow((f - formants[i]) / widths[i], 2));
      amp[k] = a / (1.0 + f / 1000.0);
      phase0[k] = range(0.0, 2.0 * pi);
    }
    double phase = 0.0;
    const std::size_t end = std::min(n, t + len);
    for (std::size_t i = t; i < end; ++i) {
      const double x = static_cast<double>(i - t) / static_cast<double>(len);
      const double env = level * std::pow(std::sin(pi * x), 2);
      const double time = i / fs;
      const double f0 = f0_speaker * (glide_a + (glide_b - glide_a) * x) *
                        (1.0 + 0.03 * std::sin(2.0 * pi * vibrato_rate * time));
      phase += 2.0 * pi * f0 / fs;
      double s = 0.0;
      for (int k = 0; k < harmonics; ++k) s += amp[k] * std::sin((k + 1) * phase + phase0[k]);
      out[i] = env * s;
    }
    t = end;
  }
  return out;
}

std::string SyntheticNoise::describe() const {
  switch (color_) {
    case NoiseColor::white: return "synthetic-white";
    case NoiseColor::pink: return "synthetic-pink";
    default: return "synthetic-white-or-pink";
  }
}

std::vector<double> SyntheticNoise::draw(std::size_t n, std::mt19937_64& rng) const {
  std::normal_distribution<double> g(0.0, 1.0);
  NoiseColor color = color_;
  if (color == NoiseColor::random) color = (rng() & 1u) ? NoiseColor::pink : NoiseColor::white;
  std::vector<double> out(n);
  if (color == NoiseColor::white) {
    for (auto& v : out) v = g(rng);
    return out;
  }
  // Paul Kellet's pinking filter.
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (auto& v : out) {
    const double w = g(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  const double rms = std::sqrt(energy(out) / static_cast<double>(n));
  if (rms > 0.0)
    for (auto& v : out) v /= rms;
  return out;
}

WavDirectorySource::WavDirectorySource(const fs::path& dir, int sample_rate) : dir_(dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      Wav w = read_wav(f, sample_rate);
      if (w.num_samples() == 0 || energy(w.channels[0]) == 0.0) {
        errors_.push_back(f.string() + ": silent or empty");
        continue;
      }
      clips_.push_back(std::move(w.channels[0]));
    } catch (const std::exception& e) {
      errors_.push_back(e.what());
    }
  }
  if (clips_.empty()) throw IoError("no usable WAV files in " + dir.string());
}

std::vector<double> WavDirectorySource::draw(std::size_t n, std::mt19937_64& rng) const {
  const auto& clip = clips_[std::uniform_int_distribution<std::size_t>(0, clips_.size() - 1)(rng)];
  const std::size_t start = clip.size() > n ? std::uniform_int_distribution<std::size_t>(0, clip.size() - n)(rng) : 0;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = clip[(start + i) % clip.size()];
  return out;
}

namespace {

constexpr const char* kManifestMagic = "# dmse-manifest 1";
constexpr const char* kManifestColumns = "id\tspeech_angle\tnoise_angle\tsource_radius\tsnr_db\tseed\tnoisy\tclean\tnoise";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename V>
V parse_number(const std::string& s, const std::string& what) {
  V v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("manifest: bad " + what + " '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, '\t')) out.push_back(cell);
  return out;
}

}  // namespace

void write_manifest(const Manifest& m, const fs::path& path) {
  std::ostringstream os;
  os << kManifestMagic << '\n' << "# seed " << m.seed << '\n';
  for (const auto& e : m.errors) os << "# error " << e << '\n';
  os << kManifestColumns << '\n';
  for (const auto& e : m.entries) {
    os << e.id << '\t' << e.scene.speech_angle << '\t' << e.scene.noise_angle << '\t'
       << format_double(e.scene.source_radius) << '\t' << format_double(e.scene.snr_db) << '\t' << e.scene.seed
       << '\t' << e.noisy << '\t' << e.clean << '\t' << e.noise << '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << os.str();
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || line != kManifestMagic) throw FormatError(path.string() + ": not a dmse manifest");
  bool columns_seen = false;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# seed ", 0) == 0) {
      m.seed = parse_number<std::uint64_t>(line.substr(7), "seed");
      continue;
    }
    if (line.rfind("# error ", 0) == 0) {
      m.errors.push_back(line.substr(8));
      continue;
    }
    if (line[0] == '#') continue;
    if (!columns_seen) {
      if (line != kManifestColumns) throw FormatError(path.string() + ": unexpected column header");
      columns_seen = true;
      continue;
    }
    const auto cells = split_tabs(line);
    if (cells.size() != 9)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
    ManifestEntry e;
    e.id = cells[0];
    e.scene.speech_angle = parse_number<int>(cells[1], "speech_angle");
    e.scene.noise_angle = parse_number<int>(cells[2], "noise_angle");
    e.scene.source_radius = parse_number<double>(cells[3], "source_radius");
    e.scene.snr_db = parse_number<double>(cells[4], "snr_db");
    e.scene.seed = parse_number<std::uint64_t>(cells[5], "seed");
    e.noisy = cells[6];
    e.clean = cells[7];
    e.noise = cells[8];
    m.entries.push_back(std::move(e));
  }
  return m;
}

GeneratedScene synthesize_scene(const SceneSpec& scene, const DatasetConfig& config, const SignalSource& speech,
                                const SignalSource& noise) {
  validate_scene(scene, config);
  const auto n = static_cast<std::size_t>(std::llround(config.duration_s * config.room.sample_rate));
  DMSE_REQUIRE(n > 0, "scene: duration must be positive");

  std::mt19937_64 rng(scene.seed);
  const auto dry_speech = speech.draw(n, rng);
  const auto dry_noise = noise.draw(n, rng);

  const auto array = ArrayGeometry::centered(config.array_midpoint, config.mic_spacing);
  array.validate(config.room);
  const Point3 mid = array.midpoint();
  const Point3 speech_pos = source_at_angle(mid, scene.source_radius, scene.speech_angle);
  const Point3 noise_pos = source_at_angle(mid, scene.source_radius, scene.noise_angle);

  const std::array<std::vector<double>, 2> speech_rirs{image_rir(config.room, speech_pos, array.mics[0]),
                                                         image_rir(config.room, speech_pos, array.mics[1])};
  const std::array<std::vector<double>, 2> noise_rirs{image_rir(config.room, noise_pos, array.mics[0]),
                                                        image_rir(config.room, noise_pos, array.mics[1])};
  const StereoSignal wet_speech = spatialize(dry_speech, speech_rirs);
  const StereoSignal wet_noise = spatialize(dry_noise, noise_rirs);
  Mixture mix = mix_at_snr(wet_speech, wet_noise, scene.snr_db);

  double peak = 0.0;
  for (const auto& ch : mix.mixture)
    for (double v : ch) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? config.peak_level / peak : 1.0;

  GeneratedScene out;
  for (int c = 0; c < 2; ++c) {
    out.noisy[c] = std::move(mix.mixture[c]);
    for (auto& v : out.noisy[c]) v *= gain;
  }
  out.clean = wet_speech[0];
  out.noise = std::move(mix.noise[0]);
  for (auto& v : out.clean) v *= gain;
  for (auto& v : out.noise) v *= gain;
  return out;
}

Manifest generate_dataset(const std::vector<SceneSpec>& scenes, const SignalSource& speech, const SignalSource& noise,
                          const fs::path& out_dir, const DatasetConfig& config, std::uint64_t run_seed) {
  DMSE_REQUIRE(!scenes.empty(), "generate_dataset: no scenes");
  for (const auto& s : scenes) validate_scene(s, config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  Manifest m;
  m.root = out_dir;
  m.seed = run_seed;
  if (const auto* dir = dynamic_cast<const WavDirectorySource*>(&speech))
    m.errors.insert(m.errors.end(), dir->errors().begin(), dir->errors().end());
  if (const auto* dir = dynamic_cast<const WavDirectorySource*>(&noise))
    m.errors.insert(m.errors.end(), dir->errors().begin(), dir->errors().end());

  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04zu", i);
    ManifestEntry e{id, scenes[i], std::string(id) + "_noisy.wav", std::string(id) + "_clean.wav",
                    std::string(id) + "_noise.wav"};
    try {
      GeneratedScene g = synthesize_scene(scenes[i], config, speech, noise);
      const int rate = config.room.sample_rate;
      write_wav(out_dir / e.noisy, Wav{rate, {g.noisy[0], g.noisy[1]}});
      write_wav(out_dir / e.clean, Wav{rate, {g.clean}});
      write_wav(out_dir / e.noise, Wav{rate, {g.noise}});
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& ex) {
      m.errors.push_back(std::string(id) + ": " + ex.what());
      continue;
    }
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, out_dir / kManifestFileName);
  return m;
}

}  // namespace dmse
