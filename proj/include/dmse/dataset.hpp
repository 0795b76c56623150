// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dmse/room.hpp"

namespace dmse {

struct SceneSpec {
  int speech_angle = 0;  // degrees, on the source grid
  int noise_angle = 180;
  double source_radius = 1.5;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  RoomConfig room;
  double mic_spacing = 0.02;
  Point3 array_midpoint{2.5, 2.5, 1.5};
  int grid_step_deg = 10;
  double source_radius = 1.5;
  double snr_min_db = -5.0;
  double snr_max_db = 10.0;
  double duration_s = 2.0;
  double peak_level = 0.5;  // peak of |noisy| after normalization
};

// Throws InvalidArgument when the scene violates the grid, distinct-angle,
// radius or SNR-range constraints.
void validate_scene(const SceneSpec& scene, const DatasetConfig& config);

// Random scenes drawn from one seeded generator: distinct grid angles for
// speech and noise, SNR uniform in [snr_min, snr_max], per-scene seeds.
std::vector<SceneSpec> random_scenes(std::size_t count, std::uint64_t seed, const DatasetConfig& config);

// Draws mono excerpts of a requested length.
class SignalSource {
 public:
  virtual ~SignalSource() = default;
  virtual std::vector<double> draw(std::size_t num_samples, std::mt19937_64& rng) const = 0;
  virtual std::string describe() const = 0;
};

// Harmonic complex with a gliding, vibrato-modulated f0, formant-shaped
// harmonic amplitudes and syllable-rate on/off envelopes.
class SyntheticSpeech : public SignalSource {
 public:
  explicit SyntheticSpeech(int sample_rate = 16000) : rate_(sample_rate) {}
  std::vector<double> draw(std::size_t num_samples, std::mt19937_64& rng) const override;
  std::string describe() const override { return "synthetic-speech"; }

 private:
  int rate_;
};

enum class NoiseColor { white, pink, random };

class SyntheticNoise : public SignalSource {
 public:
  explicit SyntheticNoise(NoiseColor color = NoiseColor::random) : color_(color) {}
  std::vector<double> draw(std::size_t num_samples, std::mt19937_64& rng) const override;
  std::string describe() const override;

 private:
  NoiseColor color_;
};

// Mono (or first channel of) WAV files under a directory, sorted by path.
// Unreadable files are skipped and reported through errors().
class WavDirectorySource : public SignalSource {
 public:
  explicit WavDirectorySource(const std::filesystem::path& dir, int sample_rate = 16000);
  std::vector<double> draw(std::size_t num_samples, std::mt19937_64& rng) const override;
  std::string describe() const override { return "wav-dir:" + dir_.string(); }
  const std::vector<std::string>& errors() const { return errors_; }
  std::size_t size() const { return clips_.size(); }

 private:
  std::filesystem::path dir_;
  std::vector<std::vector<double>> clips_;
  std::vector<std::string> errors_;
};

struct ManifestEntry {
  std::string id;
  SceneSpec scene;
  std::string noisy;  // paths relative to the dataset root
  std::string clean;
  std::string noise;
};

struct Manifest {
  std::filesystem::path root;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
  std::vector<std::string> errors;

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

inline constexpr const char* kManifestFileName = "manifest.tsv";

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

struct GeneratedScene {
  StereoSignal noisy;
  std::vector<double> clean;  // reverberant speech, primary channel
  std::vector<double> noise;  // scaled noise, primary channel
};

// Builds one scene in memory; deterministic in scene.seed.
GeneratedScene synthesize_scene(const SceneSpec& scene, const DatasetConfig& config,
                                const SignalSource& speech, const SignalSource& noise);

// Writes <id>_noisy.wav (2 ch), <id>_clean.wav and <id>_noise.wav plus
// manifest.tsv under out_dir, and returns the manifest.
Manifest generate_dataset(const std::vector<SceneSpec>& scenes, const SignalSource& speech,
                          const SignalSource& noise, const std::filesystem::path& out_dir,
                          const DatasetConfig& config, std::uint64_t run_seed = 0);

}  // namespace dmse
