// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <set>

#include "dmse/dataset.hpp"
#include "dmse/error.hpp"
#include "dmse/wav.hpp"
#include "test_util.hpp"

namespace dmse {
namespace {

DatasetConfig short_config() {
  DatasetConfig c;
  c.duration_s = 0.25;
  c.room.max_order = 2;
  return c;
}

TEST(Scenes, RandomScenesRespectConstraints) {
  const DatasetConfig c;
  const auto scenes = random_scenes(200, 11, c);
  std::set<int> angles;
  for (const auto& s : scenes) {
    EXPECT_NO_THROW(validate_scene(s, c));
    angles.insert(s.speech_angle);
  }
  EXPECT_GT(angles.size(), 20u);
  const auto again = random_scenes(200, 11, c);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    EXPECT_EQ(scenes[i].seed, again[i].seed);
    EXPECT_EQ(scenes[i].snr_db, again[i].snr_db);
  }
}

TEST(Scenes, ValidationRejectsBadScenes) {
  const DatasetConfig c;
  SceneSpec s;
  s.speech_angle = 15;
  EXPECT_THROW(validate_scene(s, c), InvalidArgument);
  s = SceneSpec{};
  s.noise_angle = 0;
  EXPECT_THROW(validate_scene(s, c), InvalidArgument);
  s = SceneSpec{};
  s.snr_db = 12.0;
  EXPECT_THROW(validate_scene(s, c), InvalidArgument);
  s = SceneSpec{};
  s.source_radius = 0.0;
  EXPECT_THROW(validate_scene(s, c), InvalidArgument);
}

TEST(Sources, SyntheticSignalsAreDeterministicAndNonSilent) {
  SyntheticSpeech speech;
  SyntheticNoise noise(NoiseColor::pink);
  std::mt19937_64 a(4), b(4);
  const auto x = speech.draw(8000, a), y = speech.draw(8000, b);
  EXPECT_EQ(x, y);
  EXPECT_GT(energy(x), 0.0);
  const auto n = noise.draw(8000, a);
  EXPECT_NEAR(energy(n) / 8000.0, 1.0, 1e-9);
}

TEST(Scenes, SynthesizedSceneHitsTargetSnrAndPeak) {
  const auto c = short_config();
  SceneSpec s;
  s.snr_db = 3.5;
  s.seed = 99;
  const auto g = synthesize_scene(s, c, SyntheticSpeech{}, SyntheticNoise{NoiseColor::white});
  ASSERT_EQ(g.noisy[0].size(), 4000u);
  EXPECT_NEAR(snr_db(g.clean, g.noise), 3.5, 1e-9);
  double peak = 0.0;
  for (const auto& ch : g.noisy)
    for (double v : ch) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 0.5, 1e-12);
  for (std::size_t i = 0; i < g.clean.size(); ++i) EXPECT_NEAR(g.noisy[0][i], g.clean[i] + g.noise[i], 1e-12);
  EXPECT_NE(g.noisy[0], g.noisy[1]);
}

TEST(Manifest, RoundTripsEntriesAndErrors) {
  const auto dir = testing::scratch_dir();
  Manifest m;
  m.seed = 42;
  m.errors = {"scene_0003: bad"};
  m.entries.push_back({"scene_0000", {10, 200, 1.5, -2.25, 123456789012345ull}, "a.wav", "b.wav", "c.wav"});
  write_manifest(m, dir / "m.tsv");
  const auto r = read_manifest(dir / "m.tsv");
  EXPECT_EQ(r.root, dir);
  EXPECT_EQ(r.seed, 42u);
  EXPECT_EQ(r.errors, m.errors);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].scene.noise_angle, 200);
  EXPECT_EQ(r.entries[0].scene.snr_db, -2.25);
  EXPECT_EQ(r.entries[0].scene.seed, 123456789012345ull);
  EXPECT_EQ(r.entries[0].noise, "c.wav");
}

TEST(Manifest, RejectsMalformedFiles) {
  const auto dir = testing::scratch_dir();
  EXPECT_THROW(read_manifest(dir / "missing.tsv"), IoError);
  {
    std::ofstream(dir / "bad.tsv") << "hello\n";
  }
  EXPECT_THROW(read_manifest(dir / "bad.tsv"), FormatError);
  {
    std::ofstream(dir / "short.tsv") << "# dmse-manifest 1\n"
                                     << "id\tspeech_angle\tnoise_angle\tsource_radius\tsnr_db\tseed\tnoisy\tclean\tnoise\n"
                                     << "x\t1\t2\n";
  }
  EXPECT_THROW(read_manifest(dir / "short.tsv"), FormatError);
}

TEST(Generate, WritesFilesAndManifest) {
  const auto dir = testing::scratch_dir();
  const auto c = short_config();
  const auto scenes = random_scenes(3, 5, c);
  const auto m = generate_dataset(scenes, SyntheticSpeech{}, SyntheticNoise{}, dir, c, 5);
  ASSERT_EQ(m.entries.size(), 3u);
  const auto r = read_manifest(dir / kManifestFileName);
  ASSERT_EQ(r.entries.size(), 3u);
  const auto noisy = read_wav(r.resolve(r.entries[1].noisy));
  EXPECT_EQ(noisy.num_channels(), 2u);
  EXPECT_EQ(noisy.num_samples(), 4000u);
  EXPECT_EQ(read_wav(r.resolve(r.entries[1].clean)).num_channels(), 1u);
}

TEST(Generate, WavDirectorySkipsUnusableFiles) {
  const auto dir = testing::scratch_dir();
  write_wav(dir / "a.wav", Wav{16000, {testing::random_signal(500, 1, 0.1)}});
  write_wav(dir / "silent.wav", Wav{16000, {std::vector<double>(500, 0.0)}});
  write_wav(dir / "rate.wav", Wav{8000, {testing::random_signal(500, 2, 0.1)}});
  std::ofstream(dir / "junk.wav") << "junk";
  WavDirectorySource src(dir);
  EXPECT_EQ(src.size(), 1u);
  EXPECT_EQ(src.errors().size(), 3u);

  std::mt19937_64 rng(1);
  EXPECT_EQ(src.draw(1200, rng).size(), 1200u);

  const auto out = dir / "out";
  const auto c = short_config();
  const auto m = generate_dataset(random_scenes(1, 1, c), src, SyntheticNoise{}, out, c);
  EXPECT_EQ(m.errors.size(), 3u);
  EXPECT_EQ(read_manifest(out / kManifestFileName).errors.size(), 3u);

  const auto empty = dir / "empty";
  std::filesystem::create_directories(empty);
  EXPECT_THROW(WavDirectorySource{empty}, IoError);
}

}  // namespace
}  // namespace dmse
