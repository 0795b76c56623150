// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "dmse/error.hpp"
#include "dmse/eval.hpp"
#include "dmse/wav.hpp"
#include "test_util.hpp"

namespace dmse {
namespace {

std::vector<double> speech(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return SyntheticSpeech{}.draw(n, rng);
}

std::vector<double> mix(const std::vector<double>& s, double snr, std::uint64_t seed) {
  const auto v = testing::random_signal(s.size(), seed);
  const double k = std::sqrt(energy(s) / (energy(v) * std::pow(10.0, snr / 10.0)));
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + k * v[i];
  return out;
}

TEST(SiSdr, MatchesDefinition) {
  const auto s = testing::random_signal(1000, 1);
  const auto e = testing::random_signal(1000, 2, 0.3);
  std::vector<double> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s[i] + e[i];
  double sy = 0, ss = 0;
  for (std::size_t i = 0; i < y.size(); ++i) sy += s[i] * y[i], ss += s[i] * s[i];
  const double a = sy / ss;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < y.size(); ++i) num += a * a * s[i] * s[i], den += std::pow(y[i] - a * s[i], 2);
  EXPECT_NEAR(si_sdr(s, y), 10 * std::log10(num / den), 1e-10);
}

TEST(SiSdr, IsScaleInvariantAndClamped) {
  const auto s = testing::random_signal(800, 3);
  const auto y = mix(s, 5.0, 4);
  std::vector<double> y2(y);
  for (auto& v : y2) v *= 0.125;  // power-of-two scale keeps the arithmetic exact
  EXPECT_EQ(si_sdr(s, y), si_sdr(s, y2));
  EXPECT_EQ(si_sdr(s, s), kSiSdrClampDb);
  EXPECT_THROW(si_sdr(std::vector<double>(4, 0.0), std::vector<double>(4, 1.0)), InvalidArgument);
  EXPECT_THROW(si_sdr(s, std::vector<double>(3, 0.0)), InvalidArgument);
}

TEST(SegSnr, ClampsAndSkipsSilence) {
  auto s = testing::random_signal(4096, 5);
  for (std::size_t i = 2048; i < s.size(); ++i) s[i] = 0.0;  // silent second half
  EXPECT_NEAR(segmental_snr(s, s), kSegSnrMaxDb, 1e-12);
  const auto y = mix(s, 10.0, 6);
  const double seg = segmental_snr(s, y);
  EXPECT_GT(seg, 5.0);
  EXPECT_LT(seg, 15.0);
  EXPECT_EQ(segmental_snr(s, std::vector<double>(s.size(), 0.0)), 0.0);
  std::vector<double> neg(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) neg[i] = -10.0 * s[i];
  EXPECT_EQ(segmental_snr(s, neg), kSegSnrMinDb);
  EXPECT_THROW(segmental_snr(std::vector<double>(600, 0.0), std::vector<double>(600, 0.0)), InvalidArgument);
}

TEST(Stoi, IdenticalSignalsScoreOne) {
  const auto s = speech(32000, 7);
  EXPECT_NEAR(stoi(s, s), 1.0, 1e-6);
}

TEST(Stoi, IgnoresGlobalGainOnProcessedSignal) {
  const auto s = speech(32000, 11);
  auto y = mix(s, 2.0, 12);
  const double a = stoi(s, y);
  for (auto& v : y) v *= 0.3;
  EXPECT_NEAR(stoi(s, y), a, 1e-6);
}

TEST(Stoi, IncreasesWithMixtureSnr) {
  const auto s = speech(32000, 8);
  const double low = stoi(s, mix(s, -5.0, 9)), mid = stoi(s, mix(s, 0.0, 9)), high = stoi(s, mix(s, 10.0, 9));
  EXPECT_LT(low, mid);
  EXPECT_LT(mid, high);
  EXPECT_GE(low, 0.0);
  EXPECT_LE(high, 1.0);
}

TEST(Stoi, RejectsShortOrMismatchedInput) {
  const auto s = speech(2000, 10);
  EXPECT_THROW(stoi(s, s), InvalidArgument);
  EXPECT_THROW(stoi(s, s, 8000), InvalidArgument);
  EXPECT_THROW(stoi(s, std::vector<double>(10)), InvalidArgument);
}

TEST(Report, MeansAndRoundTrip) {
  MetricReport r;
  r.records = {{"a", 1.0, 2.0, 0.5}, {"b", 3.0, 4.0, 0.75}};
  r.errors = {"c: broken"};
  r.finalize();
  EXPECT_EQ(r.mean_si_sdr, 2.0);
  EXPECT_EQ(r.mean_seg_snr, 3.0);
  EXPECT_EQ(r.mean_stoi, 0.625);
  const auto dir = testing::scratch_dir();
  write_report(r, dir / "r.tsv");
  const auto text = testing::read_file(dir / "r.tsv");
  EXPECT_EQ(text.rfind("id\tsi_sdr\tseg_snr\tstoi\n", 0), 0u);
  EXPECT_NE(text.find("mean\t2\t3\t0.625"), std::string::npos);
  const auto back = read_report(dir / "r.tsv");
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[1].id, "b");
  EXPECT_EQ(back.mean_stoi, 0.625);
  EXPECT_EQ(back.errors, r.errors);
  std::ofstream(dir / "bad.tsv") << "nope\n";
  EXPECT_THROW(read_report(dir / "bad.tsv"), FormatError);
}

TEST(EvaluateManifest, ScoresEverySource) {
  const auto dir = testing::scratch_dir();
  DatasetConfig c;
  c.duration_s = 1.0;
  c.room.max_order = 1;
  const auto m = generate_dataset(random_scenes(2, 4, c), SyntheticSpeech{}, SyntheticNoise{}, dir, c);
  const auto clean = evaluate_manifest(m, EstimateSource::clean);
  ASSERT_EQ(clean.records.size(), 2u);
  EXPECT_EQ(clean.mean_si_sdr, kSiSdrClampDb);
  EXPECT_NEAR(clean.mean_stoi, 1.0, 1e-6);
  const auto noisy = evaluate_manifest(m, EstimateSource::noisy);
  EXPECT_LT(noisy.mean_si_sdr, 20.0);

  const auto est = dir / "est";
  std::filesystem::create_directories(est);
  write_wav(est / enhanced_file_name(m.entries[0].id), read_wav(m.resolve(m.entries[0].clean)));
  write_wav(est / enhanced_file_name(m.entries[1].id), Wav{16000, {std::vector<double>(100, 0.1)}});
  const auto d = evaluate_manifest(m, EstimateSource::directory, est);
  EXPECT_EQ(d.records.size(), 1u);
  ASSERT_EQ(d.errors.size(), 1u);
  EXPECT_NE(d.errors[0].find("differs"), std::string::npos);
  std::filesystem::remove(est / enhanced_file_name(m.entries[1].id));
  EXPECT_THROW(evaluate_manifest(m, EstimateSource::directory, est), IoError);
  EXPECT_THROW(evaluate_manifest(m, EstimateSource::directory), InvalidArgument);
}

}  // namespace
}  // namespace dmse
