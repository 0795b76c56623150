// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <random>

#include "dmse/error.hpp"
#include "dmse/snr.hpp"
#include "test_util.hpp"

namespace dmse {
namespace {

SnrStats random_stats(std::size_t bins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mu(-5.0, 5.0), sigma(10.0, 20.0);
  SnrStats s;
  for (std::size_t f = 0; f < bins; ++f) {
    s.mu.push_back(mu(rng));
    s.sigma.push_back(sigma(rng));
  }
  s.sample_count = 1;
  return s;
}

TEST(ErfInv, InvertsErf) {
  for (double x = -5.0; x <= 5.0; x += 0.01) {
    const double y = std::erf(x);
    if (std::abs(y) >= 1.0) continue;
    EXPECT_NEAR(std::erf(erf_inv(y)), y, 1e-15) << x;
  }
  EXPECT_EQ(erf_inv(0.0), 0.0);
  EXPECT_NEAR(erf_inv(0.5), 0.4769362762044699, 1e-14);
  EXPECT_THROW(erf_inv(1.0), InvalidArgument);
}

TEST(InstantaneousSnr, ClampsAndFloors) {
  RealGrid s(1, 4), n(1, 4);
  s(0, 0) = 10.0, n(0, 0) = 1.0;
  s(0, 1) = 1.0, n(0, 1) = 0.0;
  s(0, 2) = 0.0, n(0, 2) = 1.0;
  s(0, 3) = 1e-3, n(0, 3) = 1e-6;
  const auto xi = instantaneous_snr(s, n);
  EXPECT_EQ(xi.domain, SnrDomain::db);
  EXPECT_NEAR(xi.values(0, 0), 20.0, 1e-12);
  EXPECT_EQ(xi.values(0, 1), 40.0);
  EXPECT_EQ(xi.values(0, 2), -40.0);
  EXPECT_EQ(xi.values(0, 3), 40.0);
  EXPECT_THROW(instantaneous_snr(s, RealGrid(2, 4)), InvalidArgument);
}

TEST(InstantaneousSnr, ScalingCleanByTenAddsTwentyDb) {
  RealGrid s(3, 5), n(3, 5, 1.0), s10(3, 5);
  const auto r = testing::random_signal(15, 30);
  for (std::size_t i = 0; i < 15; ++i) {
    s.data()[i] = 0.05 + std::abs(r[i]);
    s10.data()[i] = 10.0 * s.data()[i];
  }
  const auto a = instantaneous_snr(s, n), b = instantaneous_snr(s10, n);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(b.values.data()[i] - a.values.data()[i], 20.0, 1e-12);
}

TEST(StatsAccumulator, MatchesTwoPassPopulationMoments) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(3.0, 7.0);
  const std::size_t bins = 5;
  SnrStatsAccumulator acc(bins);
  std::vector<std::vector<double>> all(bins);
  for (int chunk = 0; chunk < 4; ++chunk) {
    SnrGrid xi{RealGrid(13 + chunk, bins), SnrDomain::db};
    for (std::size_t t = 0; t < xi.values.frames(); ++t)
      for (std::size_t f = 0; f < bins; ++f) all[f].push_back(xi.values(t, f) = g(rng) + static_cast<double>(f));
    acc.add(xi);
  }
  const auto s = acc.finish();
  EXPECT_EQ(s.sample_count, all[0].size());
  for (std::size_t f = 0; f < bins; ++f) {
    double m = 0.0;
    for (double v : all[f]) m += v;
    m /= static_cast<double>(all[f].size());
    double var = 0.0;
    for (double v : all[f]) var += (v - m) * (v - m);
    var /= static_cast<double>(all[f].size());
    EXPECT_NEAR(s.mu[f], m, 1e-12);
    EXPECT_NEAR(s.sigma[f], std::sqrt(var), 1e-12);
  }
}

TEST(StatsAccumulator, FloorsSigmaAndRejectsMisuse) {
  SnrStatsAccumulator acc(2);
  EXPECT_THROW(acc.finish(), InvalidArgument);
  SnrGrid xi{RealGrid(3, 2, 5.0), SnrDomain::db};
  acc.add(xi);
  EXPECT_EQ(acc.finish().sigma[0], kSigmaMinDb);
  EXPECT_THROW(acc.add(SnrGrid{RealGrid(3, 3), SnrDomain::db}), InvalidArgument);
  EXPECT_THROW(acc.add(SnrGrid{RealGrid(3, 2), SnrDomain::linear}), InvalidArgument);
}

TEST(Stats, FileRoundTripIsExact) {
  const auto dir = testing::scratch_dir();
  const auto s = random_stats(257, 9);
  write_stats(s, dir / "s.txt");
  const auto r = read_stats(dir / "s.txt");
  EXPECT_EQ(r.mu, s.mu);
  EXPECT_EQ(r.sigma, s.sigma);
  EXPECT_EQ(r.sample_count, s.sample_count);
  std::ofstream(dir / "bad.txt") << "# dmse-snr-stats 1\nbins 3\nsample_count 1\n0 1 1\n";
  EXPECT_THROW(read_stats(dir / "bad.txt"), FormatError);
  EXPECT_THROW(read_stats(dir / "nope.txt"), IoError);
}

TEST(Mapping, IsGaussianCdf) {
  SnrStats s{{2.0}, {4.0}, 1};
  SnrGrid xi{RealGrid(1, 1, 2.0), SnrDomain::db};
  EXPECT_DOUBLE_EQ(map_snr(xi, s).values(0, 0), 0.5);
  xi.values(0, 0) = 6.0;
  EXPECT_NEAR(map_snr(xi, s).values(0, 0), 0.8413447460685429, 1e-15);
  EXPECT_THROW(map_snr(SnrGrid{RealGrid(1, 1), SnrDomain::linear}, s), InvalidArgument);
}

TEST(Mapping, IsStrictlyMonotoneInsideUnitInterval) {
  const auto s = random_stats(4, 31);
  SnrGrid xi{RealGrid(161, 4), SnrDomain::db};
  for (std::size_t t = 0; t < 161; ++t)
    for (std::size_t f = 0; f < 4; ++f) xi.values(t, f) = -40.0 + 0.5 * static_cast<double>(t);
  const auto m = map_snr(xi, s);
  for (std::size_t f = 0; f < 4; ++f)
    for (std::size_t t = 0; t < 161; ++t) {
      EXPECT_GT(m.values(t, f), 0.0);
      EXPECT_LT(m.values(t, f), 1.0);
      if (t > 0) EXPECT_GT(m.values(t, f), m.values(t - 1, f));
    }
}

TEST(Mapping, UnmapInvertsMapAcrossRange) {
  const std::size_t bins = 257;
  const auto s = random_stats(bins, 17);
  SnrGrid xi{RealGrid(79, bins), SnrDomain::db};
  for (std::size_t t = 0; t < 79; ++t)
    for (std::size_t f = 0; f < bins; ++f) xi.values(t, f) = -39.0 + 78.0 * static_cast<double>(t) / 78.0;
  const auto lin = unmap_snr(map_snr(xi, s), s);
  EXPECT_EQ(lin.domain, SnrDomain::linear);
  double worst = 0.0;
  for (std::size_t i = 0; i < lin.values.size(); ++i) {
    const double want = std::pow(10.0, xi.values.data()[i] / 10.0);
    worst = std::max(worst, std::abs(lin.values.data()[i] - want) / want);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Mapping, UnmapClipsSaturatedProbabilities) {
  SnrStats s{{0.0}, {10.0}, 1};
  SnrGrid p{RealGrid(2, 1), SnrDomain::mapped};
  p.values(0, 0) = 0.0;
  p.values(1, 0) = 1.0;
  const auto lin = unmap_snr(p, s);
  const double z = 10.0 * std::sqrt(2.0) * erf_inv(1.0 - 2e-7);
  EXPECT_NEAR(lin.values(0, 0), std::pow(10.0, -z / 10.0), 1e-12);
  EXPECT_NEAR(lin.values(1, 0) / std::pow(10.0, z / 10.0), 1.0, 1e-9);
}

TEST(Gain, IsWienerRule) {
  SnrGrid xi{RealGrid(1, 4), SnrDomain::linear};
  xi.values(0, 0) = 0.0;
  xi.values(0, 1) = 1.0;
  xi.values(0, 2) = 3.0;
  xi.values(0, 3) = 1e12;
  const auto g = mmse_gain(xi);
  EXPECT_EQ(g.values(0, 0), 0.0);
  EXPECT_EQ(g.values(0, 1), 0.5);
  EXPECT_EQ(g.values(0, 2), 0.75);
  EXPECT_LT(g.values(0, 3), 1.0);
  SnrGrid ramp{RealGrid(1, 100), SnrDomain::linear};
  for (std::size_t i = 0; i < 100; ++i) ramp.values(0, i) = std::pow(10.0, (static_cast<double>(i) - 50.0) / 10.0);
  const auto gr = mmse_gain(ramp);
  for (std::size_t i = 1; i < 100; ++i) EXPECT_GT(gr.values(0, i), gr.values(0, i - 1));
  EXPECT_THROW(mmse_gain(SnrGrid{RealGrid(1, 1), SnrDomain::db}), InvalidArgument);
}

TEST(Reconstruct, UnitGainOnNoisyMagnitudeIsIdentity) {
  const auto x = testing::random_signal(8000, 6, 0.2);
  const auto spec = stft(x);
  const auto mag = mag_phase(spec).magnitude;
  const auto y = reconstruct(mag, GainGrid{RealGrid(mag.frames(), mag.bins(), 1.0)}, spec);
  for (std::size_t n = 512; n + 512 < y.size(); ++n) EXPECT_NEAR(y[n], x[n], 1e-10);
  const auto half = reconstruct(mag, GainGrid{RealGrid(mag.frames(), mag.bins(), 0.5)}, spec);
  for (std::size_t n = 512; n + 512 < y.size(); ++n) EXPECT_NEAR(half[n], 0.5 * x[n], 1e-10);
}

TEST(ComputeStats, MatchesManualAccumulationOverManifest) {
  const auto dir = testing::scratch_dir();
  DatasetConfig c;
  c.duration_s = 0.5;
  c.room.max_order = 1;
  const auto m = generate_dataset(random_scenes(2, 3, c), SyntheticSpeech{}, SyntheticNoise{}, dir, c);
  const auto s = compute_stats(m);
  EXPECT_EQ(s.bins(), 257u);
  EXPECT_EQ(s.sample_count, 2u * frame_count(8000, StftConfig{}));
  for (std::size_t f = 0; f < s.bins(); ++f) {
    EXPECT_GE(s.mu[f], -40.0);
    EXPECT_LE(s.mu[f], 40.0);
    EXPECT_GE(s.sigma[f], kSigmaMinDb);
  }
  EXPECT_THROW(compute_stats(Manifest{}), InvalidArgument);
}

}  // namespace
}  // namespace dmse
