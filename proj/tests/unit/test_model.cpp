// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>

#include "dmse/error.hpp"
#include "dmse/model.hpp"
#include "test_util.hpp"

namespace dmse {
namespace {

using ad::Shape;
using TD = ad::Tensor<double>;

ModelConfig small_config() {
  ModelConfig c;
  c.channels = {4, 8};
  c.freq_dilation = {1, 2};
  c.heads = 2;
  c.lstm_layers = 1;
  c.lstm_hidden = 8;
  c.input_bins = 17;
  return c;
}

TD features(std::size_t b, std::size_t t, std::size_t f, std::uint64_t seed) {
  auto v = testing::random_signal(b * t * f, seed);
  for (auto& x : v) x = std::abs(x);
  return TD({b, 1, t, f}, v);
}

TEST(Config, TinyPresetIsUnderBudget) {
  const auto c = ModelConfig::tiny();
  EXPECT_NO_THROW(c.validate());
  const auto p = init_params<float>(c, 1);
  EXPECT_LT(p.parameter_count(), 300000u);
  std::size_t n = 0;
  for (const auto& t : p.trainable()) n += t.size();
  EXPECT_EQ(n, p.parameter_count());
  EXPECT_EQ(c.level_bins(), (std::vector<std::size_t>{257, 129, 65, 33, 17, 9}));
}

TEST(Config, ValidationRejectsInconsistentSettings) {
  auto c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_config();
  c.use_decoder = c.use_snr_head = false;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_config();
  c.freq_dilation = {1};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_config();
  c.channels.clear();
  c.freq_dilation.clear();
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, SerializationRoundTrips) {
  auto c = small_config();
  c.use_snr_head = false;
  c.attention_scaling = true;
  EXPECT_EQ(ModelConfig::deserialize(c.serialize()), c);
  EXPECT_THROW(ModelConfig::deserialize("bogus=1\n"), FormatError);
  EXPECT_THROW(ModelConfig::deserialize("heads\n"), FormatError);
  EXPECT_THROW(ModelConfig::deserialize("heads=x\n"), FormatError);
}

TEST(Init, IsDeterministicAndFollowsScheme) {
  const auto c = small_config();
  const auto a = init_params<double>(c, 7), b = init_params<double>(c, 7), d = init_params<double>(c, 8);
  EXPECT_EQ(a.at("enc1.block1.kernel").vec(), b.at("enc1.block1.kernel").vec());
  EXPECT_NE(a.at("enc1.block1.kernel").vec(), d.at("enc1.block1.kernel").vec());
  const auto& k = a.at("lstm1.w_ih");
  const double bound = 1.0 / std::sqrt(static_cast<double>(c.lstm_hidden));
  for (double v : k.values()) EXPECT_LE(std::abs(v), bound);
  const auto& bias = a.at("lstm1.bias");
  const std::size_t h = c.lstm_hidden;
  for (std::size_t i = 0; i < 4 * h; ++i) EXPECT_EQ(bias.values()[i], (i >= h && i < 2 * h) ? 1.0 : 0.0);
  for (double v : a.at("enc2.block2.bn_scale").values()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(k.dim(0), 2 * 8 * c.level_bins().back());
  EXPECT_THROW(a.at("nope"), InvalidArgument);
}

TEST(Init, AblationsDropTheirParameters) {
  auto c = small_config();
  c.use_mhca = false;
  c.use_snr_head = false;
  const auto p = init_params<float>(c, 1);
  for (const auto& [name, t] : p.weights) {
    EXPECT_NE(name.rfind("mhca.", 0), 0u) << name;
    EXPECT_NE(name.rfind("snr.", 0), 0u) << name;
  }
  c = small_config();
  c.use_decoder = false;
  for (const auto& [name, t] : init_params<float>(c, 1).weights) EXPECT_NE(name.rfind("dec.", 0), 0u) << name;
}

TEST(Forward, ProducesExpectedShapesAndRanges) {
  const auto c = small_config();
  auto p = init_params<double>(c, 3);
  ad::Tape<double> tape(false);
  const auto out = model_forward(tape, features(2, 5, 17, 1), features(2, 5, 17, 2), p, c, ad::Mode::train);
  ASSERT_EQ(out.est_mag.shape(), (Shape{2, 5, 17}));
  ASSERT_EQ(out.snr_mapped.shape(), (Shape{2, 5, 17}));
  for (double v : out.est_mag.values()) EXPECT_GT(v, 0.0);
  for (double v : out.snr_mapped.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  ASSERT_EQ(out.masks.size(), 2u);
  EXPECT_EQ(out.masks[1].shape(), (Shape{2, 8, 5, c.level_bins()[2]}));
  for (const auto& m : out.masks)
    for (double v : m.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  EXPECT_THROW(model_forward(tape, features(2, 5, 16, 1), features(2, 5, 16, 2), p, c, ad::Mode::train),
               InvalidArgument);
}

TEST(Forward, UnitGateMatchesModelWithoutAttention) {
  const auto c = small_config();
  auto no_mhca = c;
  no_mhca.use_mhca = false;
  auto p = init_params<double>(c, 4);
  ad::Tape<double> tape(false);
  const auto x1 = features(1, 4, 17, 5), x2 = features(1, 4, 17, 6);
  const auto a = model_forward(tape, x1, x2, p, c, ad::Mode::eval, ForwardOptions{true});
  const auto b = model_forward(tape, x1, x2, p, no_mhca, ad::Mode::eval);
  const auto g = model_forward(tape, x1, x2, p, c, ad::Mode::eval);
  EXPECT_TRUE(b.masks.empty());
  double diff_gated = 0.0;
  for (std::size_t i = 0; i < a.est_mag.size(); ++i) {
    EXPECT_NEAR(a.est_mag.values()[i], b.est_mag.values()[i], 1e-14);
    EXPECT_NEAR(a.snr_mapped.values()[i], b.snr_mapped.values()[i], 1e-14);
    diff_gated = std::max(diff_gated, std::abs(g.est_mag.values()[i] - b.est_mag.values()[i]));
  }
  EXPECT_GT(diff_gated, 1e-6);
}

TEST(Forward, OutputsAreCausalWithoutAttention) {
  auto c = small_config();
  c.use_mhca = false;
  auto p = init_params<double>(c, 5);
  ad::Tape<double> tape(false);
  const auto x1 = features(1, 6, 17, 7), x2 = features(1, 6, 17, 8);
  auto y1 = x1.clone(), y2 = x2.clone();
  for (std::size_t f = 0; f < 17; ++f) y1.values_mut()[5 * 17 + f] += 3.0;
  const auto a = model_forward(tape, x1, x2, p, c, ad::Mode::eval);
  const auto b = model_forward(tape, y1, y2, p, c, ad::Mode::eval);
  for (std::size_t i = 0; i < 5 * 17; ++i) {
    EXPECT_NEAR(a.est_mag.values()[i], b.est_mag.values()[i], 1e-14);
    EXPECT_NEAR(a.snr_mapped.values()[i], b.snr_mapped.values()[i], 1e-14);
  }
}

TEST(Mhca, GatesMultiplyFeatures) {
  const auto c = small_config();
  const auto p = init_params<double>(c, 6);
  ad::Tape<double> tape(false);
  const TD x1({4, 3, 5}, testing::random_signal(60, 9)), x2({4, 3, 5}, testing::random_signal(60, 10));
  const auto m = mhca_forward(tape, x1, x2, p, c, 0);
  ASSERT_EQ(m.z1.shape(), x1.shape());
  for (std::size_t i = 0; i < x1.size(); ++i) {
    EXPECT_NEAR(m.z1.values()[i], x1.values()[i] * m.gate1.values()[i], 1e-15);
    EXPECT_NEAR(m.z2.values()[i], x2.values()[i] * m.gate2.values()[i], 1e-15);
  }
}

TEST(Mhca, ExchangesInformationBetweenChannels) {
  const auto c = small_config();
  auto p = init_params<double>(c, 6);
  ad::Tape<double> tape(false);
  const TD x1({1, 4, 3, 5}, testing::random_signal(60, 9));
  const TD x2({1, 4, 3, 5}, testing::random_signal(60, 10)), x2b({1, 4, 3, 5}, testing::random_signal(60, 11));
  const auto a = mhca_forward(tape, x1, x2, p, c, 0), b = mhca_forward(tape, x1, x2b, p, c, 0);
  double diff = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) diff = std::max(diff, std::abs(a.z1.values()[i] - b.z1.values()[i]));
  EXPECT_GT(diff, 1e-6);
  // Without attention the primary path sees only its own input.
  const auto e1 = encoder_block_forward(tape, features(1, 3, 17, 1), p, c, 1, 0, ad::Mode::eval);
  const auto e2 = encoder_block_forward(tape, features(1, 3, 17, 1), p, c, 1, 0, ad::Mode::eval);
  EXPECT_EQ(e1.vec(), e2.vec());
}

TEST(Forward, ShapesDependOnlyOnGeometry) {
  const auto c = small_config();
  auto p = init_params<double>(c, 12);
  ad::Tape<double> tape(false);
  const auto a = model_forward(tape, features(1, 7, 17, 1), features(1, 7, 17, 2), p, c, ad::Mode::eval);
  const auto b = model_forward(tape, TD({1, 1, 7, 17}, 0.0), TD({1, 1, 7, 17}, 5.0), p, c, ad::Mode::eval);
  EXPECT_EQ(a.est_mag.shape(), b.est_mag.shape());
  EXPECT_EQ(a.snr_mapped.shape(), b.snr_mapped.shape());
  for (std::size_t i = 0; i < a.masks.size(); ++i) EXPECT_EQ(a.masks[i].shape(), b.masks[i].shape());
}

TEST(Loss, CombinesTermsWithAlpha) {
  const Shape s{1, 2, 3};
  const TD est(s, 1.0), target(s, 1.2), snr(s, 0.5);
  const TD mapped(s, 0.5 + std::sqrt(0.03)), mask({1, 2}, 1.0);
  ad::Tape<double> tape(false);
  const auto l = compute_loss(tape, est, snr, target, mapped, mask, 10.0);
  EXPECT_NEAR(l.report.l_f, 0.2, 1e-12);
  EXPECT_NEAR(l.report.l_snr, 0.03, 1e-12);
  EXPECT_NEAR(l.report.total, 0.5, 1e-12);
  EXPECT_NEAR(l.total.item(), 0.5, 1e-12);
  EXPECT_EQ(l.report.total, l.report.l_f + 10.0 * l.report.l_snr);
  const auto only_snr = compute_loss(tape, TD{}, snr, TD{}, mapped, mask, 10.0);
  EXPECT_EQ(only_snr.report.l_f, 0.0);
  EXPECT_NEAR(only_snr.report.total, 0.3, 1e-12);
}

TEST(Loss, IgnoresMaskedFrames) {
  const Shape s{2, 3, 4};
  const TD est(s, testing::random_signal(24, 11)), snr(s, testing::random_signal(24, 12));
  const TD target(s, testing::random_signal(24, 13)), mapped(s, testing::random_signal(24, 14));
  TD mask({2, 3}, std::vector<double>{1, 1, 0, 1, 0, 0});
  ad::Tape<double> tape(false);
  const auto base = compute_loss(tape, est, snr, target, mapped, mask, 10.0).report.total;
  auto est2 = est.clone(), mapped2 = mapped.clone();
  est2.values_mut()[2 * 4 + 1] = 100.0;   // batch 0, frame 2
  mapped2.values_mut()[4 * 4 + 3] = -50.0;  // batch 1, frame 1
  EXPECT_DOUBLE_EQ(compute_loss(tape, est2, snr, target, mapped2, mask, 10.0).report.total, base);
  EXPECT_THROW(compute_loss(tape, est, snr, target, mapped, TD({2, 3}, 0.0), 10.0), InvalidArgument);
}

TEST(Checkpoint, RoundTripsExactly) {
  const auto dir = testing::scratch_dir();
  Checkpoint ck{small_config(), init_params<float>(small_config(), 9), 1234, 7};
  ck.params.norm("enc1.block1.bn").running_mean.values_mut()[2] = 0.25f;
  save_checkpoint(ck, dir / "m.ckpt");
  const auto r = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(r.config, ck.config);
  EXPECT_EQ(r.seed, 1234u);
  EXPECT_EQ(r.epoch, 7u);
  for (const auto& [name, t] : ck.params.weights) EXPECT_EQ(r.params.at(name).vec(), t.vec()) << name;
  EXPECT_EQ(r.params.norms.at("enc1.block1.bn").running_mean.values()[2], 0.25f);
}

TEST(Checkpoint, RejectsDamagedFiles) {
  const auto dir = testing::scratch_dir();
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
  Checkpoint ck{small_config(), init_params<float>(small_config(), 9), 1, 1};
  save_checkpoint(ck, dir / "m.ckpt");
  const auto bytes = testing::read_file(dir / "m.ckpt");
  std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint(dir / "trunc.ckpt"), FormatError);
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << "NOTACKPT" << bytes.substr(8);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), FormatError);
  ck.params.weights.at("snr.bias").values_mut()[0] = std::nanf("");
  save_checkpoint(ck, dir / "nan.ckpt");
  EXPECT_THROW(load_checkpoint(dir / "nan.ckpt"), FormatError);
}

TEST(Masks, SummariesAverageOverFrequencyAndRoundTrip) {
  ad::Tensor<float> m({2, 2, 3, 4}, 0.0f);
  for (std::size_t i = 0; i < m.size(); ++i) m.values_mut()[i] = static_cast<float>(i % 4) / 8.0f;
  const auto s = mask_summaries({m});
  ASSERT_EQ(s.size(), 1u);
  ASSERT_EQ(s[0].frames(), 3u);
  ASSERT_EQ(s[0].bins(), 2u);
  EXPECT_NEAR(s[0](1, 1), 0.1875, 1e-7);
  const auto dir = testing::scratch_dir();
  const auto files = export_masks(s, dir);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "mask_block1.txt");
  const auto r = read_mask_file(files[0]);
  ASSERT_TRUE(r.same_shape(s[0]));
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r.data()[i], s[0].data()[i], 1e-9);
}

}  // namespace
}  // namespace dmse
