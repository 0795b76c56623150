// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <random>

#include "dmse/error.hpp"
#include "dmse/suites.hpp"
#include "dmse/tensor.hpp"
#include "test_util.hpp"

namespace dmse::ad {
namespace {

using TD = Tensor<double>;

TD rand_tensor(Shape s, std::uint64_t seed, bool grad = false) {
  return TD(s, dmse::testing::random_signal(numel(s), seed), grad);
}

double at4(const TD& x, std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  return x.values()[((a * x.dim(1) + b) * x.dim(2) + c) * x.dim(3) + d];
}

TEST(Tensor, HandlesAliasAndCloneCopies) {
  TD a({2, 3}, 1.5);
  TD alias = a;
  alias.values_mut()[0] = 4.0;
  EXPECT_EQ(a.values()[0], 4.0);
  TD c = a.clone();
  c.values_mut()[0] = 0.0;
  EXPECT_EQ(a.values()[0], 4.0);
  EXPECT_THROW(TD({2, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(a.item(), InvalidArgument);
  const auto f = a.cast<float>();
  EXPECT_EQ(f.values()[0], 4.0f);
}

TEST(Tape, BackwardAccumulatesAndMustBeReset) {
  Tape<double> tape;
  TD x({3}, std::vector<double>{1, 2, 3}, true);
  auto y = sum(tape, mul(tape, x, x));
  EXPECT_EQ(y.item(), 14.0);
  tape.backward(y);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4, 6}));
  EXPECT_THROW(tape.backward(y), InvalidArgument);
  EXPECT_THROW(sum(tape, x), InvalidArgument);
  tape.reset();
  auto z = sum(tape, x);
  tape.backward(z);
  EXPECT_EQ(x.grad()[0], 3.0);  // accumulated on top of the first pass
}

TEST(Tape, NonRecordingTapeBuildsNoGraph) {
  Tape<double> tape(false);
  TD x({2}, 1.0, true);
  auto y = sum(tape, x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(tape.backward(y), InvalidArgument);
}

TEST(Ops, ShapeMismatchesThrow) {
  Tape<double> tape;
  TD a({2, 3}), b({3, 2});
  EXPECT_THROW(add(tape, a, b), InvalidArgument);
  EXPECT_THROW(matmul(tape, a, a), InvalidArgument);
  EXPECT_THROW(reshape(tape, a, {5}), InvalidArgument);
  EXPECT_THROW(permute(tape, a, {0, 0}), InvalidArgument);
  EXPECT_THROW(softmax(tape, a, 2), InvalidArgument);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Tape<double> tape;
  auto x = rand_tensor({3, 4, 5}, 2);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto y = softmax(tape, scale(tape, x, 50.0), axis);
    const Shape& s = y.shape();
    for (std::size_t i = 0; i < y.size(); ++i) {
      // Sum over the axis starting from each element whose axis index is 0.
      std::size_t stride = 1;
      for (std::size_t d = axis + 1; d < 3; ++d) stride *= s[d];
      if ((i / stride) % s[axis] != 0) continue;
      double acc = 0.0;
      for (std::size_t j = 0; j < s[axis]; ++j) acc += y.values()[i + j * stride];
      EXPECT_NEAR(acc, 1.0, 1e-12);
    }
  }
}

TEST(Ops, SoftmaxIgnoresConstantShift) {
  Tape<double> tape;
  auto x = rand_tensor({4, 6}, 40);
  auto shifted = x.clone();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) shifted.values_mut()[i * 6 + j] += 100.0 * static_cast<double>(i + 1);
  const auto a = softmax(tape, x, 1), b = softmax(tape, shifted, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-6);
}

TEST(Ops, ForwardAndBackwardAreBitReproducible) {
  auto run = [] {
    Tape<double> tape;
    auto x = rand_tensor({1, 2, 5, 6}, 41, true);
    auto w = rand_tensor({4, 2, 2, 3}, 42, true);
    Conv2dGeometry g;
    g.pad_t = Conv2dGeometry::causal_time(2);
    g.pad_f = {1, 1};
    auto y = conv2d(tape, x, w, TD{}, g);
    auto a = time_attention(tape, y, y, y, 2);
    auto loss = mean(tape, square(tape, sigmoid(tape, a)));
    tape.backward(loss);
    std::vector<double> out{loss.item()};
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Ops, PermuteAndConcatPlaceElements) {
  Tape<double> tape;
  auto x = rand_tensor({2, 3, 4}, 3);
  auto p = permute(tape, x, {2, 0, 1});
  ASSERT_EQ(p.shape(), (Shape{4, 2, 3}));
  EXPECT_EQ(p.values()[(3 * 2 + 1) * 3 + 2], x.values()[(1 * 3 + 2) * 4 + 3]);
  auto y = rand_tensor({2, 1, 4}, 4);
  auto c = concat(tape, {x, y}, 1);
  ASSERT_EQ(c.shape(), (Shape{2, 4, 4}));
  EXPECT_EQ(c.values()[(1 * 4 + 3) * 4 + 2], y.values()[1 * 4 + 2]);
  EXPECT_EQ(c.values()[(1 * 4 + 0) * 4 + 2], x.values()[(1 * 3 + 0) * 4 + 2]);
}

TEST(Ops, MatmulBroadcastsRankTwoOperand) {
  Tape<double> tape;
  auto a = rand_tensor({2, 3, 4}, 5);
  auto b = rand_tensor({4, 2}, 6);
  auto c = matmul(tape, a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 2}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.values()[(n * 3 + i) * 4 + k] * b.values()[k * 2 + j];
        EXPECT_NEAR(c.values()[(n * 3 + i) * 2 + j], acc, 1e-12);
      }
}

TEST(Conv, MatchesDirectCrossCorrelation) {
  Tape<double> tape;
  auto x = rand_tensor({2, 3, 7, 9}, 7);
  auto w = rand_tensor({4, 3, 2, 3}, 8);
  auto b = rand_tensor({4}, 9);
  Conv2dGeometry g;
  g.stride_f = 2;
  g.dilation_f = 2;
  g.pad_t = Conv2dGeometry::causal_time(2);
  g.pad_f = {2, 2};
  auto y = conv2d(tape, x, w, b, g);
  const std::size_t to = conv_output_size(7, 2, 1, 1, g.pad_t), fo = conv_output_size(9, 3, 2, 2, g.pad_f);
  ASSERT_EQ(y.shape(), (Shape{2, 4, to, fo}));
  EXPECT_EQ(to, 7u);
  EXPECT_EQ(fo, 5u);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t t = 0; t < to; ++t)
        for (std::size_t f = 0; f < fo; ++f) {
          double acc = b.values()[o];
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 2; ++i)
              for (std::size_t j = 0; j < 3; ++j) {
                const long ti = static_cast<long>(t + i) - 1;
                const long fi = static_cast<long>(2 * f + 2 * j) - 2;
                if (ti < 0 || ti >= 7 || fi < 0 || fi >= 9) continue;
                acc += at4(w, o, c, i, j) * at4(x, n, c, ti, fi);
              }
          EXPECT_NEAR(at4(y, n, o, t, f), acc, 1e-12);
        }
  EXPECT_THROW(conv_output_size(2, 5, 1, 1, {}), InvalidArgument);
}

TEST(Conv, TransposeIsAdjoint) {
  Tape<double> tape;
  Conv2dGeometry g;
  g.stride_f = 2;
  g.pad_t = {0, 1};
  g.pad_f = {1, 1};
  auto x = rand_tensor({1, 3, 5, 8}, 10);
  auto w = rand_tensor({2, 3, 2, 3}, 11);
  const TD none;
  auto y = conv2d(tape, x, w, none, g);
  auto u = rand_tensor(y.shape(), 12);
  auto xt = conv2d_transpose(tape, u, w, none, g, 5, 8);
  ASSERT_EQ(xt.shape(), x.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y.values()[i] * u.values()[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.values()[i] * xt.values()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(BatchNorm, TrainNormalizesAndUpdatesRunningStats) {
  Tape<double> tape;
  auto x = rand_tensor({2, 2, 3, 4}, 13);
  for (std::size_t i = 0; i < x.size(); ++i) x.values_mut()[i] = 5.0 * x.values()[i] + 3.0;
  TD gamma({2}, 1.0), beta({2}, 0.0);
  BatchNormState<double> st(2);
  auto y = batch_norm(tape, x, gamma, beta, st, Mode::train);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0, xm = 0.0, xv = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 12; ++i) {
        m += y.values()[(n * 2 + c) * 12 + i];
        xm += x.values()[(n * 2 + c) * 12 + i];
      }
    m /= 24, xm /= 24;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 12; ++i) {
        v += std::pow(y.values()[(n * 2 + c) * 12 + i] - m, 2);
        xv += std::pow(x.values()[(n * 2 + c) * 12 + i] - xm, 2);
      }
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 24, 1.0, 1e-5);
    EXPECT_NEAR(st.running_mean.values()[c], 0.1 * xm, 1e-12);
    EXPECT_NEAR(st.running_var.values()[c], 0.9 + 0.1 * xv / 23, 1e-9);
  }
  Tape<double> eval(false);
  auto z = batch_norm(eval, x, gamma, beta, st, Mode::eval);
  const double expect = (x.values()[0] - st.running_mean.values()[0]) / std::sqrt(st.running_var.values()[0] + 1e-5);
  EXPECT_NEAR(z.values()[0], expect, 1e-12);
}

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

TEST(Lstm, MatchesHandRolledRecurrence) {
  Tape<double> tape;
  const std::size_t B = 2, T = 3, D = 2, H = 3;
  auto x = rand_tensor({B, T, D}, 14), wih = rand_tensor({D, 4 * H}, 15), whh = rand_tensor({H, 4 * H}, 16);
  auto bias = rand_tensor({4 * H}, 17), h0 = rand_tensor({B, H}, 18), c0 = rand_tensor({B, H}, 19);
  const auto out = lstm(tape, x, wih, whh, bias, h0, c0);
  ASSERT_EQ(out.outputs.shape(), (Shape{B, T, H}));
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> h(h0.values().begin() + b * H, h0.values().begin() + (b + 1) * H);
    std::vector<double> c(c0.values().begin() + b * H, c0.values().begin() + (b + 1) * H);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> z(4 * H);
      for (std::size_t j = 0; j < 4 * H; ++j) {
        z[j] = bias.values()[j];
        for (std::size_t d = 0; d < D; ++d) z[j] += x.values()[(b * T + t) * D + d] * wih.values()[d * 4 * H + j];
        for (std::size_t k = 0; k < H; ++k) z[j] += h[k] * whh.values()[k * 4 * H + j];
      }
      for (std::size_t k = 0; k < H; ++k) {
        c[k] = sigm(z[H + k]) * c[k] + sigm(z[k]) * std::tanh(z[2 * H + k]);
        h[k] = sigm(z[3 * H + k]) * std::tanh(c[k]);
        EXPECT_NEAR(out.outputs.values()[(b * T + t) * H + k], h[k], 1e-12);
      }
    }
    for (std::size_t k = 0; k < H; ++k) {
      EXPECT_NEAR(out.h_final.values()[b * H + k], h[k], 1e-12);
      EXPECT_NEAR(out.c_final.values()[b * H + k], c[k], 1e-12);
    }
  }
}

TEST(Attention, WeightsMatchBruteForceSoftmax) {
  const std::size_t B = 1, C = 4, T = 3, F = 2, heads = 2, d = C / heads;
  auto q = rand_tensor({B, C, T, F}, 20), k = rand_tensor({B, C, T, F}, 21), v = rand_tensor({B, C, T, F}, 22);
  Tape<double> tape;
  auto out = time_attention(tape, q, k, v, heads, 0.5);
  auto w = time_attention_weights(q, k, heads, 0.5);
  ASSERT_EQ(w.shape(), (Shape{B, heads, F, T, T}));
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> s(T);
        double mx = -1e300, z = 0.0;
        for (std::size_t u = 0; u < T; ++u) {
          for (std::size_t c = 0; c < d; ++c) s[u] += at4(q, 0, h * d + c, t, f) * at4(k, 0, h * d + c, u, f);
          s[u] *= 0.5;
          mx = std::max(mx, s[u]);
        }
        for (auto& e : s) z += (e = std::exp(e - mx));
        for (std::size_t u = 0; u < T; ++u)
          EXPECT_NEAR(w.values()[((h * F + f) * T + t) * T + u], s[u] / z, 1e-14);
        for (std::size_t c = 0; c < d; ++c) {
          double acc = 0.0;
          for (std::size_t u = 0; u < T; ++u) acc += s[u] / z * at4(v, 0, h * d + c, u, f);
          EXPECT_NEAR(at4(out, 0, h * d + c, t, f), acc, 1e-14);
        }
      }
  EXPECT_THROW(time_attention(tape, q, k, v, 3), InvalidArgument);
}

TEST(Adam, MatchesClosedFormFirstSteps) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, -0.25};
  AdamMoments<double> st;
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_step<double>(p, g, st, 1, cfg);
  // The first bias-corrected step moves each coordinate by lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + 0.1 * 0.25 / (0.25 + 1e-8), 1e-15);
  const double p1 = p[0];
  adam_step<double>(p, g, st, 2, cfg);
  const double m = (0.9 * 0.05 + 0.05) / (1 - 0.81);
  const double v = (0.999 * 0.00025 + 0.00025) / (1 - 0.998001);
  EXPECT_NEAR(p[0], p1 - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-12);
  EXPECT_THROW(adam_step<double>(p, g, st, 0, cfg), InvalidArgument);
}

TEST(Adam, MinimizesQuadratic) {
  TD w({3}, std::vector<double>{3.0, -1.0, 2.0}, true);
  Adam<double> opt({w}, AdamConfig{0.05});
  for (int it = 0; it < 2000; ++it) {
    Tape<double> tape;
    TD target({3}, std::vector<double>{0.5, 0.25, -1.0});
    auto loss = sum(tape, square(tape, sub(tape, w, target)));
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
  }
  EXPECT_NEAR(w.values()[0], 0.5, 1e-3);
  EXPECT_NEAR(w.values()[2], -1.0, 1e-3);
  EXPECT_EQ(opt.steps(), 2000);
}

TEST(GradCheck, DetectsWrongGradient) {
  TD x({4}, std::vector<double>{0.1, 0.2, 0.3, 0.4}, true);
  // scale by a value outside the graph: loss = sum(x) * c with c read from x.
  auto wrong = [&](Tape<double>& tape) {
    TD c({4}, std::vector<double>(x.values().begin(), x.values().end()));
    return sum(tape, mul(tape, x, c));
  };
  EXPECT_GT(gradcheck(wrong, {x}).max_rel_error, 0.1);
  auto right = [&](Tape<double>& tape) { return sum(tape, mul(tape, x, x)); };
  EXPECT_LT(gradcheck(right, {x}).max_rel_error, 1e-8);
}

TEST(GradCheck, SuitePassesForEveryOp) {
  const auto cases = dmse::run_gradcheck_suite();
  EXPECT_GT(cases.size(), 25u);
  for (const auto& c : cases) EXPECT_TRUE(c.passed) << c.name << " rel " << c.result.max_rel_error << " at " << c.result.worst;
}

TEST(Float, SinglePrecisionForwardAgreesWithDouble) {
  auto x = rand_tensor({1, 2, 4, 6}, 23);
  auto w = rand_tensor({3, 2, 2, 2}, 24);
  Tape<double> td(false);
  Tape<float> tf(false);
  Conv2dGeometry g;
  const auto yd = elu(td, conv2d(td, x, w, TD{}, g));
  const auto yf = elu(tf, conv2d(tf, x.cast<float>(), w.cast<float>(), Tensor<float>{}, g));
  for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yf.values()[i], yd.values()[i], 1e-5);
}

}  // namespace
}  // namespace dmse::ad
