// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/suites.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "dmse/dataset.hpp"
#include "dmse/error.hpp"
#include "dmse/eval.hpp"
#include "dmse/model.hpp"
#include "dmse/room.hpp"
#include "dmse/snr.hpp"

namespace dmse {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using T = Tensor<double>;

namespace {

class Rand {
 public:
  explicit Rand(std::uint64_t seed) : rng_(seed) {}
  T uniform(Shape s, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(ad::numel(s));
    for (auto& x : v) x = u(rng_);
    return T(std::move(s), std::move(v), true);
  }
  // Values bounded away from zero, for ops with a kink there.
  T away_from_zero(Shape s) {
    auto t = uniform(std::move(s), 0.2, 1.0);
    std::bernoulli_distribution flip(0.5);
    for (auto& x : t.values_mut())
      if (flip(rng_)) x = -x;
    return t;
  }
  T constant(Shape s) {
    auto t = uniform(std::move(s));
    t.set_requires_grad(false);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

// sum(out * w) with a fixed random w turns any output into a scalar with a
// nontrivial upstream gradient.
T project(Tape<double>& tape, const T& out, const T& w) { return ad::sum(tape, ad::mul(tape, out, w)); }

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  Rand rnd(options.seed);
  ad::GradCheckOptions gc;
  gc.eps = options.eps;
  gc.seed = options.seed;

  std::vector<GradCheckCase> cases;
  auto check = [&](std::string name, const std::vector<T>& inputs, std::function<T(Tape<double>&)> fn,
                   std::size_t max_per_input = 0) {
    auto opt = gc;
    opt.max_per_input = max_per_input;
    GradCheckCase c{std::move(name), ad::gradcheck(fn, inputs, opt), false};
    c.passed = c.result.checked > 0 && c.result.max_rel_error < options.tolerance;
    cases.push_back(std::move(c));
  };

  auto unary = [&](std::string name, std::function<T(Tape<double>&, const T&)> op, bool avoid_zero = false) {
    const Shape s{3, 4};
    T x = avoid_zero ? rnd.away_from_zero(s) : rnd.uniform(s, -2.0, 2.0);
    T w = rnd.constant(s);
    check(std::move(name), {x}, [=](Tape<double>& tp) { return project(tp, op(tp, x), w); });
  };

  {
    T a = rnd.uniform({2, 3, 4}), b = rnd.uniform({2, 3, 4}), w = rnd.constant({2, 3, 4});
    check("add", {a, b}, [=](Tape<double>& tp) { return project(tp, ad::add(tp, a, b), w); });
    check("sub", {a, b}, [=](Tape<double>& tp) { return project(tp, ad::sub(tp, a, b), w); });
    check("mul", {a, b}, [=](Tape<double>& tp) { return project(tp, ad::mul(tp, a, b), w); });
    check("scale", {a}, [=](Tape<double>& tp) { return project(tp, ad::scale(tp, a, -1.7), w); });
  }
  {
    T x = rnd.uniform({2, 3, 5}), bias = rnd.uniform({5}), w = rnd.constant({2, 3, 5});
    check("add_bias", {x, bias}, [=](Tape<double>& tp) { return project(tp, ad::add_bias(tp, x, bias), w); });
  }
  unary("abs", [](Tape<double>& tp, const T& x) { return ad::abs(tp, x); }, true);
  unary("square", [](Tape<double>& tp, const T& x) { return ad::square(tp, x); });
  unary("elu", [](Tape<double>& tp, const T& x) { return ad::elu(tp, x); }, true);
  unary("sigmoid", [](Tape<double>& tp, const T& x) { return ad::sigmoid(tp, x); });
  unary("tanh", [](Tape<double>& tp, const T& x) { return ad::tanh(tp, x); });
  unary("softplus", [](Tape<double>& tp, const T& x) { return ad::softplus(tp, x); });
  {
    T x = rnd.uniform({3, 4});
    check("sum", {x}, [=](Tape<double>& tp) { return ad::square(tp, ad::sum(tp, x)); });
    check("mean", {x}, [=](Tape<double>& tp) { return ad::square(tp, ad::mean(tp, x)); });
  }
  for (std::size_t axis = 0; axis < 3; ++axis) {
    T x = rnd.uniform({2, 3, 4}, -3.0, 3.0), w = rnd.constant({2, 3, 4});
    check("softmax_axis" + std::to_string(axis), {x},
          [=](Tape<double>& tp) { return project(tp, ad::softmax(tp, x, axis), w); });
  }
  {
    T x = rnd.uniform({2, 3, 4}), w = rnd.constant({4, 6}), wp = rnd.constant({4, 2, 3});
    check("reshape", {x}, [=](Tape<double>& tp) { return project(tp, ad::reshape(tp, x, Shape{4, 6}), w); });
    check("permute", {x}, [=](Tape<double>& tp) { return project(tp, ad::permute(tp, x, {2, 0, 1}), wp); });
    T y = rnd.uniform({2, 2, 4}), wc = rnd.constant({2, 5, 4});
    check("concat", {x, y},
          [=](Tape<double>& tp) { return project(tp, ad::concat(tp, std::vector<T>{x, y}, 1), wc); });
  }
  {
    T a = rnd.uniform({2, 3, 4}), b = rnd.uniform({2, 4, 5}), w = rnd.constant({2, 3, 5});
    check("matmul_batched", {a, b}, [=](Tape<double>& tp) { return project(tp, ad::matmul(tp, a, b), w); });
    T m = rnd.uniform({4, 5});
    check("matmul_broadcast", {a, m}, [=](Tape<double>& tp) { return project(tp, ad::matmul(tp, a, m), w); });
    T p = rnd.uniform({3, 4}), q = rnd.uniform({4, 2}), w2 = rnd.constant({3, 2});
    check("matmul", {p, q}, [=](Tape<double>& tp) { return project(tp, ad::matmul(tp, p, q), w2); });
  }
  {
    ad::Conv2dGeometry g;
    g.stride_f = 2;
    g.dilation_f = 2;
    g.pad_t = ad::Conv2dGeometry::causal_time(2);
    g.pad_f = {2, 2};
    T x = rnd.uniform({2, 3, 5, 9}), k = rnd.uniform({4, 3, 2, 3}), b = rnd.uniform({4});
    const std::size_t fo = ad::conv_output_size(9, 3, 2, 2, g.pad_f);
    T w = rnd.constant({2, 4, 5, fo});
    check("conv2d", {x, k, b}, [=](Tape<double>& tp) { return project(tp, ad::conv2d(tp, x, k, b, g), w); });

    T y = rnd.uniform({2, 4, 5, fo}), kt = rnd.uniform({4, 3, 2, 3}), bt = rnd.uniform({3});
    T wt = rnd.constant({2, 3, 5, 9});
    check("conv2d_transpose", {y, kt, bt},
          [=](Tape<double>& tp) { return project(tp, ad::conv2d_transpose(tp, y, kt, bt, g, 5, 9), wt); });
  }
  {
    T x = rnd.uniform({2, 3, 4, 5}, -2.0, 2.0), gamma = rnd.uniform({3}, 0.5, 1.5), beta = rnd.uniform({3});
    T w = rnd.constant({2, 3, 4, 5});
    check("batch_norm", {x, gamma, beta}, [=](Tape<double>& tp) {
      ad::BatchNormState<double> st(3);
      return project(tp, ad::batch_norm(tp, x, gamma, beta, st, ad::Mode::train), w);
    });
  }
  {
    const std::size_t b = 2, t = 4, d = 3, h = 5;
    T x = rnd.uniform({b, t, d}), wih = rnd.uniform({d, 4 * h}), whh = rnd.uniform({h, 4 * h});
    T bias = rnd.uniform({4 * h}), h0 = rnd.uniform({b, h}), c0 = rnd.uniform({b, h});
    T w = rnd.constant({b, t, h});
    check("lstm", {x, wih, whh, bias, h0, c0}, [=](Tape<double>& tp) {
      return project(tp, ad::lstm(tp, x, wih, whh, bias, h0, c0).outputs, w);
    });
  }
  for (const double sc : {1.0, 0.5}) {
    T q = rnd.uniform({2, 4, 5, 3}), k = rnd.uniform({2, 4, 5, 3}), v = rnd.uniform({2, 4, 5, 3});
    T w = rnd.constant({2, 4, 5, 3});
    check(sc == 1.0 ? "time_attention" : "time_attention_scaled", {q, k, v},
          [=](Tape<double>& tp) { return project(tp, ad::time_attention(tp, q, k, v, 2, sc), w); });
  }
  {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.channels = {4};
    cfg.freq_dilation = {1};
    cfg.heads = 2;
    auto params = init_params<double>(cfg, options.seed);
    T x1 = rnd.uniform({1, 4, 3, 2}), x2 = rnd.uniform({1, 4, 3, 2}), w = rnd.constant({1, 4, 3, 2});
    std::vector<T> inputs{x1, x2, params.at("mhca.block1.dir1.q_kernel"), params.at("mhca.block1.dir1.k_kernel"),
                          params.at("mhca.block1.dir1.v_kernel"), params.at("mhca.block1.dir1.v_bias")};
    check("mhca", inputs, [=](Tape<double>& tp) {
      const auto m = mhca_forward(tp, x1, x2, params, cfg, 0);
      return ad::add(tp, project(tp, m.z1, w), project(tp, m.z2, w));
    });
  }
  if (options.include_model) {
    const ModelConfig cfg = ModelConfig::tiny();
    auto params = init_params<double>(cfg, options.seed);
    const std::size_t b = 2, t = 6, f = cfg.input_bins;
    T x1 = rnd.uniform({b, 1, t, f}, 0.0, 2.0), x2 = rnd.uniform({b, 1, t, f}, 0.0, 2.0);
    T target = rnd.uniform({b, t, f}, 2.0, 3.0), mapped = rnd.uniform({b, t, f}, 0.0, 1.0);
    std::vector<double> mv(b * t, 1.0);
    mv[b * t - 1] = 0.0;
    T mask(Shape{b, t}, std::move(mv));
    for (auto* c : {&x1, &x2, &target, &mapped}) c->set_requires_grad(false);

    // One sampled entry from each of a random subset of parameter tensors.
    std::vector<T> all = params.trainable();
    std::mt19937_64 pick(options.seed + 17);
    std::shuffle(all.begin(), all.end(), pick);
    all.resize(std::min(all.size(), options.model_params));
    check(
        "model_total_loss", all,
        [=](Tape<double>& tp) mutable {
          const auto out = model_forward(tp, x1, x2, params, cfg, ad::Mode::train);
          return compute_loss(tp, out.est_mag, out.snr_mapped, target, mapped, mask, 10.0).total;
        },
        1);
  }
  return cases;
}

OracleGainResult run_oracle_gain(const OracleGainOptions& options) {
  DMSE_REQUIRE(options.mixtures >= 1, "oracle-gain: need at least one mixture");
  const StftConfig cfg;
  const auto n = static_cast<std::size_t>(options.duration_s * cfg.sample_rate);
  const SyntheticSpeech speech(cfg.sample_rate);
  const SyntheticNoise noise(NoiseColor::white);
  std::mt19937_64 rng(options.seed);

  OracleGainResult res;
  double acc = 0.0;
  for (std::size_t i = 0; i < options.mixtures; ++i) {
    const auto s = speech.draw(n, rng);
    auto v = noise.draw(n, rng);
    const double g = std::sqrt(energy(s) / energy(v) * std::pow(10.0, -options.snr_db / 10.0));
    for (auto& x : v) x *= g;
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = s[k] + v[k];

    const auto spec_y = dmse::stft(y, cfg);
    const auto xi_db = instantaneous_snr(dmse::stft(s, cfg), dmse::stft(v, cfg));
    SnrGrid xi{RealGrid(xi_db.values.frames(), xi_db.values.bins()), SnrDomain::linear};
    for (std::size_t k = 0; k < xi.values.size(); ++k) xi.values.data()[k] = std::pow(10.0, xi_db.values.data()[k] / 10.0);
    RealGrid mag(spec_y.frames(), spec_y.bins());
    for (std::size_t k = 0; k < mag.size(); ++k) mag.data()[k] = std::abs(spec_y.data.data()[k]);
    auto enhanced = reconstruct(mag, mmse_gain(xi), spec_y);
    enhanced.resize(n, 0.0);

    res.noisy_seg_snr.push_back(segmental_snr(s, y));
    res.enhanced_seg_snr.push_back(segmental_snr(s, enhanced));
    acc += res.enhanced_seg_snr.back() - res.noisy_seg_snr.back();
  }
  res.mean_improvement_db = acc / static_cast<double>(options.mixtures);
  return res;
}

}  // namespace dmse
