// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dmse/error.hpp"
#include "dmse/tensor.hpp"

namespace dmse::ad {

template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state, long step,
               const AdamConfig& c) {
  DMSE_REQUIRE(step >= 1, "adam_step: step index is 1-based");
  DMSE_REQUIRE(grad.empty() || grad.size() == param.size(), "adam_step: gradient/parameter size mismatch");
  if (state.m.empty()) {
    state.m.assign(param.size(), T(0));
    state.v.assign(param.size(), T(0));
  }
  DMSE_REQUIRE(state.m.size() == param.size() && state.v.size() == param.size(),
               "adam_step: optimizer state size mismatch");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
    const double m = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    const double v = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    param[i] = static_cast<T>(param[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), moments_(params_.size()), config_(config) {}

template <typename T>
void Adam<T>::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    adam_step<T>(p.values_mut(), p.has_grad() ? p.grad() : std::span<const T>{}, moments_[i], t_, config_);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamMoments<float>&, long, const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamMoments<double>&, long,
                                const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

GradCheckResult gradcheck(const std::function<Tensor<double>(Tape<double>&)>& loss,
                          const std::vector<Tensor<double>>& inputs, const GradCheckOptions& opt) {
  DMSE_REQUIRE(!inputs.empty(), "gradcheck: no inputs");
  for (const auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  {
    Tape<double> tape;
    Tensor<double> l = loss(tape);
    tape.backward(l);
  }
  auto evaluate = [&]() {
    Tape<double> off(false);
    return loss(off).item();
  };

  GradCheckResult res;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& in = inputs[k];
    std::vector<double> analytic = in.has_grad() ? std::vector<double>(in.grad().begin(), in.grad().end())
                                                 : std::vector<double>(in.size(), 0.0);
    std::vector<std::size_t> idx(in.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opt.max_per_input > 0 && idx.size() > opt.max_per_input) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_per_input);
      std::sort(idx.begin(), idx.end());
    }
    auto vals = in.values_mut();
    for (std::size_t i : idx) {
      const double orig = vals[i];
      vals[i] = orig + opt.eps;
      const double up = evaluate();
      vals[i] = orig - opt.eps;
      const double down = evaluate();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double a = analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), opt.denom_floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      if (rel > res.max_rel_error || res.checked == 0) {
        if (rel >= res.max_rel_error) {
          res.max_rel_error = rel;
          res.worst = "input[" + std::to_string(k) + "] element " + std::to_string(i) + " analytic " +
                      std::to_string(a) + " numeric " + std::to_string(numeric);
        }
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace dmse::ad
