// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "dmse/error.hpp"

namespace dmse {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.channels = {4, 8, 8, 16, 16};
  c.freq_dilation = {1, 1, 1, 1, 1};
  c.heads = 2;
  c.lstm_layers = 2;
  c.lstm_hidden = 64;
  return c;
}

namespace {

ad::AxisPadding symmetric_pad(std::size_t kernel, std::size_t dilation) {
  const std::size_t total = dilation * (kernel - 1);
  return {total / 2, total - total / 2};
}

}  // namespace

ad::Conv2dGeometry ModelConfig::encoder_geometry(std::size_t block) const {
  ad::Conv2dGeometry g;
  g.stride_t = 1;
  g.stride_f = stride_f;
  g.dilation_t = 1;
  g.dilation_f = freq_dilation.at(block);
  g.pad_t = ad::Conv2dGeometry::causal_time(kernel_t);
  g.pad_f = symmetric_pad(kernel_f, g.dilation_f);
  return g;
}

ad::Conv2dGeometry ModelConfig::decoder_geometry(std::size_t block) const {
  // Right-padded in time so the transposed layer stays causal.
  ad::Conv2dGeometry g = encoder_geometry(block);
  g.pad_t = {0, kernel_t - 1};
  return g;
}

std::vector<std::size_t> ModelConfig::level_bins() const {
  std::vector<std::size_t> bins{input_bins};
  for (std::size_t b = 0; b < num_blocks(); ++b) {
    const auto g = encoder_geometry(b);
    bins.push_back(ad::conv_output_size(bins.back(), kernel_f, g.stride_f, g.dilation_f, g.pad_f));
  }
  return bins;
}

void ModelConfig::validate() const {
  DMSE_REQUIRE(!channels.empty(), "model config: need at least one encoder block");
  DMSE_REQUIRE(freq_dilation.size() == channels.size(), "model config: freq_dilation needs one entry per block");
  DMSE_REQUIRE(kernel_t >= 1 && kernel_f >= 1 && stride_f >= 1, "model config: kernel and stride must be >= 1");
  DMSE_REQUIRE(heads >= 1, "model config: heads must be >= 1");
  for (std::size_t c : channels) {
    DMSE_REQUIRE(c >= 1, "model config: channel counts must be >= 1");
    DMSE_REQUIRE(c % heads == 0, "model config: heads (" + std::to_string(heads) + ") must divide every block's channels (" + std::to_string(c) + ")");
  }
  for (std::size_t d : freq_dilation) DMSE_REQUIRE(d >= 1, "model config: dilation must be >= 1");
  DMSE_REQUIRE(lstm_layers >= 1 && lstm_hidden >= 1, "model config: LSTM needs >= 1 layer and hidden unit");
  DMSE_REQUIRE(input_bins >= 2, "model config: input_bins must be >= 2");
  DMSE_REQUIRE(use_snr_head || use_decoder, "model config: at least one of use_snr_head/use_decoder must be on");
  (void)level_bins();  // throws when a block's kernel does not fit
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoul(tok));
  return out;
}

}  // namespace

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "channels=" << join(channels) << '\n'
     << "kernel_t=" << kernel_t << '\n'
     << "kernel_f=" << kernel_f << '\n'
     << "stride_f=" << stride_f << '\n'
     << "freq_dilation=" << join(freq_dilation) << '\n'
     << "heads=" << heads << '\n'
     << "lstm_layers=" << lstm_layers << '\n'
     << "lstm_hidden=" << lstm_hidden << '\n'
     << "input_bins=" << input_bins << '\n'
     << "use_mhca=" << use_mhca << '\n'
     << "use_snr_head=" << use_snr_head << '\n'
     << "use_decoder=" << use_decoder << '\n'
     << "attention_scaling=" << attention_scaling << '\n';
  return os.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "channels") c.channels = split_sizes(val);
      else if (key == "kernel_t") c.kernel_t = std::stoul(val);
      else if (key == "kernel_f") c.kernel_f = std::stoul(val);
      else if (key == "stride_f") c.stride_f = std::stoul(val);
      else if (key == "freq_dilation") c.freq_dilation = split_sizes(val);
      else if (key == "heads") c.heads = std::stoul(val);
      else if (key == "lstm_layers") c.lstm_layers = std::stoul(val);
      else if (key == "lstm_hidden") c.lstm_hidden = std::stoul(val);
      else if (key == "input_bins") c.input_bins = std::stoul(val);
      else if (key == "use_mhca") c.use_mhca = val == "1";
      else if (key == "use_snr_head") c.use_snr_head = val == "1";
      else if (key == "use_decoder") c.use_decoder = val == "1";
      else if (key == "attention_scaling") c.attention_scaling = val == "1";
      else throw FormatError("model config: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw FormatError("model config: bad value for '" + key + "'");
    }
  }
  c.validate();
  return c;
}

template <typename T>
const Tensor<T>& ModelParams<T>::at(const std::string& name) const {
  auto it = weights.find(name);
  if (it == weights.end()) throw InvalidArgument("model params: missing tensor '" + name + "'");
  return it->second;
}

template <typename T>
ad::BatchNormState<T>& ModelParams<T>::norm(const std::string& name) {
  auto it = norms.find(name);
  if (it == norms.end()) throw InvalidArgument("model params: missing batch-norm state '" + name + "'");
  return it->second;
}

template <typename T>
std::vector<Tensor<T>> ModelParams<T>::trainable() const {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : weights) out.push_back(t);
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : weights) n += t.size();
  return n;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  for (const auto& [name, t] : weights) out.weights.emplace(name, t.template cast<U>());
  for (const auto& [name, s] : norms) {
    ad::BatchNormState<U> st;
    st.running_mean = s.running_mean.template cast<U>();
    st.running_var = s.running_var.template cast<U>();
    out.norms.emplace(name, std::move(st));
  }
  return out;
}

namespace {

std::string enc_name(int channel, std::size_t block) {
  return "enc" + std::to_string(channel) + ".block" + std::to_string(block + 1);
}

std::string mhca_name(std::size_t block, int dir) {
  return "mhca.block" + std::to_string(block + 1) + ".dir" + std::to_string(dir);
}

std::string dec_name(std::size_t block) { return "dec.block" + std::to_string(block + 1); }

template <typename T>
class Initializer {
 public:
  Initializer(ModelParams<T>& p, std::uint64_t seed) : p_(p), rng_(seed) {}

  void uniform(const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<T> v(ad::numel(shape));
    for (auto& x : v) x = static_cast<T>(u(rng_));
    p_.weights.emplace(name, Tensor<T>(std::move(shape), std::move(v), true));
  }
  void constant(const std::string& name, Shape shape, T value) {
    p_.weights.emplace(name, Tensor<T>(std::move(shape), value, true));
  }
  void batch_norm(const std::string& prefix, std::size_t channels) {
    constant(prefix + ".bn_scale", {channels}, T(1));
    constant(prefix + ".bn_shift", {channels}, T(0));
    p_.norms.emplace(prefix + ".bn", ad::BatchNormState<T>(channels));
  }

 private:
  ModelParams<T>& p_;
  std::mt19937_64 rng_;
};

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams<T> p;
  Initializer<T> init(p, seed);
  const auto& ch = config.channels;
  const std::size_t kt = config.kernel_t, kf = config.kernel_f;
  const std::size_t blocks = config.num_blocks();
  const auto bins = config.level_bins();

  for (int c = 1; c <= 2; ++c)
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t cin = b == 0 ? 1 : ch[b - 1];
      init.uniform(enc_name(c, b) + ".kernel", {ch[b], cin, kt, kf}, cin * kt * kf);
      init.batch_norm(enc_name(c, b), ch[b]);
    }
  if (config.use_mhca)
    for (std::size_t b = 0; b < blocks; ++b)
      for (int dir = 1; dir <= 2; ++dir)
        for (const char* proj : {"q", "k", "v"}) {
          const std::string n = mhca_name(b, dir) + "." + proj;
          init.uniform(n + "_kernel", {ch[b], ch[b], 1, 1}, ch[b]);
          init.constant(n + "_bias", {ch[b]}, T(0));
        }

  const std::size_t h = config.lstm_hidden;
  std::size_t d_in = 2 * ch.back() * bins.back();
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    const std::string n = "lstm" + std::to_string(l + 1);
    init.uniform(n + ".w_ih", {d_in, 4 * h}, h);
    init.uniform(n + ".w_hh", {h, 4 * h}, h);
    std::vector<T> bias(4 * h, T(0));
    for (std::size_t k = h; k < 2 * h; ++k) bias[k] = T(1);
    p.weights.emplace(n + ".bias", Tensor<T>(Shape{4 * h}, std::move(bias), true));
    d_in = h;
  }

  if (config.use_decoder) {
    const std::size_t flat = ch.back() * bins.back();
    init.uniform("dec.proj.weight", {h, flat}, h);
    init.constant("dec.proj.bias", {flat}, T(0));
    for (std::size_t b = blocks; b-- > 0;) {
      const std::size_t cin = 2 * ch[b];
      const std::size_t cout = b == 0 ? 1 : ch[b - 1];
      init.uniform(dec_name(b) + ".kernel", {cin, cout, kt, kf}, cin * kt * kf);
      if (b == 0)
        init.constant(dec_name(b) + ".bias", {cout}, T(0));
      else
        init.batch_norm(dec_name(b), cout);
    }
  }
  if (config.use_snr_head) {
    init.uniform("snr.weight", {h, config.input_bins}, h);
    init.constant("snr.bias", {config.input_bins}, T(0));
  }
  return p;
}

RealGrid input_features(const Spectrogram& spec) {
  RealGrid g(spec.frames(), spec.bins());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = std::log1p(std::abs(spec.data.data()[i]));
  return g;
}

template <typename T>
Tensor<T> stack_features(const std::vector<const RealGrid*>& grids) {
  DMSE_REQUIRE(!grids.empty(), "stack_features: no grids");
  const std::size_t t = grids[0]->frames(), f = grids[0]->bins();
  std::vector<T> v;
  v.reserve(grids.size() * t * f);
  for (const auto* g : grids) {
    DMSE_REQUIRE(g->frames() == t && g->bins() == f, "stack_features: grids differ in shape");
    for (double x : g->data()) v.push_back(static_cast<T>(x));
  }
  return Tensor<T>(Shape{grids.size(), 1, t, f}, std::move(v));
}

template <typename T>
Tensor<T> encoder_block_forward(Tape<T>& tape, const Tensor<T>& x, ModelParams<T>& params, const ModelConfig& config,
                                int channel, std::size_t block, ad::Mode mode) {
  DMSE_REQUIRE(block < config.num_blocks(), "encoder block index out of range");
  const std::string n = enc_name(channel, block);
  const std::size_t cin = block == 0 ? 1 : config.channels[block - 1];
  DMSE_REQUIRE(x.defined() && x.rank() == 4 && x.dim(1) == cin,
               n + ": expected [B," + std::to_string(cin) + ",T,F] input, got " + ad::to_string(x.shape()));
  auto y = ad::conv2d(tape, x, params.at(n + ".kernel"), Tensor<T>{}, config.encoder_geometry(block));
  y = ad::batch_norm(tape, y, params.at(n + ".bn_scale"), params.at(n + ".bn_shift"), params.norm(n + ".bn"), mode);
  return ad::elu(tape, y);
}

template <typename T>
Tensor<T> cross_attention(Tape<T>& tape, const Tensor<T>& query_src, const Tensor<T>& kv_src,
                          const ModelParams<T>& params, const ModelConfig& config, const std::string& prefix) {
  DMSE_REQUIRE(query_src.defined() && kv_src.defined() && query_src.rank() == 4 &&
                   query_src.shape() == kv_src.shape(),
               "cross_attention: inputs must share a [B,C,T,F] shape");
  const std::size_t heads = config.heads;
  DMSE_REQUIRE(query_src.dim(1) % heads == 0, "cross_attention: heads must divide channels");
  const std::size_t d = query_src.dim(1) / heads;
  const ad::Conv2dGeometry pointwise;
  auto project = [&](const Tensor<T>& src, const char* which) {
    return ad::conv2d(tape, src, params.at(prefix + "." + which + "_kernel"), params.at(prefix + "." + which + "_bias"),
                      pointwise);
  };
  const T scale = config.attention_scaling ? T(1) / std::sqrt(static_cast<T>(d)) : T(1);
  return ad::time_attention(tape, project(query_src, "q"), project(kv_src, "k"), project(kv_src, "v"), heads, scale);
}

template <typename T>
MhcaOutput<T> mhca_forward(Tape<T>& tape, const Tensor<T>& x1, const Tensor<T>& x2, const ModelParams<T>& params,
                           const ModelConfig& config, std::size_t block) {
  DMSE_REQUIRE(x1.defined() && x2.defined() && x1.shape() == x2.shape(), "mhca: inputs must have the same shape");
  DMSE_REQUIRE(x1.rank() == 3 || x1.rank() == 4, "mhca: inputs must be [C,T,F] or [B,C,T,F]");
  if (x1.rank() == 3) {
    const Shape lifted{1, x1.dim(0), x1.dim(1), x1.dim(2)};
    auto out = mhca_forward(tape, ad::reshape(tape, x1, lifted), ad::reshape(tape, x2, lifted), params, config, block);
    for (auto* t : {&out.z1, &out.z2, &out.gate1, &out.gate2}) *t = ad::reshape(tape, *t, x1.shape());
    return out;
  }
  DMSE_REQUIRE(x1.dim(1) % config.heads == 0, "mhca: heads must divide channels");
  MhcaOutput<T> out;
  const auto a1 = cross_attention(tape, x1, x2, params, config, mhca_name(block, 1));
  out.gate1 = ad::sigmoid(tape, ad::add(tape, x1, a1));
  out.z1 = ad::mul(tape, x1, out.gate1);
  const auto a2 = cross_attention(tape, x2, x1, params, config, mhca_name(block, 2));
  out.gate2 = ad::sigmoid(tape, ad::add(tape, x2, a2));
  out.z2 = ad::mul(tape, x2, out.gate2);
  return out;
}

template <typename T>
Tensor<T> bottleneck_forward(Tape<T>& tape, const Tensor<T>& enc1, const Tensor<T>& enc2, const ModelParams<T>& params,
                             const ModelConfig& config) {
  DMSE_REQUIRE(enc1.defined() && enc2.defined() && enc1.rank() == 4 && enc1.shape() == enc2.shape(),
               "bottleneck: encoder outputs must share a [B,C,T,F] shape");
  const std::size_t b = enc1.dim(0), c = enc1.dim(1), t = enc1.dim(2), f = enc1.dim(3);
  auto flatten = [&](const Tensor<T>& e) {
    return ad::reshape(tape, ad::permute(tape, e, {0, 2, 1, 3}), Shape{b, t, c * f});
  };
  auto h = ad::concat(tape, std::vector<Tensor<T>>{flatten(enc1), flatten(enc2)}, 2);
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    const std::string n = "lstm" + std::to_string(l + 1);
    h = ad::lstm(tape, h, params.at(n + ".w_ih"), params.at(n + ".w_hh"), params.at(n + ".bias")).outputs;
  }
  return h;
}

template <typename T>
Tensor<T> decoder_forward(Tape<T>& tape, const Tensor<T>& bottleneck, const std::vector<Tensor<T>>& skips,
                          ModelParams<T>& params, const ModelConfig& config, ad::Mode mode) {
  const std::size_t blocks = config.num_blocks();
  DMSE_REQUIRE(skips.size() == blocks, "decoder: need one skip per encoder block");
  DMSE_REQUIRE(bottleneck.defined() && bottleneck.rank() == 3 && bottleneck.dim(2) == config.lstm_hidden,
               "decoder: bottleneck must be [B,T,H]");
  const std::size_t b = bottleneck.dim(0), t = bottleneck.dim(1);
  const auto bins = config.level_bins();
  const auto& ch = config.channels;
  for (std::size_t k = 0; k < blocks; ++k)
    DMSE_REQUIRE(skips[k].defined() && skips[k].shape() == (Shape{b, ch[k], t, bins[k + 1]}),
                 "decoder: skip " + std::to_string(k + 1) + " has the wrong shape");

  auto y = ad::add_bias(tape, ad::matmul(tape, bottleneck, params.at("dec.proj.weight")), params.at("dec.proj.bias"));
  y = ad::reshape(tape, y, Shape{b, t, ch.back(), bins.back()});
  y = ad::permute(tape, y, {0, 2, 1, 3});
  for (std::size_t k = blocks; k-- > 0;) {
    const std::string n = dec_name(k);
    y = ad::concat(tape, std::vector<Tensor<T>>{y, skips[k]}, 1);
    const Tensor<T> bias = k == 0 ? params.at(n + ".bias") : Tensor<T>{};
    y = ad::conv2d_transpose(tape, y, params.at(n + ".kernel"), bias, config.decoder_geometry(k), t, bins[k]);
    if (k > 0) {
      y = ad::batch_norm(tape, y, params.at(n + ".bn_scale"), params.at(n + ".bn_shift"), params.norm(n + ".bn"), mode);
      y = ad::elu(tape, y);
    } else {
      y = ad::softplus(tape, y);
    }
  }
  return ad::reshape(tape, y, Shape{b, t, bins[0]});
}

template <typename T>
Tensor<T> snr_head_forward(Tape<T>& tape, const Tensor<T>& bottleneck, const ModelParams<T>& params,
                           const ModelConfig& config) {
  DMSE_REQUIRE(bottleneck.defined() && bottleneck.rank() >= 2 && bottleneck.shape().back() == config.lstm_hidden,
               "snr head: bottleneck last dimension must equal lstm_hidden");
  auto z = ad::add_bias(tape, ad::matmul(tape, bottleneck, params.at("snr.weight")), params.at("snr.bias"));
  return ad::sigmoid(tape, z);
}

template <typename T>
ModelOutput<T> model_forward(Tape<T>& tape, const Tensor<T>& primary, const Tensor<T>& reference,
                             ModelParams<T>& params, const ModelConfig& config, ad::Mode mode,
                             const ForwardOptions& options) {
  DMSE_REQUIRE(config.use_decoder || config.use_snr_head, "model_forward: both output heads disabled");
  DMSE_REQUIRE(primary.defined() && reference.defined() && primary.shape() == reference.shape(),
               "model_forward: channel features must have the same shape");
  DMSE_REQUIRE(primary.rank() == 4 && primary.dim(1) == 1 && primary.dim(3) == config.input_bins,
               "model_forward: features must be [B,1,T," + std::to_string(config.input_bins) + "]");
  ModelOutput<T> out;
  std::vector<Tensor<T>> skips;
  Tensor<T> x1 = primary, x2 = reference;
  for (std::size_t b = 0; b < config.num_blocks(); ++b) {
    x1 = encoder_block_forward(tape, x1, params, config, 1, b, mode);
    x2 = encoder_block_forward(tape, x2, params, config, 2, b, mode);
    if (config.use_mhca) {
      auto m = mhca_forward(tape, x1, x2, params, config, b);
      if (options.force_unit_gate) {
        const Tensor<T> ones(x1.shape(), T(1));
        m.z1 = ad::mul(tape, x1, ones);
        m.z2 = ad::mul(tape, x2, ones);
      }
      out.masks.push_back(m.gate1);
      x1 = m.z1;
      x2 = m.z2;
    }
    skips.push_back(x1);
  }
  const auto h = bottleneck_forward(tape, x1, x2, params, config);
  if (config.use_decoder) out.est_mag = decoder_forward(tape, h, skips, params, config, mode);
  if (config.use_snr_head) out.snr_mapped = snr_head_forward(tape, h, params, config);
  return out;
}

template <typename T>
LossTerms<T> compute_loss(Tape<T>& tape, const Tensor<T>& est_mag, const Tensor<T>& snr_est,
                          const Tensor<T>& target_mag, const Tensor<T>& target_mapped, const Tensor<T>& frame_mask,
                          T alpha) {
  DMSE_REQUIRE(est_mag.defined() || snr_est.defined(), "compute_loss: no estimate given");
  DMSE_REQUIRE(frame_mask.defined() && frame_mask.rank() == 2, "compute_loss: frame mask must be [B,T]");
  const std::size_t b = frame_mask.dim(0), t = frame_mask.dim(1);
  const Tensor<T>& ref = est_mag.defined() ? target_mag : target_mapped;
  DMSE_REQUIRE(ref.defined() && ref.rank() == 3 && ref.dim(0) == b && ref.dim(1) == t, "compute_loss: target shape mismatch");
  const std::size_t f = ref.dim(2);

  std::vector<T> m(b * t * f);
  double frames = 0.0;
  for (std::size_t i = 0; i < b * t; ++i) {
    const T w = frame_mask.values()[i];
    frames += w;
    for (std::size_t k = 0; k < f; ++k) m[i * f + k] = w;
  }
  DMSE_REQUIRE(frames > 0.0, "compute_loss: every frame is masked");
  const Tensor<T> mask(Shape{b, t, f}, std::move(m));
  const T inv_count = static_cast<T>(1.0 / (frames * static_cast<double>(f)));

  Tensor<T> l_f(Shape{}, T(0)), l_snr(Shape{}, T(0));
  if (est_mag.defined()) {
    DMSE_REQUIRE(target_mag.defined() && est_mag.shape() == target_mag.shape() && est_mag.shape() == mask.shape(),
                 "compute_loss: magnitude shapes differ");
    l_f = ad::scale(tape, ad::sum(tape, ad::mul(tape, ad::abs(tape, ad::sub(tape, target_mag, est_mag)), mask)), inv_count);
  }
  if (snr_est.defined()) {
    DMSE_REQUIRE(target_mapped.defined() && snr_est.shape() == target_mapped.shape() && snr_est.shape() == mask.shape(),
                 "compute_loss: SNR shapes differ");
    l_snr = ad::scale(tape, ad::sum(tape, ad::mul(tape, ad::square(tape, ad::sub(tape, target_mapped, snr_est)), mask)),
                      inv_count);
  }
  LossTerms<T> out;
  out.total = ad::add(tape, l_f, ad::scale(tape, l_snr, alpha));
  out.report = {static_cast<double>(l_f.item()), static_cast<double>(l_snr.item()),
                static_cast<double>(out.total.item()), static_cast<double>(alpha)};
  return out;
}

#define DMSE_INSTANTIATE_MODEL(T)                                                                               \
  template struct ModelParams<T>;                                                                              \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                   \
  template Tensor<T> stack_features<T>(const std::vector<const RealGrid*>&);                                   \
  template Tensor<T> encoder_block_forward(Tape<T>&, const Tensor<T>&, ModelParams<T>&, const ModelConfig&,    \
                                           int, std::size_t, ad::Mode);                                         \
  template Tensor<T> cross_attention(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const ModelParams<T>&,      \
                                     const ModelConfig&, const std::string&);                                   \
  template MhcaOutput<T> mhca_forward(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const ModelParams<T>&,     \
                                      const ModelConfig&, std::size_t);                                         \
  template Tensor<T> bottleneck_forward(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const ModelParams<T>&,   \
                                        const ModelConfig&);                                                    \
  template Tensor<T> decoder_forward(Tape<T>&, const Tensor<T>&, const std::vector<Tensor<T>>&,                \
                                     ModelParams<T>&, const ModelConfig&, ad::Mode);                            \
  template Tensor<T> snr_head_forward(Tape<T>&, const Tensor<T>&, const ModelParams<T>&, const ModelConfig&);  \
  template ModelOutput<T> model_forward(Tape<T>&, const Tensor<T>&, const Tensor<T>&, ModelParams<T>&,         \
                                        const ModelConfig&, ad::Mode, const ForwardOptions&);                   \
  template LossTerms<T> compute_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                     const Tensor<T>&, const Tensor<T>&, T);

DMSE_INSTANTIATE_MODEL(float)
DMSE_INSTANTIATE_MODEL(double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;

}  // namespace dmse
