// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dmse/error.hpp"
#include "dmse/model.hpp"

namespace dmse {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'S', 'E', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename I>
void put(std::ostream& os, I v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename I>
I get(std::istream& is, const std::string& what) {
  I v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint: truncated " + what);
  return v;
}

std::string get_string(std::istream& is, const std::string& what, std::uint32_t limit = 1u << 20) {
  const auto n = get<std::uint32_t>(is, what);
  if (n > limit) throw FormatError("checkpoint: implausible " + what + " length");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw FormatError("checkpoint: truncated " + what);
  return s;
}

void put_tensor(std::ostream& os, const std::string& name, const ad::Tensor<float>& t) {
  put_string(os, name);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, ckpt.seed);
  put<std::uint32_t>(os, ckpt.epoch);
  put_string(os, ckpt.config.serialize());
  const auto count = ckpt.params.weights.size() + 2 * ckpt.params.norms.size();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(count));
  for (const auto& [name, t] : ckpt.params.weights) put_tensor(os, name, t);
  for (const auto& [name, s] : ckpt.params.norms) {
    put_tensor(os, name + ".running_mean", s.running_mean);
    put_tensor(os, name + ".running_var", s.running_var);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(path.string() + ": not a checkpoint file");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.seed = get<std::uint64_t>(is, "seed");
  ckpt.epoch = get<std::uint32_t>(is, "epoch");
  ckpt.config = ModelConfig::deserialize(get_string(is, "config"));

  // The expected layout comes from the config; every tensor must be present.
  ckpt.params = init_params<float>(ckpt.config, 0);
  std::map<std::string, ad::Tensor<float>> expected;
  for (auto& [name, t] : ckpt.params.weights) expected.emplace(name, t);
  for (auto& [name, s] : ckpt.params.norms) {
    expected.emplace(name + ".running_mean", s.running_mean);
    expected.emplace(name + ".running_var", s.running_var);
  }
  const auto count = get<std::uint32_t>(is, "tensor count");
  if (count != expected.size())
    throw FormatError(path.string() + ": expected " + std::to_string(expected.size()) + " tensors, found " +
                      std::to_string(count));
  std::size_t seen = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is, "tensor name", 4096);
    auto it = expected.find(name);
    if (it == expected.end()) throw FormatError(path.string() + ": unexpected tensor '" + name + "'");
    const auto rank = get<std::uint32_t>(is, "rank");
    if (rank > 8) throw FormatError(path.string() + ": bad rank for '" + name + "'");
    ad::Shape shape(rank);
    for (auto& d : shape) d = get<std::uint32_t>(is, "dims");
    if (shape != it->second.shape())
      throw FormatError(path.string() + ": tensor '" + name + "' has shape " + ad::to_string(shape) + ", expected " +
                        ad::to_string(it->second.shape()));
    auto dst = it->second.values_mut();
    if (!is.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(float))))
      throw FormatError(path.string() + ": truncated values for '" + name + "'");
    for (float v : dst)
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value in '" + name + "'");
    expected.erase(it);
    ++seen;
  }
  (void)seen;
  return ckpt;
}

std::vector<RealGrid> mask_summaries(const std::vector<ad::Tensor<float>>& masks) {
  std::vector<RealGrid> out;
  for (const auto& m : masks) {
    DMSE_REQUIRE(m.defined() && m.rank() == 4, "mask_summaries: masks must be [B,C,T,F]");
    const std::size_t c = m.dim(1), t = m.dim(2), f = m.dim(3);
    RealGrid g(t, c);
    const auto v = m.values();  // first batch item
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t ti = 0; ti < t; ++ti) {
        double acc = 0.0;
        for (std::size_t fi = 0; fi < f; ++fi) acc += v[(ci * t + ti) * f + fi];
        g(ti, ci) = acc / static_cast<double>(f);
      }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::filesystem::path> export_masks(const std::vector<RealGrid>& summaries,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t b = 0; b < summaries.size(); ++b) {
    const auto p = dir / ("mask_block" + std::to_string(b + 1) + ".txt");
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw IoError("cannot write mask file " + p.string());
    os.precision(9);
    const auto& g = summaries[b];
    for (std::size_t t = 0; t < g.frames(); ++t) {
      for (std::size_t c = 0; c < g.bins(); ++c) os << (c ? " " : "") << g(t, c);
      os << '\n';
    }
    if (!os) throw IoError("failed writing mask file " + p.string());
    paths.push_back(p);
  }
  return paths;
}

RealGrid read_mask_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open mask file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw FormatError(path.string() + ": non-numeric entry");
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError(path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  RealGrid g(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t c = 0; c < rows[t].size(); ++c) g(t, c) = rows[t][c];
  return g;
}

}  // namespace dmse
