// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/room.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>

#include "dmse/error.hpp"

namespace dmse {

double distance(const Point3& a, const Point3& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

bool RoomConfig::contains(const Point3& p) const {
  return p.x > 0.0 && p.x < dimensions[0] && p.y > 0.0 && p.y < dimensions[1] && p.z > 0.0 &&
         p.z < dimensions[2];
}

void RoomConfig::validate() const {
  for (double d : dimensions) DMSE_REQUIRE(d > 0.0, "room: dimensions must be positive");
  for (double b : reflection) DMSE_REQUIRE(b >= 0.0 && b < 1.0, "room: reflection coefficients must lie in [0, 1)");
  DMSE_REQUIRE(max_order >= 0, "room: max_order must be >= 0");
  DMSE_REQUIRE(sound_speed > 0.0 && sample_rate > 0, "room: sound speed and sample rate must be positive");
}

ArrayGeometry ArrayGeometry::centered(const Point3& midpoint, double spacing) {
  const double h = 0.5 * spacing;
  return {{Point3{midpoint.x - h, midpoint.y, midpoint.z}, Point3{midpoint.x + h, midpoint.y, midpoint.z}}};
}

Point3 ArrayGeometry::midpoint() const {
  return {0.5 * (mics[0].x + mics[1].x), 0.5 * (mics[0].y + mics[1].y), 0.5 * (mics[0].z + mics[1].z)};
}

void ArrayGeometry::validate(const RoomConfig& room) const {
  DMSE_REQUIRE(!(mics[0] == mics[1]), "array: microphone positions must be distinct");
  DMSE_REQUIRE(room.contains(mics[0]) && room.contains(mics[1]), "array: microphones must be inside the room");
}

Point3 source_at_angle(const Point3& midpoint, double radius, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  return {midpoint.x + radius * std::cos(a), midpoint.y + radius * std::sin(a), midpoint.z};
}

std::vector<Point3> source_positions(const Point3& midpoint, double radius, int grid_step_deg) {
  DMSE_REQUIRE(grid_step_deg > 0 && 360 % grid_step_deg == 0, "source_positions: grid step must divide 360");
  DMSE_REQUIRE(radius > 0.0, "source_positions: radius must be positive");
  std::vector<Point3> out;
  for (int a = 0; a < 360; a += grid_step_deg) out.push_back(source_at_angle(midpoint, radius, a));
  return out;
}

namespace {

// Mirror coordinate along one axis for lattice index i.
double image_coord(int i, double s, double extent) {
  return (i % 2 == 0) ? i * extent + s : (i + 1) * extent - s;
}

// Reflection gain along one axis: near wall (coordinate 0) and far wall.
double axis_gain(int i, double beta_near, double beta_far) {
  const int n = std::abs(i);
  const int first = (n + 1) / 2;  // wall hit first
  const int second = n / 2;
  return i > 0 ? std::pow(beta_far, first) * std::pow(beta_near, second)
               : std::pow(beta_near, first) * std::pow(beta_far, second);
}

}  // namespace

std::vector<ImageSource> image_sources(const RoomConfig& room, const Point3& source) {
  room.validate();
  DMSE_REQUIRE(room.contains(source), "image_sources: source outside the room");
  const int n = room.max_order;
  const auto& d = room.dimensions;
  const auto& b = room.reflection;
  std::vector<ImageSource> out;
  for (int i = -n; i <= n; ++i) {
    const int ri = n - std::abs(i);
    for (int j = -ri; j <= ri; ++j) {
      const int rj = ri - std::abs(j);
      for (int k = -rj; k <= rj; ++k) {
        ImageSource img;
        img.position = {image_coord(i, source.x, d[0]), image_coord(j, source.y, d[1]),
                        image_coord(k, source.z, d[2])};
        img.order = std::abs(i) + std::abs(j) + std::abs(k);
        img.reflection_gain = axis_gain(i, b[0], b[1]) * axis_gain(j, b[2], b[3]) * axis_gain(k, b[4], b[5]);
        out.push_back(img);
      }
    }
  }
  return out;
}

std::vector<double> image_rir(const RoomConfig& room, const Point3& source, const Point3& mic) {
  DMSE_REQUIRE(room.contains(mic), "image_rir: microphone outside the room");
  DMSE_REQUIRE(!(source == mic), "image_rir: source and microphone coincide");
  const auto images = image_sources(room, source);
  const double samples_per_meter = room.sample_rate / room.sound_speed;

  std::size_t length = 0;
  for (const auto& img : images) {
    const auto tap = static_cast<std::size_t>(std::lround(distance(img.position, mic) * samples_per_meter));
    length = std::max(length, tap + 1);
  }
  std::vector<double> rir(length, 0.0);
  for (const auto& img : images) {
    if (img.reflection_gain == 0.0) continue;
    const double dist = distance(img.position, mic);
    const auto tap = static_cast<std::size_t>(std::lround(dist * samples_per_meter));
    rir[tap] += img.reflection_gain / (4.0 * std::numbers::pi * dist);
  }
  return rir;
}

std::vector<double> convolve_truncated(std::span<const double> signal, std::span<const double> rir) {
  std::vector<double> out(signal.size(), 0.0);
  for (std::size_t k = 0; k < rir.size(); ++k) {
    const double h = rir[k];
    if (h == 0.0 || k >= signal.size()) continue;
    const std::size_t n = signal.size() - k;
    double* dst = out.data() + k;
    for (std::size_t i = 0; i < n; ++i) dst[i] += h * signal[i];
  }
  return out;
}

StereoSignal spatialize(std::span<const double> signal, const std::array<std::vector<double>, 2>& rirs) {
  DMSE_REQUIRE(!signal.empty(), "spatialize: empty signal");
  DMSE_REQUIRE(!rirs[0].empty() && !rirs[1].empty(), "spatialize: empty impulse response");
  return {convolve_truncated(signal, rirs[0]), convolve_truncated(signal, rirs[1])};
}

double energy(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(energy(signal) / energy(noise));
}

Mixture mix_at_snr(const StereoSignal& speech, const StereoSignal& noise, double snr) {
  const std::size_t n = speech[0].size();
  DMSE_REQUIRE(n > 0 && speech[1].size() == n, "mix_at_snr: speech channels must be nonempty and equal length");
  DMSE_REQUIRE(!noise[0].empty() && noise[1].size() == noise[0].size(), "mix_at_snr: noise channels must be nonempty and equal length");
  DMSE_REQUIRE(std::isfinite(snr), "mix_at_snr: snr must be finite");

  StereoSignal fitted;
  for (int c = 0; c < 2; ++c) {
    fitted[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) fitted[c][i] = noise[c][i % noise[c].size()];
  }
  const double es = energy(speech[0]);
  const double en = energy(fitted[0]);
  DMSE_REQUIRE(es > 0.0, "mix_at_snr: speech has zero energy at the primary channel");
  DMSE_REQUIRE(en > 0.0, "mix_at_snr: noise has zero energy at the primary channel");

  Mixture m;
  m.noise_scale = std::sqrt(es / (en * std::pow(10.0, snr / 10.0)));
  for (int c = 0; c < 2; ++c) {
    m.noise[c].resize(n);
    m.mixture[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      m.noise[c][i] = m.noise_scale * fitted[c][i];
      m.mixture[c][i] = speech[c][i] + m.noise[c][i];
    }
  }
  return m;
}

}  // namespace dmse
