// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dmse {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Point3&) const = default;
};

double distance(const Point3& a, const Point3& b);

// Shoebox room. Walls are ordered x=0, x=L, y=0, y=W, z=0, z=H.
struct RoomConfig {
  std::array<double, 3> dimensions{5.0, 5.0, 3.0};
  std::array<double, 6> reflection{0.8, 0.8, 0.8, 0.8, 0.8, 0.8};
  int max_order = 6;
  double sound_speed = 343.0;
  int sample_rate = 16000;

  void set_uniform_reflection(double beta) { reflection.fill(beta); }
  bool contains(const Point3& p) const;  // strictly inside
  void validate() const;
};

struct ArrayGeometry {
  std::array<Point3, 2> mics;  // [0] primary, [1] reference

  // Two mics along x, `spacing` apart, centered on `midpoint`.
  static ArrayGeometry centered(const Point3& midpoint = {2.5, 2.5, 1.5}, double spacing = 0.02);
  Point3 midpoint() const;
  void validate(const RoomConfig& room) const;
};

// 0 deg points along +x from the array midpoint, counterclockwise positive,
// in the horizontal plane at array height.
Point3 source_at_angle(const Point3& midpoint, double radius, double angle_deg);
std::vector<Point3> source_positions(const Point3& midpoint, double radius, int grid_step_deg);

struct ImageSource {
  Point3 position;
  int order = 0;
  double reflection_gain = 1.0;  // product of wall coefficients along the path
};

// All mirror images with total reflection order <= room.max_order.
std::vector<ImageSource> image_sources(const RoomConfig& room, const Point3& source);

// Each image contributes gain / (4 pi d) at sample round(d fs / c).
std::vector<double> image_rir(const RoomConfig& room, const Point3& source, const Point3& mic);

using StereoSignal = std::array<std::vector<double>, 2>;

// Linear convolution per channel, truncated to the input length.
StereoSignal spatialize(std::span<const double> signal, const std::array<std::vector<double>, 2>& rirs);
std::vector<double> convolve_truncated(std::span<const double> signal, std::span<const double> rir);

struct Mixture {
  StereoSignal mixture;
  StereoSignal noise;  // noise after scaling
  double noise_scale = 1.0;
};

// Scales the noise pair by one scalar so that the primary-channel energy
// ratio equals snr_db. Noise shorter than speech is looped, longer truncated.
Mixture mix_at_snr(const StereoSignal& speech, const StereoSignal& noise, double snr_db);

double energy(std::span<const double> x);
double snr_db(std::span<const double> signal, std::span<const double> noise);

}  // namespace dmse
