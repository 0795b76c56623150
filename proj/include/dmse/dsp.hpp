// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dmse {

using cplx = std::complex<double>;

// Row-major T x F grid. Rows are frames, columns are frequency bins.
template <typename V>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t frames, std::size_t bins, V fill = V{})
      : frames_(frames), bins_(bins), data_(frames * bins, fill) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  V& operator()(std::size_t t, std::size_t f) { return data_[t * bins_ + f]; }
  const V& operator()(std::size_t t, std::size_t f) const { return data_[t * bins_ + f]; }

  std::span<V> row(std::size_t t) { return {data_.data() + t * bins_, bins_}; }
  std::span<const V> row(std::size_t t) const { return {data_.data() + t * bins_, bins_}; }

  std::vector<V>& data() { return data_; }
  const std::vector<V>& data() const { return data_; }

  bool same_shape(const Grid& o) const { return frames_ == o.frames_ && bins_ == o.bins_; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return frames_ == o.frames() && bins_ == o.bins();
  }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::vector<V> data_;
};

using RealGrid = Grid<double>;
using ComplexGrid = Grid<cplx>;

enum class WindowKind { hann_periodic };

struct StftConfig {
  int sample_rate = 16000;
  std::size_t frame_len = 512;  // 32 ms
  std::size_t hop = 256;        // 16 ms
  std::size_t fft_size = 512;
  WindowKind window = WindowKind::hann_periodic;

  std::size_t bins() const { return fft_size / 2 + 1; }
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

struct Spectrogram {
  ComplexGrid data;
  StftConfig config;

  std::size_t frames() const { return data.frames(); }
  std::size_t bins() const { return data.bins(); }
};

// Periodic Hann: w[k] = 0.5 (1 - cos(2 pi k / n)).
std::vector<double> hann_window(std::size_t n);

// Frames that fit entirely inside the signal; a partial tail frame is dropped.
std::size_t frame_count(std::size_t num_samples, const StftConfig& config);

Spectrogram stft(std::span<const double> signal, const StftConfig& config = {});

// Weighted overlap-add with the analysis window as synthesis window,
// normalized by the overlapped squared-window sum. Output length is
// (T - 1) * hop + frame_len.
std::vector<double> istft(const Spectrogram& spec);

struct MagPhase {
  RealGrid magnitude;
  RealGrid phase;  // (-pi, pi], 0 where magnitude is 0
};

MagPhase mag_phase(const Spectrogram& spec);

// magnitude * exp(i phase) on the grid of `like`.
Spectrogram polar(const RealGrid& magnitude, const RealGrid& phase, const StftConfig& config);

}  // namespace dmse
