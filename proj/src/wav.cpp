// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dmse/error.hpp"

namespace dmse {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename V>
V load(const std::vector<char>& buf, std::size_t pos) {
  V v;
  std::memcpy(&v, buf.data() + pos, sizeof(V));
  return v;
}

template <typename V>
void put(std::string& out, V v) {
  char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  out.append(bytes, sizeof(V));
}

}  // namespace

Wav read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError(where + "not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_pos = 0, data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t len = load<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size() && std::memcmp(buf.data() + pos, "data", 4) != 0)
      throw FormatError(where + "truncated chunk");
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError(where + "short fmt chunk");
      format = load<std::uint16_t>(buf, body);
      channels = load<std::uint16_t>(buf, body + 2);
      rate = load<std::uint32_t>(buf, body + 4);
      bits = load<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && len >= 26) format = load<std::uint16_t>(buf, body + 24);
      have_fmt = true;
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data_pos = body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw FormatError(where + "missing fmt chunk");
  if (data_pos == 0) throw FormatError(where + "missing data chunk");
  if (channels != 1 && channels != 2)
    throw FormatError(where + "unsupported channel count " + std::to_string(channels));
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw FormatError(where + "unsupported sample format (need PCM16 or float32)");
  if (static_cast<int>(rate) != expected_rate)
    throw InvalidArgument(where + "sample rate " + std::to_string(rate) + " Hz, expected " +
                          std::to_string(expected_rate) + " Hz (no resampling)");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  Wav wav;
  wav.sample_rate = static_cast<int>(rate);
  wav.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = data_pos + (n * channels + c) * width;
      wav.channels[c][n] = pcm16 ? load<std::int16_t>(buf, at) / 32768.0
                                 : static_cast<double>(load<float>(buf, at));
    }
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, const Wav& wav, SampleFormat format) {
  const std::size_t channels = wav.num_channels();
  DMSE_REQUIRE(channels == 1 || channels == 2, "write_wav: need 1 or 2 channels");
  const std::size_t frames = wav.num_samples();
  for (const auto& ch : wav.channels)
    DMSE_REQUIRE(ch.size() == frames, "write_wav: channel lengths differ");

  const std::uint16_t width = format == SampleFormat::pcm16 ? 2 : 4;
  const std::uint32_t data_len = static_cast<std::uint32_t>(frames * channels * width);
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put<std::uint32_t>(out, 36 + data_len);
  out.append("WAVEfmt ");
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, format == SampleFormat::pcm16 ? kFormatPcm : kFormatFloat);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wav.sample_rate * channels * width));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(channels * width));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(width * 8));
  out.append("data");
  put<std::uint32_t>(out, data_len);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double x = wav.channels[c][n];
      if (format == SampleFormat::pcm16) {
        const double s = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
        put<std::int16_t>(out, static_cast<std::int16_t>(s));
      } else {
        put<float>(out, static_cast<float>(x));
      }
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace dmse
