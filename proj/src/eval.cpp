// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dmse/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dmse/error.hpp"
#include "dmse/wav.hpp"

namespace dmse {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double si_sdr(std::span<const double> reference, std::span<const double> estimate) {
  DMSE_REQUIRE(reference.size() == estimate.size(), "si_sdr: length mismatch");
  DMSE_REQUIRE(!reference.empty(), "si_sdr: empty input");
  const double rr = dot(reference, reference);
  DMSE_REQUIRE(rr > 0.0, "si_sdr: reference is all zeros");
  const double alpha = dot(estimate, reference) / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double p = alpha * reference[i];
    target += p * p;
    residual += (estimate[i] - p) * (estimate[i] - p);
  }
  if (residual == 0.0) return kSiSdrClampDb;
  if (target == 0.0) return -kSiSdrClampDb;
  return std::clamp(10.0 * std::log10(target / residual), -kSiSdrClampDb, kSiSdrClampDb);
}

double segmental_snr(std::span<const double> reference, std::span<const double> estimate, std::size_t frame,
                     std::size_t hop) {
  DMSE_REQUIRE(reference.size() == estimate.size(), "segmental_snr: length mismatch");
  DMSE_REQUIRE(!reference.empty(), "segmental_snr: empty input");
  DMSE_REQUIRE(frame >= 1 && hop >= 1, "segmental_snr: frame and hop must be >= 1");
  const std::size_t len = std::min(frame, reference.size());
  const std::size_t frames = 1 + (reference.size() - len) / hop;
  std::vector<double> sig(frames), err(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t n = m * hop; n < m * hop + len; ++n) {
      sig[m] += reference[n] * reference[n];
      err[m] += (reference[n] - estimate[n]) * (reference[n] - estimate[n]);
    }
  }
  const double peak = *std::max_element(sig.begin(), sig.end());
  if (!(peak > 0.0)) throw InvalidArgument("segmental_snr: reference is silent (no voiced frames)");
  const double floor = peak * std::pow(10.0, kSegSnrSilenceDb / 10.0);
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t m = 0; m < frames; ++m) {
    if (sig[m] <= floor) continue;
    const double db = err[m] > 0.0 ? 10.0 * std::log10(sig[m] / err[m]) : kSegSnrMaxDb;
    acc += std::clamp(db, kSegSnrMinDb, kSegSnrMaxDb);
    ++used;
  }
  return acc / static_cast<double>(used);
}

void MetricReport::finalize() {
  mean_si_sdr = mean_seg_snr = mean_stoi = 0.0;
  if (records.empty()) return;
  for (const auto& r : records) {
    mean_si_sdr += r.si_sdr;
    mean_seg_snr += r.seg_snr;
    mean_stoi += r.stoi;
  }
  const double n = static_cast<double>(records.size());
  mean_si_sdr /= n;
  mean_seg_snr /= n;
  mean_stoi /= n;
}

MetricReport evaluate_manifest(const Manifest& manifest, EstimateSource source,
                               const std::filesystem::path& estimates_dir) {
  DMSE_REQUIRE(source != EstimateSource::directory || !estimates_dir.empty(),
               "evaluate: an estimates directory is required");
  MetricReport report;
  for (const auto& entry : manifest.entries) {
    try {
      const Wav clean = read_wav(manifest.resolve(entry.clean));
      std::filesystem::path est_path;
      switch (source) {
        case EstimateSource::noisy: est_path = manifest.resolve(entry.noisy); break;
        case EstimateSource::clean: est_path = manifest.resolve(entry.clean); break;
        case EstimateSource::directory: est_path = estimates_dir / enhanced_file_name(entry.id); break;
      }
      const Wav est = read_wav(est_path);
      const auto& ref = clean.channels.at(0);
      const auto& hyp = est.channels.at(0);
      if (ref.size() != hyp.size())
        throw InvalidArgument(entry.id + ": estimate length " + std::to_string(hyp.size()) +
                              " differs from reference " + std::to_string(ref.size()));
      report.records.push_back({entry.id, si_sdr(ref, hyp), segmental_snr(ref, hyp), stoi(ref, hyp, clean.sample_rate)});
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      report.errors.push_back(entry.id + ": " + e.what());
    }
  }
  report.finalize();
  return report;
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write report " + path.string());
  char buf[64];
  auto num = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  os << "id\tsi_sdr\tseg_snr\tstoi\n";
  for (const auto& r : report.records)
    os << r.id << '\t' << num(r.si_sdr) << '\t' << num(r.seg_snr) << '\t' << num(r.stoi) << '\n';
  os << "mean\t" << num(report.mean_si_sdr) << '\t' << num(report.mean_seg_snr) << '\t' << num(report.mean_stoi)
     << '\n';
  for (const auto& e : report.errors) os << "# error " << e << '\n';
  if (!os) throw IoError("failed writing report " + path.string());
}

MetricReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open report " + path.string());
  MetricReport report;
  std::string line;
  if (!std::getline(is, line) || line != "id\tsi_sdr\tseg_snr\tstoi")
    throw FormatError(path.string() + ": missing report header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# error ", 0) == 0) {
      report.errors.push_back(line.substr(8));
      continue;
    }
    std::istringstream ls(line);
    MetricRecord r;
    if (!(ls >> r.id >> r.si_sdr >> r.seg_snr >> r.stoi)) throw FormatError(path.string() + ": malformed row");
    if (r.id == "mean") {
      report.mean_si_sdr = r.si_sdr;
      report.mean_seg_snr = r.seg_snr;
      report.mean_stoi = r.stoi;
    } else {
      report.records.push_back(r);
    }
  }
  return report;
}

}  // namespace dmse
