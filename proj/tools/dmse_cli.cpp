// Copyright 2026 The dmse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end. Every subcommand is a thin wrapper over the C API.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmse/dmse.h"

namespace {

struct Failure {
  dmse_status status;
  std::string message;
};

void check(dmse_status s) {
  if (s != DMSE_OK) throw Failure{s, dmse_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  dmse_string_free(s);
  return out;
}

using ConfigPtr = std::unique_ptr<dmse_config, decltype(&dmse_config_destroy)>;
using ModelPtr = std::unique_ptr<dmse_model, decltype(&dmse_model_destroy)>;

std::string config_path(const dmse_config* cfg, const char* name) {
  char* p = nullptr;
  check(dmse_config_path(cfg, name, &p));
  return take(p);
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-microphone speech enhancement with cross-channel attention"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> overrides;
  long long seed = -1;
  bool print_config = false;
  app.add_option("--config", config_file, "JSON pipeline config; missing keys take defaults")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config key, e.g. --set model.heads=4 (repeatable)");
  app.add_option("--seed", seed, "Seed for every random stage of the run")->check(CLI::NonNegativeNumber);
  app.add_flag("--print-config", print_config, "Print the effective config as JSON and exit");

  auto* make = app.add_subcommand("make-dataset", "Synthesize reverberant two-channel mixtures and a manifest");
  std::string make_out;
  long long make_scenes = -1;
  make->add_option("--out", make_out, "Output directory (default: paths.dataset)");
  make->add_option("--scenes", make_scenes, "Number of scenes (default: dataset.num_scenes)")
      ->check(CLI::PositiveNumber);

  auto* stats = app.add_subcommand("compute-stats", "Per-bin a-priori SNR statistics over a manifest");
  std::string stats_manifest, stats_out;
  stats->add_option("--manifest", stats_manifest, "Manifest (default: <paths.dataset>/manifest.tsv)");
  stats->add_option("--out", stats_out, "Stats file (default: paths.stats)");

  auto* train = app.add_subcommand("train", "Train the network and write a checkpoint after every epoch");
  std::string train_manifest, train_stats, train_ckpt, train_log;
  long long epochs = -1, batch = -1;
  double lr = -1.0;
  bool no_mhca = false, no_snr = false, no_decoder = false, quiet = false;
  train->add_option("--manifest", train_manifest, "Manifest (default: <paths.dataset>/manifest.tsv)");
  train->add_option("--stats", train_stats, "Stats file (default: paths.stats)");
  train->add_option("--checkpoint", train_ckpt, "Checkpoint output (default: paths.checkpoint)");
  train->add_option("--loss-log", train_log, "Per-epoch loss log (default: paths.loss_log)");
  train->add_option("--epochs", epochs, "Epochs (default: train.epochs)")->check(CLI::PositiveNumber);
  train->add_option("--batch", batch, "Batch size (default: train.batch)")->check(CLI::PositiveNumber);
  train->add_option("--lr", lr, "Adam learning rate (default: train.lr)")->check(CLI::PositiveNumber);
  train->add_flag("--no-mhca", no_mhca, "Bypass the cross-attention gates");
  train->add_flag("--no-snr-head", no_snr, "Drop the SNR estimator (direct spectral mapping)");
  train->add_flag("--no-decoder", no_decoder, "Drop the magnitude decoder (SNR estimator and gain only)");
  train->add_flag("--quiet", quiet, "Do not print per-epoch losses");

  auto* enh = app.add_subcommand("enhance", "Enhance a two-channel WAV or every scene of a manifest");
  std::string enh_ckpt, enh_stats, enh_in, enh_out, enh_manifest, enh_dir, enh_masks;
  enh->add_option("--checkpoint", enh_ckpt, "Checkpoint (default: paths.checkpoint)");
  enh->add_option("--stats", enh_stats, "Stats file (default: paths.stats)");
  auto* in_opt = enh->add_option("--input", enh_in, "Two-channel 16 kHz input WAV");
  enh->add_option("--output", enh_out, "Enhanced mono WAV")->needs(in_opt);
  auto* man_opt = enh->add_option("--manifest", enh_manifest, "Enhance every scene of this manifest");
  enh->add_option("--out-dir", enh_dir, "Directory for <id>_enhanced.wav files")->needs(man_opt);
  enh->add_option("--dump-masks", enh_masks, "Write per-block gate matrices to this directory")->needs(in_opt);
  in_opt->excludes(man_opt);

  auto* eval = app.add_subcommand("evaluate", "SI-SDR, segmental SNR and STOI over a manifest");
  std::string eval_manifest, eval_estimates, eval_against = "noisy", eval_report;
  eval->add_option("--manifest", eval_manifest, "Manifest (default: <paths.dataset>/manifest.tsv)");
  eval->add_option("--estimates", eval_estimates, "Directory of <id>_enhanced.wav files");
  eval->add_option("--against", eval_against, "Score the noisy primary or the clean reference itself")
      ->check(CLI::IsMember({"noisy", "clean"}));
  eval->add_option("--report", eval_report, "Report table (default: paths.report)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every autodiff op and the model loss");
  double tolerance = 1e-4;
  grad->add_option("--tolerance", tolerance, "Maximum relative error")->check(CLI::PositiveNumber);

  auto* oracle = app.add_subcommand("oracle-gain", "Segmental SNR gain of the MMSE gain with the true SNR");
  long long mixtures = 10;
  double oracle_snr = 0.0;
  oracle->add_option("--mixtures", mixtures, "White-noise mixtures")->check(CLI::PositiveNumber);
  oracle->add_option("--snr", oracle_snr, "Mixture SNR in dB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (!print_config && app.get_subcommands().empty()) {
    std::cout << app.help();
    return 2;
  }

  try {
    ConfigPtr cfg(nullptr, dmse_config_destroy);
    {
      dmse_config* raw = nullptr;
      check(config_file.empty() ? dmse_config_create(&raw) : dmse_config_load(config_file.c_str(), &raw));
      cfg.reset(raw);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Failure{DMSE_ERR_INVALID_ARGUMENT, "--set expects key=value, got " + kv};
      check(dmse_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    if (seed >= 0) check(dmse_config_set(cfg.get(), "seed", std::to_string(seed).c_str()));
    auto set = [&](const char* key, const std::string& v) { check(dmse_config_set(cfg.get(), key, v.c_str())); };
    const std::string dataset_dir = config_path(cfg.get(), "dataset");
    const std::string default_manifest = dataset_dir + "/manifest.tsv";
    auto or_default = [](const std::string& v, const std::string& d) { return v.empty() ? d : v; };

    if (*train) {
      if (epochs > 0) set("train.epochs", std::to_string(epochs));
      if (batch > 0) set("train.batch", std::to_string(batch));
      if (lr > 0) set("train.lr", std::to_string(lr));
      if (no_mhca) set("model.use_mhca", "false");
      if (no_snr) set("model.use_snr_head", "false");
      if (no_decoder) set("model.use_decoder", "false");
    }
    if (print_config) {
      char* json = nullptr;
      check(dmse_config_dump(cfg.get(), &json));
      std::cout << take(json);
      return 0;
    }

    if (*make) {
      if (make_scenes > 0) set("dataset.num_scenes", std::to_string(make_scenes));
      const std::string out = or_default(make_out, dataset_dir);
      size_t scenes = 0, errors = 0;
      check(dmse_make_dataset(cfg.get(), out.c_str(), &scenes, &errors));
      std::cout << "scenes\t" << scenes << "\nerrors\t" << errors << "\nmanifest\t" << out << "/manifest.tsv\n";
    } else if (*stats) {
      const std::string m = or_default(stats_manifest, default_manifest);
      const std::string out = or_default(stats_out, config_path(cfg.get(), "stats"));
      check(dmse_compute_stats(cfg.get(), m.c_str(), out.c_str()));
      std::cout << "stats\t" << out << '\n';
    } else if (*train) {
      const std::string m = or_default(train_manifest, default_manifest);
      const std::string s = or_default(train_stats, config_path(cfg.get(), "stats"));
      const std::string c = or_default(train_ckpt, config_path(cfg.get(), "checkpoint"));
      const std::string l = or_default(train_log, config_path(cfg.get(), "loss_log"));
      dmse_epoch_callback cb = nullptr;
      if (!quiet)
        cb = [](size_t e, double lf, double ls, double total, void*) {
          std::printf("epoch %zu\tl_f %.6f\tl_snr %.6f\ttotal %.6f\n", e, lf, ls, total);
          std::fflush(stdout);
        };
      check(dmse_train(cfg.get(), m.c_str(), s.c_str(), c.c_str(), l.c_str(), cb, nullptr));
      std::cout << "checkpoint\t" << c << "\nloss_log\t" << l << '\n';
    } else if (*enh) {
      ModelPtr model(nullptr, dmse_model_destroy);
      {
        dmse_model* raw = nullptr;
        check(dmse_model_load(or_default(enh_ckpt, config_path(cfg.get(), "checkpoint")).c_str(), &raw));
        model.reset(raw);
      }
      const std::string s = or_default(enh_stats, config_path(cfg.get(), "stats"));
      if (!enh_in.empty()) {
        if (enh_out.empty()) throw Failure{DMSE_ERR_INVALID_ARGUMENT, "enhance: --output is required with --input"};
        size_t masks = 0;
        check(dmse_enhance_file(model.get(), cfg.get(), s.c_str(), enh_in.c_str(), enh_out.c_str(),
                                enh_masks.empty() ? nullptr : enh_masks.c_str(), &masks));
        std::cout << "output\t" << enh_out << '\n';
        if (!enh_masks.empty()) std::cout << "mask_files\t" << masks << '\n';
      } else {
        const std::string m = or_default(enh_manifest, default_manifest);
        const std::string dir = or_default(enh_dir, "enhanced");
        size_t n = 0;
        check(dmse_enhance_manifest(model.get(), cfg.get(), s.c_str(), m.c_str(), dir.c_str(), &n));
        std::cout << "enhanced\t" << n << "\nout_dir\t" << dir << '\n';
      }
    } else if (*eval) {
      const std::string m = or_default(eval_manifest, default_manifest);
      const std::string r = or_default(eval_report, config_path(cfg.get(), "report"));
      const dmse_estimate_source src = !eval_estimates.empty() ? DMSE_ESTIMATE_DIRECTORY
                                       : eval_against == "clean" ? DMSE_ESTIMATE_CLEAN
                                                                 : DMSE_ESTIMATE_NOISY;
      dmse_metric_summary sum{};
      check(dmse_evaluate(m.c_str(), src, eval_estimates.c_str(), r.c_str(), &sum));
      std::printf("files\t%zu\nerrors\t%zu\nsi_sdr\t%.4f\nseg_snr\t%.4f\nstoi\t%.6f\nreport\t%s\n", sum.count,
                  sum.errors, sum.mean_si_sdr, sum.mean_seg_snr, sum.mean_stoi, r.c_str());
    } else if (*grad) {
      const long long s = seed >= 0 ? seed : 1;
      int ok = 0;
      check(dmse_gradcheck(static_cast<uint64_t>(s), tolerance,
                           [](const char* name, double err, size_t n, int passed, void*) {
                             std::printf("%s\t%s\tmax_rel_error %.3e\tchecked %zu\n", passed ? "PASS" : "FAIL", name,
                                         err, n);
                           },
                           nullptr, &ok));
      if (!ok) throw Failure{DMSE_ERR_NUMERIC, "gradcheck: at least one case exceeded the tolerance"};
    } else if (*oracle) {
      const long long s = seed >= 0 ? seed : 1;
      double gain = 0.0;
      check(dmse_oracle_gain(static_cast<size_t>(mixtures), oracle_snr, static_cast<uint64_t>(s), &gain));
      std::printf("mean_seg_snr_improvement_db\t%.4f\n", gain);
    }
  } catch (const Failure& f) {
    std::cerr << "dmse-error status=" << dmse_status_name(f.status) << " message=" << one_line(f.message) << '\n';
    return 1;
  }
  return 0;
}
