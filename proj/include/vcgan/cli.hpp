#pragma once

// Command-line front end. run_cli() parses argv, runs one subcommand and maps
// failures to exit codes: 0 success, 1 bad input or config, 2 numerical
// failure. Errors go to `err` as one JSON line.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcgan/errors.hpp"
#include "vcgan/experiment.hpp"

namespace vcgan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

namespace detail {

inline void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << "\n";
}

/// Writes to `path`, or to `out` when `path` is empty. A failed write leaves
/// no file behind.
inline void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty()) {
    out << text;
    return;
  }
  OutputGuard guard;
  guard.track(path);
  write_text_file(path, text);
  guard.commit();
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-path GAN toolkit with amplified one-hot path codes", "vcgan"};
  app.require_subcommand(1, 1);

  // amp
  auto* amp_cmd = app.add_subcommand("amp", "Solve the code amplitude for N paths");
  std::size_t amp_n = 0;
  std::size_t amp_l = 0;
  double amp_delta = 2.0;
  amp_cmd->add_option("--n", amp_n, "number of paths (>= 2)")->required();
  amp_cmd->add_option("--l", amp_l, "continuous noise length (>= 1)")->required();
  amp_cmd->add_option("--delta", amp_delta, "separation in standard deviations")
      ->capture_default_str();

  // verify-geometry
  auto* geo_cmd = app.add_subcommand("verify-geometry", "Closed-form vs Monte Carlo distance table");
  std::vector<std::size_t> geo_n{2, 10, 64};
  std::vector<std::size_t> geo_l{16, 118, 512};
  std::vector<double> geo_delta{0.5, 1.0, 2.0, 3.0};
  std::size_t geo_samples = 200000;
  std::uint64_t geo_seed = 1;
  std::string geo_out;
  geo_cmd->add_option("--n", geo_n, "path counts")->capture_default_str();
  geo_cmd->add_option("--l", geo_l, "continuous lengths")->capture_default_str();
  geo_cmd->add_option("--delta", geo_delta, "separations")->capture_default_str();
  geo_cmd->add_option("--samples", geo_samples, "pairs per length")->capture_default_str();
  geo_cmd->add_option("--seed", geo_seed)->capture_default_str();
  geo_cmd->add_option("--out", geo_out, "CSV file (default: stdout)");

  // data
  auto* data_cmd = app.add_subcommand("data", "Sample a synthetic mixture");
  std::string data_preset;
  std::size_t data_count = 1000;
  std::uint64_t data_seed = 0;
  std::string data_out;
  data_cmd->add_option("--preset", data_preset, "ring8 | grid25 | imbalanced2-73 | imbalanced2-82")
      ->required();
  data_cmd->add_option("--count", data_count)->capture_default_str();
  data_cmd->add_option("--seed", data_seed)->capture_default_str();
  data_cmd->add_option("--out", data_out, "CSV file (default: stdout)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model from a JSON config");
  std::string train_config;
  std::string train_out;
  train_cmd->add_option("--config", train_config)->required();
  train_cmd->add_option("--out", train_out, "output directory");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a trained model");
  std::string sample_model;
  std::size_t sample_path = 0;
  std::size_t sample_count = 1000;
  std::uint64_t sample_seed = 0;
  std::string sample_out;
  sample_cmd->add_option("--model", sample_model)->required();
  sample_cmd->add_option("--path", sample_path, "1-based path; omit to let the ADC choose");
  sample_cmd->add_option("--count", sample_count)->capture_default_str();
  sample_cmd->add_option("--seed", sample_seed)->capture_default_str();
  sample_cmd->add_option("--out", sample_out, "CSV file (default: stdout)");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Evaluate a trained model on a preset");
  std::string metrics_model;
  std::string metrics_preset;
  bool metrics_csv = false;
  EvalOptions metrics_opt;
  std::string metrics_out;
  metrics_cmd->add_option("--model", metrics_model)->required();
  metrics_cmd->add_option("--preset", metrics_preset, "default: the model's training preset");
  metrics_cmd->add_flag("--csv", metrics_csv, "one CSV row instead of JSON");
  metrics_cmd->add_option("--samples", metrics_opt.samples)->capture_default_str();
  metrics_cmd->add_option("--per-path", metrics_opt.per_path)->capture_default_str();
  metrics_cmd->add_option("--seed", metrics_opt.seed)->capture_default_str();
  metrics_cmd->add_option("--radius", metrics_opt.metric.radius_multiplier,
                          "assignment radius in mixture sigmas")
      ->capture_default_str();
  metrics_cmd->add_option("--threshold", metrics_opt.metric.coverage_threshold,
                          "samples needed to cover a mode")
      ->capture_default_str();
  metrics_cmd->add_option("--out", metrics_out, "file (default: stdout)");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate across seeds");
  std::string sweep_config;
  std::size_t sweep_seeds = 0;
  std::size_t sweep_jobs = 0;
  std::string sweep_out;
  sweep_cmd->add_option("--config", sweep_config)->required();
  sweep_cmd->add_option("--seeds", sweep_seeds,
                        "run seeds seed..seed+n-1 (default: the config's seed list)");
  sweep_cmd->add_option("--jobs", sweep_jobs, "parallel workers (default: hardware threads)");
  sweep_cmd->add_option("--out", sweep_out, "output directory");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    detail::print_error(err, "usage", e.what());
    return kExitConfig;
  }

  try {
    if (amp_cmd->parsed()) {
      const AmplificationParams a = amplification(amp_n, amp_l, amp_delta);
      Json j;
      j["schema_version"] = kSchemaVersion;
      j["N"] = a.N;
      j["L"] = a.L;
      j["delta"] = a.delta;
      j["A"] = a.A;
      j["b"] = a.b;
      j["h"] = a.h;
      j["v"] = a.v;
      out << j.dump() << "\n";
    } else if (geo_cmd->parsed()) {
      detail::emit(out, geo_out,
                   geometry_csv(verify_geometry(geo_n, geo_l, geo_delta, geo_samples, geo_seed)));
    } else if (data_cmd->parsed()) {
      const LabeledBatch b = sample_batch(preset(data_preset), data_count, data_seed);
      detail::emit(out, data_out, points_csv(b.points, b.labels, "component"));
    } else if (train_cmd->parsed()) {
      const ExperimentConfig c = load_config(train_config);
      const auto dir = resolve_output_dir(c, train_out);
      (void)run_train(c, dir);
      Json j;
      j["schema_version"] = kSchemaVersion;
      j["output_dir"] = dir.string();
      j["iterations"] = c.train.iterations;
      out << j.dump() << "\n";
    } else if (sample_cmd->parsed()) {
      const LoadedModel m = load_model(sample_model);
      std::mt19937_64 rng(sample_seed);
      std::vector<Point2> pts;
      std::vector<std::size_t> paths;
      if (sample_cmd->count("--path") > 0) {
        if (sample_path < 1 || sample_path > m.generator.layout.N) {
          throw ConfigError("--path must lie in 1.." + std::to_string(m.generator.layout.N));
        }
        pts = conditional_batch(sample_path - 1, sample_count, m.generator, rng);
        paths.assign(sample_count, sample_path - 1);
      } else {
        std::tie(pts, paths) = sample_generator(sample_count, m.generator, rng);
      }
      detail::emit(out, sample_out, points_csv(pts, paths, "path"));
    } else if (metrics_cmd->parsed()) {
      const LoadedModel m = load_model(metrics_model);
      const std::string name = metrics_preset.empty() ? m.config.preset : metrics_preset;
      const EvalReport r = evaluate(m.generator, preset(name), metrics_opt);
      detail::emit(out, metrics_out,
                   metrics_csv ? std::string(kReportCsvHeader) + report_csv_row(r, name)
                               : report_to_json(r, name).dump(2) + "\n");
    } else if (sweep_cmd->parsed()) {
      const ExperimentConfig c = load_config(sweep_config);
      std::vector<std::uint64_t> seeds = c.seeds;
      if (sweep_cmd->count("--seeds") > 0) {
        seeds.clear();
        for (std::size_t i = 0; i < sweep_seeds; ++i) seeds.push_back(c.train.seed + i);
      }
      if (seeds.empty()) throw ConfigError("sweep: give --seeds or a non-empty 'seeds' list");
      const auto dir = resolve_output_dir(c, sweep_out);
      (void)run_sweep(c, seeds, dir, sweep_jobs);
      out << std::ifstream(dir / "sweep.csv").rdbuf();
    }
  } catch (const NumericalError& e) {
    detail::print_error(err, "numerical", e.what());
    return kExitNumerical;
  } catch (const ConfigError& e) {
    detail::print_error(err, "config", e.what());
    return kExitConfig;
  } catch (const ShapeError& e) {
    detail::print_error(err, "shape", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    detail::print_error(err, "io", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    detail::print_error(err, "io", e.what());
    return kExitConfig;
  }
  return kExitOk;
}

inline int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace vcgan
