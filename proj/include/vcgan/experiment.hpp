#pragma once

// Experiment configuration, model/trace serialization and the train/sweep
// drivers behind the command-line tool.
//
// Files: configs and models are JSON objects carrying "schema_version";
// traces, samples and aggregates are CSV with a header row. Path and
// component indices are 1-based in every file.

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "vcgan/errors.hpp"
#include "vcgan/generator.hpp"
#include "vcgan/metrics.hpp"
#include "vcgan/onehot_geometry.hpp"
#include "vcgan/synth_data.hpp"
#include "vcgan/trainer.hpp"

namespace vcgan {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "VCGAN_OUTPUT_DIR";

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal form.
[[nodiscard]] inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("cannot write '" + path.string() + "'");
}

[[nodiscard]] inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// x,y,<label_name> rows; labels written 1-based.
[[nodiscard]] inline std::string points_csv(std::span<const Point2> pts,
                                            std::span<const std::size_t> labels,
                                            const std::string& label_name) {
  std::string out = "x,y," + label_name + "\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out += format_double(pts[i][0]) + "," + format_double(pts[i][1]) + "," +
           std::to_string(labels[i] + 1) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string preset;
  std::size_t M{128};
  std::size_t N{10};
  double delta{2.0};
  /// Unamplified one-hot code (A = 1, b = 0) instead of the solved amplitude.
  bool raw{false};
  bool learnable{false};
  TrainConfig train{};
  std::string output_dir;
  std::vector<std::uint64_t> seeds;
  /// Write samples_<iter>.csv every this many iterations (0: never).
  std::size_t sample_every{0};
  std::size_t sample_count{1000};
  EvalOptions eval{};

  [[nodiscard]] NoiseLayout layout() const { return NoiseLayout::from_total(M, N); }
  [[nodiscard]] AmplificationParams amp() const { return amplification_for(layout(), delta, raw); }
};

namespace detail {

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "schema_version", "preset",       "M",            "N",
      "delta",          "learnable",    "batch_size",   "n_critic",
      "iterations",     "lr_critic",    "lr_generator", "lr_logits",
      "beta1",          "beta2",        "clip",         "q_warmup",
      "seed",           "loss",         "lr_decay",     "hidden",       "trace_every",
      "output_dir",     "seeds",        "sample_every", "sample_count",
      "eval_samples",   "eval_per_path", "eval_seed",   "radius_multiplier",
      "coverage_threshold"};
  return keys;
}

inline ConfigError field_error(const std::string& field, const std::string& what) {
  return ConfigError("config field '" + field + "': " + what);
}

template <class T>
T get_field(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw field_error(key, "wrong type");
  }
}

inline std::size_t get_count(const Json& j, const std::string& key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw field_error(key, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline double get_real(const Json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw field_error(key, "expected a number");
  return j.at(key).get<double>();
}

}  // namespace detail

/// Checks every cross-field constraint; errors name the offending field.
inline void validate(const ExperimentConfig& c) {
  if (c.preset.empty()) throw detail::field_error("preset", "required");
  try {
    (void)preset(c.preset);
  } catch (const ConfigError& e) {
    throw detail::field_error("preset", e.what());
  }
  NoiseLayout layout;
  try {
    layout = c.layout();
  } catch (const ConfigError& e) {
    throw detail::field_error("M/N", e.what());
  }
  if (!c.raw) {
    try {
      (void)c.amp();
    } catch (const ConfigError& e) {
      throw detail::field_error("delta", e.what());
    }
  }
  try {
    c.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.sample_count < 1) throw detail::field_error("sample_count", "must be >= 1");
  if (c.eval.samples < kMinCoverageSamples) throw detail::field_error("eval_samples", "must be >= 1000");
  if (c.eval.per_path < kMinPerPathSamples) throw detail::field_error("eval_per_path", "must be >= 200");
  if (!(c.eval.metric.radius_multiplier > 0.0)) {
    throw detail::field_error("radius_multiplier", "must be > 0");
  }
}

[[nodiscard]] inline ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!detail::config_keys().contains(key)) {
      throw detail::field_error(key, "unknown key");
    }
  }
  ExperimentConfig c;
  if (j.contains("schema_version") && detail::get_count(j, "schema_version", 0) != kSchemaVersion) {
    throw detail::field_error("schema_version", "unsupported version");
  }
  c.preset = detail::get_field<std::string>(j, "preset", "");
  c.M = detail::get_count(j, "M", c.M);
  c.N = detail::get_count(j, "N", c.N);
  if (j.contains("delta")) {
    const Json& d = j.at("delta");
    if (d.is_string() && d.get<std::string>() == "raw") {
      c.raw = true;
      c.delta = 0.0;
    } else if (d.is_number()) {
      c.delta = d.get<double>();
    } else {
      throw detail::field_error("delta", "expected a number or \"raw\"");
    }
  }
  c.learnable = detail::get_field<bool>(j, "learnable", c.learnable);
  TrainConfig& t = c.train;
  t.batch_size = detail::get_count(j, "batch_size", t.batch_size);
  t.n_critic = detail::get_count(j, "n_critic", t.n_critic);
  t.iterations = detail::get_count(j, "iterations", t.iterations);
  t.lr_critic = detail::get_real(j, "lr_critic", t.lr_critic);
  t.lr_generator = detail::get_real(j, "lr_generator", t.lr_generator);
  t.lr_logits = detail::get_real(j, "lr_logits", t.lr_logits);
  t.beta1 = detail::get_real(j, "beta1", t.beta1);
  t.beta2 = detail::get_real(j, "beta2", t.beta2);
  t.clip = detail::get_real(j, "clip", t.clip);
  t.q_warmup = detail::get_count(j, "q_warmup", t.q_warmup);
  t.seed = detail::get_count(j, "seed", t.seed);
  if (j.contains("loss")) {
    try {
      t.loss = loss_kind_from_string(detail::get_field<std::string>(j, "loss", ""));
    } catch (const ConfigError& e) {
      throw detail::field_error("loss", e.what());
    }
  }
  if (j.contains("lr_decay")) {
    try {
      t.lr_decay = lr_schedule_from_string(detail::get_field<std::string>(j, "lr_decay", ""));
    } catch (const ConfigError& e) {
      throw detail::field_error("lr_decay", e.what());
    }
  }
  t.hidden = detail::get_count(j, "hidden", t.hidden);
  t.trace_every = detail::get_count(j, "trace_every", t.trace_every);
  c.output_dir = detail::get_field<std::string>(j, "output_dir", "");
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array()) throw detail::field_error("seeds", "expected an array");
    for (const Json& s : j.at("seeds")) {
      if (!s.is_number_integer() || s.get<long long>() < 0) {
        throw detail::field_error("seeds", "expected non-negative integers");
      }
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  c.sample_every = detail::get_count(j, "sample_every", c.sample_every);
  c.sample_count = detail::get_count(j, "sample_count", c.sample_count);
  c.eval.samples = detail::get_count(j, "eval_samples", c.eval.samples);
  c.eval.per_path = detail::get_count(j, "eval_per_path", c.eval.per_path);
  c.eval.seed = detail::get_count(j, "eval_seed", c.eval.seed);
  c.eval.metric.radius_multiplier =
      detail::get_real(j, "radius_multiplier", c.eval.metric.radius_multiplier);
  c.eval.metric.coverage_threshold =
      detail::get_count(j, "coverage_threshold", c.eval.metric.coverage_threshold);
  validate(c);
  return c;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

[[nodiscard]] inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["preset"] = c.preset;
  j["M"] = c.M;
  j["N"] = c.N;
  if (c.raw) {
    j["delta"] = "raw";
  } else {
    j["delta"] = c.delta;
  }
  j["learnable"] = c.learnable;
  j["batch_size"] = c.train.batch_size;
  j["n_critic"] = c.train.n_critic;
  j["iterations"] = c.train.iterations;
  j["lr_critic"] = c.train.lr_critic;
  j["lr_generator"] = c.train.lr_generator;
  j["lr_logits"] = c.train.lr_logits;
  j["beta1"] = c.train.beta1;
  j["beta2"] = c.train.beta2;
  j["clip"] = c.train.clip;
  j["q_warmup"] = c.train.q_warmup;
  j["seed"] = c.train.seed;
  j["loss"] = to_string(c.train.loss);
  j["lr_decay"] = to_string(c.train.lr_decay);
  j["hidden"] = c.train.hidden;
  j["trace_every"] = c.train.trace_every;
  j["output_dir"] = c.output_dir;
  j["seeds"] = c.seeds;
  j["sample_every"] = c.sample_every;
  j["sample_count"] = c.sample_count;
  j["eval_samples"] = c.eval.samples;
  j["eval_per_path"] = c.eval.per_path;
  j["eval_seed"] = c.eval.seed;
  j["radius_multiplier"] = c.eval.metric.radius_multiplier;
  j["coverage_threshold"] = c.eval.metric.coverage_threshold;
  return j;
}

/// Explicit directory, else the config's, else $VCGAN_OUTPUT_DIR, else ".".
[[nodiscard]] inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c,
                                                              const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return ".";
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

namespace detail {

inline Json params_to_json(const ad::ParamSet& ps) {
  Json arr = Json::array();
  for (const auto& [name, v] : ps) {
    Json e;
    e["name"] = name;
    e["shape"] = {v.rows(), v.cols()};
    e["data"] = std::vector<double>(v.data().begin(), v.data().end());
    arr.push_back(std::move(e));
  }
  return arr;
}

inline ad::ParamSet params_from_json(const Json& arr) {
  ad::ParamSet ps;
  for (const Json& e : arr) {
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw ConfigError("model: parameter shape must have two dimensions");
    ps.add(e.at("name").get<std::string>(), {shape[0], shape[1]},
           e.at("data").get<std::vector<double>>());
  }
  return ps;
}

inline Json mlp_to_json(const Mlp& m) {
  Json j;
  j["widths"] = m.widths();
  j["slope"] = m.slope();
  j["params"] = params_to_json(m.params());
  return j;
}

inline Mlp mlp_from_json(const Json& j) {
  return Mlp(j.at("widths").get<std::vector<std::size_t>>(), j.at("slope").get<double>(),
             params_from_json(j.at("params")));
}

}  // namespace detail

struct LoadedModel {
  ExperimentConfig config;
  GeneratorParams generator;
  std::optional<Mlp> critic;
  std::size_t generator_steps{0};
};

[[nodiscard]] inline Json model_to_json(const ExperimentConfig& config, const TrainState& s) {
  const GeneratorParams& g = s.generator;
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "vcgan-model";
  j["config"] = to_json(config);
  j["layout"] = {{"M", g.layout.M}, {"L", g.layout.L}, {"N", g.layout.N}};
  j["amplification"] = {{"N", g.amp.N}, {"L", g.amp.L},     {"delta", g.amp.delta},
                        {"A", g.amp.A}, {"b", g.amp.b},     {"h", g.amp.h},
                        {"v", g.amp.v}, {"raw", g.amp.raw}};
  const auto q = g.head.logits().data();
  j["head"] = {{"learnable", g.head.learnable()},
               {"q", std::vector<double>(q.begin(), q.end())},
               {"p", g.head.probs()}};
  j["decoder"] = detail::mlp_to_json(g.decoder);
  j["critic"] = detail::mlp_to_json(s.critic);
  j["generator_steps"] = s.generator_steps;
  return j;
}

[[nodiscard]] inline LoadedModel model_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ConfigError("model: unsupported schema_version");
    }
    LoadedModel m;
    m.config = config_from_json(j.at("config"));
    const Json& lj = j.at("layout");
    const NoiseLayout layout(lj.at("M").get<std::size_t>(), lj.at("L").get<std::size_t>(),
                             lj.at("N").get<std::size_t>());
    const Json& aj = j.at("amplification");
    AmplificationParams amp;
    amp.N = aj.at("N").get<std::size_t>();
    amp.L = aj.at("L").get<std::size_t>();
    amp.delta = aj.at("delta").get<double>();
    amp.A = aj.at("A").get<double>();
    amp.b = aj.at("b").get<double>();
    amp.h = aj.at("h").get<double>();
    amp.v = aj.at("v").get<double>();
    amp.raw = aj.at("raw").get<bool>();
    if (amp.N != layout.N || amp.L != layout.L) {
      throw ConfigError("model: amplification does not match layout");
    }
    const Json& hj = j.at("head");
    CategoricalHead head(hj.at("q").get<std::vector<double>>(), hj.at("learnable").get<bool>());
    if (head.size() != layout.N) throw ConfigError("model: head size does not match layout");
    Mlp decoder = detail::mlp_from_json(j.at("decoder"));
    if (decoder.widths().front() != layout.M || decoder.widths().back() != kSampleDim) {
      throw ConfigError("model: decoder widths do not match layout");
    }
    m.generator = GeneratorParams{layout, amp, std::move(head), std::move(decoder)};
    if (j.contains("critic")) m.critic = detail::mlp_from_json(j.at("critic"));
    m.generator_steps = j.value("generator_steps", std::size_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: malformed file: ") + e.what());
  }
}

[[nodiscard]] inline LoadedModel load_model(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("model '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Traces and reports
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string trace_header(std::size_t n) {
  std::string h = "iteration,critic_loss,gen_loss";
  for (std::size_t j = 1; j <= n; ++j) h += ",p_" + std::to_string(j);
  return h + "\n";
}

[[nodiscard]] inline std::string trace_row(const TraceRow& r) {
  std::string s = std::to_string(r.iteration) + "," + format_double(r.critic_loss) + "," +
                  format_double(r.generator_loss);
  for (double p : r.probs) s += "," + format_double(p);
  return s + "\n";
}

[[nodiscard]] inline Json report_to_json(const EvalReport& r, const std::string& preset_name) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["preset"] = preset_name;
  j["components"] = r.components;
  j["paths"] = r.paths;
  j["modes_covered"] = r.modes_covered;
  j["high_quality_fraction"] = r.high_quality_fraction;
  j["path_purity"] = r.path_purity;
  j["mean_purity"] = r.mean_purity;
  j["p_error_l1"] = r.p_error_l1;
  j["degenerate_matching"] = r.degenerate_matching;
  j["probs"] = r.probs;
  j["per_path_mode_histogram"] = r.histogram;
  return j;
}

inline const char* kReportCsvHeader =
    "preset,paths,components,modes_covered,high_quality_fraction,mean_purity,p_error_l1,"
    "degenerate_matching\n";

[[nodiscard]] inline std::string report_csv_row(const EvalReport& r, const std::string& preset_name) {
  return preset_name + "," + std::to_string(r.paths) + "," + std::to_string(r.components) + "," +
         std::to_string(r.modes_covered) + "," + format_double(r.high_quality_fraction) + "," +
         format_double(r.mean_purity) + "," + format_double(r.p_error_l1) + "," +
         (r.degenerate_matching ? "1" : "0") + "\n";
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

/// Removes every registered file unless commit() was called.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : files_) std::filesystem::remove(p, ec);
  }
  void track(const std::filesystem::path& p) { files_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::vector<std::filesystem::path> files_;
  bool committed_{false};
};

/// Trains and writes trace.csv, model.json and samples_<iter>.csv into `dir`.
inline TrainResult run_train(const ExperimentConfig& config, const std::filesystem::path& dir) {
  validate(config);
  std::filesystem::create_directories(dir);
  OutputGuard guard;
  const MixtureSpec data = preset(config.preset);
  const NoiseLayout layout = config.layout();

  auto on_snapshot = [&](std::size_t iter, const TrainState& s) {
    std::mt19937_64 rng(config.train.seed ^ (0x9e3779b97f4a7c15ULL * iter));
    const auto [pts, paths] = sample_generator(config.sample_count, s.generator, rng);
    const auto path = dir / ("samples_" + std::to_string(iter) + ".csv");
    guard.track(path);
    write_text_file(path, points_csv(pts, paths, "path"));
  };
  TrainResult result = train_loop(config.train, data, layout, config.amp(), config.learnable,
                                  on_snapshot, config.sample_every);

  std::string trace = trace_header(layout.N);
  for (const auto& row : result.trace) trace += trace_row(row);
  guard.track(dir / "trace.csv");
  write_text_file(dir / "trace.csv", trace);
  guard.track(dir / "model.json");
  write_text_file(dir / "model.json", model_to_json(config, result.state).dump(2) + "\n");
  guard.commit();
  return result;
}

struct SweepRow {
  std::uint64_t seed{0};
  EvalReport report;
};

[[nodiscard]] inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

[[nodiscard]] inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "seed,modes_covered,high_quality_fraction,mean_purity,p_error_l1,"
                    "degenerate_matching\n";
  std::vector<double> cov, hq, pur, perr, deg;
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + "," + std::to_string(r.report.modes_covered) + "," +
           format_double(r.report.high_quality_fraction) + "," +
           format_double(r.report.mean_purity) + "," + format_double(r.report.p_error_l1) + "," +
           (r.report.degenerate_matching ? "1" : "0") + "\n";
    cov.push_back(static_cast<double>(r.report.modes_covered));
    hq.push_back(r.report.high_quality_fraction);
    pur.push_back(r.report.mean_purity);
    perr.push_back(r.report.p_error_l1);
    deg.push_back(r.report.degenerate_matching ? 1.0 : 0.0);
  }
  out += "median," + format_double(median(cov)) + "," + format_double(median(hq)) + "," +
         format_double(median(pur)) + "," + format_double(median(perr)) + "," +
         format_double(median(deg)) + "\n";
  return out;
}

/// Train + evaluate once per seed, each into `dir`/seed_<s>/, in parallel
/// (one worker per hardware thread); writes `dir`/sweep.csv in seed-list order.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& config,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::filesystem::path& dir,
                                       std::size_t max_workers = 0) {
  validate(config);
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  std::filesystem::create_directories(dir);
  const MixtureSpec data = preset(config.preset);
  std::vector<SweepRow> rows(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::vector<std::filesystem::path> fresh_dirs;
  for (std::uint64_t s : seeds) {
    const auto sub = dir / ("seed_" + std::to_string(s));
    if (!std::filesystem::exists(sub)) fresh_dirs.push_back(sub);
  }
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i = 0;
      {
        std::lock_guard lock(mu);
        if (next >= seeds.size()) return;
        i = next++;
      }
      try {
        ExperimentConfig c = config;
        c.train.seed = seeds[i];
        const auto sub = dir / ("seed_" + std::to_string(seeds[i]));
        const TrainResult r = run_train(c, sub);
        rows[i] = {seeds[i], evaluate(r.state.generator, data, c.eval)};
        write_text_file(sub / "metrics.json", report_to_json(rows[i].report, c.preset).dump(2) + "\n");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t workers = max_workers > 0 ? max_workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (!e) continue;
    std::error_code ec;
    for (const auto& d : fresh_dirs) std::filesystem::remove_all(d, ec);
    std::rethrow_exception(e);
  }
  write_text_file(dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

// ---------------------------------------------------------------------------
// Geometry verification table
// ---------------------------------------------------------------------------

struct GeometryRow {
  std::size_t N{0};
  std::size_t L{0};
  double delta{0.0};
  double h{0.0};
  double intra_max_closed{0.0};
  double inter_min_closed{0.0};
  double balance_gap{0.0};  // |inter_min - intra_max| / intra_mean
  double intra_max_mc{0.0};
  double inter_min_mc{0.0};
};

/// Closed form vs Monte Carlo over a grid. The intra draws depend only on L,
/// so each L is sampled once and reused for every (N, delta).
[[nodiscard]] inline std::vector<GeometryRow> verify_geometry(
    const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ls,
    const std::vector<double>& deltas, std::size_t samples, std::uint64_t seed) {
  std::vector<GeometryRow> rows;
  for (std::size_t L : ls) {
    const DistanceSamples base = monte_carlo_distances(L, 0.0, samples, seed + L);
    const auto [im, is] = detail::mean_std(base.intra);
    for (std::size_t N : ns) {
      for (double delta : deltas) {
        const AmplificationParams amp = amplification(N, L, delta);
        std::vector<double> inter(base.intra.size());
        for (std::size_t i = 0; i < inter.size(); ++i) {
          inter[i] = std::sqrt(base.intra[i] * base.intra[i] + 2.0 * amp.h * amp.h);
        }
        const auto [em, es] = detail::mean_std(inter);
        GeometryRow r;
        r.N = N;
        r.L = L;
        r.delta = delta;
        r.h = amp.h;
        const long long l = static_cast<long long>(L);
        r.intra_max_closed = intra_max(l, delta);
        r.inter_min_closed = inter_min(l, amp.h, delta);
        r.balance_gap = std::abs(r.inter_min_closed - r.intra_max_closed) / intra_mean(l);
        r.intra_max_mc = im + delta * is;
        r.inter_min_mc = em - delta * es;
        rows.push_back(r);
      }
    }
  }
  return rows;
}

[[nodiscard]] inline std::string geometry_csv(const std::vector<GeometryRow>& rows) {
  std::string out =
      "N,L,delta,h,intra_max_closed,inter_min_closed,balance_gap_rel,intra_max_mc,inter_min_mc,"
      "intra_rel_err,inter_rel_err\n";
  for (const auto& r : rows) {
    out += std::to_string(r.N) + "," + std::to_string(r.L) + "," + format_double(r.delta) + "," +
           format_double(r.h) + "," + format_double(r.intra_max_closed) + "," +
           format_double(r.inter_min_closed) + "," + format_double(r.balance_gap) + "," +
           format_double(r.intra_max_mc) + "," + format_double(r.inter_min_mc) + "," +
           format_double(std::abs(r.intra_max_mc - r.intra_max_closed) / r.intra_max_closed) +
           "," +
           format_double(std::abs(r.inter_min_mc - r.inter_min_closed) / r.inter_min_closed) +
           "\n";
  }
  return out;
}

}  // namespace vcgan
