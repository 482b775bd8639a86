#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "pairnet/checkpoint.hpp"
#include "pairnet/common.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/evaluation.hpp"
#include "pairnet/pca.hpp"

namespace pairnet::cli {

inline constexpr std::string_view kVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kDivergence = 4,
};

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::BadConfig:
    case Errc::InvalidArgument:
      return kConfigError;
    case Errc::DivergedToNonFinite:
      return kDivergence;
    default:
      return kDataError;
  }
}

// ---------------------------------------------------------------------------
// Formatting

/// Shortest round-trip fixed notation with at least one fractional digit: 0 -> "0.0", 1.1 -> "1.1".
inline std::string format_alpha(double alpha) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, alpha, std::chars_format::fixed);
  std::string s(buf, ptr);
  if (s.find('.') == std::string::npos && s.find_first_of("ni") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<double> parse_double(std::string_view s) {
  auto t = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Configuration

/// Every `run` setting with its default. `to_lines` is the resolved form that
/// gets embedded in outputs and can be fed back through --config.
struct RunConfig {
  std::string data_dir;
  std::string manifest;
  std::string synthetic;  // preset name; "fig1" when no source is given
  int downsample = 1;
  std::string systems = "pairwise,multiclass";
  std::string alphas = "0.0,0.1,0.3,0.5,0.7,0.9,1.1,1.3";
  int folds = 5;
  std::size_t pca_dim = 30;
  bool pca_dim_explicit = false;
  double explained_var = 0.0;  // 0 = unused
  std::size_t hidden_binary = 8;
  std::size_t hidden_multi = 32;
  double lr = 0.05;
  std::size_t epochs = 200;
  std::size_t batch = 16;
  double l2 = 1e-4;
  std::string noise_scope = "train_and_test";
  std::string noise_space = "pca";
  bool no_standardize = false;
  bool hard_vote = false;
  bool pca_global = false;
  bool nested_noise = false;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string out = "results";

  std::vector<std::pair<std::string, std::string>> to_lines() const {
    auto num = [](double v) { return detail::format_double(v); };
    std::vector<std::pair<std::string, std::string>> l;
    if (!data_dir.empty()) l.emplace_back("data", data_dir);
    if (!manifest.empty()) l.emplace_back("manifest", manifest);
    if (!synthetic.empty()) l.emplace_back("synthetic", synthetic);
    l.emplace_back("downsample", std::to_string(downsample));
    l.emplace_back("systems", systems);
    l.emplace_back("alphas", alphas);
    l.emplace_back("folds", std::to_string(folds));
    if (explained_var > 0.0)
      l.emplace_back("explained-var", num(explained_var));
    else
      l.emplace_back("pca-dim", std::to_string(pca_dim));
    l.emplace_back("hidden-binary", std::to_string(hidden_binary));
    l.emplace_back("hidden-multi", std::to_string(hidden_multi));
    l.emplace_back("lr", num(lr));
    l.emplace_back("epochs", std::to_string(epochs));
    l.emplace_back("batch", std::to_string(batch));
    l.emplace_back("l2", num(l2));
    l.emplace_back("noise-scope", noise_scope);
    l.emplace_back("noise-space", noise_space);
    l.emplace_back("no-standardize", no_standardize ? "true" : "false");
    l.emplace_back("hard-vote", hard_vote ? "true" : "false");
    l.emplace_back("pca-global", pca_global ? "true" : "false");
    l.emplace_back("nested-noise", nested_noise ? "true" : "false");
    l.emplace_back("seed", std::to_string(seed));
    l.emplace_back("out", out);
    return l;
  }
};

/// Resolved pieces of a RunConfig that need parsing.
struct ParsedRun {
  std::vector<std::string> systems;  // "P" / "M"
  ExperimentConfig experiment;
  TrainConfig binary;
  TrainConfig multi;
  VoteMode vote = VoteMode::Soft;
};

inline ParsedRun parse_run_config(const RunConfig& rc) {
  auto bad = [](const std::string& field, const std::string& why) {
    return Error(Errc::BadConfig, "--" + field + ": " + why);
  };
  ParsedRun p;
  int sources = !rc.data_dir.empty() + !rc.manifest.empty() + !rc.synthetic.empty();
  if (sources > 1) throw bad("data", "give only one of --data, --manifest, --synthetic");
  if (!rc.synthetic.empty() && !find_synthetic_preset(rc.synthetic))
    throw bad("synthetic", "unknown preset '" + rc.synthetic + "'");
  if (rc.downsample < 1) throw bad("downsample", "must be >= 1");

  for (const auto& tok : split(rc.systems, ',')) {
    auto s = trim(tok);
    if (s == "pairwise" || s == "P")
      p.systems.push_back("P");
    else if (s == "multiclass" || s == "M")
      p.systems.push_back("M");
    else
      throw bad("systems", "unknown system '" + s + "'");
  }
  if (p.systems.empty()) throw bad("systems", "no systems selected");
  std::sort(p.systems.begin(), p.systems.end(), [](const auto& a, const auto& b) { return a == "P" && b != "P"; });
  p.systems.erase(std::unique(p.systems.begin(), p.systems.end()), p.systems.end());

  auto& ex = p.experiment;
  ex.alphas.clear();
  for (const auto& tok : split(rc.alphas, ',')) {
    auto v = parse_double(tok);
    if (!v) throw bad("alphas", "'" + trim(tok) + "' is not a number");
    if (!(*v >= 0.0) || !std::isfinite(*v)) throw bad("alphas", "alpha " + trim(tok) + " must be non-negative");
    ex.alphas.push_back(*v);
  }
  if (rc.folds < 2) throw bad("folds", "must be >= 2");
  ex.folds = rc.folds;
  if (rc.explained_var != 0.0) {
    if (!(rc.explained_var > 0.0 && rc.explained_var <= 1.0)) throw bad("explained-var", "must lie in (0, 1]");
    ex.explained_variance = rc.explained_var;
  }
  if (rc.pca_dim < 1) throw bad("pca-dim", "must be >= 1");
  ex.pca_dim = rc.pca_dim;
  ex.standardize = !rc.no_standardize;
  ex.pca_per_fold = !rc.pca_global;
  ex.nested_noise = rc.nested_noise;
  if (rc.noise_scope == "train_and_test")
    ex.scope = NoiseScope::TrainAndTest;
  else if (rc.noise_scope == "test_only")
    ex.scope = NoiseScope::TestOnly;
  else
    throw bad("noise-scope", "expected train_and_test or test_only");
  if (rc.noise_space == "pca")
    ex.space = NoiseSpace::Pca;
  else if (rc.noise_space == "pixel")
    ex.space = NoiseSpace::Pixel;
  else
    throw bad("noise-space", "expected pca or pixel");
  ex.seed = rc.seed;
  ex.threads = rc.threads == 0 ? default_thread_count() : rc.threads;

  if (!(rc.lr > 0.0) || !std::isfinite(rc.lr)) throw bad("lr", "must be positive");
  if (rc.epochs < 1) throw bad("epochs", "must be >= 1");
  if (!(rc.l2 >= 0.0)) throw bad("l2", "must be non-negative");
  if (rc.hidden_binary < 1) throw bad("hidden-binary", "must be >= 1");
  if (rc.hidden_multi < 1) throw bad("hidden-multi", "must be >= 1");
  TrainConfig base;
  base.learning_rate = rc.lr;
  base.epochs = rc.epochs;
  base.batch_size = rc.batch;
  base.l2 = rc.l2;
  p.binary = base;
  p.binary.hidden = rc.hidden_binary;
  p.multi = base;
  p.multi.hidden = rc.hidden_multi;
  p.vote = rc.hard_vote ? VoteMode::Hard : VoteMode::Soft;
  if (rc.out.empty()) throw bad("out", "output directory must be named");
  return p;
}

inline LabeledDataset load_source(const RunConfig& rc) {
  LoadOptions opts{rc.downsample};
  if (!rc.data_dir.empty()) return load_orl_dataset(rc.data_dir, opts);
  if (!rc.manifest.empty()) return load_manifest(rc.manifest, opts);
  auto preset = find_synthetic_preset(rc.synthetic.empty() ? "fig1" : rc.synthetic);
  return make_synthetic(static_cast<int>(preset->centers.size()), preset->n_per_class, preset->centers, preset->spread,
                        derive_seed(rc.seed, hash_tag("synthetic")));
}

/// Smallest training-partition size over the folds of a stratified plan.
inline std::size_t min_train_size(const LabeledDataset& data, int folds) {
  auto counts = data.class_counts();
  std::size_t largest_test = 0;
  for (auto c : counts) largest_test += (c + static_cast<std::size_t>(folds) - 1) / static_cast<std::size_t>(folds);
  return data.size() - largest_test;
}

/// Default pca-dim is clamped to what the data allows; an explicit one is checked.
inline void resolve_pca_dim(RunConfig& rc, ParsedRun& p, const LabeledDataset& data) {
  if (p.experiment.explained_variance) return;
  std::size_t n_fit = p.experiment.pca_per_fold ? min_train_size(data, rc.folds) : data.size();
  std::size_t limit = std::min(data.dim(), n_fit > 0 ? n_fit - 1 : 0);
  if (limit < 1) throw Error(Errc::ClassTooSmall, "too few training samples for PCA");
  if (rc.pca_dim > limit) {
    if (rc.pca_dim_explicit)
      throw Error(Errc::BadConfig, "--pca-dim: " + std::to_string(rc.pca_dim) + " exceeds the feasible maximum " +
                                       std::to_string(limit) + " for this data");
    rc.pca_dim = limit;
  }
  p.experiment.pca_dim = rc.pca_dim;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

inline std::string config_block(const RunConfig& rc, std::string_view prefix) {
  std::string s;
  for (const auto& [k, v] : rc.to_lines()) s += std::string(prefix) + k + "=" + v + "\n";
  return s;
}

inline std::string per_fold_csv(const EvalReport& report) {
  std::string s = "system,alpha,fold,accuracy\n";
  for (const auto& row : report.rows)
    for (const auto& f : row.folds)
      s += row.system + "," + format_alpha(row.alpha) + "," + std::to_string(f.fold) + "," +
           format_fixed(f.accuracy, 6) + "\n";
  return s;
}

inline std::string aggregate_csv(const EvalReport& report) {
  std::string s = "system,alpha,mean,two_sigma\n";
  for (const auto& row : report.rows)
    s += row.system + "," + format_alpha(row.alpha) + "," + format_fixed(row.mean, 3) + "," +
         format_fixed(row.two_sigma, 3) + "\n";
  return s;
}

/// The familiar layout: one column per alpha, mean and +-2 sigma rows per system.
inline std::string summary_table(const EvalReport& report) {
  std::vector<double> alphas;
  std::vector<std::string> systems;
  for (const auto& row : report.rows) {
    if (std::find(alphas.begin(), alphas.end(), row.alpha) == alphas.end()) alphas.push_back(row.alpha);
    if (std::find(systems.begin(), systems.end(), row.system) == systems.end()) systems.push_back(row.system);
  }
  std::string s = "alpha";
  for (double a : alphas) s += "\t" + format_alpha(a);
  s += "\n";
  for (const auto& sys : systems) {
    std::string means = sys + ", mean", sigmas = sys + ", 2\xcf\x83";
    for (double a : alphas)
      for (const auto& row : report.rows)
        if (row.system == sys && row.alpha == a) {
          means += "\t" + format_fixed(row.mean, 3);
          sigmas += "\t\xc2\xb1 " + format_fixed(row.two_sigma, 3);
        }
    s += means + "\n" + sigmas + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Commands

/// Full benchmark. Nothing is written until the configuration and data validate.
inline int cmd_run(RunConfig rc, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  ParsedRun parsed;
  LabeledDataset data;
  try {
    parsed = parse_run_config(rc);
    if (rc.data_dir.empty() && rc.manifest.empty() && rc.synthetic.empty()) rc.synthetic = "fig1";
    data = load_source(rc);
    data.validate(true);
    if (data.num_classes < 2) throw Error(Errc::TooFewClasses, "need at least 2 classes");
    resolve_pca_dim(rc, parsed, data);
    stratified_kfold(data.labels, rc.folds, 0);  // ClassTooSmall surfaces before any output
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }

  std::vector<SystemSpec> systems;
  for (const auto& s : parsed.systems)
    systems.push_back(s == "P" ? pairwise_system(parsed.binary, parsed.vote) : multiclass_system(parsed.multi));

  EvalReport report;
  try {
    report = run_experiment(data, systems, parsed.experiment);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const std::filesystem::path dir = rc.out;
  try {
    std::filesystem::create_directories(dir);
    write_file(dir / "per_fold.csv", per_fold_csv(report));
    write_file(dir / "aggregate.csv", aggregate_csv(report));
    write_file(dir / "config.txt", config_block(rc, ""));

    std::string table = summary_table(report);
    std::string summary = table + "\n" + config_block(rc, "# ");
    std::string meta = "version=" + std::string(kVersion) + "\n";
    meta += "status=" + std::string(report.complete() ? "ok" : "FAILED") + "\n";
    meta += "samples=" + std::to_string(data.size()) + "\nclasses=" + std::to_string(data.num_classes) +
            "\ndim=" + std::to_string(data.dim()) + "\n";
    meta += "threads=" + std::to_string(parsed.experiment.threads) + "\n";
    meta += "wall_time_s=" + format_fixed(wall, 3) + "\n";
    meta += config_block(rc, "config.");
    for (const auto& [k, v] : report.metadata) meta += k + "=" + v + "\n";
    for (const auto& f : report.failures) {
      std::string line = "FAILED system=" + f.system + " alpha=" + format_alpha(f.alpha) +
                         " fold=" + std::to_string(f.fold) + ": " + f.message;
      meta += "failure=" + line + "\n";
      summary += line + "\n";
    }
    write_file(dir / "summary.txt", summary);
    write_file(dir / "metadata.txt", meta);
    out << table;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }

  if (!report.complete()) {
    for (const auto& f : report.failures)
      err << "error: system " << f.system << ", alpha " << format_alpha(f.alpha) << ", fold " << f.fold << ": "
          << f.message << "\n";
    return exit_code_for(report.failures.front().code);
  }
  return kOk;
}

struct AggregateRow {
  std::string system;
  double alpha = 0.0;
  double mean = 0.0;
  double two_sigma = 0.0;
};

inline std::vector<AggregateRow> parse_aggregate_csv(std::string_view text) {
  std::vector<AggregateRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || trim(line) != "system,alpha,mean,two_sigma")
    throw Error(Errc::SchemaMismatch, "line 1: expected header system,alpha,mean,two_sigma");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(trim(line), ',');
    auto fail = [&](const std::string& why) {
      return Error(Errc::SchemaMismatch, "line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 4) throw fail("expected 4 fields, found " + std::to_string(fields.size()));
    AggregateRow r;
    r.system = trim(fields[0]);
    if (r.system.empty()) throw fail("empty system name");
    auto a = parse_double(fields[1]), m = parse_double(fields[2]), s = parse_double(fields[3]);
    if (!a || !m || !s) throw fail("non-numeric field");
    r.alpha = *a;
    r.mean = *m;
    r.two_sigma = *s;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// One `alpha mean lo hi` series file per system, lo/hi = mean -+ two_sigma.
inline int cmd_plotdata(const std::filesystem::path& aggregate, const std::filesystem::path& out_dir, std::ostream& out,
                        std::ostream& err) {
  std::vector<AggregateRow> rows;
  try {
    rows = parse_aggregate_csv(read_file_bytes(aggregate));
  } catch (const Error& e) {
    err << "error: " << aggregate.string() << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  std::vector<std::string> systems;
  std::map<std::string, std::string> series;
  for (const auto& r : rows) {
    if (!series.count(r.system)) systems.push_back(r.system);
    series[r.system] += format_alpha(r.alpha) + " " + format_fixed(r.mean, 3) + " " +
                        format_fixed(r.mean - r.two_sigma, 3) + " " + format_fixed(r.mean + r.two_sigma, 3) + "\n";
  }
  if (rows.empty()) {
    err << "warning: " << aggregate.string() << " has no data rows\n";
    systems = {"P", "M"};
  }
  try {
    std::filesystem::create_directories(out_dir);
    for (const auto& s : systems) {
      auto path = out_dir / ("series_" + s + ".dat");
      write_file(path, series[s]);
      out << path.string() << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kOk;
}

struct ScatterData {
  std::vector<int> classes;     // labels present, ascending
  std::vector<Matrix> clean;    // per class, n_c x 2
  std::vector<Matrix> noisy;
};

/// Projects onto the first two components (fit on all samples), then adds
/// alpha-level noise to a copy.
inline ScatterData compute_scatter(const LabeledDataset& data, double alpha, std::uint64_t seed, bool standardize) {
  PcaOptions opts;
  opts.standardize = standardize;
  auto model = fit_pca(data.samples, 2, opts);
  Matrix clean = project_rows(model, data.samples);
  Matrix noisy = add_noise(clean, {alpha, derive_seed(seed, hash_tag("scatter"))});
  ScatterData out;
  auto counts = data.class_counts();
  for (int c = 1; c <= data.num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    out.classes.push_back(c);
    Matrix a, b;
    for (std::size_t s = 0; s < data.size(); ++s)
      if (data.labels[s] == c) {
        a.append_row(clean.row(s));
        b.append_row(noisy.row(s));
      }
    out.clean.push_back(std::move(a));
    out.noisy.push_back(std::move(b));
  }
  return out;
}

inline std::string points_text(const Matrix& m) {
  std::string s;
  char buf[96];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::snprintf(buf, sizeof buf, "%.10g %.10g\n", m(r, 0), m(r, 1));
    s += buf;
  }
  return s;
}

inline int cmd_scatter(RunConfig rc, double alpha, std::ostream& out, std::ostream& err) {
  try {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(Errc::BadConfig, "--alpha must be non-negative");
    if (rc.downsample < 1) throw Error(Errc::BadConfig, "--downsample must be >= 1");
    int sources = !rc.data_dir.empty() + !rc.manifest.empty() + !rc.synthetic.empty();
    if (sources > 1) throw Error(Errc::BadConfig, "--data: give only one data source");
    if (!rc.synthetic.empty() && !find_synthetic_preset(rc.synthetic))
      throw Error(Errc::BadConfig, "--synthetic: unknown preset '" + rc.synthetic + "'");
    auto data = load_source(rc);
    auto sc = compute_scatter(data, alpha, rc.seed, !rc.no_standardize);
    std::filesystem::path dir = rc.out;
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < sc.classes.size(); ++i) {
      auto tag = std::to_string(sc.classes[i]);
      write_file(dir / ("clean_class" + tag + ".txt"), points_text(sc.clean[i]));
      write_file(dir / ("noisy_class" + tag + ".txt"), points_text(sc.noisy[i]));
    }
    out << "wrote " << 2 * sc.classes.size() << " point files to " << dir.string() << " (alpha " << format_alpha(alpha)
        << ")\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kOk;
}

/// Fits PCA on every sample of the source and writes the model checkpoint.
inline int cmd_prep(RunConfig rc, const std::filesystem::path& model_path, std::ostream& out, std::ostream& err) {
  try {
    if (rc.downsample < 1) throw Error(Errc::BadConfig, "--downsample must be >= 1");
    if (!rc.synthetic.empty() && !find_synthetic_preset(rc.synthetic))
      throw Error(Errc::BadConfig, "--synthetic: unknown preset '" + rc.synthetic + "'");
    if (rc.explained_var != 0.0 && !(rc.explained_var > 0.0 && rc.explained_var <= 1.0))
      throw Error(Errc::BadConfig, "--explained-var must lie in (0, 1]");
    auto data = load_source(rc);
    PcaOptions opts;
    opts.standardize = !rc.no_standardize;
    std::size_t limit = std::min(data.dim(), data.size() - 1);
    if (rc.pca_dim > limit) {
      if (rc.pca_dim_explicit)
        throw Error(Errc::BadConfig, "--pca-dim: exceeds the feasible maximum " + std::to_string(limit));
      rc.pca_dim = limit;
    }
    auto model = rc.explained_var > 0.0 ? fit_pca_explained(data.samples, rc.explained_var, opts)
                                        : fit_pca(data.samples, rc.pca_dim, opts);
    save_pca(model, model_path);
    out << "m=" << model.num_components() << " d=" << model.dim()
        << " explained=" << format_fixed(explained_variance(model, model.num_components()), 4) << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

/// Reads a flat key=value file. Blank lines and lines starting with '#' are
/// skipped; surrounding quotes on a value are dropped.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::istringstream in(read_file_bytes(path));
  std::vector<std::pair<std::string, std::string>> items;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty())
      throw Error(Errc::BadConfig, path.string() + ": line " + std::to_string(line_no) + ": expected key=value");
    auto key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    items.emplace_back(key, value);
  }
  return items;
}

/// Splices `--key=value` for every config-file entry right after the
/// subcommand so flags given on the command line come later and win.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty() || args[0] != "run") return args;
  std::vector<std::string> rest;
  std::optional<std::string> file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      file = args[++i];
    else if (args[i].rfind("--config=", 0) == 0)
      file = args[i].substr(9);
    else
      rest.push_back(args[i]);
  }
  if (!file) return args;
  std::vector<std::string> out{"run"};
  for (const auto& [k, v] : read_config_file(*file)) out.push_back("--" + k + "=" + v);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

inline void add_source_options(CLI::App& cmd, RunConfig& rc) {
  cmd.add_option("--data", rc.data_dir, "ORL-style directory (s1..sC of PGM files)");
  cmd.add_option("--manifest", rc.manifest, "CSV manifest with header path,label");
  cmd.add_option("--synthetic", rc.synthetic, "built-in synthetic preset (fig1); default when no source is given");
  cmd.add_option("--downsample", rc.downsample, "integer box-average factor applied to images")->capture_default_str();
  cmd.add_option("--seed", rc.seed, "global RNG seed")->capture_default_str();
  cmd.add_flag("--no-standardize", rc.no_standardize, "keep raw PCA coordinates (no division by sqrt(eigenvalue))");
  cmd.add_option("--out", rc.out, "output location")->capture_default_str();
}

/// Entry point shared by the binary and the tests. Returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Pairwise vs multiclass neural-network robustness benchmark"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  RunConfig rc;
  auto* run = app.add_subcommand("run", "cross-validated benchmark over the alpha grid");
  std::string config_file;
  run->add_option("--config", config_file, "key=value configuration file; command-line flags take precedence");
  add_source_options(*run, rc);
  run->add_option("--systems", rc.systems, "comma list of pairwise,multiclass")->capture_default_str();
  run->add_option("--alphas,--alpha", rc.alphas, "comma list of noise levels")->capture_default_str();
  run->add_option("--folds", rc.folds, "cross-validation folds")->capture_default_str();
  auto* pca_opt = run->add_option("--pca-dim", rc.pca_dim, "PCA components (default clamps to the data)")
                      ->capture_default_str();
  auto* ev_opt = run->add_option("--explained-var", rc.explained_var, "smallest m reaching this variance fraction");
  pca_opt->excludes(ev_opt);
  run->add_option("--hidden-binary", rc.hidden_binary, "hidden units per pairwise net")->capture_default_str();
  run->add_option("--hidden-multi", rc.hidden_multi, "hidden units of the multiclass net")->capture_default_str();
  run->add_option("--lr", rc.lr, "learning rate")->capture_default_str();
  run->add_option("--epochs", rc.epochs, "training epochs")->capture_default_str();
  run->add_option("--batch", rc.batch, "mini-batch size (0 = full batch)")->capture_default_str();
  run->add_option("--l2", rc.l2, "weight decay")->capture_default_str();
  run->add_option("--noise-scope", rc.noise_scope, "train_and_test | test_only")->capture_default_str();
  run->add_option("--noise-space", rc.noise_space, "pca | pixel")->capture_default_str();
  run->add_flag("--hard-vote", rc.hard_vote, "sum sign(f) instead of raw pairwise outputs");
  run->add_flag("--pca-global", rc.pca_global, "fit PCA once on all samples instead of per fold");
  run->add_flag("--nested-noise", rc.nested_noise, "reuse one noise draw per fold, scaled by alpha");
  run->add_option("--threads", rc.threads, "worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();

  std::string aggregate_in;
  std::string plot_out = "plots";
  auto* plot = app.add_subcommand("plotdata", "turn aggregate.csv into per-system series files");
  plot->add_option("aggregate", aggregate_in, "aggregate CSV from `run`")->required();
  plot->add_option("--out", plot_out, "output directory")->capture_default_str();

  RunConfig scatter_rc;
  scatter_rc.out = "scatter";
  double scatter_alpha = 0.5;
  auto* scatter = app.add_subcommand("scatter", "first-two-component point clouds, clean and noisy");
  add_source_options(*scatter, scatter_rc);
  scatter->add_option("--alpha", scatter_alpha, "noise level of the noisy cloud")->capture_default_str();

  RunConfig prep_rc;
  prep_rc.out = "pca.json";
  auto* prep = app.add_subcommand("prep", "fit PCA on a dataset and write the model file");
  add_source_options(*prep, prep_rc);
  auto* prep_dim = prep->add_option("--pca-dim", prep_rc.pca_dim, "components")->capture_default_str();
  prep->add_option("--explained-var", prep_rc.explained_var, "variance fraction target")->excludes(prep_dim);

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  if (*run) {
    rc.pca_dim_explicit = pca_opt->count() > 0;
    return cmd_run(rc, out, err);
  }
  if (*plot) return cmd_plotdata(aggregate_in, plot_out, out, err);
  if (*scatter) return cmd_scatter(scatter_rc, scatter_alpha, out, err);
  prep_rc.pca_dim_explicit = prep_dim->count() > 0;
  return cmd_prep(prep_rc, prep_rc.out, out, err);
}

}  // namespace pairnet::cli
