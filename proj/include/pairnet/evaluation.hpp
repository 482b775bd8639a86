#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pairnet/common.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/multiclass.hpp"
#include "pairnet/pairwise.hpp"
#include "pairnet/pca.hpp"

namespace pairnet {

// ---------------------------------------------------------------------------
// Statistics

struct MeanTwoSigma {
  double mean = 0.0;
  double two_sigma = 0.0;
};

/// Arithmetic mean and twice the sample standard deviation (n-1 denominator).
inline MeanTwoSigma mean_and_two_sigma(std::span<const double> values) {
  if (values.size() < 2) throw Error(Errc::TooFewValues, "need at least 2 values, got " + std::to_string(values.size()));
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, 2.0 * std::sqrt(ss / (n - 1.0))};
}

// ---------------------------------------------------------------------------
// Noise

enum class NoiseScope { TrainAndTest, TestOnly };
enum class NoiseSpace { Pca, Pixel };

inline std::string_view to_string(NoiseScope s) { return s == NoiseScope::TrainAndTest ? "train_and_test" : "test_only"; }
inline std::string_view to_string(NoiseSpace s) { return s == NoiseSpace::Pca ? "pca" : "pixel"; }

struct NoiseSpec {
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

/// Returns features + alpha * z with z drawn i.i.d. standard normal from spec.seed
/// (row-major order). Scaling a shared z keeps noise nested across alphas when
/// callers reuse the seed.
inline Matrix add_noise(const Matrix& features, const NoiseSpec& spec) {
  if (!(spec.alpha >= 0.0) || !std::isfinite(spec.alpha))
    throw Error(Errc::InvalidArgument, "noise alpha must be finite and non-negative");
  Matrix out = features;
  if (spec.alpha == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data()) v += spec.alpha * normal(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Stratified k-fold

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;  // fold index in [1, k] per sample

  std::vector<std::size_t> test_indices(int fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < assignments.size(); ++s)
      if (assignments[s] == fold) idx.push_back(s);
    return idx;
  }

  std::vector<std::size_t> train_indices(int fold) const {
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < assignments.size(); ++s)
      if (assignments[s] != fold) idx.push_back(s);
    return idx;
  }
};

/// Shuffles each class's samples (seeded per class) and deals them round-robin into k folds.
inline FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "fold count must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t s = 0; s < labels.size(); ++s) by_class[labels[s]].push_back(s);
  FoldPlan plan{k, std::vector<int>(labels.size(), 0)};
  for (auto& [cls, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(k))
      throw Error(Errc::ClassTooSmall, "class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                                           " samples, fewer than " + std::to_string(k) + " folds");
    std::mt19937_64 rng(derive_seed(seed, hash_tag("fold"), static_cast<std::uint64_t>(cls)));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = 0; r < members.size(); ++r) plan.assignments[members[r]] = static_cast<int>(r % static_cast<std::size_t>(k)) + 1;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Systems under evaluation

struct Predictions {
  std::vector<int> labels;
  std::size_t ties = 0;
};

/// A fitted system labels a whole test set at once.
using Predictor = std::function<Predictions(const LabeledDataset& test)>;
using Trainer = std::function<Predictor(const LabeledDataset& train, std::uint64_t seed)>;

struct SystemSpec {
  std::string name;  // "P", "M", ...
  Trainer fit;
};

inline SystemSpec pairwise_system(TrainConfig cfg, VoteMode vote = VoteMode::Soft, unsigned threads = 1) {
  return {"P", [cfg, vote, threads](const LabeledDataset& train, std::uint64_t seed) -> Predictor {
            TrainConfig run = cfg;
            run.seed = seed;
            auto ens = std::make_shared<const PairwiseEnsemble>(train_pairwise(train, run, vote, threads));
            return [ens](const LabeledDataset& test) {
              Predictions out;
              for (std::size_t s = 0; s < test.size(); ++s) {
                auto d = classify(*ens, test.samples.row(s));
                out.labels.push_back(d.label);
                out.ties += d.tie;
              }
              return out;
            };
          }};
}

inline SystemSpec multiclass_system(TrainConfig cfg) {
  return {"M", [cfg](const LabeledDataset& train, std::uint64_t seed) -> Predictor {
            TrainConfig run = cfg;
            run.seed = seed;
            auto mc = std::make_shared<const MulticlassNet>(train_multiclass(train, run));
            return [mc](const LabeledDataset& test) {
              Predictions out;
              for (std::size_t s = 0; s < test.size(); ++s) {
                auto d = classify_multiclass(*mc, test.samples.row(s));
                out.labels.push_back(d.label);
                out.ties += d.tie;
              }
              return out;
            };
          }};
}

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentConfig {
  std::vector<double> alphas{0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3};
  int folds = 5;
  std::size_t pca_dim = 30;
  std::optional<double> explained_variance;  // overrides pca_dim when set
  bool standardize = true;
  bool pca_per_fold = true;  // false: one PCA fit on all samples
  NoiseScope scope = NoiseScope::TrainAndTest;
  NoiseSpace space = NoiseSpace::Pca;
  bool nested_noise = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    if (alphas.empty()) throw Error(Errc::BadConfig, "alpha grid is empty");
    for (double a : alphas)
      if (!(a >= 0.0) || !std::isfinite(a)) throw Error(Errc::BadConfig, "alpha must be finite and >= 0");
    if (folds < 2) throw Error(Errc::BadConfig, "folds must be >= 2");
    if (!explained_variance && pca_dim < 1) throw Error(Errc::BadConfig, "pca dimension must be >= 1");
    if (explained_variance && !(*explained_variance > 0.0 && *explained_variance <= 1.0))
      throw Error(Errc::BadConfig, "explained-variance target must lie in (0, 1]");
  }
};

struct FoldResult {
  int fold = 0;
  double accuracy = 0.0;
  std::size_t ties = 0;
};

struct ReportRow {
  std::string system;
  double alpha = 0.0;
  std::vector<FoldResult> folds;  // completed folds only, ascending
  double mean = 0.0;              // NaN when fewer than 2 folds completed
  double two_sigma = 0.0;

  std::vector<double> fold_accuracies() const {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(f.accuracy);
    return v;
  }
};

struct CellFailure {
  std::string system;
  double alpha = 0.0;
  int fold = 0;
  Errc code = Errc::InvalidArgument;
  std::string message;
};

struct EvalReport {
  std::vector<ReportRow> rows;  // system-major, alphas in configured order
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<CellFailure> failures;

  bool complete() const noexcept { return failures.empty(); }
};

namespace detail {

struct FoldFeatures {
  LabeledDataset train;
  LabeledDataset test;
  std::size_t pca_dim = 0;
  double explained = 0.0;
};

inline PcaModel fit_for_experiment(const Matrix& raw, const ExperimentConfig& cfg) {
  PcaOptions opts;
  opts.standardize = cfg.standardize;
  return cfg.explained_variance ? fit_pca_explained(raw, *cfg.explained_variance, opts)
                                : fit_pca(raw, cfg.pca_dim, opts);
}

inline LabeledDataset projected(const PcaModel& model, const LabeledDataset& raw) {
  LabeledDataset out;
  out.samples = project_rows(model, raw.samples);
  out.labels = raw.labels;
  out.num_classes = raw.num_classes;
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest form that round-trips
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Stratified k-fold evaluation of every system at every noise level. Each
/// (fold, alpha) cell draws its noise from (seed, fold, alpha) and every system
/// sees the same noisy features. Failing cells are reported, not fatal.
inline EvalReport run_experiment(const LabeledDataset& data, std::span<const SystemSpec> systems,
                                 const ExperimentConfig& cfg) {
  cfg.validate();
  data.validate(true);
  if (systems.empty()) throw Error(Errc::BadConfig, "no systems selected");

  const auto plan = stratified_kfold(data.labels, cfg.folds, derive_seed(cfg.seed, hash_tag("folds")));
  const std::size_t k = static_cast<std::size_t>(cfg.folds);
  const std::size_t n_alpha = cfg.alphas.size();

  std::optional<PcaModel> global_pca;
  if (!cfg.pca_per_fold) global_pca = detail::fit_for_experiment(data.samples, cfg);

  // Raw (pixel-space) splits, plus PCA features when noise lives in PCA space.
  std::vector<LabeledDataset> raw_train(k), raw_test(k);
  std::vector<std::optional<detail::FoldFeatures>> fold_features(k);
  std::vector<std::optional<CellFailure>> fold_errors(k);
  for (std::size_t f = 0; f < k; ++f) {
    raw_train[f] = data.subset(plan.train_indices(static_cast<int>(f) + 1));
    raw_test[f] = data.subset(plan.test_indices(static_cast<int>(f) + 1));
  }
  if (cfg.space == NoiseSpace::Pca) {
    parallel_for(k, cfg.threads, [&](std::size_t f) {
      try {
        PcaModel model = global_pca ? *global_pca : detail::fit_for_experiment(raw_train[f].samples, cfg);
        fold_features[f] = detail::FoldFeatures{detail::projected(model, raw_train[f]),
                                                detail::projected(model, raw_test[f]), model.num_components(),
                                                explained_variance(model, model.num_components())};
      } catch (const Error& e) {
        fold_errors[f] = CellFailure{"*", 0.0, static_cast<int>(f) + 1, e.code(), e.what()};
      }
    });
  }

  struct CellOutcome {
    std::vector<std::optional<FoldResult>> per_system;
    std::vector<CellFailure> failures;
    std::size_t pca_dim = 0;
  };
  std::vector<CellOutcome> cells(k * n_alpha);

  parallel_for(k * n_alpha, cfg.threads, [&](std::size_t cell) {
    const std::size_t f = cell / n_alpha, a = cell % n_alpha;
    const double alpha = cfg.alphas[a];
    const int fold = static_cast<int>(f) + 1;
    CellOutcome& out = cells[cell];
    out.per_system.resize(systems.size());
    auto fail_all = [&](Errc code, const std::string& msg) {
      for (const auto& s : systems) out.failures.push_back({s.name, alpha, fold, code, msg});
    };
    if (fold_errors[f]) {
      fail_all(fold_errors[f]->code, fold_errors[f]->message);
      return;
    }

    const std::uint64_t alpha_key = std::bit_cast<std::uint64_t>(alpha);
    const std::uint64_t noise_seed = cfg.nested_noise ? derive_seed(cfg.seed, hash_tag("noise"), f)
                                                      : derive_seed(cfg.seed, hash_tag("noise"), f, alpha_key);
    const NoiseSpec train_noise{alpha, derive_seed(noise_seed, hash_tag("train"))};
    const NoiseSpec test_noise{alpha, derive_seed(noise_seed, hash_tag("test"))};
    const bool noisy_train = cfg.scope == NoiseScope::TrainAndTest;

    LabeledDataset train, test;
    try {
      if (cfg.space == NoiseSpace::Pca) {
        train = fold_features[f]->train;
        test = fold_features[f]->test;
        out.pca_dim = fold_features[f]->pca_dim;
        if (noisy_train) train.samples = add_noise(train.samples, train_noise);
        test.samples = add_noise(test.samples, test_noise);
      } else {
        LabeledDataset tr = raw_train[f], te = raw_test[f];
        if (noisy_train) tr.samples = add_noise(tr.samples, train_noise);
        te.samples = add_noise(te.samples, test_noise);
        PcaModel model = global_pca ? *global_pca : detail::fit_for_experiment(tr.samples, cfg);
        out.pca_dim = model.num_components();
        train = detail::projected(model, tr);
        test = detail::projected(model, te);
      }
    } catch (const Error& e) {
      fail_all(e.code(), e.what());
      return;
    }

    const std::uint64_t train_seed = derive_seed(cfg.seed, hash_tag("train"), f, alpha_key);
    for (std::size_t s = 0; s < systems.size(); ++s) {
      try {
        auto predictor = systems[s].fit(train, train_seed);
        auto pred = predictor(test);
        if (pred.labels.size() != test.size())
          throw Error(Errc::DimensionMismatch, "system returned " + std::to_string(pred.labels.size()) +
                                                   " labels for " + std::to_string(test.size()) + " samples");
        std::size_t correct = 0;
        for (std::size_t i = 0; i < test.size(); ++i) correct += pred.labels[i] == test.labels[i];
        out.per_system[s] =
            FoldResult{fold, static_cast<double>(correct) / static_cast<double>(test.size()), pred.ties};
      } catch (const Error& e) {
        out.failures.push_back({systems[s].name, alpha, fold, e.code(), e.what()});
      } catch (const std::exception& e) {
        out.failures.push_back({systems[s].name, alpha, fold, Errc::InvalidArgument, e.what()});
      }
    }
  });

  EvalReport report;
  for (std::size_t s = 0; s < systems.size(); ++s)
    for (std::size_t a = 0; a < n_alpha; ++a) {
      ReportRow row{systems[s].name, cfg.alphas[a], {}, std::nan(""), std::nan("")};
      std::size_t ties = 0;
      for (std::size_t f = 0; f < k; ++f)
        if (const auto& r = cells[f * n_alpha + a].per_system[s]) {
          row.folds.push_back(*r);
          ties += r->ties;
        }
      if (row.folds.size() >= 2) {
        auto acc = row.fold_accuracies();
        auto st = mean_and_two_sigma(acc);
        row.mean = st.mean;
        row.two_sigma = st.two_sigma;
      }
      report.metadata.emplace_back("ties." + row.system + "." + detail::format_double(row.alpha), std::to_string(ties));
      report.rows.push_back(std::move(row));
    }
  for (std::size_t f = 0; f < k; ++f) {
    std::string dims;
    for (std::size_t a = 0; a < n_alpha; ++a) {
      if (a) dims += ',';
      dims += std::to_string(cells[f * n_alpha + a].pca_dim);
    }
    report.metadata.emplace_back("pca_dim.fold" + std::to_string(f + 1), dims);
    if (fold_features[f])
      report.metadata.emplace_back("explained_variance.fold" + std::to_string(f + 1),
                                   detail::format_double(fold_features[f]->explained));
  }
  for (const auto& cell : cells)
    report.failures.insert(report.failures.end(), cell.failures.begin(), cell.failures.end());
  return report;
}

}  // namespace pairnet
