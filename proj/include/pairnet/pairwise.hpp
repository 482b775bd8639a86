#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pairnet/common.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/mlp.hpp"

namespace pairnet {

/// Unordered class pair stored with i < j; the binary net for the pair is
/// trained to answer +1 on class i and -1 on class j.
struct ClassPair {
  int i = 0;
  int j = 0;

  friend bool operator==(const ClassPair&, const ClassPair&) = default;
};

/// All C(C-1)/2 pairs in lexicographic order: (1,2), (1,3), ..., (C-1,C).
inline std::vector<ClassPair> enumerate_pairs(int num_classes) {
  if (num_classes < 2) throw Error(Errc::TooFewClasses, "pairwise system needs at least 2 classes");
  std::vector<ClassPair> pairs;
  pairs.reserve(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes - 1) / 2);
  for (int i = 1; i < num_classes; ++i)
    for (int j = i + 1; j <= num_classes; ++j) pairs.push_back({i, j});
  return pairs;
}

/// C x |pairs| matrix over {-1, 0, +1}: class c takes +1 on pairs where it is
/// listed first, -1 where it is listed second, 0 elsewhere.
class CombinerWeights {
 public:
  CombinerWeights() = default;

  explicit CombinerWeights(int num_classes) : num_classes_(num_classes), pairs_(enumerate_pairs(num_classes)) {
    w_.assign(static_cast<std::size_t>(num_classes) * pairs_.size(), 0);
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      at(pairs_[p].i, p) = +1;
      at(pairs_[p].j, p) = -1;
    }
  }

  int num_classes() const noexcept { return num_classes_; }
  std::size_t num_pairs() const noexcept { return pairs_.size(); }
  const std::vector<ClassPair>& pairs() const noexcept { return pairs_; }

  /// cls is 1-based.
  int operator()(int cls, std::size_t pair) const {
    return w_[static_cast<std::size_t>(cls - 1) * pairs_.size() + pair];
  }

  friend bool operator==(const CombinerWeights&, const CombinerWeights&) = default;

 private:
  std::int8_t& at(int cls, std::size_t pair) {
    return w_[static_cast<std::size_t>(cls - 1) * pairs_.size() + pair];
  }

  int num_classes_ = 0;
  std::vector<ClassPair> pairs_;
  std::vector<std::int8_t> w_;
};

inline CombinerWeights combiner_weights(int num_classes) { return CombinerWeights(num_classes); }

enum class VoteMode {
  Soft,  // sum raw tanh outputs
  Hard,  // sum sign(f) instead
};

/// g_c = sum_p weights(c, p) * f_p. Returns g_1..g_C at indices 0..C-1.
inline std::vector<double> combine_scores(const CombinerWeights& weights, std::span<const double> pair_outputs,
                                          VoteMode mode = VoteMode::Soft) {
  if (pair_outputs.size() != weights.num_pairs())
    throw Error(Errc::DimensionMismatch, std::to_string(pair_outputs.size()) + " pair outputs for " +
                                             std::to_string(weights.num_pairs()) + " pairs");
  std::vector<double> g(static_cast<std::size_t>(weights.num_classes()), 0.0);
  for (std::size_t p = 0; p < pair_outputs.size(); ++p) {
    double f = pair_outputs[p];
    if (mode == VoteMode::Hard) f = f > 0.0 ? 1.0 : (f < 0.0 ? -1.0 : 0.0);
    const auto [i, j] = weights.pairs()[p];
    // each pair touches exactly two rows of the weight matrix
    g[static_cast<std::size_t>(i - 1)] += weights(i, p) * f;
    g[static_cast<std::size_t>(j - 1)] += weights(j, p) * f;
  }
  return g;
}

struct PairwiseEnsemble {
  CombinerWeights weights;
  std::vector<MlpParams> nets;  // nets[p] computes f for weights.pairs()[p]
  VoteMode vote = VoteMode::Soft;

  int num_classes() const noexcept { return weights.num_classes(); }
  const std::vector<ClassPair>& pairs() const noexcept { return weights.pairs(); }
  std::size_t input_dim() const noexcept { return nets.empty() ? 0 : nets.front().input_dim(); }

  friend bool operator==(const PairwiseEnsemble&, const PairwiseEnsemble&) = default;
};

inline std::vector<double> pair_outputs(const PairwiseEnsemble& ens, std::span<const double> x) {
  std::vector<double> f(ens.nets.size());
  for (std::size_t p = 0; p < f.size(); ++p) f[p] = forward(ens.nets[p], x)[0];
  return f;
}

inline std::vector<double> score(const PairwiseEnsemble& ens, std::span<const double> x) {
  return combine_scores(ens.weights, pair_outputs(ens, x), ens.vote);
}

inline Decision classify(const PairwiseEnsemble& ens, std::span<const double> x) {
  return argmax_label(score(ens, x));
}

/// Samples of classes i and j only, targets +1 for i and -1 for j.
inline TrainingSet pair_training_set(const LabeledDataset& data, ClassPair pair) {
  TrainingSet set;
  std::size_t count = 0;
  for (int l : data.labels) count += (l == pair.i || l == pair.j);
  set.inputs = Matrix(count, data.dim());
  set.targets = Matrix(count, 1);
  std::size_t r = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const int l = data.labels[s];
    if (l != pair.i && l != pair.j) continue;
    auto src = data.samples.row(s);
    std::copy(src.begin(), src.end(), set.inputs.row(r).begin());
    set.targets(r, 0) = l == pair.i ? 1.0 : -1.0;
    ++r;
  }
  return set;
}

inline void require_all_classes(const LabeledDataset& data) {
  if (data.num_classes < 2) throw Error(Errc::TooFewClasses, "need at least 2 classes");
  auto counts = data.class_counts();
  for (int c = 1; c <= data.num_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw Error(Errc::MissingClass, "class " + std::to_string(c) + " absent from the training set");
}

/// Trains one binary net per class pair. Each net's initialisation and
/// shuffling streams derive from (cfg.seed, i, j), so the result does not
/// depend on `threads`.
inline PairwiseEnsemble train_pairwise(const LabeledDataset& data, const TrainConfig& cfg,
                                       VoteMode vote = VoteMode::Soft, unsigned threads = 1) {
  cfg.validate();
  require_all_classes(data);
  PairwiseEnsemble ens;
  ens.weights = CombinerWeights(data.num_classes);
  ens.vote = vote;
  const auto& pairs = ens.weights.pairs();
  ens.nets.resize(pairs.size());

  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const ClassPair pair = pairs[p];
    auto set = pair_training_set(data, pair);
    TrainConfig pair_cfg = cfg;
    pair_cfg.seed = derive_seed(cfg.seed, hash_tag("shuffle"), pair.i, pair.j);
    auto net = init_mlp(data.dim(), cfg.hidden, 1, derive_seed(cfg.seed, hash_tag("init"), pair.i, pair.j),
                        cfg.weight_init_scale);
    try {
      ens.nets[p] = train(std::move(net), set, pair_cfg).net;
    } catch (const Error& e) {
      throw Error(e.code(), "pair (" + std::to_string(pair.i) + "," + std::to_string(pair.j) + "): " + e.what());
    }
  });
  return ens;
}

}  // namespace pairnet
