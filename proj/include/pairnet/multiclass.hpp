#pragma once

#include <span>
#include <string>
#include <vector>

#include "pairnet/common.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/mlp.hpp"
#include "pairnet/pairwise.hpp"

namespace pairnet {

/// Baseline: one network with C tanh outputs trained on signed one-hot targets.
struct MulticlassNet {
  int num_classes = 0;
  MlpParams net;

  friend bool operator==(const MulticlassNet&, const MulticlassNet&) = default;
};

inline TrainingSet one_hot_training_set(const LabeledDataset& data) {
  TrainingSet set;
  set.inputs = data.samples;
  set.targets = Matrix(data.size(), static_cast<std::size_t>(data.num_classes), -1.0);
  for (std::size_t s = 0; s < data.size(); ++s) set.targets(s, static_cast<std::size_t>(data.labels[s] - 1)) = 1.0;
  return set;
}

inline MulticlassNet train_multiclass(const LabeledDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require_all_classes(data);
  const std::uint64_t root = derive_seed(cfg.seed, hash_tag("multiclass"));
  TrainConfig run_cfg = cfg;
  run_cfg.seed = derive_seed(root, hash_tag("shuffle"));
  auto net = init_mlp(data.dim(), cfg.hidden, static_cast<std::size_t>(data.num_classes),
                      derive_seed(root, hash_tag("init")), cfg.weight_init_scale);
  return {data.num_classes, train(std::move(net), one_hot_training_set(data), run_cfg).net};
}

inline Decision classify_multiclass(const MulticlassNet& mc, std::span<const double> x) {
  return argmax_label(forward(mc.net, x));
}

}  // namespace pairnet
