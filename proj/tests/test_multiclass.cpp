#include <gtest/gtest.h>

#include <cmath>

#include "pairnet/dataset_io.hpp"
#include "pairnet/evaluation.hpp"
#include "pairnet/multiclass.hpp"
#include "pairnet/pairwise.hpp"

using namespace pairnet;

namespace {

MulticlassNet constant_outputs(std::vector<double> outputs) {
  MulticlassNet mc{static_cast<int>(outputs.size()), MlpParams::zeros(2, 1, outputs.size())};
  for (std::size_t k = 0; k < outputs.size(); ++k) mc.net.b2[k] = std::atanh(outputs[k]);
  return mc;
}

double accuracy(const LabeledDataset& ds, auto&& predict) {
  std::size_t ok = 0;
  for (std::size_t s = 0; s < ds.size(); ++s) ok += predict(ds.samples.row(s)) == ds.labels[s];
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

}  // namespace

TEST(ClassifyMulticlass, ArgmaxOfStubOutputs) {
  auto mc = constant_outputs({0.9, -0.9, 0.1});
  EXPECT_EQ(classify_multiclass(mc, std::vector<double>{0.0, 0.0}), (Decision{1, false}));
  EXPECT_THROW(classify_multiclass(mc, std::vector<double>{0.0}), Error);
}

TEST(ClassifyMulticlass, ShiftInvariance) {
  const std::vector<std::vector<double>> outputs = {{0.9, -0.9, 0.1}, {-0.2, 0.4, 0.39}, {0.0, 0.0, -0.5}};
  for (const auto& o : outputs) {
    auto base = argmax_label(o);
    for (double shift : {-3.0, -0.25, 0.0, 1.5, 100.0}) {
      std::vector<double> shifted = o;
      for (double& v : shifted) v += shift;
      EXPECT_EQ(argmax_label(shifted), base);
    }
  }
  EXPECT_EQ(argmax_label(std::vector<double>{0.0, 0.0, -0.5}), (Decision{1, true}));
}

TEST(TrainMulticlass, ZeroSpreadBlobs) {
  auto p = fig1_preset();
  auto ds = make_synthetic(4, 10, p.centers, 0.0, 1);
  TrainConfig cfg;
  cfg.hidden = 32;
  auto mc = train_multiclass(ds, cfg);
  EXPECT_EQ(mc.net.output_dim(), 4u);
  EXPECT_EQ(accuracy(ds, [&](auto x) { return classify_multiclass(mc, x).label; }), 1.0);
}

TEST(TrainMulticlass, Deterministic) {
  auto p = fig1_preset();
  auto ds = make_synthetic(4, 20, p.centers, 0.3, 2);
  TrainConfig cfg;
  cfg.epochs = 10;
  EXPECT_EQ(train_multiclass(ds, cfg), train_multiclass(ds, cfg));
}

TEST(TrainMulticlass, TwoClassMatchesPairwise) {
  auto train = make_synthetic(2, 200, {{-0.5, 0.0}, {0.5, 0.0}}, 0.4, 3);
  auto test = make_synthetic(2, 200, {{-0.5, 0.0}, {0.5, 0.0}}, 0.4, 4);
  TrainConfig mcfg;
  mcfg.hidden = 32;
  auto mc = train_multiclass(train, mcfg);
  auto ens = train_pairwise(train, TrainConfig{});
  const double acc_m = accuracy(test, [&](auto x) { return classify_multiclass(mc, x).label; });
  const double acc_p = accuracy(test, [&](auto x) { return classify(ens, x).label; });
  EXPECT_NEAR(acc_m, acc_p, 0.02);
}

TEST(TrainMulticlass, MissingClass) {
  LabeledDataset ds;
  ds.num_classes = 3;
  for (int l : {1, 2}) {
    ds.samples.append_row(std::vector<double>{static_cast<double>(l)});
    ds.labels.push_back(l);
  }
  EXPECT_THROW(train_multiclass(ds, TrainConfig{}), Error);
}
