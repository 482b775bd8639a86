#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/pairwise.hpp"

using namespace pairnet;

namespace {

PairwiseEnsemble random_ensemble(int classes, std::size_t input_dim, std::mt19937_64& rng) {
  PairwiseEnsemble ens;
  ens.weights = CombinerWeights(classes);
  for (std::size_t p = 0; p < ens.weights.num_pairs(); ++p) ens.nets.push_back(oracle::random_net(input_dim, 3, 1, rng));
  return ens;
}

/// A one-output net whose output is the constant `value` (|value| < 1).
MlpParams constant_net(std::size_t input_dim, double value) {
  auto net = MlpParams::zeros(input_dim, 1, 1);
  net.b2[0] = std::atanh(value);
  return net;
}

double training_sign_accuracy(const MlpParams& net, const TrainingSet& set) {
  std::size_t ok = 0;
  for (std::size_t r = 0; r < set.size(); ++r) ok += (forward(net, set.inputs.row(r))[0] > 0) == (set.targets(r, 0) > 0);
  return static_cast<double>(ok) / static_cast<double>(set.size());
}

}  // namespace

TEST(EnumeratePairs, SmallCases) {
  EXPECT_EQ(enumerate_pairs(2), (std::vector<ClassPair>{{1, 2}}));
  EXPECT_EQ(enumerate_pairs(3), (std::vector<ClassPair>{{1, 2}, {1, 3}, {2, 3}}));
  EXPECT_THROW(enumerate_pairs(1), Error);
}

TEST(EnumeratePairs, FortyClasses) {
  auto pairs = enumerate_pairs(40);
  EXPECT_EQ(pairs.size(), 780u);
  std::vector<int> appearances(41, 0);
  for (auto [i, j] : pairs) {
    EXPECT_LT(i, j);
    ++appearances[static_cast<std::size_t>(i)];
    ++appearances[static_cast<std::size_t>(j)];
  }
  for (int c = 1; c <= 40; ++c) EXPECT_EQ(appearances[static_cast<std::size_t>(c)], 39);
}

TEST(CombinerWeights, ThreeClassPattern) {
  auto w = combiner_weights(3);
  const int expected[3][3] = {{+1, +1, 0}, {-1, 0, +1}, {0, -1, -1}};
  for (int c = 1; c <= 3; ++c)
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(w(c, p), expected[c - 1][p]);
}

TEST(CombinerWeights, TwoClasses) {
  auto w = combiner_weights(2);
  EXPECT_EQ(w(1, 0), 1);
  EXPECT_EQ(w(2, 0), -1);
}

TEST(CombinerWeights, StructureForAllSmallC) {
  for (int C = 2; C <= 12; ++C) {
    auto w = combiner_weights(C);
    ASSERT_EQ(w.num_pairs(), static_cast<std::size_t>(C * (C - 1) / 2));
    for (std::size_t p = 0; p < w.num_pairs(); ++p) {
      int plus = 0, minus = 0, sum = 0;
      for (int c = 1; c <= C; ++c) {
        plus += w(c, p) == 1;
        minus += w(c, p) == -1;
        sum += w(c, p);
      }
      EXPECT_EQ(plus, 1);
      EXPECT_EQ(minus, 1);
      EXPECT_EQ(sum, 0);
    }
    for (int c = 1; c <= C; ++c) {
      int nz = 0;
      for (std::size_t p = 0; p < w.num_pairs(); ++p) nz += w(c, p) != 0;
      EXPECT_EQ(nz, C - 1);
    }
  }
}

TEST(CombineScores, WorkedThreeClassExample) {
  auto g = combine_scores(combiner_weights(3), std::vector<double>{1.0, 1.0, 1.0});
  EXPECT_EQ(g, (std::vector<double>{2.0, 0.0, -2.0}));
  EXPECT_EQ(argmax_label(g), (Decision{1, false}));

  // general f: g1 = f12 + f13, g2 = f23 - f12, g3 = -f13 - f23
  const double f12 = 0.3, f13 = -0.7, f23 = 0.25;
  g = combine_scores(combiner_weights(3), std::vector<double>{f12, f13, f23});
  EXPECT_NEAR(g[0], f12 + f13, 1e-15);
  EXPECT_NEAR(g[1], f23 - f12, 1e-15);
  EXPECT_NEAR(g[2], -f13 - f23, 1e-15);
}

TEST(CombineScores, HardVoteUsesSigns) {
  auto g = combine_scores(combiner_weights(3), std::vector<double>{0.2, -0.9, 0.0}, VoteMode::Hard);
  EXPECT_EQ(g, (std::vector<double>{0.0, -1.0, 1.0}));
}

TEST(Score, ZeroSumProperty) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> cls(2, 8);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    auto ens = random_ensemble(cls(rng), 3, rng);
    std::vector<double> x{n(rng), n(rng), n(rng)};
    auto g = score(ens, x);
    EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 0.0, 1e-9);
  }
}

TEST(Score, IdealNetsMakeTrueClassWin) {
  // true class t: nets involving t answer for t, irrelevant nets answer 0
  for (int C : {3, 5, 8})
    for (int t = 1; t <= C; ++t) {
      auto w = combiner_weights(C);
      std::vector<double> f(w.num_pairs(), 0.0);
      for (std::size_t p = 0; p < f.size(); ++p) {
        if (w.pairs()[p].i == t) f[p] = 1.0;
        if (w.pairs()[p].j == t) f[p] = -1.0;
      }
      auto g = combine_scores(w, f);
      EXPECT_DOUBLE_EQ(g[static_cast<std::size_t>(t - 1)], C - 1.0);
      for (int c = 1; c <= C; ++c)
        if (c != t) EXPECT_LE(std::abs(g[static_cast<std::size_t>(c - 1)]), 1.0);
      EXPECT_EQ(argmax_label(g).label, t);
    }
}

TEST(Classify, StubNetsPickClassOne) {
  PairwiseEnsemble ens;
  ens.weights = combiner_weights(3);
  for (int p = 0; p < 3; ++p) ens.nets.push_back(constant_net(2, 0.5));
  auto d = classify(ens, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(d.label, 1);
  EXPECT_FALSE(d.tie);
}

TEST(Classify, TwoClassesReduceToSignOfSingleNet) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n;
  auto ens = random_ensemble(2, 2, rng);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x{n(rng), n(rng)};
    const double f = forward(ens.nets[0], x)[0];
    EXPECT_EQ(classify(ens, x).label, f > 0 ? 1 : (f < 0 ? 2 : 1));
  }
  PairwiseEnsemble tie_ens;
  tie_ens.weights = combiner_weights(2);
  tie_ens.nets.push_back(MlpParams::zeros(2, 1, 1));  // f = 0 everywhere
  auto d = classify(tie_ens, std::vector<double>{1.0, 1.0});
  EXPECT_EQ(d.label, 1);
  EXPECT_TRUE(d.tie);
}

TEST(Score, RelabelingPermutesScores) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n;
  auto ens = random_ensemble(3, 2, rng);
  // permutation pi: 1->3, 2->1, 3->2
  const int pi[4] = {0, 3, 1, 2};
  PairwiseEnsemble relabeled;
  relabeled.weights = combiner_weights(3);
  relabeled.nets.resize(3);
  for (std::size_t p = 0; p < 3; ++p) {
    const auto [i, j] = ens.pairs()[p];
    int a = pi[i], b = pi[j];
    MlpParams net = ens.nets[p];
    if (a > b) {  // pair order reverses: negate the output (tanh is odd)
      std::swap(a, b);
      for (double& w : net.w2.data()) w = -w;
      for (double& v : net.b2) v = -v;
    }
    for (std::size_t q = 0; q < 3; ++q)
      if (relabeled.pairs()[q] == ClassPair{a, b}) relabeled.nets[q] = net;
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x{n(rng), n(rng)};
    auto g = score(ens, x), h = score(relabeled, x);
    for (int c = 1; c <= 3; ++c)
      EXPECT_NEAR(h[static_cast<std::size_t>(pi[c] - 1)], g[static_cast<std::size_t>(c - 1)], 1e-12);
  }
}

TEST(PairTrainingSet, SignConvention) {
  LabeledDataset ds;
  ds.num_classes = 3;
  for (int l : {1, 2, 3, 2, 1}) {
    ds.samples.append_row(std::vector<double>{static_cast<double>(l)});
    ds.labels.push_back(l);
  }
  auto set = pair_training_set(ds, {1, 2});
  ASSERT_EQ(set.size(), 4u);
  EXPECT_EQ(set.targets(0, 0), 1.0);
  EXPECT_EQ(set.targets(1, 0), -1.0);
  EXPECT_EQ(set.targets(2, 0), -1.0);
  EXPECT_EQ(set.targets(3, 0), 1.0);
}

TEST(TrainPairwise, SeparableTwoClass) {
  auto ds = make_synthetic(2, 100, {{-1.0, 0.0}, {1.0, 0.0}}, 0.2, 4);
  auto ens = train_pairwise(ds, TrainConfig{});
  EXPECT_GE(training_sign_accuracy(ens.nets[0], pair_training_set(ds, {1, 2})), 0.99);
}

TEST(TrainPairwise, FourBlobsEveryPairLearns) {
  auto p = fig1_preset();
  auto ds = make_synthetic(4, 250, p.centers, 0.3, 5);
  auto ens = train_pairwise(ds, TrainConfig{});
  ASSERT_EQ(ens.nets.size(), 6u);
  for (std::size_t q = 0; q < 6; ++q)
    EXPECT_GE(training_sign_accuracy(ens.nets[q], pair_training_set(ds, ens.pairs()[q])), 0.95) << q;
}

TEST(TrainPairwise, DeterministicAndThreadIndependent) {
  auto p = fig1_preset();
  auto ds = make_synthetic(4, 40, p.centers, 0.3, 6);
  TrainConfig cfg;
  cfg.epochs = 20;
  auto a = train_pairwise(ds, cfg, VoteMode::Soft, 1);
  auto b = train_pairwise(ds, cfg, VoteMode::Soft, 1);
  auto c = train_pairwise(ds, cfg, VoteMode::Soft, 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(TrainPairwise, ZeroSpreadBlobsAreClassifiedPerfectly) {
  auto p = fig1_preset();
  auto ds = make_synthetic(4, 10, p.centers, 0.0, 7);
  auto ens = train_pairwise(ds, TrainConfig{});
  for (std::size_t s = 0; s < ds.size(); ++s) EXPECT_EQ(classify(ens, ds.samples.row(s)).label, ds.labels[s]);
}

TEST(TrainPairwise, MissingClassRejected) {
  LabeledDataset ds;
  ds.num_classes = 3;
  for (int l : {1, 1, 2, 2}) {
    ds.samples.append_row(std::vector<double>{static_cast<double>(l)});
    ds.labels.push_back(l);
  }
  try {
    train_pairwise(ds, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingClass);
  }
}

TEST(TrainPairwise, DivergenceNamesThePair) {
  auto ds = make_synthetic(3, 4, {{1e300}, {-1e300}, {0.0}}, 0.0, 1);
  TrainConfig cfg;
  cfg.learning_rate = 1e10;
  cfg.l2 = 1.0;
  try {
    train_pairwise(ds, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DivergedToNonFinite);
    EXPECT_NE(std::string(e.what()).find("pair (1,2)"), std::string::npos) << e.what();
  }
}
