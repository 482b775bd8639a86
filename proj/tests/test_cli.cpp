#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "pairnet/cli.hpp"

using namespace pairnet;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pairnet_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST(Formatting, AlphaAndFixed) {
  EXPECT_EQ(cli::format_alpha(0.0), "0.0");
  EXPECT_EQ(cli::format_alpha(1.0), "1.0");
  EXPECT_EQ(cli::format_alpha(0.1), "0.1");
  EXPECT_EQ(cli::format_alpha(1.25), "1.25");
  EXPECT_EQ(cli::format_fixed(0.97249, 3), "0.972");
  EXPECT_EQ(cli::format_fixed(std::nan(""), 3), "nan");
}

TEST(RunCommand, SyntheticTwoAlphasPairwiseOnly) {
  auto dir = scratch("run");
  auto r = invoke({"run", "--synthetic", "fig1", "--alpha", "0,0.5", "--systems", "pairwise", "--epochs", "40", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto agg = lines_of(read_file_bytes(dir / "aggregate.csv"));
  ASSERT_EQ(agg.size(), 3u);
  EXPECT_EQ(agg[0], "system,alpha,mean,two_sigma");
  EXPECT_EQ(agg[1].rfind("P,0.0,", 0), 0u);
  EXPECT_EQ(agg[2].rfind("P,0.5,", 0), 0u);
  auto folds = lines_of(read_file_bytes(dir / "per_fold.csv"));
  EXPECT_EQ(folds.size(), 11u);
  EXPECT_EQ(folds[0], "system,alpha,fold,accuracy");
  for (const char* f : {"config.txt", "summary.txt", "metadata.txt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  auto meta = read_file_bytes(dir / "metadata.txt");
  EXPECT_NE(meta.find("status=ok"), std::string::npos);
  EXPECT_NE(meta.find("config.alphas=0,0.5"), std::string::npos);
  EXPECT_NE(read_file_bytes(dir / "summary.txt").find("# seed=1"), std::string::npos);
  fs::remove_all(dir);
}

TEST(RunCommand, AggregateFollowsFromPerFold) {
  auto dir = scratch("agg");
  auto r = invoke({"run", "--alphas", "0.3", "--epochs", "30", "--folds", "3", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, std::vector<double>> acc;
  auto folds = lines_of(read_file_bytes(dir / "per_fold.csv"));
  for (std::size_t i = 1; i < folds.size(); ++i) {
    auto f = cli::split(folds[i], ',');
    acc[f[0] + "," + f[1]].push_back(std::stod(f[3]));
  }
  auto agg = lines_of(read_file_bytes(dir / "aggregate.csv"));
  ASSERT_EQ(agg.size(), 3u);
  for (std::size_t i = 1; i < agg.size(); ++i) {
    auto f = cli::split(agg[i], ',');
    auto st = mean_and_two_sigma(acc.at(f[0] + "," + f[1]));
    EXPECT_NEAR(std::stod(f[2]), st.mean, 5e-4 + 1e-6);
    EXPECT_NEAR(std::stod(f[3]), st.two_sigma, 5e-4 + 1e-5);
  }
  fs::remove_all(dir);
}

TEST(RunCommand, BadConfigWritesNothing) {
  auto dir = scratch("neg");
  auto r = invoke({"run", "--alphas", "0,-0.1", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--alphas"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir));

  r = invoke({"run", "--systems", "bagging", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  r = invoke({"run", "--pca-dim", "5", "--out", dir.string()});  // synthetic data is 2-D
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--pca-dim"), std::string::npos);
  r = invoke({"run", "--pca-dim", "2", "--explained-var", "0.9", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  r = invoke({"run", "--folds", "abc"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(RunCommand, MissingDataDirIsDataError) {
  auto dir = scratch("missing");
  auto r = invoke({"run", "--data", (dir / "nowhere").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(RunCommand, ConfigFileAndPrecedence) {
  auto dir = scratch("cfg");
  fs::create_directories(dir);
  write(dir / "run.ini", "alphas=\"0.0,0.7\"\nsystems=multiclass\nepochs=20\nfolds=3\nseed=9\n");
  auto r = invoke({"run", "--config", (dir / "run.ini").string(), "--folds", "2", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto config = read_file_bytes(dir / "o" / "config.txt");
  EXPECT_NE(config.find("alphas=0.0,0.7\n"), std::string::npos) << config;
  EXPECT_NE(config.find("systems=multiclass\n"), std::string::npos);
  EXPECT_NE(config.find("folds=2\n"), std::string::npos);
  EXPECT_NE(config.find("seed=9\n"), std::string::npos);
  auto agg = lines_of(read_file_bytes(dir / "o" / "aggregate.csv"));
  ASSERT_EQ(agg.size(), 3u);
  EXPECT_EQ(agg[1].rfind("M,0.0,", 0), 0u);

  // the resolved config.txt reproduces the run
  r = invoke({"run", "--config", (dir / "o" / "config.txt").string(), "--out", (dir / "o2").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file_bytes(dir / "o2" / "per_fold.csv"), read_file_bytes(dir / "o" / "per_fold.csv"));
  fs::remove_all(dir);
}

TEST(PlotdataCommand, SeriesFromAggregate) {
  auto dir = scratch("plot");
  fs::create_directories(dir);
  write(dir / "aggregate.csv", "system,alpha,mean,two_sigma\nP,0.0,0.972,0.004\nM,0.0,0.952,0.010\nP,1.3,0.556,0.020\n");
  auto r = invoke({"plotdata", (dir / "aggregate.csv").string(), "--out", (dir / "plots").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file_bytes(dir / "plots" / "series_P.dat"), "0.0 0.972 0.968 0.976\n1.3 0.556 0.536 0.576\n");
  EXPECT_EQ(read_file_bytes(dir / "plots" / "series_M.dat"), "0.0 0.952 0.942 0.962\n");
  fs::remove_all(dir);
}

TEST(PlotdataCommand, EmptyAndMalformedInput) {
  auto dir = scratch("plotbad");
  fs::create_directories(dir);
  write(dir / "empty.csv", "system,alpha,mean,two_sigma\n");
  auto r = invoke({"plotdata", (dir / "empty.csv").string(), "--out", (dir / "e").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_EQ(read_file_bytes(dir / "e" / "series_P.dat"), "");
  EXPECT_EQ(read_file_bytes(dir / "e" / "series_M.dat"), "");

  write(dir / "bad.csv", "system,alpha,mean,two_sigma\nP,0.0,0.9,0.01\nP,0.1,oops,0.01\n");
  r = invoke({"plotdata", (dir / "bad.csv").string(), "--out", (dir / "b").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;

  write(dir / "hdr.csv", "a,b\n");
  r = invoke({"plotdata", (dir / "hdr.csv").string(), "--out", (dir / "h").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  fs::remove_all(dir);
}

TEST(ScatterCommand, NoiseGrowsVariance) {
  auto p = fig1_preset();
  auto data = make_synthetic(4, 250, p.centers, p.spread, 3);
  auto clean = cli::compute_scatter(data, 0.0, 1, true);
  for (std::size_t c = 0; c < clean.classes.size(); ++c) EXPECT_EQ(clean.clean[c], clean.noisy[c]);

  auto sc = cli::compute_scatter(data, 1.3, 1, true);
  ASSERT_EQ(sc.classes.size(), 4u);
  double extra = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t k = 0; k < 2; ++k) {
      double mc = 0, mn = 0, vc = 0, vn = 0;
      const auto n = static_cast<double>(sc.clean[c].rows());
      for (std::size_t r = 0; r < sc.clean[c].rows(); ++r) {
        mc += sc.clean[c](r, k) / n;
        mn += sc.noisy[c](r, k) / n;
      }
      for (std::size_t r = 0; r < sc.clean[c].rows(); ++r) {
        vc += std::pow(sc.clean[c](r, k) - mc, 2) / (n - 1);
        vn += std::pow(sc.noisy[c](r, k) - mn, 2) / (n - 1);
      }
      extra += vn - vc;
      ++count;
    }
  }
  EXPECT_NEAR(extra / static_cast<double>(count), 1.3 * 1.3, 0.15);
}

TEST(ScatterCommand, WritesFilesAndHandlesOneClass) {
  auto dir = scratch("scatter");
  auto r = invoke({"scatter", "--alpha", "0", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int c = 1; c <= 4; ++c) {
    auto tag = std::to_string(c);
    EXPECT_EQ(read_file_bytes(dir / ("clean_class" + tag + ".txt")), read_file_bytes(dir / ("noisy_class" + tag + ".txt")));
  }
  EXPECT_EQ(lines_of(read_file_bytes(dir / "clean_class1.txt")).size(), 250u);

  auto two = make_synthetic(2, 30, {{0.0, 0.0}, {1.0, 1.0}}, 1.0, 2);
  auto single = two.subset([&] {
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < two.size(); ++s)
      if (two.labels[s] == 1) idx.push_back(s);
    return idx;
  }());
  single.num_classes = 1;
  auto sc = cli::compute_scatter(single, 0.5, 1, true);
  EXPECT_EQ(sc.classes, std::vector<int>{1});
  EXPECT_EQ(sc.noisy[0].rows(), 30u);
  fs::remove_all(dir);
}

TEST(PrepCommand, WritesLoadablePcaModel) {
  auto dir = scratch("prep");
  fs::create_directories(dir);
  auto r = invoke({"prep", "--out", (dir / "pca.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto model = load_pca(dir / "pca.json");
  EXPECT_EQ(model.num_components(), 2u);
  EXPECT_EQ(model.dim(), 2u);
  r = invoke({"prep", "--pca-dim", "3", "--out", (dir / "x.json").string()});
  EXPECT_EQ(r.code, 2);
  fs::remove_all(dir);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"run", "--no-such-flag"}).code, 2);
  auto v = invoke({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("1.0.0"), std::string::npos);
}
