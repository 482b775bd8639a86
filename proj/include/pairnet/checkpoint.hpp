#pragma once

// Versioned JSON checkpoints. Every document carries "format" and "version";
// readers reject unknown formats and newer versions. Doubles are written with
// round-trip precision.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairnet/common.hpp"
#include "pairnet/dataset_io.hpp"
#include "pairnet/mlp.hpp"
#include "pairnet/multiclass.hpp"
#include "pairnet/pairwise.hpp"
#include "pairnet/pca.hpp"

namespace pairnet {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

inline Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows)
    throw Error(Errc::SchemaMismatch, std::string(name) + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto v = j[r].get<std::vector<double>>();
    if (v.size() != cols)
      throw Error(Errc::SchemaMismatch, std::string(name) + ": row " + std::to_string(r) + " has wrong length");
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

inline std::vector<double> vector_from_json(const json& j, std::size_t len, const char* name) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != len) throw Error(Errc::SchemaMismatch, std::string(name) + ": expected length " + std::to_string(len));
  return v;
}

inline void check_header(const json& j, std::string_view format) {
  if (!j.is_object() || !j.contains("format") || j["format"] != format)
    throw Error(Errc::SchemaMismatch, "expected a " + std::string(format) + " document");
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() < 1 ||
      j["version"].get<int>() > kCheckpointVersion)
    throw Error(Errc::SchemaMismatch, "unsupported " + std::string(format) + " version");
}

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaMismatch, e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  return guarded([&] { return json::parse(read_file_bytes(path)); });
}

}  // namespace detail

inline nlohmann::json to_json(const PcaModel& model) {
  return {{"format", "pairnet-pca"},
          {"version", kCheckpointVersion},
          {"m", model.num_components()},
          {"d", model.dim()},
          {"standardize", model.standardize},
          {"total_variance", model.total_variance},
          {"mean", model.mean},
          {"components", detail::matrix_to_json(model.components)},
          {"eigenvalues", model.eigenvalues},
          {"component_scales", model.component_scales}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  return detail::guarded([&] {
    detail::check_header(j, "pairnet-pca");
    const auto m = j.at("m").get<std::size_t>(), d = j.at("d").get<std::size_t>();
    PcaModel model;
    model.standardize = j.at("standardize").get<bool>();
    model.total_variance = j.at("total_variance").get<double>();
    model.mean = detail::vector_from_json(j.at("mean"), d, "mean");
    model.components = detail::matrix_from_json(j.at("components"), m, d, "components");
    model.eigenvalues = detail::vector_from_json(j.at("eigenvalues"), m, "eigenvalues");
    model.component_scales = detail::vector_from_json(j.at("component_scales"), m, "component_scales");
    return model;
  });
}

inline nlohmann::json to_json(const MlpParams& net) {
  return {{"format", "pairnet-mlp"},
          {"version", kCheckpointVersion},
          {"activation", "tanh"},
          {"input_dim", net.input_dim()},
          {"hidden_dim", net.hidden_dim()},
          {"output_dim", net.output_dim()},
          {"w1", detail::matrix_to_json(net.w1)},
          {"b1", net.b1},
          {"w2", detail::matrix_to_json(net.w2)},
          {"b2", net.b2}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  return detail::guarded([&] {
    detail::check_header(j, "pairnet-mlp");
    if (j.at("activation") != "tanh") throw Error(Errc::SchemaMismatch, "unsupported activation");
    const auto m = j.at("input_dim").get<std::size_t>();
    const auto h = j.at("hidden_dim").get<std::size_t>();
    const auto o = j.at("output_dim").get<std::size_t>();
    MlpParams net;
    net.w1 = detail::matrix_from_json(j.at("w1"), h, m, "w1");
    net.b1 = detail::vector_from_json(j.at("b1"), h, "b1");
    net.w2 = detail::matrix_from_json(j.at("w2"), o, h, "w2");
    net.b2 = detail::vector_from_json(j.at("b2"), o, "b2");
    return net;
  });
}

inline nlohmann::json to_json(const MulticlassNet& mc) {
  return {{"format", "pairnet-multiclass"}, {"version", kCheckpointVersion},
          {"num_classes", mc.num_classes}, {"net", to_json(mc.net)}};
}

inline MulticlassNet multiclass_from_json(const nlohmann::json& j) {
  return detail::guarded([&] {
    detail::check_header(j, "pairnet-multiclass");
    MulticlassNet mc{j.at("num_classes").get<int>(), mlp_from_json(j.at("net"))};
    if (mc.net.output_dim() != static_cast<std::size_t>(mc.num_classes))
      throw Error(Errc::SchemaMismatch, "multiclass net output size differs from class count");
    return mc;
  });
}

inline void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  detail::write_text(path, to_json(model).dump(1) + "\n");
}

inline PcaModel load_pca(const std::filesystem::path& path) { return pca_from_json(detail::read_json(path)); }

inline void save_mlp(const MlpParams& net, const std::filesystem::path& path) {
  detail::write_text(path, to_json(net).dump(1) + "\n");
}

inline MlpParams load_mlp(const std::filesystem::path& path) { return mlp_from_json(detail::read_json(path)); }

/// Writes dir/manifest.json (pairs, net file names, combiner matrix) plus one
/// net_<i>_<j>.json per pair.
inline void save_ensemble(const PairwiseEnsemble& ens, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t p = 0; p < ens.pairs().size(); ++p) {
    const auto [i, j] = ens.pairs()[p];
    std::string file = "net_" + std::to_string(i) + "_" + std::to_string(j) + ".json";
    save_mlp(ens.nets[p], dir / file);
    pairs.push_back({{"i", i}, {"j", j}, {"net", file}});
  }
  nlohmann::json weights = nlohmann::json::array();
  for (int c = 1; c <= ens.num_classes(); ++c) {
    std::vector<int> row;
    for (std::size_t p = 0; p < ens.weights.num_pairs(); ++p) row.push_back(ens.weights(c, p));
    weights.push_back(row);
  }
  nlohmann::json manifest = {{"format", "pairnet-pairwise"},
                             {"version", kCheckpointVersion},
                             {"num_classes", ens.num_classes()},
                             {"vote", ens.vote == VoteMode::Soft ? "soft" : "hard"},
                             {"pairs", pairs},
                             {"weights", weights}};
  detail::write_text(dir / "manifest.json", manifest.dump(1) + "\n");
}

inline PairwiseEnsemble load_ensemble(const std::filesystem::path& dir) {
  auto manifest = detail::read_json(dir / "manifest.json");
  return detail::guarded([&] {
    detail::check_header(manifest, "pairnet-pairwise");
    PairwiseEnsemble ens;
    ens.weights = CombinerWeights(manifest.at("num_classes").get<int>());
    const auto vote = manifest.at("vote").get<std::string>();
    if (vote != "soft" && vote != "hard") throw Error(Errc::SchemaMismatch, "unknown vote mode " + vote);
    ens.vote = vote == "soft" ? VoteMode::Soft : VoteMode::Hard;
    const auto& pairs = manifest.at("pairs");
    if (pairs.size() != ens.weights.num_pairs())
      throw Error(Errc::SchemaMismatch, "manifest lists " + std::to_string(pairs.size()) + " pairs");
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      ClassPair pair{pairs[p].at("i").get<int>(), pairs[p].at("j").get<int>()};
      if (pair != ens.weights.pairs()[p]) throw Error(Errc::SchemaMismatch, "pairs out of lexicographic order");
      ens.nets.push_back(load_mlp(dir / pairs[p].at("net").get<std::string>()));
      if (ens.nets.back().output_dim() != 1) throw Error(Errc::SchemaMismatch, "pair nets must have one output");
    }
    const auto& weights = manifest.at("weights");
    for (int c = 1; c <= ens.num_classes(); ++c) {
      auto row = weights.at(static_cast<std::size_t>(c - 1)).get<std::vector<int>>();
      for (std::size_t p = 0; p < row.size() && p < ens.weights.num_pairs(); ++p)
        if (row[p] != ens.weights(c, p)) throw Error(Errc::SchemaMismatch, "combiner matrix does not match the pair rule");
      if (row.size() != ens.weights.num_pairs()) throw Error(Errc::SchemaMismatch, "combiner row has wrong length");
    }
    return ens;
  });
}

}  // namespace pairnet
