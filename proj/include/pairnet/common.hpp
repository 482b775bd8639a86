#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace pairnet {

/// Every failure the library reports carries one of these codes.
enum class Errc {
  // dataset_io
  MalformedHeader,
  TruncatedPixelData,
  UnsupportedMaxval,
  NonsensicalDimension,
  TrailingGarbage,
  InconsistentImageSize,
  EmptyClassDirectory,
  IoFailure,
  BadSpread,
  // pca
  RankDeficient,
  DegenerateInput,
  // shared
  DimensionMismatch,
  OutOfRange,
  InvalidArgument,
  // neural_net
  EmptyBatch,
  DivergedToNonFinite,
  // pairwise / multiclass
  TooFewClasses,
  MissingClass,
  // robustness_eval
  ClassTooSmall,
  TooFewValues,
  // cli
  SchemaMismatch,
  BadConfig,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::TruncatedPixelData: return "TruncatedPixelData";
    case Errc::UnsupportedMaxval: return "UnsupportedMaxval";
    case Errc::NonsensicalDimension: return "NonsensicalDimension";
    case Errc::TrailingGarbage: return "TrailingGarbage";
    case Errc::InconsistentImageSize: return "InconsistentImageSize";
    case Errc::EmptyClassDirectory: return "EmptyClassDirectory";
    case Errc::IoFailure: return "IoFailure";
    case Errc::BadSpread: return "BadSpread";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::DivergedToNonFinite: return "DivergedToNonFinite";
    case Errc::TooFewClasses: return "TooFewClasses";
    case Errc::MissingClass: return "MissingClass";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::TooFewValues: return "TooFewValues";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Dense row-major matrix of doubles. Rows double as sample vectors.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && data_.empty()) cols_ = values.size();
    if (values.size() != cols_)
      throw Error(Errc::DimensionMismatch, "row of length " + std::to_string(values.size()) +
                                               " appended to matrix with " + std::to_string(cols_) +
                                               " columns");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  Matrix select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = row(indices[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent RNG seed from a parent seed and a path of identifiers,
/// so every job owns a stream that does not depend on scheduling.
template <typename... Ids>
constexpr std::uint64_t derive_seed(std::uint64_t parent, Ids... ids) noexcept {
  std::uint64_t s = mix64(parent);
  ((s = mix64(s ^ static_cast<std::uint64_t>(ids))), ...);
  return s;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be written
/// by index; the first failing index (lowest i) is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// A predicted 1-based class label; `tie` marks that another class shared the top score.
struct Decision {
  int label = 0;
  bool tie = false;

  friend bool operator==(const Decision&, const Decision&) = default;
};

/// argmax over scores[0..C-1] -> label in [1, C]; ties go to the lowest index.
inline Decision argmax_label(std::span<const double> scores) {
  if (scores.empty()) throw Error(Errc::InvalidArgument, "argmax over an empty score vector");
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[best]) best = c;
  bool tie = false;
  for (std::size_t c = best + 1; c < scores.size(); ++c)
    if (scores[c] == scores[best]) tie = true;
  return {static_cast<int>(best) + 1, tie};
}

inline unsigned default_thread_count() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace pairnet
