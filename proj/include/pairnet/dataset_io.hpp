#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pairnet/common.hpp"

namespace pairnet {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  int maxval = 255;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Samples are matrix rows; labels are 1-based class indices.
struct LabeledDataset {
  Matrix samples;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return samples.cols(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(num_classes, 0)) + 1, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
  }

  /// Checks the structural invariants; with `complete`, every class must be present.
  void validate(bool complete) const {
    if (samples.rows() != labels.size())
      throw Error(Errc::DimensionMismatch, "sample/label count mismatch");
    if (num_classes < 1) throw Error(Errc::TooFewClasses, "dataset declares no classes");
    for (int l : labels)
      if (l < 1 || l > num_classes)
        throw Error(Errc::OutOfRange, "label " + std::to_string(l) + " outside [1, " +
                                          std::to_string(num_classes) + "]");
    if (complete) {
      auto counts = class_counts();
      for (int c = 1; c <= num_classes; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
          throw Error(Errc::MissingClass, "class " + std::to_string(c) + " has no samples");
    }
  }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.samples = samples.select_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels[i]);
    out.num_classes = num_classes;
    return out;
  }
};

// ---------------------------------------------------------------------------
// PGM (P2 / P5)

namespace detail {

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments (comment runs to end of line).
  void skip_separators() {
    while (pos_ < bytes_.size()) {
      char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::optional<long long> read_uint(bool allow_comments) {
    if (allow_comments) {
      skip_separators();
    } else {
      while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
    }
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') ++pos_;
    if (start == pos_ || pos_ - start > 12) return std::nullopt;
    long long v = 0;
    std::from_chars(bytes_.data() + start, bytes_.data() + pos_, v);
    // a number must end at a separator or end-of-input
    if (pos_ < bytes_.size() && !is_space(bytes_[pos_]) && bytes_[pos_] != '#') return std::nullopt;
    return v;
  }

  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  char peek() const { return bytes_[pos_]; }
  void advance(std::size_t n = 1) { pos_ += n; }
  std::string_view tail() const { return bytes_.substr(pos_); }

  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline void require_only_whitespace(std::string_view tail) {
  for (char c : tail)
    if (!PgmCursor::is_space(c))
      throw Error(Errc::TrailingGarbage, "non-whitespace bytes after pixel data");
}

}  // namespace detail

/// Decodes a complete P2 (ASCII) or P5 (binary) PGM file image.
inline GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw Error(Errc::MalformedHeader, "expected magic P2 or P5");
  const bool binary = bytes[1] == '5';
  detail::PgmCursor cur(bytes.substr(2));
  if (!cur.at_end() && !detail::PgmCursor::is_space(cur.peek()) && cur.peek() != '#')
    throw Error(Errc::MalformedHeader, "magic must be followed by whitespace");

  auto width = cur.read_uint(true);
  auto height = cur.read_uint(true);
  if (!width || !height) throw Error(Errc::MalformedHeader, "missing or malformed dimensions");
  auto maxval = cur.read_uint(true);
  if (!maxval) throw Error(Errc::MalformedHeader, "missing or malformed maxval");
  if (*width == 0 || *height == 0)
    throw Error(Errc::NonsensicalDimension,
                "zero dimension " + std::to_string(*width) + "x" + std::to_string(*height));
  if (*width > (1 << 20) || *height > (1 << 20))
    throw Error(Errc::NonsensicalDimension, "dimension exceeds 2^20");
  if (*maxval > 255)
    throw Error(Errc::UnsupportedMaxval, "maxval " + std::to_string(*maxval) + " exceeds 255");
  if (*maxval == 0) throw Error(Errc::MalformedHeader, "maxval must be at least 1");

  GrayImage img;
  img.width = static_cast<int>(*width);
  img.height = static_cast<int>(*height);
  img.maxval = static_cast<int>(*maxval);
  const std::size_t count = static_cast<std::size_t>(*width) * static_cast<std::size_t>(*height);
  img.pixels.resize(count);

  if (binary) {
    // exactly one whitespace byte separates maxval from the raster
    if (cur.at_end()) throw Error(Errc::TruncatedPixelData, "no raster after header");
    cur.advance();
    if (cur.remaining() < count)
      throw Error(Errc::TruncatedPixelData, "expected " + std::to_string(count) + " bytes, found " +
                                                std::to_string(cur.remaining()));
    auto raster = cur.tail().substr(0, count);
    for (std::size_t i = 0; i < count; ++i) {
      auto v = static_cast<std::uint8_t>(raster[i]);
      if (v > img.maxval)
        throw Error(Errc::OutOfRange, "pixel " + std::to_string(i) + " exceeds maxval");
      img.pixels[i] = v;
    }
    cur.advance(count);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      if (cur.skip_separators(), cur.at_end())
        throw Error(Errc::TruncatedPixelData, "expected " + std::to_string(count) +
                                                  " samples, found " + std::to_string(i));
      auto v = cur.read_uint(false);
      if (!v) throw Error(Errc::MalformedHeader, "malformed ASCII sample " + std::to_string(i));
      if (*v > img.maxval)
        throw Error(Errc::OutOfRange, "pixel " + std::to_string(i) + " exceeds maxval");
      img.pixels[i] = static_cast<std::uint8_t>(*v);
    }
  }
  detail::require_only_whitespace(cur.tail());
  return img;
}

enum class PgmFormat { Ascii, Binary };

inline std::string serialize_pgm(const GrayImage& img, PgmFormat format = PgmFormat::Binary) {
  std::string out = format == PgmFormat::Binary ? "P5\n" : "P2\n";
  out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
         std::to_string(img.maxval) + "\n";
  if (format == PgmFormat::Binary) {
    out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  } else {
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        if (c) out += ' ';
        out += std::to_string(img.pixels[static_cast<std::size_t>(r * img.width + c)]);
      }
      out += '\n';
    }
  }
  return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::IoFailure, "read failed for " + path.string());
  return std::move(ss).str();
}

inline GrayImage read_pgm_file(const std::filesystem::path& path) {
  try {
    return parse_pgm(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

/// Box-average downsampling by an integer factor (partial edge blocks dropped).
inline GrayImage downsample(const GrayImage& img, int factor) {
  if (factor < 1) throw Error(Errc::InvalidArgument, "downsample factor must be >= 1");
  if (factor == 1) return img;
  GrayImage out;
  out.width = img.width / factor;
  out.height = img.height / factor;
  out.maxval = img.maxval;
  if (out.width == 0 || out.height == 0)
    throw Error(Errc::NonsensicalDimension, "downsample factor larger than image");
  out.pixels.resize(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));
  const int area = factor * factor;
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      int sum = 0;
      for (int dr = 0; dr < factor; ++dr)
        for (int dc = 0; dc < factor; ++dc)
          sum += img.pixels[static_cast<std::size_t>((r * factor + dr) * img.width + c * factor + dc)];
      out.pixels[static_cast<std::size_t>(r * out.width + c)] =
          static_cast<std::uint8_t>((sum + area / 2) / area);
    }
  return out;
}

/// Row-major pixel/maxval, so every entry lies in [0, 1].
inline std::vector<double> flatten_normalize(const GrayImage& img) {
  std::vector<double> v(img.pixels.size());
  const double scale = static_cast<double>(img.maxval);
  std::transform(img.pixels.begin(), img.pixels.end(), v.begin(),
                 [scale](std::uint8_t p) { return static_cast<double>(p) / scale; });
  return v;
}

struct LoadOptions {
  int downsample = 1;
};

namespace detail {

inline void append_image(LabeledDataset& ds, const std::filesystem::path& file, int label,
                         const LoadOptions& opts, int& width, int& height) {
  GrayImage img = read_pgm_file(file);
  if (width == 0) {
    width = img.width;
    height = img.height;
  } else if (img.width != width || img.height != height) {
    throw Error(Errc::InconsistentImageSize,
                file.string() + " is " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + ", expected " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  auto v = flatten_normalize(downsample(img, opts.downsample));
  ds.samples.append_row(v);
  ds.labels.push_back(label);
}

inline bool has_pgm_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm";
}

inline std::optional<int> orl_class_index(const std::string& name) {
  if (name.size() < 2 || name[0] != 's') return std::nullopt;
  int k = 0;
  auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  if (ec != std::errc{} || ptr != name.data() + name.size() || k < 1) return std::nullopt;
  return k;
}

}  // namespace detail

/// Loads an ORL-style tree: root/s1 ... root/sC, each holding PGM files.
/// Samples are ordered lexicographically by directory name, then file name.
inline LabeledDataset load_orl_dataset(const std::filesystem::path& root, const LoadOptions& opts = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::IoFailure, root.string() + " is not a directory");

  std::vector<std::pair<std::string, int>> class_dirs;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (!entry.is_directory()) continue;
    auto name = entry.path().filename().string();
    if (auto k = detail::orl_class_index(name)) class_dirs.emplace_back(name, *k);
  }
  if (ec) throw Error(Errc::IoFailure, "cannot list " + root.string() + ": " + ec.message());
  if (class_dirs.empty()) throw Error(Errc::EmptyClassDirectory, "no s<k> directories under " + root.string());
  std::sort(class_dirs.begin(), class_dirs.end());

  LabeledDataset ds;
  int max_label = 0;
  for (const auto& [name, k] : class_dirs) max_label = std::max(max_label, k);
  ds.num_classes = max_label;
  {
    std::vector<bool> seen(static_cast<std::size_t>(max_label) + 1, false);
    for (const auto& cd : class_dirs) seen[static_cast<std::size_t>(cd.second)] = true;
    for (int k = 1; k <= max_label; ++k)
      if (!seen[static_cast<std::size_t>(k)])
        throw Error(Errc::MissingClass, "directory s" + std::to_string(k) + " missing under " + root.string());
  }

  int width = 0, height = 0;
  for (const auto& [name, k] : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / name))
      if (entry.is_regular_file() && detail::has_pgm_extension(entry.path())) files.push_back(entry.path());
    if (files.empty()) throw Error(Errc::EmptyClassDirectory, (root / name).string() + " holds no PGM files");
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    for (const auto& f : files) detail::append_image(ds, f, k, opts, width, height);
  }
  return ds;
}

/// Loads a `path,label` CSV manifest; relative paths resolve against the manifest's directory.
inline LabeledDataset load_manifest(const std::filesystem::path& manifest, const LoadOptions& opts = {}) {
  std::istringstream in(read_file_bytes(manifest));
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::SchemaMismatch, manifest.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,label")
    throw Error(Errc::SchemaMismatch, manifest.string() + ":1: expected header 'path,label'");

  std::vector<std::pair<std::filesystem::path, int>> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.rfind(',');
    int label = 0;
    if (comma == std::string::npos || comma == 0)
      throw Error(Errc::SchemaMismatch, manifest.string() + ":" + std::to_string(line_no) + ": expected path,label");
    auto lab = std::string_view(line).substr(comma + 1);
    auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), label);
    if (ec != std::errc{} || ptr != lab.data() + lab.size() || label < 1)
      throw Error(Errc::SchemaMismatch,
                  manifest.string() + ":" + std::to_string(line_no) + ": label must be a positive integer");
    std::filesystem::path p = line.substr(0, comma);
    if (p.is_relative()) p = manifest.parent_path() / p;
    entries.emplace_back(p, label);
  }
  if (entries.empty()) throw Error(Errc::EmptyClassDirectory, manifest.string() + " lists no images");

  LabeledDataset ds;
  int width = 0, height = 0;
  for (const auto& [p, label] : entries) {
    detail::append_image(ds, p, label, opts, width, height);
    ds.num_classes = std::max(ds.num_classes, label);
  }
  ds.validate(true);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian blobs

/// Draws n_per_class isotropic Gaussian samples around each center; deterministic from seed.
inline LabeledDataset make_synthetic(int num_classes, std::size_t n_per_class,
                                     const std::vector<std::vector<double>>& centers, double spread,
                                     std::uint64_t seed) {
  if (num_classes < 2) throw Error(Errc::TooFewClasses, "synthetic data needs at least 2 classes");
  if (n_per_class < 1) throw Error(Errc::InvalidArgument, "n_per_class must be >= 1");
  if (centers.size() != static_cast<std::size_t>(num_classes))
    throw Error(Errc::DimensionMismatch, "need one center per class");
  if (!(spread >= 0.0)) throw Error(Errc::BadSpread, "spread must be non-negative");
  const std::size_t d = centers.front().size();
  if (d == 0) throw Error(Errc::DimensionMismatch, "centers must be non-empty");
  for (const auto& c : centers)
    if (c.size() != d) throw Error(Errc::DimensionMismatch, "centers differ in dimension");
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b)
      if (centers[a] == centers[b])
        std::clog << "warning: synthetic classes " << a + 1 << " and " << b + 1 << " share a center\n";

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.samples = Matrix(static_cast<std::size_t>(num_classes) * n_per_class, d);
  ds.labels.reserve(ds.samples.rows());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t r = 0;
  for (int k = 0; k < num_classes; ++k)
    for (std::size_t i = 0; i < n_per_class; ++i, ++r) {
      auto row = ds.samples.row(r);
      for (std::size_t j = 0; j < d; ++j) row[j] = centers[static_cast<std::size_t>(k)][j] + spread * normal(rng);
      ds.labels.push_back(k + 1);
    }
  return ds;
}

struct SyntheticPreset {
  std::vector<std::vector<double>> centers;
  double spread = 0.0;
  std::size_t n_per_class = 0;
};

/// Four 2-D classes at (+-1, +-1), spread 0.3, 250 samples each.
inline SyntheticPreset fig1_preset() {
  return {{{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}, 0.3, 250};
}

inline std::optional<SyntheticPreset> find_synthetic_preset(std::string_view name) {
  if (name == "fig1") return fig1_preset();
  return std::nullopt;
}

}  // namespace pairnet
