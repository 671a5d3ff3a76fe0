#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tissueseg/image.hpp"
#include "tissueseg/preprocess.hpp"
#include "tissueseg/raster_io.hpp"

namespace tissueseg {

namespace fs = std::filesystem;

struct DatasetItem {
  std::string id;
  fs::path image_path;
  std::optional<fs::path> mask_path;
  std::optional<std::string> organ;
};

inline constexpr const char* kDefaultMaskSuffix = "_mask";

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool is_image_file(const fs::path& p) {
  const auto ext = lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

/**
 * Pairs every image F.{png,jpg,jpeg} in `image_dir` with `mask_dir`/F<suffix>.png.
 * Files that themselves carry the mask suffix are not images. Items come back
 * sorted by id; items without a mask keep `mask_path` empty.
 */
inline std::vector<DatasetItem> scan_pairs(const fs::path& image_dir, const fs::path& mask_dir,
                                           const std::string& mask_suffix = kDefaultMaskSuffix) {
  std::error_code ec;
  if (!fs::is_directory(image_dir, ec)) {
    throw Error(ErrorKind::IOFailure, "not a readable directory: " + image_dir.string());
  }
  std::map<std::string, fs::path> images;
  for (const auto& entry : fs::directory_iterator(image_dir, ec)) {
    if (!entry.is_regular_file() || !detail::is_image_file(entry.path())) continue;
    const auto stem = entry.path().stem().string();
    if (!mask_suffix.empty() && detail::ends_with(stem, mask_suffix)) continue;
    if (!images.emplace(stem, entry.path()).second) {
      throw Error(ErrorKind::DuplicateStem, "more than one image with stem '" + stem + "'");
    }
  }
  if (ec) throw Error(ErrorKind::IOFailure, "cannot list " + image_dir.string() + ": " + ec.message());

  std::vector<DatasetItem> items;
  for (const auto& [stem, path] : images) {
    DatasetItem item{stem, path, std::nullopt, std::nullopt};
    const auto mask = mask_dir / (stem + mask_suffix + ".png");
    if (fs::is_regular_file(mask, ec)) item.mask_path = mask;
    items.push_back(std::move(item));
  }
  return items;
}

/**
 * Tab-separated manifest with a header row naming at least `id` and `filename`
 * (case-insensitive). Optional columns: `mask` (mask file) and `organ`. Relative
 * paths resolve against the manifest's directory. Blank lines are skipped.
 */
inline std::vector<DatasetItem> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOFailure, "cannot open manifest " + path.string());
  const auto base = path.parent_path();

  auto split = [](const std::string& line) {
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, '\t')) cols.push_back(cell);
    if (!line.empty() && line.back() == '\t') cols.emplace_back();
    return cols;
  };
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };

  std::string line;
  if (!std::getline(in, line)) return {};
  strip_cr(line);
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[detail::lower(header[i])] = i;
  for (const char* required : {"id", "filename"}) {
    if (!col.count(required)) {
      throw Error(ErrorKind::ParseError,
                  path.string() + ":1: header lacks required column '" + required + "'");
    }
  }

  auto field = [&](const std::vector<std::string>& row, const char* name) -> std::string {
    const auto it = col.find(name);
    if (it == col.end() || it->second >= row.size()) return {};
    return row[it->second];
  };
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::vector<DatasetItem> items;
  std::set<std::string> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto row = split(line);
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto id = field(row, "id");
    const auto filename = field(row, "filename");
    if (id.empty()) throw Error(ErrorKind::ParseError, where + "missing id");
    if (filename.empty()) throw Error(ErrorKind::ParseError, where + "missing filename");
    if (!seen.insert(id).second) throw Error(ErrorKind::ParseError, where + "duplicate id '" + id + "'");
    DatasetItem item{id, resolve(filename), std::nullopt, std::nullopt};
    if (auto m = field(row, "mask"); !m.empty()) item.mask_path = resolve(m);
    if (auto o = field(row, "organ"); !o.empty()) item.organ = o;
    items.push_back(std::move(item));
  }
  return items;
}

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> fold_of;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
    for (const auto& [id, f] : fold_of) ++out[static_cast<std::size_t>(f)];
    return out;
  }

  std::vector<std::string> members(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_of) {
      if (f == fold) out.push_back(id);
    }
    return out;
  }
};

namespace detail {

// Unbiased draw in [0, bound) from raw engine output by rejection.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

}  // namespace detail

/**
 * Deterministic k-fold split. Ids are sorted, shuffled with Fisher-Yates driven
 * by std::mt19937_64(seed) (j drawn uniformly from [0, i] by rejection on the
 * raw 64-bit output, i from n-1 down to 1), then dealt round-robin so the
 * shuffled position p lands in fold p mod k.
 */
inline FoldAssignment assign_folds(std::vector<std::string> ids, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::InvalidParam, "fold count must be >= 2");
  if (ids.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::TooFewItems, "need at least " + std::to_string(k) + " items, got " +
                                            std::to_string(ids.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorKind::InvalidParam, "item ids must be unique");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    std::swap(ids[i], ids[detail::bounded(rng, i + 1)]);
  }
  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  for (std::size_t p = 0; p < ids.size(); ++p) out.fold_of[ids[p]] = static_cast<int>(p % k);
  return out;
}

inline FoldAssignment assign_folds(const std::vector<DatasetItem>& items, int k,
                                   std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& item : items) ids.push_back(item.id);
  return assign_folds(std::move(ids), k, seed);
}

// ---------------------------------------------------------------------------
// Loading

struct LoadedItem {
  RgbImage image;
  std::optional<BinaryMask> mask;
  /// Mask pixels that were neither 0 nor 255 on disk.
  std::size_t non_binary_pixels = 0;
  std::optional<PadRecord> pad;
};

struct LoadOptions {
  /// Apply fit_within + pad_to_square to the image and mask.
  bool normalize = false;
  int size = kThumbnailSize;
};

/**
 * Decodes the image and, when present, its mask (>= 128 is tissue). Image and
 * mask must have identical stored dimensions; the optional normalization is
 * applied to both afterwards, so they stay aligned.
 */
inline LoadedItem load_item(const DatasetItem& item, const LoadOptions& options = {}) {
  LoadedItem out{read_rgb(item.image_path), std::nullopt, 0, std::nullopt};
  if (item.mask_path) {
    MaskDecodeReport report;
    auto mask = read_mask(*item.mask_path, &report);
    if (!mask.same_size(out.image)) {
      throw Error(ErrorKind::DimensionMismatch,
                  "item '" + item.id + "': mask " + std::to_string(mask.width()) + "x" +
                      std::to_string(mask.height()) + " vs image " +
                      std::to_string(out.image.width()) + "x" +
                      std::to_string(out.image.height()));
    }
    out.non_binary_pixels = report.non_binary_pixels;
    out.mask = std::move(mask);
  }
  if (options.normalize) {
    auto img = normalize_thumbnail(out.image, options.size);
    out.image = std::move(img.image);
    out.pad = img.record;
    if (out.mask) out.mask = normalize_thumbnail(*out.mask, options.size).image;
  }
  return out;
}

}  // namespace tissueseg
