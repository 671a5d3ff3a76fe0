#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tissueseg/color.hpp"
#include "tissueseg/contour.hpp"
#include "tissueseg/filter.hpp"
#include "tissueseg/image.hpp"
#include "tissueseg/morphology.hpp"
#include "tissueseg/threshold.hpp"

namespace tissueseg {

enum class ParentMode { Include, Exclude };

/**
 * Parameters of the contour-hierarchy method.
 *
 * Areas are in pixels at thumbnail scale (longest side <= 1024). With
 * `parents == Include` the tree is built on the dark-is-tissue binarization and
 * all outermost contours are kept. `Exclude` builds the tree on the inverse
 * binarization, so the first-level children are the tissue pieces and only the
 * selected children are drawn.
 */
struct HandcraftedParams {
  /// nullopt selects Otsu.
  std::optional<int> fixed_threshold;
  double area_threshold = 500.0;
  double ratio_threshold = 0.1;
  double dist_threshold = 50.0;
  double hole_lower = 9.0;
  double hole_upper = 2500.0;
  ParentMode parents = ParentMode::Include;
};

struct OtsuParams {};

struct FesiParams {
  double sigma = 5.0;
  double min_region_area = 50.0;
};

struct TissueLocParams {
  int erode_radius = 1;
  int dilate_radius = 1;
  double min_tissue_size = 50.0;
};

struct HistomicsParams {
  double sigma = 2.0;
  int thresholding_steps = 1;
  double min_size = 50.0;
};

enum class MethodId { Handcrafted, Otsu, Fesi, TissueLoc, Histomics };

inline constexpr MethodId kAllMethods[] = {MethodId::Fesi, MethodId::TissueLoc, MethodId::Otsu,
                                           MethodId::Histomics, MethodId::Handcrafted};

inline const char* method_name(MethodId id) {
  switch (id) {
    case MethodId::Handcrafted: return "handcrafted";
    case MethodId::Otsu: return "otsu";
    case MethodId::Fesi: return "fesi";
    case MethodId::TissueLoc: return "tissueloc";
    case MethodId::Histomics: return "histomics";
  }
  return "?";
}

/// Raised for a bad method id or parameter; `field` names the offending key.
class ParamError : public Error {
 public:
  ParamError(std::string field, const std::string& what)
      : Error(ErrorKind::Validation, what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline MethodId parse_method_id(const std::string& name) {
  for (auto id : kAllMethods) {
    if (name == method_name(id)) return id;
  }
  throw ParamError("method", "unknown method '" + name + "'");
}

using MethodParams =
    std::variant<HandcraftedParams, OtsuParams, FesiParams, TissueLocParams, HistomicsParams>;

struct MethodSpec {
  MethodId id = MethodId::Otsu;
  MethodParams params = OtsuParams{};
};

inline MethodParams default_params(MethodId id) {
  switch (id) {
    case MethodId::Handcrafted: return HandcraftedParams{};
    case MethodId::Otsu: return OtsuParams{};
    case MethodId::Fesi: return FesiParams{};
    case MethodId::TissueLoc: return TissueLocParams{};
    case MethodId::Histomics: return HistomicsParams{};
  }
  return OtsuParams{};
}

inline MethodSpec default_spec(MethodId id) { return MethodSpec{id, default_params(id)}; }

inline void validate(const HandcraftedParams& p) {
  if (p.fixed_threshold && (*p.fixed_threshold < 0 || *p.fixed_threshold > 255)) {
    throw ParamError("binarization", "fixed threshold must be in [0, 255]");
  }
  if (!(p.area_threshold > 0)) throw ParamError("areaThreshold", "areaThreshold must be > 0");
  if (!(p.ratio_threshold > 0 && p.ratio_threshold <= 1)) {
    throw ParamError("ratioThreshold", "ratioThreshold must be in (0, 1]");
  }
  if (!(p.dist_threshold > 0)) throw ParamError("distThreshold", "distThreshold must be > 0");
  if (!(p.hole_lower > 0)) throw ParamError("hLowerThresh", "hLowerThresh must be > 0");
  if (!(p.hole_upper > p.hole_lower)) {
    throw ParamError("hUpperThresh", "hUpperThresh must exceed hLowerThresh");
  }
}

inline void validate(const OtsuParams&) {}

inline void validate(const FesiParams& p) {
  if (!(p.sigma > 0)) throw ParamError("sigma", "sigma must be > 0");
  if (!(p.min_region_area >= 0)) throw ParamError("minRegionArea", "minRegionArea must be >= 0");
}

inline void validate(const TissueLocParams& p) {
  if (p.erode_radius < 1) throw ParamError("erodeRadius", "erodeRadius must be >= 1");
  if (p.dilate_radius < 1) throw ParamError("dilateRadius", "dilateRadius must be >= 1");
  if (!(p.min_tissue_size >= 0)) throw ParamError("minTissueSize", "minTissueSize must be >= 0");
}

inline void validate(const HistomicsParams& p) {
  if (!(p.sigma > 0)) throw ParamError("sigma", "sigma must be > 0");
  if (p.thresholding_steps < 1) {
    throw ParamError("thresholdingSteps", "thresholdingSteps must be >= 1");
  }
  if (!(p.min_size >= 0)) throw ParamError("minSize", "minSize must be >= 0");
}

inline void validate(const MethodSpec& spec) {
  if (spec.params.index() != default_params(spec.id).index()) {
    throw ParamError("params", std::string("parameter record does not match method '") +
                                   method_name(spec.id) + "'");
  }
  std::visit([](const auto& p) { validate(p); }, spec.params);
}

namespace detail {

inline double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParamError(key, "parameter '" + key + "' expects a number, got '" + value + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ParamError(key, "parameter '" + key + "' expects an integer, got '" + value + "'");
  }
  return static_cast<int>(v);
}

inline std::size_t area_cutoff(double min_area) {
  return static_cast<std::size_t>(std::ceil(min_area));
}

}  // namespace detail

/**
 * Builds a spec from a method name and string-valued parameters. Parameter
 * names are the canonical camelCase keys (areaThreshold, minTissueSize, ...).
 */
inline MethodSpec make_method_spec(const std::string& method,
                                   const std::unordered_map<std::string, std::string>& params) {
  MethodSpec spec = default_spec(parse_method_id(method));
  auto unknown = [&](const std::string& key) {
    return ParamError(key, "unknown parameter '" + key + "' for method '" + method + "'");
  };
  for (const auto& [key, value] : params) {
    std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          using detail::parse_int;
          using detail::parse_number;
          if constexpr (std::is_same_v<P, HandcraftedParams>) {
            if (key == "binarization") {
              if (value == "otsu") {
                p.fixed_threshold.reset();
              } else {
                p.fixed_threshold = parse_int(key, value);
              }
            } else if (key == "areaThreshold") {
              p.area_threshold = parse_number(key, value);
            } else if (key == "ratioThreshold") {
              p.ratio_threshold = parse_number(key, value);
            } else if (key == "distThreshold") {
              p.dist_threshold = parse_number(key, value);
            } else if (key == "hLowerThresh") {
              p.hole_lower = parse_number(key, value);
            } else if (key == "hUpperThresh") {
              p.hole_upper = parse_number(key, value);
            } else if (key == "parents") {
              if (value == "include") {
                p.parents = ParentMode::Include;
              } else if (value == "exclude") {
                p.parents = ParentMode::Exclude;
              } else {
                throw ParamError(key, "parents must be 'include' or 'exclude'");
              }
            } else {
              throw unknown(key);
            }
          } else if constexpr (std::is_same_v<P, FesiParams>) {
            if (key == "sigma") {
              p.sigma = parse_number(key, value);
            } else if (key == "minRegionArea") {
              p.min_region_area = parse_number(key, value);
            } else {
              throw unknown(key);
            }
          } else if constexpr (std::is_same_v<P, TissueLocParams>) {
            if (key == "erodeRadius") {
              p.erode_radius = parse_int(key, value);
            } else if (key == "dilateRadius") {
              p.dilate_radius = parse_int(key, value);
            } else if (key == "minTissueSize") {
              p.min_tissue_size = parse_number(key, value);
            } else {
              throw unknown(key);
            }
          } else if constexpr (std::is_same_v<P, HistomicsParams>) {
            if (key == "sigma") {
              p.sigma = parse_number(key, value);
            } else if (key == "thresholdingSteps") {
              p.thresholding_steps = parse_int(key, value);
            } else if (key == "minSize") {
              p.min_size = parse_number(key, value);
            } else {
              throw unknown(key);
            }
          } else {
            throw unknown(key);
          }
        },
        spec.params);
  }
  validate(spec);
  return spec;
}

/// Inverse of make_method_spec: canonical key/value strings for a spec.
inline std::vector<std::pair<std::string, std::string>> describe_params(const MethodSpec& spec) {
  auto num = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, HandcraftedParams>) {
          out.emplace_back("binarization",
                           p.fixed_threshold ? std::to_string(*p.fixed_threshold) : "otsu");
          out.emplace_back("areaThreshold", num(p.area_threshold));
          out.emplace_back("ratioThreshold", num(p.ratio_threshold));
          out.emplace_back("distThreshold", num(p.dist_threshold));
          out.emplace_back("hLowerThresh", num(p.hole_lower));
          out.emplace_back("hUpperThresh", num(p.hole_upper));
          out.emplace_back("parents", p.parents == ParentMode::Include ? "include" : "exclude");
        } else if constexpr (std::is_same_v<P, FesiParams>) {
          out.emplace_back("sigma", num(p.sigma));
          out.emplace_back("minRegionArea", num(p.min_region_area));
        } else if constexpr (std::is_same_v<P, TissueLocParams>) {
          out.emplace_back("erodeRadius", std::to_string(p.erode_radius));
          out.emplace_back("dilateRadius", std::to_string(p.dilate_radius));
          out.emplace_back("minTissueSize", num(p.min_tissue_size));
        } else if constexpr (std::is_same_v<P, HistomicsParams>) {
          out.emplace_back("sigma", num(p.sigma));
          out.emplace_back("thresholdingSteps", std::to_string(p.thresholding_steps));
          out.emplace_back("minSize", num(p.min_size));
        }
      },
      spec.params);
  return out;
}

// ---------------------------------------------------------------------------
// Methods

/// Grayscale + Otsu, dark pixels are tissue. A single-valued image has no tissue.
inline BinaryMask otsu_mask(const RgbImage& img) {
  const auto gray = to_grayscale(img);
  const auto t = try_otsu_threshold(histogram(gray));
  if (!t) return BinaryMask(img.width(), img.height(), 0);
  return otsu_dark_class(gray, *t);
}

/**
 * Chroma-based foreground extraction.
 *
 * Lightness and red/green are saturated, which leaves the yellow/blue axis as
 * the only signal. Rendering that saturated color back to gray brightens as b*
 * decreases, so the gray image is b* mapped linearly from [max_b, min_b] onto
 * [0, 255]; stained tissue (bluish, lower b*) comes out bright. A b* range
 * below half a unit carries no chroma and maps to 0.
 */
inline BinaryMask fesi_mask(const RgbImage& img, const FesiParams& p = {}) {
  validate(p);
  const auto lab = rgb_to_lab(img);
  const std::size_t n = img.pixel_count();
  double lo = lab[2], hi = lab[2];
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, lab[3 * i + 2]);
    hi = std::max(hi, lab[3 * i + 2]);
  }
  GrayImage gray(img.width(), img.height(), 0);
  if (hi - lo >= 0.5) {
    for (std::size_t i = 0; i < n; ++i) {
      gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * (hi - lab[3 * i + 2]) / (hi - lo)));
    }
  }
  const auto coarse = binarize(gray, mean_threshold(gray), Polarity::BrightIsForeground);
  GrayImage scaled(img.width(), img.height());
  for (std::size_t i = 0; i < n; ++i) scaled[i] = coarse[i] ? 255 : 0;
  const auto smooth = gaussian_blur(scaled, p.sigma);
  const auto mask = binarize(smooth, 127, Polarity::BrightIsForeground);
  return remove_small_components(mask, detail::area_cutoff(p.min_region_area));
}

/// Inverse Otsu binarization, erosion, dilation, then small-object removal.
inline BinaryMask tissueloc_mask(const RgbImage& img, const TissueLocParams& p = {}) {
  validate(p);
  const auto gray = to_grayscale(img);
  const auto t = try_otsu_threshold(histogram(gray));
  if (!t) return BinaryMask(img.width(), img.height(), 0);
  auto mask = otsu_dark_class(gray, *t);
  mask = erode(mask, p.erode_radius);
  mask = dilate(mask, p.dilate_radius);
  return remove_small_components(mask, detail::area_cutoff(p.min_tissue_size));
}

/**
 * Repeated Gaussian smoothing and Otsu thresholding. Step k > 1 computes its
 * histogram over the pixels still marked as tissue and can only shrink the mask.
 */
inline BinaryMask histomics_like_mask(const RgbImage& img, const HistomicsParams& p = {}) {
  validate(p);
  auto gray = to_grayscale(img);
  BinaryMask mask(img.width(), img.height(), 1);
  for (int step = 0; step < p.thresholding_steps; ++step) {
    gray = gaussian_blur(gray, p.sigma);
    const auto t = try_otsu_threshold(step == 0 ? histogram(gray) : histogram(gray, mask));
    if (!t) {
      if (step == 0) return BinaryMask(img.width(), img.height(), 0);
      break;
    }
    const auto next = otsu_dark_class(gray, *t);
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) mask[i] = mask[i] & next[i];
  }
  return remove_small_components(mask, detail::area_cutoff(p.min_size));
}

/// Per-step record of the contour-hierarchy method, for inspection and tests.
struct HandcraftedTrace {
  int threshold = -1;  // binarization cut: tissue is gray < threshold
  ContourTree tree;
  /// Contour indices chosen after the outermost-contour step and after each of
  /// the three child-selection steps.
  std::vector<std::size_t> chosen_after_parents;
  std::vector<std::size_t> chosen_after_ratio;
  std::vector<std::size_t> chosen_after_distance;
  std::vector<std::size_t> chosen_after_area;
  BinaryMask before_holes;
  /// Background components re-opened by the hole filter.
  std::size_t holes_reopened = 0;
};

namespace detail {

// Bucket grid over contour points answering "is any indexed point closer than d?".
class PointProximityIndex {
 public:
  PointProximityIndex(int width, int height, double distance)
      : distance_(distance),
        cell_(std::max(1, static_cast<int>(std::ceil(distance)))),
        cols_(width / cell_ + 1),
        rows_(height / cell_ + 1),
        buckets_(static_cast<std::size_t>(cols_) * rows_) {}

  void add(const std::vector<Point>& points) {
    for (const auto& p : points) buckets_[bucket(p.x / cell_, p.y / cell_)].push_back(p);
  }

  bool any_closer_than(const std::vector<Point>& points) const {
    const double limit = distance_ * distance_;
    for (const auto& p : points) {
      const int cx = p.x / cell_, cy = p.y / cell_;
      for (int by = std::max(0, cy - 1); by <= std::min(rows_ - 1, cy + 1); ++by) {
        for (int bx = std::max(0, cx - 1); bx <= std::min(cols_ - 1, cx + 1); ++bx) {
          for (const auto& q : buckets_[bucket(bx, by)]) {
            const double dx = p.x - q.x, dy = p.y - q.y;
            if (dx * dx + dy * dy < limit) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  std::size_t bucket(int bx, int by) const { return static_cast<std::size_t>(by) * cols_ + bx; }

  double distance_;
  int cell_;
  int cols_;
  int rows_;
  std::vector<std::vector<Point>> buckets_;
};

}  // namespace detail

/**
 * Contour-hierarchy masking.
 *
 *  1. binarize grayscale (Otsu or fixed threshold)
 *  2. build the contour tree
 *  3. keep every outermost contour
 *  4. rank first-level children by area; keep the largest and continue while
 *     area[i] > min(area[i-1] * ratioThreshold, areaThreshold)
 *  5. keep any child closer than distThreshold to something already kept
 *  6. keep any child larger than areaThreshold
 *  7. draw the kept contours filled
 *  8. erase background components with hLowerThresh < area < hUpperThresh
 */
inline BinaryMask handcrafted_mask(const RgbImage& img, const HandcraftedParams& p = {},
                                   HandcraftedTrace* trace = nullptr) {
  validate(p);
  const int w = img.width(), h = img.height();
  const auto gray = to_grayscale(img);
  // Binarization cut: tissue is every pixel strictly below it.
  std::optional<int> cut = p.fixed_threshold;
  if (!cut) {
    const auto t = try_otsu_threshold(histogram(gray));
    if (!t) return BinaryMask(w, h, 0);
    cut = *t + 1;
  }
  if (trace) trace->threshold = *cut;

  const auto tissue = binarize(gray, *cut, Polarity::DarkIsForeground);
  const bool include_parents = p.parents == ParentMode::Include;
  auto tree = find_contours(include_parents ? tissue : invert(tissue));

  std::vector<std::size_t> chosen;
  std::vector<bool> is_chosen(tree.contours.size(), false);
  detail::PointProximityIndex near(w, h, p.dist_threshold);
  auto choose = [&](std::size_t k) {
    chosen.push_back(k);
    is_chosen[k] = true;
    near.add(tree.contours[k].points);
  };

  if (include_parents) {
    for (auto k : tree.at_depth(0)) choose(k);
  }
  if (trace) trace->chosen_after_parents = chosen;

  auto children = tree.at_depth(1);
  std::vector<double> area(tree.contours.size(), 0.0);
  for (auto k : children) area[k] = contour_area(tree.contours[k]);
  std::stable_sort(children.begin(), children.end(),
                   [&](std::size_t a, std::size_t b) { return area[a] > area[b]; });

  if (!children.empty()) {
    choose(children[0]);
    for (std::size_t i = 1; i < children.size(); ++i) {
      const double prev = area[children[i - 1]];
      if (!(area[children[i]] > std::min(prev * p.ratio_threshold, p.area_threshold))) break;
      choose(children[i]);
    }
  }
  if (trace) trace->chosen_after_ratio = chosen;

  for (auto k : children) {
    if (!is_chosen[k] && near.any_closer_than(tree.contours[k].points)) choose(k);
  }
  if (trace) trace->chosen_after_distance = chosen;

  for (auto k : children) {
    if (!is_chosen[k] && area[k] > p.area_threshold) choose(k);
  }
  if (trace) trace->chosen_after_area = chosen;

  BinaryMask result(w, h, 0);
  for (auto k : chosen) paint_contour(tree.contours[k], 1, result);
  if (trace) trace->before_holes = result;

  // Holes are background components of the tissue binarization.
  const auto holes = connected_components(invert(tissue), Connectivity::Four);
  std::vector<bool> reopen(holes.count(), false);
  for (std::size_t i = 0; i < holes.count(); ++i) {
    const auto a = static_cast<double>(holes.areas[i]);
    reopen[i] = p.hole_lower < a && a < p.hole_upper;
  }
  for (std::size_t i = 0; i < result.pixel_count(); ++i) {
    const auto label = holes.labels[i];
    if (label != 0 && reopen[label - 1]) result[i] = 0;
  }
  if (trace) {
    trace->holes_reopened = static_cast<std::size_t>(std::count(reopen.begin(), reopen.end(), true));
    trace->tree = std::move(tree);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dispatch

struct MaskResult {
  BinaryMask mask;
  double elapsed_seconds = 0.0;
};

/// Runs one method; the elapsed time covers the method call only.
inline MaskResult segment(const RgbImage& img, const MethodSpec& spec) {
  validate(spec);
  const auto start = std::chrono::steady_clock::now();
  BinaryMask mask = std::visit(
      [&](const auto& p) -> BinaryMask {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, HandcraftedParams>) {
          return handcrafted_mask(img, p);
        } else if constexpr (std::is_same_v<P, OtsuParams>) {
          return otsu_mask(img);
        } else if constexpr (std::is_same_v<P, FesiParams>) {
          return fesi_mask(img, p);
        } else if constexpr (std::is_same_v<P, TissueLocParams>) {
          return tissueloc_mask(img, p);
        } else {
          return histomics_like_mask(img, p);
        }
      },
      spec.params);
  const auto stop = std::chrono::steady_clock::now();
  return MaskResult{std::move(mask), std::chrono::duration<double>(stop - start).count()};
}

}  // namespace tissueseg
