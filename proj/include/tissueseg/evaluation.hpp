#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tissueseg/image.hpp"

namespace tissueseg {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Pixel-level confusion counts; 1 (tissue) is the positive class.
inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_size(pred, gt, "confusion");
  // Index by (pred, gt) pair: 0 = tn, 1 = fn, 2 = fp, 3 = tp.
  std::array<std::uint64_t, 4> bins{};
  const auto* p = pred.data().data();
  const auto* g = gt.data().data();
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) ++bins[(p[i] ? 2 : 0) | (g[i] ? 1 : 0)];
  return ConfusionCounts{bins[3], bins[0], bins[2], bins[1]};
}

/// A metric is nullopt (undefined) when its denominator is zero.
struct MetricSet {
  std::optional<double> jaccard;
  std::optional<double> dice;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

enum class Metric { Jaccard, Dice, Sensitivity, Specificity };
inline constexpr std::array<Metric, 4> kMetrics = {Metric::Jaccard, Metric::Dice,
                                                   Metric::Sensitivity, Metric::Specificity};

inline std::optional<double> get(const MetricSet& m, Metric which) {
  switch (which) {
    case Metric::Jaccard: return m.jaccard;
    case Metric::Dice: return m.dice;
    case Metric::Sensitivity: return m.sensitivity;
    case Metric::Specificity: return m.specificity;
  }
  return std::nullopt;
}

inline const char* metric_key(Metric which) {
  switch (which) {
    case Metric::Jaccard: return "jaccard";
    case Metric::Dice: return "dice";
    case Metric::Sensitivity: return "sensitivity";
    case Metric::Specificity: return "specificity";
  }
  return "?";
}

inline MetricSet metrics(const ConfusionCounts& c) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return MetricSet{ratio(c.tp, c.tp + c.fp + c.fn), ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
                   ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp)};
}

struct EvalRecord {
  std::string item_id;
  std::string method_id;
  ConfusionCounts counts;
  MetricSet metrics;
  double elapsed_seconds = 0.0;
  int fold = -1;  // -1 when no fold assignment is in use
};

inline EvalRecord make_record(std::string item_id, std::string method_id, const BinaryMask& pred,
                              const BinaryMask& gt, double elapsed_seconds = 0.0, int fold = -1) {
  const auto counts = confusion(pred, gt);
  return EvalRecord{std::move(item_id), std::move(method_id), counts, metrics(counts),
                    elapsed_seconds, fold};
}

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

inline std::optional<Summary> summarize(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  Summary s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(s.n));
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

/// Statistics over one group of records; metric cells skip undefined values.
struct ReportCell {
  std::size_t records = 0;
  std::optional<Summary> time;
  std::array<std::optional<Summary>, 4> metric;
};

struct MethodReport {
  std::string method_id;
  ReportCell overall;
  /// Keyed by fold index; empty unless per-fold grouping was requested.
  std::map<int, ReportCell> folds;
  /// Unweighted mean of the per-fold means, per metric.
  std::array<std::optional<double>, 4> mean_of_fold_means;
};

struct Report {
  std::vector<MethodReport> methods;  // sorted by method id
  bool per_fold = false;
};

enum class Grouping { Overall, PerFold };

inline ReportCell summarize_records(const std::vector<const EvalRecord*>& records) {
  ReportCell cell;
  cell.records = records.size();
  std::vector<double> times;
  for (const auto* r : records) times.push_back(r->elapsed_seconds);
  cell.time = summarize(times);
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    std::vector<double> values;
    for (const auto* r : records) {
      if (auto v = get(r->metrics, kMetrics[m])) values.push_back(*v);
    }
    cell.metric[m] = summarize(values);
  }
  return cell;
}

/// Mean and population standard deviation per metric and method.
inline Report aggregate(const std::vector<EvalRecord>& records,
                        Grouping grouping = Grouping::Overall) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no records to aggregate");
  std::map<std::string, std::vector<const EvalRecord*>> by_method;
  for (const auto& r : records) by_method[r.method_id].push_back(&r);

  Report report;
  report.per_fold = grouping == Grouping::PerFold;
  for (const auto& [method, group] : by_method) {
    MethodReport mr;
    mr.method_id = method;
    mr.overall = summarize_records(group);
    if (report.per_fold) {
      std::map<int, std::vector<const EvalRecord*>> by_fold;
      for (const auto* r : group) by_fold[r->fold].push_back(r);
      for (const auto& [fold, members] : by_fold) mr.folds[fold] = summarize_records(members);
      for (std::size_t m = 0; m < kMetrics.size(); ++m) {
        std::vector<double> means;
        for (const auto& [fold, cell] : mr.folds) {
          if (cell.metric[m]) means.push_back(cell.metric[m]->mean);
        }
        if (auto s = summarize(means)) mr.mean_of_fold_means[m] = s->mean;
      }
    }
    report.methods.push_back(std::move(mr));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

enum class TableFormat { Text, Csv };

namespace detail {

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string full(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string cell_text(const std::optional<Summary>& s) { return s ? fixed(s->mean, 2) : "n/a"; }

inline constexpr std::array<const char*, 5> kTableHeaders = {
    "Time (s)", "Jaccard Index", "Dice Coeff.", "Sensitivity", "Specificity"};

inline void text_row(std::ostringstream& os, const std::string& label, const ReportCell& cell,
                     std::size_t label_width) {
  os << std::left << std::setw(static_cast<int>(label_width)) << label;
  os << "  " << std::right << std::setw(8) << cell_text(cell.time);
  const std::array<int, 4> widths = {13, 11, 11, 11};
  for (std::size_t m = 0; m < 4; ++m) {
    os << "  " << std::setw(widths[m]) << cell_text(cell.metric[m]);
  }
  os << "  " << std::setw(5) << cell.records << '\n';
}

inline void csv_row(std::ostringstream& os, const std::string& method, const std::string& scope,
                    const ReportCell& cell) {
  os << csv_field(method) << ',' << scope << ',' << cell.records;
  auto put = [&](const std::optional<Summary>& s) {
    if (s) {
      os << ',' << s->n << ',' << full(s->mean) << ',' << full(s->stddev) << ','
         << fixed(s->mean, 2);
    } else {
      os << ",0,,,";
    }
  };
  put(cell.time);
  for (const auto& m : cell.metric) put(m);
  os << '\n';
}

}  // namespace detail

/**
 * One row per method with columns Time (s), Jaccard Index, Dice Coeff.,
 * Sensitivity, Specificity. Text output rounds to two decimals; CSV carries
 * n, full-precision mean, population std and the rounded mean for each column.
 */
inline std::string render_table(const Report& report, TableFormat format) {
  std::ostringstream os;
  if (format == TableFormat::Csv) {
    os << "method,scope,records";
    const std::array<const char*, 5> keys = {"time", "jaccard", "dice", "sensitivity",
                                             "specificity"};
    for (const auto* k : keys) os << ',' << k << "_n," << k << "_mean," << k << "_std," << k << "_rounded";
    os << '\n';
    for (const auto& m : report.methods) {
      detail::csv_row(os, m.method_id, "overall", m.overall);
      for (const auto& [fold, cell] : m.folds) {
        detail::csv_row(os, m.method_id, "fold" + std::to_string(fold), cell);
      }
      if (report.per_fold) {
        os << m.method_id << ",mean_of_fold_means," << m.folds.size() << ",0,,,";
        for (const auto& v : m.mean_of_fold_means) {
          if (v) {
            os << ",," << detail::full(*v) << ",," << detail::fixed(*v, 2);
          } else {
            os << ",0,,,";
          }
        }
        os << '\n';
      }
    }
    return os.str();
  }

  std::size_t label_width = 6;
  for (const auto& m : report.methods) {
    label_width = std::max(label_width, m.method_id.size() + (report.per_fold ? 9 : 0));
  }
  os << "# means over records; std is the population standard deviation (see CSV)\n";
  os << std::left << std::setw(static_cast<int>(label_width)) << "Method";
  for (const auto* h : detail::kTableHeaders) os << "  " << h;
  os << "  " << std::setw(5) << "n" << '\n';
  for (const auto& m : report.methods) {
    detail::text_row(os, m.method_id, m.overall, label_width);
    for (const auto& [fold, cell] : m.folds) {
      detail::text_row(os, m.method_id + " [fold " + std::to_string(fold) + "]", cell,
                       label_width);
    }
    if (report.per_fold) {
      os << std::left << std::setw(static_cast<int>(label_width)) << (m.method_id + " [folds]");
      os << "  " << std::right << std::setw(8) << "";
      const std::array<int, 4> widths = {13, 11, 11, 11};
      for (std::size_t k = 0; k < 4; ++k) {
        const auto& v = m.mean_of_fold_means[k];
        os << "  " << std::setw(widths[k]) << (v ? detail::fixed(*v, 2) : "n/a");
      }
      os << "  " << std::setw(5) << m.folds.size() << '\n';
    }
  }
  return os.str();
}

/// Long-format (method, item_id, jaccard) rows ordered by method then item id.
inline std::string export_boxplot_data(const std::vector<EvalRecord>& records) {
  std::vector<const EvalRecord*> rows;
  for (const auto& r : records) {
    if (r.metrics.jaccard) rows.push_back(&r);
  }
  std::sort(rows.begin(), rows.end(), [](const EvalRecord* a, const EvalRecord* b) {
    return std::tie(a->method_id, a->item_id) < std::tie(b->method_id, b->item_id);
  });
  std::ostringstream os;
  os << "method,item_id,jaccard\n";
  for (const auto* r : rows) {
    os << detail::csv_field(r->method_id) << ',' << detail::csv_field(r->item_id) << ','
       << detail::full(*r->metrics.jaccard) << '\n';
  }
  return os.str();
}

/// Per-record CSV: counts, metrics (empty when undefined), timing and fold.
inline std::string export_records(const std::vector<EvalRecord>& records) {
  std::ostringstream os;
  os << "method,item_id,fold,tp,tn,fp,fn,jaccard,dice,sensitivity,specificity,elapsed_seconds\n";
  for (const auto& r : records) {
    os << detail::csv_field(r.method_id) << ',' << detail::csv_field(r.item_id) << ',' << r.fold << ',' << r.counts.tp << ','
       << r.counts.tn << ',' << r.counts.fp << ',' << r.counts.fn;
    for (auto m : kMetrics) {
      os << ',';
      if (auto v = get(r.metrics, m)) os << detail::full(*v);
    }
    os << ',' << detail::full(r.elapsed_seconds) << '\n';
  }
  return os.str();
}

}  // namespace tissueseg
