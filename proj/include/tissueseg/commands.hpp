#pragma once

#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tissueseg/dataset.hpp"
#include "tissueseg/evaluation.hpp"
#include "tissueseg/methods.hpp"
#include "tissueseg/pipeline.hpp"
#include "tissueseg/raster_io.hpp"
#include "tissueseg/review_service.hpp"

namespace tissueseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags or parameter values, detected before any work starts.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int default_threads() {
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Splits repeated `key=value` flags; later keys win.
inline std::unordered_map<std::string, std::string> parse_params(const std::vector<std::string>& raw) {
  std::unordered_map<std::string, std::string> out;
  for (const auto& kv : raw) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + kv + "'");
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

inline MethodSpec usage_spec(const std::string& method,
                             const std::unordered_map<std::string, std::string>& params) {
  try {
    return make_method_spec(method, params);
  } catch (const ParamError& e) {
    throw UsageError(std::string(e.what()) + " (field: " + e.field() + ")");
  }
}

/**
 * Specs for several methods. A `method.key=value` parameter targets one method;
 * a bare `key=value` is only allowed when a single method is requested.
 */
inline std::vector<MethodSpec> usage_specs(const std::vector<std::string>& methods,
                                           const std::vector<std::string>& raw_params) {
  if (methods.empty()) throw UsageError("at least one --method is required");
  std::map<std::string, std::unordered_map<std::string, std::string>> per_method;
  for (const auto& m : methods) {
    if (per_method.count(m)) throw UsageError("method '" + m + "' listed twice");
    per_method[m];
  }
  for (const auto& [key, value] : parse_params(raw_params)) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      if (methods.size() != 1) throw UsageError("parameter '" + key + "' must be written method." + key);
      per_method[methods[0]][key] = value;
    } else {
      const auto m = key.substr(0, dot);
      if (!per_method.count(m)) throw UsageError("parameter '" + key + "' names a method not in --method");
      per_method[m][key.substr(dot + 1)] = value;
    }
  }
  std::vector<MethodSpec> specs;
  for (const auto& m : methods) specs.push_back(usage_spec(m, per_method[m]));
  return specs;
}

inline TableFormat parse_format(const std::string& f) {
  if (f == "text") return TableFormat::Text;
  if (f == "csv") return TableFormat::Csv;
  throw UsageError("--format must be text or csv");
}

/// Runs fn(i) for i in [0, n) on `threads` workers; returns per-index errors.
template <typename Fn>
std::vector<std::optional<std::string>> parallel_for(std::size_t n, int threads, Fn fn) {
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

/// Serializes progress lines from worker threads.
class Log {
 public:
  Log(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
  void info(const std::string& line) {
    std::lock_guard lock(mutex_);
    out_ << line << '\n';
  }
  void error(const std::string& line) {
    std::lock_guard lock(mutex_);
    err_ << line << '\n';
  }

 private:
  std::mutex mutex_;
  std::ostream& out_;
  std::ostream& err_;
};

inline std::string seconds(double s) { return detail::fixed(s, 2); }

/// Image files named directly, plus those found (non-recursively) in named directories.
inline std::vector<DatasetItem> collect_inputs(const std::vector<fs::path>& inputs,
                                               const std::string& mask_suffix) {
  if (inputs.empty()) throw UsageError("no inputs given");
  std::vector<DatasetItem> items;
  std::set<std::string> stems;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      for (auto& item : scan_pairs(in, in, mask_suffix)) items.push_back(std::move(item));
    } else if (fs::is_regular_file(in, ec)) {
      items.push_back(DatasetItem{in.stem().string(), in, std::nullopt, std::nullopt});
    } else {
      throw UsageError("input does not exist: " + in.string());
    }
  }
  for (const auto& item : items) {
    if (!stems.insert(item.id).second) {
      throw Error(ErrorKind::DuplicateStem, "two inputs share the stem '" + item.id + "'");
    }
  }
  return items;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  write_file_atomic(path, Bytes(text.begin(), text.end()));
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::IOFailure, "cannot create " + dir.string());
}

/// report.txt, report.csv, records.csv and boxplot.csv; returns the table in `format`.
inline std::string write_reports(const fs::path& out_dir, std::vector<EvalRecord> records,
                                 bool per_fold, TableFormat format) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tie(a.method_id, a.item_id) < std::tie(b.method_id, b.item_id);
  });
  const auto report = aggregate(records, per_fold ? Grouping::PerFold : Grouping::Overall);
  const auto text = render_table(report, TableFormat::Text);
  const auto csv = render_table(report, TableFormat::Csv);
  ensure_dir(out_dir);
  write_text_file(out_dir / "report.txt", text);
  write_text_file(out_dir / "report.csv", csv);
  write_text_file(out_dir / "records.csv", export_records(records));
  write_text_file(out_dir / "boxplot.csv", export_boxplot_data(records));
  return format == TableFormat::Text ? text : csv;
}

// ---------------------------------------------------------------------------
// mask

struct MaskOptions {
  std::vector<fs::path> inputs;
  std::string method;
  std::vector<std::string> params;
  fs::path out;
  bool pad = true;
  bool keep_going = false;
  int threads = 1;
  std::string mask_suffix = kDefaultMaskSuffix;
};

/// Writes <stem>_mask.png per input; masks keep the input's own dimensions.
inline int cmd_mask(const MaskOptions& o, std::ostream& out, std::ostream& err) {
  if (o.threads < 1) throw UsageError("--threads must be >= 1");
  if (o.out.empty()) throw UsageError("--out is required");
  const auto spec = usage_spec(o.method, parse_params(o.params));
  const auto items = collect_inputs(o.inputs, o.mask_suffix);
  ensure_dir(o.out);

  Log log(out, err);
  std::atomic<bool> failed{false};
  const auto errors = parallel_for(items.size(), o.threads, [&](std::size_t i) {
    if (failed && !o.keep_going) return;
    try {
      const auto& item = items[i];
      const auto result = segment_thumbnail(read_rgb(item.image_path), spec, o.pad);
      write_mask(o.out / (item.id + o.mask_suffix + ".png"), result.mask);
      log.info(item.id + "\t" + seconds(result.elapsed_seconds) + " s");
    } catch (...) {
      failed = true;
      throw;
    }
  });
  int failures = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) {
      ++failures;
      log.error("error: " + items[i].id + ": " + *errors[i]);
    }
  }
  if (failures) log.error(std::to_string(failures) + " of " + std::to_string(items.size()) + " inputs failed");
  return failures ? kExitFailure : kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path pred_dir;
  fs::path gt_dir;
  fs::path out;
  std::string label;
  int folds = 0;
  std::uint64_t seed = 2024;
  std::string format = "text";
  bool keep_going = false;
  int threads = 1;
  std::string mask_suffix = kDefaultMaskSuffix;
};

/// Ids of the `<id><suffix>.png` files in a directory, sorted.
inline std::vector<std::string> mask_ids(const fs::path& dir, const std::string& suffix) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::IOFailure, "not a readable directory: " + dir.string());
  std::vector<std::string> ids;
  const auto tail = suffix + ".png";
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > tail.size() && detail::ends_with(name, tail)) {
      ids.push_back(name.substr(0, name.size() - tail.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

/**
 * Scores every ground-truth mask in `gt_dir` against the same-named mask in
 * `pred_dir`. Predictions come from any source (this tool, another program, a
 * network), so they are labelled with `label`.
 */
inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.folds == 1 || o.folds < 0) throw UsageError("--folds must be 0 (off) or >= 2");
  if (o.threads < 1) throw UsageError("--threads must be >= 1");
  const auto format = parse_format(o.format);
  const auto label = o.label.empty() ? fs::absolute(o.pred_dir).lexically_normal().filename().string() : o.label;

  const auto ids = mask_ids(o.gt_dir, o.mask_suffix);
  if (ids.empty()) throw Error(ErrorKind::EmptyInput, "no ground-truth masks in " + o.gt_dir.string());
  std::optional<FoldAssignment> folds;
  if (o.folds) folds = assign_folds(ids, o.folds, o.seed);

  Log log(out, err);
  std::vector<std::optional<EvalRecord>> records(ids.size());
  const auto errors = parallel_for(ids.size(), o.threads, [&](std::size_t i) {
    const auto& id = ids[i];
    const auto pred_path = o.pred_dir / (id + o.mask_suffix + ".png");
    if (!fs::exists(pred_path)) throw Error(ErrorKind::IOFailure, "no prediction " + pred_path.string());
    MaskDecodeReport pr, gr;
    const auto pred = read_mask(pred_path, &pr);
    const auto gt = read_mask(o.gt_dir / (id + o.mask_suffix + ".png"), &gr);
    if (pr.non_binary_pixels) log.error("warning: " + id + ": prediction has " + std::to_string(pr.non_binary_pixels) + " non-binary pixels");
    if (gr.non_binary_pixels) log.error("warning: " + id + ": ground truth has " + std::to_string(gr.non_binary_pixels) + " non-binary pixels");
    if (!pred.same_size(gt)) {
      throw Error(ErrorKind::DimensionMismatch, "prediction " + std::to_string(pred.width()) + "x" +
                                                    std::to_string(pred.height()) + " vs ground truth " +
                                                    std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
    }
    records[i] = make_record(id, label, pred, gt, 0.0, folds ? folds->fold_of.at(id) : -1);
  });

  std::vector<EvalRecord> kept;
  int failures = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i]) {
      ++failures;
      log.error("error: " + ids[i] + ": " + *errors[i]);
    } else {
      kept.push_back(std::move(*records[i]));
    }
  }
  if (failures && !o.keep_going) return kExitFailure;
  if (kept.empty()) throw Error(ErrorKind::EmptyInput, "no pairs could be scored");
  out << write_reports(o.out, std::move(kept), o.folds > 0, format);
  return failures ? kExitFailure : kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  fs::path images;
  /// Ground-truth masks; defaults to the image directory.
  fs::path masks;
  /// TSV manifest used instead of the directory scan when set.
  fs::path manifest;
  std::vector<std::string> methods;
  std::vector<std::string> params;
  fs::path out;
  /// Also write each method's masks under out/masks/<method>/.
  bool save_masks = false;
  int folds = 0;
  std::uint64_t seed = 2024;
  std::string format = "text";
  bool pad = true;
  bool keep_going = false;
  int threads = 1;
  std::string mask_suffix = kDefaultMaskSuffix;
};

/// Every method on every image; items with ground truth are scored, others only timed.
inline int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.folds == 1 || o.folds < 0) throw UsageError("--folds must be 0 (off) or >= 2");
  if (o.threads < 1) throw UsageError("--threads must be >= 1");
  const auto format = parse_format(o.format);
  const auto specs = usage_specs(o.methods, o.params);
  std::vector<DatasetItem> items;
  if (!o.manifest.empty()) {
    items = load_manifest(o.manifest);
  } else {
    if (o.images.empty()) throw UsageError("an image directory or --manifest is required");
    items = scan_pairs(o.images, o.masks.empty() ? o.images : o.masks, o.mask_suffix);
  }
  if (items.empty()) throw Error(ErrorKind::EmptyInput, "no images found");
  std::optional<FoldAssignment> folds;
  if (o.folds) folds = assign_folds(items, o.folds, o.seed);
  ensure_dir(o.out);
  if (o.save_masks) {
    for (const auto& s : specs) ensure_dir(o.out / "masks" / method_name(s.id));
  }

  Log log(out, err);
  std::vector<std::vector<EvalRecord>> per_item(items.size());
  const auto errors = parallel_for(items.size(), o.threads, [&](std::size_t i) {
    const auto& item = items[i];
    const auto loaded = load_item(item);
    if (loaded.non_binary_pixels) {
      log.error("warning: " + item.id + ": mask has " + std::to_string(loaded.non_binary_pixels) + " non-binary pixels");
    }
    const int fold = folds ? folds->fold_of.at(item.id) : -1;
    for (const auto& spec : specs) {
      const auto result = segment_thumbnail(loaded.image, spec, o.pad);
      const std::string name = method_name(spec.id);
      if (o.save_masks) write_mask(o.out / "masks" / name / (item.id + o.mask_suffix + ".png"), result.mask);
      EvalRecord rec;
      if (loaded.mask) {
        rec = make_record(item.id, name, result.mask, *loaded.mask, result.elapsed_seconds, fold);
      } else {
        rec = EvalRecord{item.id, name, {}, {}, result.elapsed_seconds, fold};
      }
      log.info(name + "\t" + item.id + "\t" + seconds(result.elapsed_seconds) + " s");
      per_item[i].push_back(std::move(rec));
    }
  });

  std::vector<EvalRecord> records;
  int failures = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) {
      ++failures;
      log.error("error: " + items[i].id + ": " + *errors[i]);
    } else {
      for (auto& r : per_item[i]) records.push_back(std::move(r));
    }
  }
  if (failures && !o.keep_going) return kExitFailure;
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no images could be processed");
  out << write_reports(o.out, std::move(records), o.folds > 0, format);
  return failures ? kExitFailure : kExitOk;
}

// ---------------------------------------------------------------------------
// folds

struct FoldsOptions {
  /// Image directory or TSV manifest.
  fs::path input;
  int folds = 5;
  std::uint64_t seed = 2024;
  std::string format = "text";
  fs::path out;
  std::string mask_suffix = kDefaultMaskSuffix;
};

/// Prints `id<TAB>fold` (or CSV) sorted by id, then the fold sizes on stderr.
inline int cmd_folds(const FoldsOptions& o, std::ostream& out, std::ostream& err) {
  if (o.folds < 2) throw UsageError("--folds must be >= 2");
  const auto format = parse_format(o.format);
  std::error_code ec;
  const auto items = fs::is_directory(o.input, ec) ? scan_pairs(o.input, o.input, o.mask_suffix)
                                                    : load_manifest(o.input);
  const auto folds = assign_folds(items, o.folds, o.seed);
  std::ostringstream os;
  if (format == TableFormat::Csv) os << "item_id,fold\n";
  for (const auto& [id, f] : folds.fold_of) {
    os << (format == TableFormat::Csv ? detail::csv_field(id) : id) << (format == TableFormat::Csv ? ',' : '\t') << f << '\n';
  }
  if (o.out.empty()) {
    out << os.str();
  } else {
    write_text_file(o.out, os.str());
  }
  err << "fold sizes:";
  for (auto s : folds.sizes()) err << ' ' << s;
  err << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

struct ServeOptions {
  fs::path corpus;
  fs::path ui;
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  std::string mask_suffix = kDefaultMaskSuffix;
};

/**
 * Serves until SIGINT or SIGTERM; in-flight saves finish before exit. Prints
 * the bound URL once listening. Must be called before other threads start so
 * that the signals stay blocked everywhere except the waiting thread.
 */
inline int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  if (o.port < 0 || o.port > 65535) throw UsageError("--port must be in [0, 65535]");
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGUSR1);  // internal wake-up
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServiceOptions so;
  so.corpus_dir = o.corpus;
  so.static_dir = o.ui;
  so.host = o.host;
  so.port = o.port;
  so.segment_workers = o.workers;
  so.mask_suffix = o.mask_suffix;
  ReviewService service(so);
  // Test hook: stretch every save so shutdown-during-save can be exercised end to end.
  if (const char* delay = std::getenv("TISSUESEG_SAVE_DELAY_MS")) {
    const int ms = std::atoi(delay);
    service.before_commit = [ms](const std::string&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    };
  }
  const int port = service.bind();

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig == SIGUSR1) return;
    err << "shutting down\n" << std::flush;
    service.stop();
  });
  out << "listening on http://" << o.host << ":" << port << "/" << std::endl;
  service.run();
  // Wakes the waiter if the server stopped some other way; blocked everywhere, so never fatal.
  ::kill(::getpid(), SIGUSR1);
  waiter.join();
  return kExitOk;
}

}  // namespace tissueseg::cli
