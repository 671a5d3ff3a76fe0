#pragma once

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tissueseg/dataset.hpp"
#include "tissueseg/evaluation.hpp"
#include "tissueseg/methods.hpp"
#include "tissueseg/pipeline.hpp"
#include "tissueseg/raster_io.hpp"

namespace tissueseg {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Base64 (PNG payloads travel inside JSON)

inline std::string base64_encode(const Bytes& data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

/// Accepts plain base64 or a data URL; whitespace is ignored.
inline Bytes base64_decode(std::string_view text) {
  if (text.rfind("data:", 0) == 0) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorKind::Validation, "malformed data URL");
    text.remove_prefix(comma + 1);
  }
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  }
  if (clean.size() % 4 != 0) throw Error(ErrorKind::Validation, "base64 length is not a multiple of 4");
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw Error(ErrorKind::Validation, "invalid base64");
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=') ++padding;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

// ---------------------------------------------------------------------------
// Corpus state

struct ReviewItemState {
  int version = 0;
  bool refined = false;
  std::optional<MethodSpec> last_method;
};

struct ReviewItemInfo {
  std::string id;
  bool has_mask = false;
  ReviewItemState state;
};

inline json spec_to_json(const MethodSpec& spec) {
  json params = json::object();
  for (const auto& [k, v] : describe_params(spec)) params[k] = v;
  return json{{"method", method_name(spec.id)}, {"params", params}};
}

/// Builds a spec from {method, params}; parameter values may be strings or numbers.
inline MethodSpec spec_from_json(const json& body) {
  if (!body.is_object()) throw ParamError("body", "request body must be a JSON object");
  if (!body.contains("method") || !body["method"].is_string()) {
    throw ParamError("method", "'method' must be a string");
  }
  std::unordered_map<std::string, std::string> params;
  if (body.contains("params") && !body["params"].is_null()) {
    if (!body["params"].is_object()) throw ParamError("params", "'params' must be an object");
    for (const auto& [key, value] : body["params"].items()) {
      if (value.is_string()) {
        params[key] = value.get<std::string>();
      } else if (value.is_number()) {
        params[key] = value.dump();
      } else {
        throw ParamError(key, "parameter '" + key + "' must be a string or number");
      }
    }
  }
  return make_method_spec(body["method"].get<std::string>(), params);
}

/**
 * The on-disk corpus: images and their F_mask.png files in one directory, plus
 * a state file holding per-item versions. Every listing rescans the directory.
 */
class ReviewCorpus {
 public:
  static constexpr const char* kStateFile = ".review_state.json";

  explicit ReviewCorpus(fs::path dir, std::string mask_suffix = kDefaultMaskSuffix)
      : dir_(std::move(dir)), suffix_(std::move(mask_suffix)) {
    std::error_code ec;
    if (!fs::is_directory(dir_, ec)) {
      throw Error(ErrorKind::IOFailure, "corpus is not a directory: " + dir_.string());
    }
    load_state();
  }

  const fs::path& dir() const { return dir_; }

  std::vector<ReviewItemInfo> list() const {
    std::vector<ReviewItemInfo> out;
    std::lock_guard lock(state_mutex_);
    for (const auto& item : scan_pairs(dir_, dir_, suffix_)) {
      out.push_back(info_locked(item));
    }
    return out;
  }

  DatasetItem find(const std::string& id) const {
    for (auto& item : scan_pairs(dir_, dir_, suffix_)) {
      if (item.id == id) return item;
    }
    throw Error(ErrorKind::NotFound, "unknown item '" + id + "'");
  }

  ReviewItemState state(const std::string& id) const {
    std::lock_guard lock(state_mutex_);
    auto it = states_.find(id);
    return it == states_.end() ? ReviewItemState{} : it->second;
  }

  fs::path mask_path(const std::string& id) const { return dir_ / (id + suffix_ + ".png"); }

  void note_method(const std::string& id, const MethodSpec& spec) {
    std::lock_guard lock(state_mutex_);
    states_[id].last_method = spec;
  }

  /// Per-item writer lock; saves to one item are serialized.
  std::mutex& item_mutex(const std::string& id) {
    std::lock_guard lock(locks_mutex_);
    auto& m = item_locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  /**
   * Optimistic save: requires `base_version` to equal the current version.
   * Callers hold item_mutex(id). Returns the new version.
   */
  int save_mask(const std::string& id, const BinaryMask& mask, int base_version,
                const std::function<void()>& before_commit = {}) {
    const auto item = find(id);
    const int current = state(id).version;
    if (base_version != current) {
      throw Error(ErrorKind::VersionConflict, "item '" + id + "' is at version " +
                                                  std::to_string(current) + ", not " +
                                                  std::to_string(base_version));
    }
    const auto image = read_rgb(item.image_path);
    if (!mask.same_size(image)) {
      throw Error(ErrorKind::DimensionMismatch,
                  "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                      ", image is " + std::to_string(image.width()) + "x" +
                      std::to_string(image.height()));
    }
    if (before_commit) before_commit();
    write_mask(mask_path(id), mask);
    std::lock_guard lock(state_mutex_);
    auto& st = states_[id];
    st.version = current + 1;
    st.refined = true;
    write_state_locked();
    return st.version;
  }

 private:
  ReviewItemInfo info_locked(const DatasetItem& item) const {
    auto it = states_.find(item.id);
    return ReviewItemInfo{item.id, item.mask_path.has_value(),
                          it == states_.end() ? ReviewItemState{} : it->second};
  }

  void load_state() {
    const auto path = dir_ / kStateFile;
    std::error_code ec;
    if (!fs::exists(path, ec)) return;
    const auto bytes = read_file(path);
    try {
      const auto doc = json::parse(bytes.begin(), bytes.end());
      for (const auto& [id, entry] : doc.at("items").items()) {
        ReviewItemState st;
        st.version = entry.at("version").get<int>();
        st.refined = entry.at("refined").get<bool>();
        if (entry.contains("lastMethod")) st.last_method = spec_from_json(entry["lastMethod"]);
        states_[id] = st;
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
  }

  void write_state_locked() const {
    json items = json::object();
    for (const auto& [id, st] : states_) {
      json entry{{"version", st.version}, {"refined", st.refined}};
      if (st.last_method) entry["lastMethod"] = spec_to_json(*st.last_method);
      items[id] = entry;
    }
    const auto text = json{{"items", items}}.dump(2) + "\n";
    write_file_atomic(dir_ / kStateFile, Bytes(text.begin(), text.end()));
  }

  fs::path dir_;
  std::string suffix_;
  mutable std::mutex state_mutex_;
  std::map<std::string, ReviewItemState> states_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> item_locks_;
};

// ---------------------------------------------------------------------------
// HTTP service

struct ServiceOptions {
  fs::path corpus_dir;
  /// Built UI bundle served at /; a placeholder page when empty or missing.
  fs::path static_dir;
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Concurrent segmentation jobs.
  int segment_workers = 2;
  /// How long a segmentation request waits for a worker before 503.
  std::chrono::milliseconds segment_wait{30000};
  std::string mask_suffix = kDefaultMaskSuffix;
};

class ReviewService {
 public:
  static constexpr int kMaxWorkers = 64;

  explicit ReviewService(ServiceOptions options)
      : options_(std::move(options)),
        corpus_(options_.corpus_dir, options_.mask_suffix),
        workers_(std::clamp(options_.segment_workers, 1, kMaxWorkers)) {
    if (options_.segment_workers < 1) throw Error(ErrorKind::InvalidParam, "segment_workers must be >= 1");
    server_.set_payload_max_length(std::size_t{256} << 20);
    // SO_REUSEADDR only: the library default SO_REUSEPORT lets a second server share the port.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  ~ReviewService() { stop(); }

  /// Test hook: runs inside PUT after validation, before the mask is written.
  std::function<void(const std::string& id)> before_commit;

  /// Binds the listening socket; returns the bound port.
  int bind() {
    if (options_.port == 0) {
      port_ = server_.bind_to_any_port(options_.host);
      if (port_ < 0) throw Error(ErrorKind::PortInUse, "cannot bind " + options_.host);
    } else {
      if (!server_.bind_to_port(options_.host, options_.port)) {
        throw Error(ErrorKind::PortInUse, options_.host + ":" + std::to_string(options_.port));
      }
      port_ = options_.port;
    }
    return port_;
  }

  int port() const { return port_; }

  /// Serves until stop(); bind() must have succeeded.
  void run() { server_.listen_after_bind(); }

  void wait_until_ready() const { server_.wait_until_ready(); }

  /// Refuses new saves, waits for in-flight saves to finish, then stops the server.
  void stop() {
    {
      std::unique_lock lock(saves_mutex_);
      stopping_ = true;
      saves_done_.wait(lock, [&] { return saves_in_flight_ == 0; });
    }
    server_.stop();
  }

  ReviewCorpus& corpus() { return corpus_; }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message,
                         const std::string& field = {}) {
    json body{{"error", message}};
    if (!field.empty()) body["field"] = field;
    send_json(res, status, body);
  }

  static int status_for(ErrorKind kind) {
    switch (kind) {
      case ErrorKind::NotFound: return 404;
      case ErrorKind::VersionConflict: return 409;
      case ErrorKind::Validation:
      case ErrorKind::InvalidParam:
      case ErrorKind::DimensionMismatch:
      case ErrorKind::ParseError: return 400;
      default: return 500;
    }
  }

  template <typename Handler>
  static httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const ParamError& e) {
        send_error(res, 400, e.what(), e.field());
      } catch (const Error& e) {
        send_error(res, status_for(e.kind()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  static std::string etag(int version) { return "\"" + std::to_string(version) + "\""; }

  static bool not_modified(const httplib::Request& req, const std::string& tag) {
    if (!req.has_header("If-None-Match")) return false;
    const auto value = req.get_header_value("If-None-Match");
    if (value == "*") return true;
    std::size_t start = 0;
    while (start <= value.size()) {
      auto end = value.find(',', start);
      if (end == std::string::npos) end = value.size();
      auto token = value.substr(start, end - start);
      token.erase(0, token.find_first_not_of(" \t"));
      token.erase(token.find_last_not_of(" \t") + 1);
      if (token.rfind("W/", 0) == 0) token.erase(0, 2);
      if (token == tag) return true;
      start = end + 1;
    }
    return false;
  }

  static void send_png(const httplib::Request& req, httplib::Response& res, const Bytes& png,
                       const std::string& tag) {
    res.set_header("ETag", tag);
    res.set_header("Cache-Control", "no-cache");
    if (not_modified(req, tag)) {
      res.status = 304;
      return;
    }
    res.status = 200;
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  static json item_json(const ReviewItemInfo& info) {
    json out{{"itemId", info.id},
             {"hasMask", info.has_mask},
             {"refined", info.state.refined},
             {"version", info.state.version}};
    out["lastMethod"] = info.state.last_method ? spec_to_json(*info.state.last_method) : json();
    return out;
  }

  static json metrics_json(const ConfusionCounts& c) {
    const auto m = metrics(c);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
    return json{{"jaccard", opt(m.jaccard)},
                {"dice", opt(m.dice)},
                {"sensitivity", opt(m.sensitivity)},
                {"specificity", opt(m.specificity)},
                {"tp", c.tp},
                {"tn", c.tn},
                {"fp", c.fp},
                {"fn", c.fn}};
  }

  static json parse_body(const httplib::Request& req) {
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      throw ParamError("body", std::string("invalid JSON: ") + e.what());
    }
  }

  void routes() {
    server_.Get("/api/items", guarded([this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& info : corpus_.list()) out.push_back(item_json(info));
      send_json(res, 200, out);
    }));

    server_.Get(R"(/api/items/([^/]+)/image\.png)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto item = corpus_.find(req.matches[1]);
                  auto bytes = read_file(item.image_path);
                  if (!detail::is_png(bytes)) bytes = encode_png(decode_rgb(bytes));
                  send_png(req, res, bytes, etag(corpus_.state(item.id).version));
                }));

    server_.Get(R"(/api/items/([^/]+)/mask\.png)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto item = corpus_.find(req.matches[1]);
                  if (!item.mask_path) throw Error(ErrorKind::NotFound, "item '" + item.id + "' has no mask");
                  // Saves replace the file by rename, so this read sees one whole version.
                  // Re-encoding guarantees {0,255} even for anti-aliased masks on disk.
                  const auto tag = etag(corpus_.state(item.id).version);
                  send_png(req, res, encode_mask_png(read_mask(*item.mask_path)), tag);
                }));

    server_.Post(R"(/api/items/([^/]+)/segment)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const auto item = corpus_.find(req.matches[1]);
                   const auto spec = spec_from_json(parse_body(req));
                   if (!workers_.try_acquire_for(options_.segment_wait)) {
                     send_error(res, 503, "segmentation workers busy");
                     return;
                   }
                   std::optional<MaskResult> result;
                   try {
                     result = segment_thumbnail(read_rgb(item.image_path), spec);
                   } catch (...) {
                     workers_.release();
                     throw;
                   }
                   workers_.release();
                   corpus_.note_method(item.id, spec);
                   json out{{"maskPng", base64_encode(encode_mask_png(result->mask))},
                            {"elapsedSeconds", result->elapsed_seconds},
                            {"width", result->mask.width()},
                            {"height", result->mask.height()},
                            {"metrics", nullptr}};
                   if (corpus_.state(item.id).refined && item.mask_path) {
                     const auto stored = read_mask(*item.mask_path);
                     if (stored.same_size(result->mask)) out["metrics"] = metrics_json(confusion(result->mask, stored));
                   }
                   send_json(res, 200, out);
                 }));

    server_.Put(R"(/api/items/([^/]+)/mask)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  const auto body = parse_body(req);
                  if (!body.is_object()) throw ParamError("body", "request body must be a JSON object");
                  if (!body.contains("maskPng") || !body["maskPng"].is_string()) {
                    throw ParamError("maskPng", "'maskPng' must be a base64 string");
                  }
                  if (!body.contains("baseVersion") || !body["baseVersion"].is_number_integer()) {
                    throw ParamError("baseVersion", "'baseVersion' must be an integer");
                  }
                  corpus_.find(id);
                  GrayImage gray;
                  try {
                    gray = decode_gray_png(base64_decode(body["maskPng"].get<std::string>()));
                  } catch (const Error& e) {
                    throw ParamError("maskPng", e.what());
                  }
                  for (auto v : gray.data()) {
                    if (v != 0 && v != 255) throw ParamError("maskPng", "mask pixels must be 0 or 255");
                  }
                  BinaryMask mask(gray.width(), gray.height());
                  for (std::size_t i = 0; i < gray.data().size(); ++i) mask.data()[i] = gray.data()[i] ? 1 : 0;

                  SaveGuard guard(*this);
                  if (!guard.admitted) {
                    send_error(res, 503, "service is shutting down");
                    return;
                  }
                  std::lock_guard lock(corpus_.item_mutex(id));
                  const int version = corpus_.save_mask(id, mask, body["baseVersion"].get<int>(), [&] {
                    if (before_commit) before_commit(id);
                  });
                  send_json(res, 200, json{{"version", version}});
                }));

    std::error_code ec;
    if (!options_.static_dir.empty() && fs::is_directory(options_.static_dir, ec)) {
      server_.set_mount_point("/", options_.static_dir.string());
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>tissueseg review</title>"
            "<p>The review UI bundle is not installed. The API is available under /api/items.</p>",
            "text/html");
      });
    }
  }

  /// Counts a save as in flight unless shutdown has begun.
  struct SaveGuard {
    explicit SaveGuard(ReviewService& s) : service(s) {
      std::lock_guard lock(service.saves_mutex_);
      admitted = !service.stopping_;
      if (admitted) ++service.saves_in_flight_;
    }
    ~SaveGuard() {
      if (!admitted) return;
      std::lock_guard lock(service.saves_mutex_);
      --service.saves_in_flight_;
      service.saves_done_.notify_all();
    }
    ReviewService& service;
    bool admitted = false;
  };

  ServiceOptions options_;
  ReviewCorpus corpus_;
  httplib::Server server_;
  std::counting_semaphore<kMaxWorkers> workers_;
  int port_ = -1;

  std::mutex saves_mutex_;
  std::condition_variable saves_done_;
  int saves_in_flight_ = 0;
  bool stopping_ = false;
};

}  // namespace tissueseg
