#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gendetect/corpus_store.hpp"
#include "gendetect/detection.hpp"
#include "gendetect/retrieval_index.hpp"
#include "gendetect/watermark.hpp"

namespace gendetect {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Empty: keep the corpus in memory.
  std::filesystem::path corpus_path;
  /// Optional prebuilt index to serve until the first reindex.
  std::filesystem::path index_path;
  SyncPolicy sync = SyncPolicy::fsync;
  DetectionMethod default_method = DetectionMethod::bm25;
  /// Fixed thresholds. Retrieval values lie in [0, 1]; the watermark value is
  /// a z score and defaults to 4. A retrieval method without an entry is
  /// calibrated at every reindex against `calibration_texts`.
  std::map<DetectionMethod, double> thresholds = {{DetectionMethod::watermark, 4.0}};
  /// Human reference texts; empty selects bundled_human_texts().
  std::vector<std::string> calibration_texts;
  double calibration_fpr = 0.01;
  std::optional<WatermarkParams> watermark;
  bool binary_only = true;
  /// Detect queries per client per window; 0 disables the limit.
  unsigned rate_limit = 60;
  std::chrono::seconds rate_window{60};
  std::optional<TimeWindow> default_window;
  SnapshotConfig snapshot;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

/// Reads a JSON config document; absent keys keep their defaults. Throws
/// InvalidInput on unknown methods, wrong types or out-of-range values.
ServiceConfig parse_service_config(std::string_view json_text);

/// Seconds on an arbitrary monotone timeline; tests inject their own.
using Clock = std::function<double()>;
Clock system_clock();

/// Fixed-window counter per client id. Windows start at multiples of the
/// window length on the clock's timeline.
class RateLimiter {
 public:
  struct Decision {
    bool allowed = true;
    /// Whole seconds until the current window closes; set when refused.
    std::int64_t retry_after = 0;
  };

  RateLimiter(unsigned limit, std::chrono::seconds window, Clock clock);
  Decision acquire(std::string_view client);

 private:
  struct Slot {
    std::int64_t window = 0;
    unsigned used = 0;
  };

  unsigned limit_;
  double window_;
  Clock clock_;
  std::mutex mu_;
  std::unordered_map<std::string, Slot> slots_;
  std::int64_t last_sweep_ = 0;
};

struct ServiceRequest {
  std::string method;  ///< "GET", "POST", ...
  std::string path;
  std::string body;
  std::string client_id;
};

struct ServiceResponse {
  int status = 200;
  std::string body;  ///< JSON document
  std::optional<std::int64_t> retry_after;
};

/// Transport-independent core of the detection API.
///
/// Queries run against an immutable snapshot held by shared pointer; reindex
/// builds a replacement off to the side and swaps it in, so a query sees
/// exactly one snapshot. Ingests become visible to queries only after the
/// next reindex.
class DetectService {
 public:
  explicit DetectService(ServiceConfig config, Clock clock = system_clock());
  ~DetectService();

  DetectService(const DetectService&) = delete;
  DetectService& operator=(const DetectService&) = delete;

  ServiceResponse handle(const ServiceRequest& request);

  // Typed entry points behind the routes.
  RecordId ingest(const NewRecord& record);
  /// Returns the new snapshot version. On failure the old snapshot stays.
  std::uint64_t reindex();
  DetectionResult query(std::string_view text, std::optional<DetectionMethod> method,
                        std::optional<TimeWindow> window) const;

  std::uint64_t snapshot_version() const;
  std::size_t snapshot_size() const;
  /// Threshold `method` would use on the current snapshot, if any.
  std::optional<double> threshold_for(DetectionMethod method) const;
  std::size_t corpus_size() const { return store_.size(); }
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  struct Snapshot {
    RetrievalSnapshot index;
    std::uint64_t version = 0;
    std::map<DetectionMethod, double> calibrated;
  };

  std::shared_ptr<Snapshot> make_snapshot(RetrievalSnapshot index);

  std::shared_ptr<const Snapshot> current() const;
  ServiceResponse handle_ingest(const ServiceRequest& request);
  ServiceResponse handle_detect(const ServiceRequest& request);
  ServiceResponse handle_reindex();
  ServiceResponse handle_health() const;

  ServiceConfig config_;
  Clock clock_;
  CorpusStore store_;
  RateLimiter limiter_;
  Embedder embedder_;

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::mutex reindex_mu_;
  std::atomic<std::uint64_t> next_version_{1};
};

/// HTTP front end over DetectService. The client id is the X-Api-Key header
/// when present, otherwise the peer address.
class HttpServer {
 public:
  explicit HttpServer(DetectService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and blocks until stop(). Returns false when binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it, or -1.
  int bind_any_port(const std::string& host);
  /// Serves on a socket bound by bind_any_port; blocks until stop().
  bool listen_after_bind();
  void stop();
  bool is_running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gendetect
