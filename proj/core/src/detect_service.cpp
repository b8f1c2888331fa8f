#include "gendetect/detect_service.hpp"

#include <cmath>
#include <limits>

#include "gendetect/detectors.hpp"
#include "gendetect/errors.hpp"
#include "gendetect/reference_texts.hpp"
#include "gendetect/index_io.hpp"
#include "json.hpp"

namespace gendetect {
namespace {

using nlohmann::json;

ServiceResponse error_response(int status, std::string_view code, std::string_view message) {
  return {status, json{{"error_code", code}, {"message", message}}.dump(), std::nullopt};
}

ServiceResponse ok(const json& body) { return {200, body.dump(), std::nullopt}; }

bool is_retrieval(DetectionMethod m) { return m != DetectionMethod::watermark; }

template <typename T>
std::optional<T> optional_field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

WatermarkParams parse_watermark(const json& j) {
  WatermarkParams p;
  p.gamma = j.value("gamma", p.gamma);
  p.delta = j.value("delta", p.delta);
  p.hash_key = j.value("hash_key", p.hash_key);
  p.vocab_size = j.value("vocab_size", p.vocab_size);
  return p;
}

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw InvalidInput("port out of range");
  if (rate_window.count() <= 0) throw InvalidInput("rate window must be positive");
  for (const auto& [method, t] : thresholds) {
    if (!std::isfinite(t)) throw InvalidInput("threshold must be finite");
    if (is_retrieval(method) && (t < 0.0 || t > 1.0)) {
      throw InvalidInput("retrieval thresholds must lie in [0, 1]");
    }
    if (!is_retrieval(method) && t < 0.0) throw InvalidInput("watermark threshold must be >= 0");
  }
  if (default_window && default_window->from > default_window->to) {
    throw InvalidInput("default window starts after it ends");
  }
  if (watermark) watermark->validate();
  if (!(calibration_fpr > 0.0 && calibration_fpr < 1.0)) {
    throw InvalidInput("calibration_fpr must be in (0, 1)");
  }
}

ServiceConfig parse_service_config(std::string_view json_text) {
  ServiceConfig c;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw InvalidInput("service config must be a JSON object");
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (auto v = optional_field<std::string>(j, "corpus_path")) c.corpus_path = *v;
    if (auto v = optional_field<std::string>(j, "index_path")) c.index_path = *v;
    if (auto v = optional_field<std::string>(j, "sync")) {
      if (*v == "fsync") c.sync = SyncPolicy::fsync;
      else if (*v == "flush") c.sync = SyncPolicy::flush;
      else throw InvalidInput("sync must be fsync or flush");
    }
    if (auto v = optional_field<std::string>(j, "default_method")) c.default_method = parse_method(*v);
    if (auto it = j.find("thresholds"); it != j.end()) {
      for (const auto& [name, value] : it->items()) c.thresholds[parse_method(name)] = value.get<double>();
    }
    if (auto it = j.find("watermark"); it != j.end() && !it->is_null()) {
      c.watermark = parse_watermark(*it);
    }
    if (auto v = optional_field<std::string>(j, "calibration_texts")) {
      c.calibration_texts = read_text_lines(*v);
    }
    c.calibration_fpr = j.value("calibration_fpr", c.calibration_fpr);
    c.binary_only = j.value("binary_only", c.binary_only);
    c.rate_limit = j.value("rate_limit", c.rate_limit);
    c.rate_window = std::chrono::seconds(j.value("rate_window_seconds", c.rate_window.count()));
    if (auto it = j.find("time_window"); it != j.end() && !it->is_null()) {
      c.default_window = TimeWindow{it->at("from").get<std::int64_t>(), it->at("to").get<std::int64_t>()};
    }
    if (auto v = optional_field<std::string>(j, "index_text")) {
      c.snapshot.text_mode = parse_index_text_mode(*v);
    }
    c.snapshot.embed_dim = j.value("embed_dim", c.snapshot.embed_dim);
    c.snapshot.build_embed = j.value("build_embed", c.snapshot.build_embed);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad service config: ") + e.what());
  }
  c.validate();
  return c;
}

Clock system_clock() {
  return [] {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

RateLimiter::RateLimiter(unsigned limit, std::chrono::seconds window, Clock clock)
    : limit_(limit), window_(static_cast<double>(window.count())), clock_(std::move(clock)) {
  if (window.count() <= 0) throw InvalidInput("rate window must be positive");
}

RateLimiter::Decision RateLimiter::acquire(std::string_view client) {
  if (limit_ == 0) return {};
  const double now = clock_();
  const auto window = static_cast<std::int64_t>(std::floor(now / window_));
  std::lock_guard lock(mu_);
  if (window != last_sweep_) {
    std::erase_if(slots_, [window](const auto& kv) { return kv.second.window != window; });
    last_sweep_ = window;
  }
  Slot& slot = slots_[std::string(client)];
  if (slot.window != window) slot = {window, 0};
  if (slot.used < limit_) {
    ++slot.used;
    return {};
  }
  const double close = static_cast<double>(window + 1) * window_;
  return {false, std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(close - now)))};
}

DetectService::DetectService(ServiceConfig config, Clock clock)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      store_(config_.corpus_path.empty() ? CorpusStore::in_memory()
                                         : CorpusStore::open(config_.corpus_path, config_.sync)),
      limiter_(config_.rate_limit, config_.rate_window, clock_),
      embedder_(config_.snapshot.embed_dim, config_.snapshot.embed_key) {
  config_.validate();
  if (!config_.index_path.empty()) {
    snapshot_ = make_snapshot(load_snapshot(config_.index_path, &embedder_));
  } else {
    reindex();
  }
}

DetectService::~DetectService() = default;

std::shared_ptr<const DetectService::Snapshot> DetectService::current() const {
  std::lock_guard lock(snapshot_mu_);
  return snapshot_;
}

std::uint64_t DetectService::snapshot_version() const { return current()->version; }
std::size_t DetectService::snapshot_size() const { return current()->index.size(); }

RecordId DetectService::ingest(const NewRecord& record) { return store_.append(record); }

std::uint64_t DetectService::reindex() {
  std::lock_guard serial(reindex_mu_);
  auto snap = make_snapshot(RetrievalSnapshot::build(store_.scan(), config_.snapshot, embedder_));
  const auto version = snap->version;
  {
    std::lock_guard lock(snapshot_mu_);
    snapshot_ = std::move(snap);
  }
  return version;
}

std::shared_ptr<DetectService::Snapshot> DetectService::make_snapshot(RetrievalSnapshot index) {
  auto snap = std::make_shared<Snapshot>();
  snap->index = std::move(index);
  const auto human = config_.calibration_texts.empty()
                         ? bundled_human_texts()
                         : std::span<const std::string>(config_.calibration_texts);
  for (auto m : {DetectionMethod::bm25, DetectionMethod::embed}) {
    if (config_.thresholds.contains(m)) continue;
    if (m == DetectionMethod::embed && !snap->index.has_embeddings()) continue;
    snap->calibrated[m] = calibrate_retrieval(snap->index, m, human, config_.calibration_fpr).threshold;
  }
  snap->version = next_version_++;
  return snap;
}

std::optional<double> DetectService::threshold_for(DetectionMethod method) const {
  if (auto t = config_.thresholds.find(method); t != config_.thresholds.end()) return t->second;
  const auto snap = current();
  if (auto t = snap->calibrated.find(method); t != snap->calibrated.end()) return t->second;
  return std::nullopt;
}

DetectionResult DetectService::query(std::string_view text, std::optional<DetectionMethod> method,
                                     std::optional<TimeWindow> window) const {
  DetectOptions opts;
  opts.method = method.value_or(config_.default_method);
  opts.window = window ? window : config_.default_window;
  if (opts.method == DetectionMethod::watermark) {
    if (!config_.watermark) throw InvalidInput("watermark detection is not configured");
    opts.watermark = config_.watermark;
  }
  const auto snap = current();
  if (auto t = config_.thresholds.find(opts.method); t != config_.thresholds.end()) {
    opts.threshold = t->second;
  } else if (auto c = snap->calibrated.find(opts.method); c != snap->calibrated.end()) {
    opts.threshold = c->second;
  } else {
    throw InvalidInput("no threshold available for method " + std::string(to_string(opts.method)));
  }
  return detect(snap->index, text, opts);
}

ServiceResponse DetectService::handle(const ServiceRequest& r) {
  try {
    if (r.path == "/generations") {
      return r.method == "POST" ? handle_ingest(r)
                                : error_response(405, "method_not_allowed", "use POST");
    }
    if (r.path == "/detect") {
      return r.method == "POST" ? handle_detect(r)
                                : error_response(405, "method_not_allowed", "use POST");
    }
    if (r.path == "/admin/reindex") {
      return r.method == "POST" ? handle_reindex()
                                : error_response(405, "method_not_allowed", "use POST");
    }
    if (r.path == "/healthz") {
      return r.method == "GET" ? handle_health()
                               : error_response(405, "method_not_allowed", "use GET");
    }
    return error_response(404, "not_found", "no route for " + r.path);
  } catch (const InvalidInput& e) {
    return error_response(400, "invalid_parameter", e.what());
  } catch (const StorageError& e) {
    return error_response(500, "storage_error", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

ServiceResponse DetectService::handle_ingest(const ServiceRequest& r) {
  json body = json::parse(r.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    return error_response(400, "malformed_body", "body must be a JSON object");
  }
  NewRecord rec;
  try {
    rec.generation = body.at("generation").get<std::string>();
    rec.model_id = body.value("model_id", std::string());
    rec.prompt = body.value("prompt", std::string());
    if (auto ts = optional_field<std::int64_t>(body, "timestamp")) {
      rec.timestamp = *ts;
    } else {
      rec.timestamp = static_cast<std::int64_t>(std::floor(clock_()));
    }
  } catch (const json::exception& e) {
    return error_response(400, "malformed_body", e.what());
  }
  if (rec.generation.empty()) {
    return error_response(400, "invalid_parameter", "generation must be non-empty");
  }
  const RecordId id = ingest(rec);
  return ok({{"id", id}});
}

ServiceResponse DetectService::handle_detect(const ServiceRequest& r) {
  const auto decision = limiter_.acquire(r.client_id);
  if (!decision.allowed) {
    auto resp = error_response(429, "rate_limited", "query limit reached for this client");
    resp.retry_after = decision.retry_after;
    return resp;
  }
  json body = json::parse(r.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    return error_response(400, "malformed_body", "body must be a JSON object");
  }
  std::string text;
  std::optional<DetectionMethod> method;
  std::optional<TimeWindow> window;
  try {
    text = body.at("text").get<std::string>();
    if (auto m = optional_field<std::string>(body, "method")) {
      try {
        method = parse_method(*m);
      } catch (const InvalidInput& e) {
        return error_response(400, "unknown_method", e.what());
      }
    }
    auto from = optional_field<std::int64_t>(body, "time_from");
    auto to = optional_field<std::int64_t>(body, "time_to");
    if (from || to) {
      window = TimeWindow{from.value_or(std::numeric_limits<std::int64_t>::min()),
                          to.value_or(std::numeric_limits<std::int64_t>::max())};
    }
  } catch (const json::exception& e) {
    return error_response(400, "malformed_body", e.what());
  }
  if (text.empty()) return error_response(400, "invalid_parameter", "text must be non-empty");

  const DetectionResult res = query(text, method, window);
  if (config_.binary_only) return ok({{"verdict", res.verdict}});
  json out = {{"verdict", res.verdict},
              {"method", to_string(res.method)},
              {"score", res.score},
              {"statistic", res.statistic},
              {"threshold", res.threshold_used}};
  if (res.matched_id) out["matched_id"] = *res.matched_id;
  return ok(out);
}

ServiceResponse DetectService::handle_reindex() {
  const auto version = reindex();
  return ok({{"version", version}, {"records", snapshot_size()}});
}

ServiceResponse DetectService::handle_health() const {
  const auto snap = current();
  return ok({{"status", "ok"},
             {"snapshot_version", snap->version},
             {"snapshot_records", snap->index.size()},
             {"corpus_records", store_.size()}});
}

}  // namespace gendetect
