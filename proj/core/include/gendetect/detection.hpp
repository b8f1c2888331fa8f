#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace gendetect {

using RecordId = std::uint64_t;

enum class DetectionMethod { bm25, embed, watermark };

std::string_view to_string(DetectionMethod m) noexcept;
/// Throws InvalidInput on an unknown name.
DetectionMethod parse_method(std::string_view name);

/// Outcome of one detector on one candidate.
///
/// `statistic` is the quantity the threshold is compared against: the
/// calibrated [0,1] score for retrieval methods and the z value for the
/// watermark. `score` is always in [0,1]; for the watermark it is Phi(z).
/// verdict == (statistic > threshold_used).
struct DetectionResult {
  DetectionMethod method = DetectionMethod::bm25;
  double score = 0.0;
  double statistic = 0.0;
  std::optional<RecordId> matched_id;
  bool verdict = false;
  double threshold_used = 0.0;
};

/// Inclusive UTC-seconds window.
struct TimeWindow {
  std::int64_t from = 0;
  std::int64_t to = 0;

  bool contains(std::int64_t ts) const noexcept { return from <= ts && ts <= to; }
};

}  // namespace gendetect
