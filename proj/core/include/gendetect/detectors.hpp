#pragma once

#include <memory>

#include "gendetect/eval_harness.hpp"
#include "gendetect/retrieval_index.hpp"
#include "gendetect/watermark.hpp"

namespace gendetect {

/// Harness adapters. Retrieval detectors score the detection statistic
/// against the whole snapshot; the watermark detector scores z over the
/// text's word ids.
std::unique_ptr<Detector> make_retrieval_detector(std::shared_ptr<const RetrievalSnapshot> snapshot,
                                                  DetectionMethod method);
std::unique_ptr<Detector> make_watermark_detector(const WatermarkParams& params);

/// Threshold at `target_fpr` over the detection statistic of `human_texts`
/// queried against `snapshot`.
Calibration calibrate_retrieval(const RetrievalSnapshot& snapshot, DetectionMethod method,
                                std::span<const std::string> human_texts, double target_fpr);

}  // namespace gendetect
