#include "gendetect/detectors.hpp"

#include "gendetect/errors.hpp"

namespace gendetect {

std::unique_ptr<Detector> make_retrieval_detector(std::shared_ptr<const RetrievalSnapshot> snapshot,
                                                  DetectionMethod method) {
  if (method == DetectionMethod::watermark) throw InvalidInput("not a retrieval method");
  if (method == DetectionMethod::embed && !snapshot->has_embeddings()) {
    throw InvalidInput("snapshot was built without embeddings");
  }
  std::string name(to_string(method));
  return std::make_unique<FunctionDetector>(
      std::move(name), [snapshot, method](std::string_view text) {
        DetectOptions opts;
        opts.method = method;
        return detect(*snapshot, text, opts).statistic;
      });
}

std::unique_ptr<Detector> make_watermark_detector(const WatermarkParams& params) {
  params.validate();
  auto vocab = std::make_shared<WordVocabulary>(static_cast<std::uint32_t>(params.vocab_size));
  return std::make_unique<FunctionDetector>("watermark", [vocab, params](std::string_view text) {
    return z_score(vocab->tokenize(text), params).z;
  });
}

Calibration calibrate_retrieval(const RetrievalSnapshot& snapshot, DetectionMethod method,
                                std::span<const std::string> human_texts, double target_fpr) {
  if (method == DetectionMethod::watermark) throw InvalidInput("not a retrieval method");
  if (human_texts.empty()) throw InvalidInput("calibration needs at least one human text");
  DetectOptions opts;
  opts.method = method;
  std::vector<double> scores;
  scores.reserve(human_texts.size());
  for (const auto& t : human_texts) scores.push_back(detect(snapshot, t, opts).statistic);
  return calibrate_threshold(scores, target_fpr);
}

}  // namespace gendetect
