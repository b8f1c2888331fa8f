#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gendetect {

struct LabeledScores {
  std::vector<double> human_scores;
  std::vector<double> machine_scores;
};

struct Calibration {
  double threshold = 0.0;
  /// Fraction of the calibration scores strictly above the threshold.
  double empirical_fpr = 0.0;
  /// Every calibration score was identical.
  bool degenerate = false;
};

/// The ceil((1 - target_fpr) n)-th smallest human score. At most a
/// target_fpr fraction of the calibration scores exceed it. Throws
/// InvalidInput for an empty population or target outside (0, 1).
Calibration calibrate_threshold(std::span<const double> human_scores, double target_fpr);

/// Percentage of scores strictly above the threshold. Throws InvalidInput on
/// an empty population.
double detection_accuracy(std::span<const double> machine_scores, double threshold);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;

  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Sweeps "score > t" over t in {distinct scores, descending} followed by
/// t = -inf, so the curve runs from (0, .) to (1, 1). AUC is the trapezoid
/// area of the full curve. With clip_fpr, points past the clip are dropped
/// except the first one.
RocCurve roc(const LabeledScores& scores, std::optional<double> clip_fpr = std::nullopt);

struct Perturbation {
  double lexical_rate = 0.0;
  bool shuffle_sentences = false;
  std::uint64_t seed = 0;
};

/// Word -> replacement candidates, keyed on lowercase words.
class Lexicon {
 public:
  Lexicon() = default;
  /// A small table of common English substitutions.
  static Lexicon bundled();

  void add(std::string word, std::vector<std::string> alternatives);
  const std::vector<std::string>* alternatives(std::string_view word) const;
  std::size_t size() const noexcept { return table_.size(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> table_;
};

/// Deterministic suffix swap (ing<->ed, ly->ness, tion->ting, s->es, else
/// +en); always differs from the input after normalization.
std::string mutate_word(std::string_view word);

/// Replaces ceil(lexical_rate * T) of the T scorable words at seeded
/// positions, then optionally shuffles sentence order. Punctuation around a
/// replaced word is kept. Throws InvalidInput for a rate outside [0, 1].
std::string perturb(std::string_view text, const Perturbation& p, const Lexicon& lexicon);

/// First n whitespace-separated words of text.
std::string truncate_words(std::string_view text, std::size_t n);

/// A scoring function for the harness. score() returns the statistic the
/// threshold is compared against and may throw on unscoreable input.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string name() const = 0;
  virtual double score(std::string_view text) const = 0;
};

/// Adapts a callable into a Detector.
class FunctionDetector final : public Detector {
 public:
  FunctionDetector(std::string name, std::function<double(std::string_view)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  double score(std::string_view text) const override { return fn_(text); }

 private:
  std::string name_;
  std::function<double(std::string_view)> fn_;
};

struct BenchmarkItems {
  std::vector<std::string> human_calibration;
  /// Held-out human texts for the reported FPR. Empty means report on the
  /// calibration set itself.
  std::vector<std::string> human_test;
  std::vector<std::string> machine;
};

struct BenchmarkRow {
  std::string detector;
  std::string attack;
  double fpr_target = 0.0;
  double threshold = 0.0;
  double accuracy_original = 0.0;
  double accuracy_attacked = 0.0;
  /// AUC of attacked machine scores against human test scores.
  double auc = 0.0;
  double human_fpr = 0.0;
  bool degenerate_calibration = false;
  RocCurve roc_attacked;
};

struct BenchmarkOptions {
  double target_fpr = 0.01;
  unsigned threads = 0;  ///< 0: hardware concurrency
  /// Abort when a detector throws on more than this fraction of items.
  double max_failure_rate = 0.01;
};

std::string attack_label(const Perturbation& p);

/// Score every population under every detector, calibrate on the human
/// calibration scores, and report accuracy before and after the attack. Rows
/// are sorted by detector name. Items a detector fails on score -inf; more
/// than max_failure_rate failures throws std::runtime_error naming the
/// detector.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkItems& items,
                                        std::span<const Detector* const> detectors,
                                        const Perturbation& attack, const Lexicon& lexicon,
                                        const BenchmarkOptions& options = {});

/// Applies fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

inline constexpr std::string_view kResultsCsvHeader =
    "detector,attack,fpr_target,threshold,accuracy_original,accuracy_attacked,auc";
inline constexpr std::string_view kRocCsvHeader = "detector,attack,fpr,tpr,threshold";

void write_results_csv(std::ostream& out, std::span<const BenchmarkRow> rows);
void write_roc_csv(std::ostream& out, std::span<const BenchmarkRow> rows,
                   std::optional<double> clip_fpr = std::nullopt);
std::string format_results_table(std::span<const BenchmarkRow> rows);

}  // namespace gendetect
