#include "gendetect/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gendetect/errors.hpp"
#include "gendetect/rng.hpp"
#include "gendetect/text_normalize.hpp"

namespace gendetect {
namespace {

struct Word {
  std::size_t begin = 0;  // core, without surrounding punctuation
  std::size_t end = 0;
};

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<Word> scorable_words(std::string_view text) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      std::size_t b = i, e = j;
      while (b < e && is_punct(text[b])) ++b;
      while (e > b && is_punct(text[e - 1])) --e;
      if (e > b && !normalize_tokens(text.substr(b, e - b)).empty()) words.push_back({b, e});
    }
    i = j;
  }
  return words;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Calibration calibrate_threshold(std::span<const double> human_scores, double target_fpr) {
  if (human_scores.empty()) throw InvalidInput("calibration needs at least one human score");
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw InvalidInput("target FPR must be in (0, 1)");
  std::vector<double> sorted(human_scores.begin(), human_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - target_fpr) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());

  Calibration c;
  c.threshold = sorted[rank - 1];
  const auto above = static_cast<std::size_t>(
      sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), c.threshold));
  c.empirical_fpr = static_cast<double>(above) / n;
  c.degenerate = sorted.front() == sorted.back();
  return c;
}

double detection_accuracy(std::span<const double> machine_scores, double threshold) {
  if (machine_scores.empty()) throw InvalidInput("accuracy needs at least one machine score");
  const auto hits = std::count_if(machine_scores.begin(), machine_scores.end(),
                                  [threshold](double s) { return s > threshold; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(machine_scores.size());
}

RocCurve roc(const LabeledScores& scores, std::optional<double> clip_fpr) {
  if (scores.human_scores.empty() || scores.machine_scores.empty()) {
    throw InvalidInput("roc needs both score populations");
  }
  std::vector<double> human = scores.human_scores;
  std::vector<double> machine = scores.machine_scores;
  std::sort(human.begin(), human.end(), std::greater<>());
  std::sort(machine.begin(), machine.end(), std::greater<>());

  std::vector<double> thresholds;
  thresholds.reserve(human.size() + machine.size() + 1);
  std::merge(human.begin(), human.end(), machine.begin(), machine.end(),
             std::back_inserter(thresholds), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(-std::numeric_limits<double>::infinity());

  RocCurve curve;
  curve.points.reserve(thresholds.size());
  const double nh = static_cast<double>(human.size());
  const double nm = static_cast<double>(machine.size());
  std::size_t h = 0, m = 0;
  for (double t : thresholds) {
    while (h < human.size() && human[h] > t) ++h;
    while (m < machine.size() && machine[m] > t) ++m;
    curve.points.push_back({static_cast<double>(h) / nh, static_cast<double>(m) / nm, t});
  }
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  if (clip_fpr) {
    std::vector<RocPoint> kept;
    for (const auto& p : curve.points) {
      kept.push_back(p);
      if (p.fpr > *clip_fpr) break;
    }
    curve.points = std::move(kept);
  }
  return curve;
}

Lexicon Lexicon::bundled() {
  Lexicon lex;
  const std::pair<const char*, std::vector<std::string>> rows[] = {
      {"big", {"large", "huge", "sizable"}},
      {"small", {"little", "tiny", "minor"}},
      {"fast", {"quick", "rapid", "swift"}},
      {"slow", {"sluggish", "unhurried"}},
      {"good", {"fine", "decent", "solid"}},
      {"bad", {"poor", "awful", "weak"}},
      {"important", {"significant", "crucial", "vital"}},
      {"show", {"display", "reveal", "demonstrate"}},
      {"shows", {"displays", "reveals", "demonstrates"}},
      {"use", {"employ", "utilize", "apply"}},
      {"used", {"employed", "utilized", "applied"}},
      {"make", {"create", "produce", "build"}},
      {"made", {"created", "produced", "built"}},
      {"help", {"assist", "aid", "support"}},
      {"start", {"begin", "commence", "launch"}},
      {"started", {"began", "commenced", "launched"}},
      {"end", {"finish", "conclude", "close"}},
      {"many", {"numerous", "several", "countless"}},
      {"often", {"frequently", "commonly", "regularly"}},
      {"also", {"additionally", "furthermore", "moreover"}},
      {"however", {"nevertheless", "nonetheless", "still"}},
      {"because", {"since", "as"}},
      {"about", {"regarding", "concerning", "around"}},
      {"people", {"individuals", "persons", "folks"}},
      {"city", {"town", "municipality"}},
      {"country", {"nation", "state"}},
      {"house", {"home", "residence", "dwelling"}},
      {"car", {"vehicle", "automobile"}},
      {"said", {"stated", "remarked", "noted"}},
      {"says", {"states", "remarks", "notes"}},
      {"think", {"believe", "reckon", "suppose"}},
      {"found", {"discovered", "located", "identified"}},
      {"find", {"discover", "locate", "identify"}},
      {"get", {"obtain", "acquire", "receive"}},
      {"got", {"obtained", "acquired", "received"}},
      {"give", {"provide", "offer", "supply"}},
      {"gave", {"provided", "offered", "supplied"}},
      {"new", {"novel", "fresh", "recent"}},
      {"old", {"ancient", "aged", "former"}},
      {"first", {"initial", "earliest", "primary"}},
      {"last", {"final", "latest", "concluding"}},
      {"very", {"extremely", "highly", "really"}},
      {"large", {"big", "vast", "substantial"}},
      {"work", {"labor", "effort", "job"}},
      {"worked", {"labored", "operated", "served"}},
      {"life", {"existence", "lifetime"}},
      {"world", {"globe", "earth"}},
      {"water", {"liquid", "fluid"}},
      {"problem", {"issue", "difficulty", "trouble"}},
      {"change", {"alter", "modify", "adjust"}},
      {"changed", {"altered", "modified", "adjusted"}},
      {"known", {"recognized", "famous", "noted"}},
      {"different", {"distinct", "diverse", "various"}},
      {"early", {"initial", "premature"}},
      {"later", {"afterward", "subsequently"}},
      {"during", {"throughout", "amid"}},
      {"before", {"prior", "earlier"}},
      {"after", {"following", "subsequent"}},
      {"several", {"various", "multiple", "numerous"}},
      {"began", {"started", "commenced"}},
      {"became", {"turned", "grew"}},
      {"group", {"team", "collection", "set"}},
      {"part", {"portion", "section", "piece"}},
      {"place", {"location", "spot", "site"}},
      {"time", {"period", "moment", "era"}},
      {"year", {"annum", "twelvemonth"}},
      {"years", {"decades", "seasons"}},
  };
  for (const auto& [w, alts] : rows) lex.add(w, alts);
  return lex;
}

void Lexicon::add(std::string word, std::vector<std::string> alternatives) {
  const std::string key = lower(word);
  std::erase_if(alternatives, [&](const std::string& a) { return lower(a) == key || a.empty(); });
  if (!alternatives.empty()) table_[key] = std::move(alternatives);
}

const std::vector<std::string>* Lexicon::alternatives(std::string_view word) const {
  auto it = table_.find(lower(word));
  return it == table_.end() ? nullptr : &it->second;
}

std::string mutate_word(std::string_view word) {
  const std::string w(word);
  const std::string lw = lower(word);
  auto stem = [&](std::size_t cut) { return w.substr(0, w.size() - cut); };
  if (ends_with(lw, "ing") && lw.size() > 4) return stem(3) + "ed";
  if (ends_with(lw, "ed") && lw.size() > 3) return stem(2) + "ing";
  if (ends_with(lw, "tion")) return stem(4) + "ting";
  if (ends_with(lw, "ly") && lw.size() > 3) return stem(2) + "ness";
  if (ends_with(lw, "s") && lw.size() > 2) return w + "es";
  return w + "en";
}

std::string perturb(std::string_view text, const Perturbation& p, const Lexicon& lexicon) {
  if (!(p.lexical_rate >= 0.0 && p.lexical_rate <= 1.0)) {
    throw InvalidInput("lexical_rate must be in [0, 1]");
  }
  SplitMix64 rng(p.seed);
  const auto words = scorable_words(text);
  const auto budget = std::min(
      words.size(),
      static_cast<std::size_t>(std::ceil(p.lexical_rate * static_cast<double>(words.size()) - 1e-9)));

  // Partial Fisher-Yates picks `budget` distinct positions.
  std::vector<std::size_t> order(words.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < budget; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::string> replacement(words.size());
  std::vector<std::uint8_t> replaced(words.size(), 0);
  for (std::size_t i = 0; i < budget; ++i) {
    const auto& w = words[order[i]];
    const std::string_view core = text.substr(w.begin, w.end - w.begin);
    std::string alt;
    if (const auto* alts = lexicon.alternatives(core)) {
      alt = (*alts)[static_cast<std::size_t>(rng.below(alts->size()))];
      if (std::isupper(static_cast<unsigned char>(core.front())) && !alt.empty()) {
        alt[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(alt[0])));
      }
    } else {
      alt = mutate_word(core);
    }
    replacement[order[i]] = std::move(alt);
    replaced[order[i]] = 1;
  }

  std::string out;
  out.reserve(text.size() + budget * 2);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!replaced[i]) continue;
    out.append(text.substr(cursor, words[i].begin - cursor));
    out += replacement[i];
    cursor = words[i].end;
  }
  out.append(text.substr(cursor));

  if (p.shuffle_sentences) {
    auto sentences = sentence_texts(out);
    seeded_shuffle(std::span<std::string>(sentences), rng);
    out = join_sentences(sentences);
  }
  return out;
}

std::string truncate_words(std::string_view text, std::size_t n) {
  std::string out;
  std::size_t i = 0, taken = 0;
  while (i < text.size() && taken < n) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      if (!out.empty()) out.push_back(' ');
      out.append(text.substr(i, j - i));
      ++taken;
    }
    i = j;
  }
  return out;
}

std::string attack_label(const Perturbation& p) {
  if (p.lexical_rate == 0.0 && !p.shuffle_sentences) return "none";
  char buf[64];
  std::snprintf(buf, sizeof buf, "lex%.2f%s", p.lexical_rate, p.shuffle_sentences ? "+shuffle" : "");
  return buf;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkItems& items,
                                        std::span<const Detector* const> detectors,
                                        const Perturbation& attack, const Lexicon& lexicon,
                                        const BenchmarkOptions& options) {
  if (detectors.empty()) return {};
  if (items.human_calibration.empty() || items.machine.empty()) {
    throw InvalidInput("benchmark needs human calibration texts and machine texts");
  }
  const auto& human_test =
      items.human_test.empty() ? items.human_calibration : items.human_test;

  std::vector<std::string> attacked(items.machine.size());
  parallel_for(items.machine.size(), options.threads, [&](std::size_t i) {
    Perturbation p = attack;
    p.seed = mix64(attack.seed ^ static_cast<std::uint64_t>(i));
    attacked[i] = perturb(items.machine[i], p, lexicon);
  });

  std::vector<BenchmarkRow> rows;
  for (const Detector* det : detectors) {
    std::atomic<std::size_t> failures{0};
    auto score_all = [&](const std::vector<std::string>& texts) {
      std::vector<double> out(texts.size());
      parallel_for(texts.size(), options.threads, [&](std::size_t i) {
        try {
          out[i] = det->score(texts[i]);
        } catch (const std::exception&) {
          out[i] = -std::numeric_limits<double>::infinity();
          ++failures;
        }
      });
      return out;
    };
    const auto cal = score_all(items.human_calibration);
    const auto test = items.human_test.empty() ? cal : score_all(human_test);
    const auto original = score_all(items.machine);
    const auto perturbed = score_all(attacked);

    const std::size_t scored = cal.size() + (items.human_test.empty() ? 0 : test.size()) +
                               original.size() + perturbed.size();
    if (static_cast<double>(failures) > options.max_failure_rate * static_cast<double>(scored)) {
      throw std::runtime_error("detector " + det->name() + " failed on " +
                               std::to_string(failures.load()) + " of " + std::to_string(scored) +
                               " items");
    }

    const Calibration c = calibrate_threshold(cal, options.target_fpr);
    BenchmarkRow row;
    row.detector = det->name();
    row.attack = attack_label(attack);
    row.fpr_target = options.target_fpr;
    row.threshold = c.threshold;
    row.degenerate_calibration = c.degenerate;
    row.accuracy_original = detection_accuracy(original, c.threshold);
    row.accuracy_attacked = detection_accuracy(perturbed, c.threshold);
    row.human_fpr = detection_accuracy(test, c.threshold) / 100.0;
    row.roc_attacked = roc({test, perturbed});
    row.auc = row.roc_attacked.auc;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(),
            [](const BenchmarkRow& a, const BenchmarkRow& b) { return a.detector < b.detector; });
  return rows;
}

void write_results_csv(std::ostream& out, std::span<const BenchmarkRow> rows) {
  out << kResultsCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.detector << ',' << r.attack << ',' << format_number(r.fpr_target) << ','
        << format_number(r.threshold) << ',' << format_number(r.accuracy_original) << ','
        << format_number(r.accuracy_attacked) << ',' << format_number(r.auc) << '\n';
  }
}

void write_roc_csv(std::ostream& out, std::span<const BenchmarkRow> rows,
                   std::optional<double> clip_fpr) {
  out << kRocCsvHeader << '\n';
  for (const auto& r : rows) {
    for (const auto& p : r.roc_attacked.points) {
      out << r.detector << ',' << r.attack << ',' << format_number(p.fpr) << ','
          << format_number(p.tpr) << ',' << format_number(p.threshold) << '\n';
      if (clip_fpr && p.fpr > *clip_fpr) break;
    }
  }
}

std::string format_results_table(std::span<const BenchmarkRow> rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-22s %8s %12s %10s %10s %7s\n", "detector", "attack",
                "fpr", "threshold", "original", "attacked", "auc");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %-22s %7.1f%% %12.4f %10.1f %10.1f %7.3f\n",
                  r.detector.c_str(), r.attack.c_str(), 100.0 * r.fpr_target, r.threshold,
                  r.accuracy_original, r.accuracy_attacked, r.auc);
    out << line;
  }
  return out.str();
}

}  // namespace gendetect
