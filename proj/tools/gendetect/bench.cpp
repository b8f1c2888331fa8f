// Run-spec driven benchmark. See docs/formats.md for the run-spec keys.

#include <fstream>
#include <sstream>

#include "common.hpp"
#include "gendetect/corpus_store.hpp"
#include "gendetect/detectors.hpp"
#include "gendetect/errors.hpp"
#include "gendetect/eval_harness.hpp"
#include "gendetect/reference_texts.hpp"
#include "gendetect/retrieval_index.hpp"
#include "gendetect/rng.hpp"
#include "gendetect/synthetic.hpp"

namespace gendetect::cli {
namespace {

using nlohmann::json;

class TruncatingDetector final : public Detector {
 public:
  TruncatingDetector(const Detector& inner, std::size_t words) : inner_(inner), words_(words) {}
  std::string name() const override { return inner_.name(); }
  double score(std::string_view text) const override {
    return inner_.score(truncate_words(text, words_));
  }

 private:
  const Detector& inner_;
  std::size_t words_;
};

std::vector<std::string> read_texts(const std::string& path) { return read_text_lines(path); }

WatermarkParams watermark_from(const json& j) {
  WatermarkParams p;
  if (j.is_object()) {
    p.gamma = j.value("gamma", p.gamma);
    p.delta = j.value("delta", p.delta);
    p.hash_key = j.value("hash_key", p.hash_key);
    p.vocab_size = j.value("vocab_size", p.vocab_size);
  }
  p.validate();
  return p;
}

ScenarioSpec scenario_from(const json& j, std::uint64_t seed, const WatermarkParams& wm) {
  ScenarioSpec s;
  s.seed = seed;
  s.source = parse_scenario_source(j.value("source", std::string("zipf")));
  s.machine = j.value("machine", s.machine);
  s.human_calibration = j.value("human_calibration", s.human_calibration);
  s.human_test = j.value("human_test", s.human_test);
  s.distractors = j.value("distractors", s.distractors);
  s.text.vocab_size = j.value("vocab_size", s.text.vocab_size);
  s.text.zipf_exponent = j.value("zipf_exponent", s.text.zipf_exponent);
  s.text.topic_rate = j.value("topic_rate", s.text.topic_rate);
  s.text.topic_size = j.value("topic_size", s.text.topic_size);
  s.text.min_words = j.value("min_words", s.text.min_words);
  s.text.max_words = j.value("max_words", s.text.max_words);
  s.watermark = wm;
  s.length = j.value("length", s.length);
  s.top_p = j.value("top_p", s.top_p);
  s.classes = j.value("classes", s.classes);
  s.spread = j.value("spread", s.spread);
  return s;
}

}  // namespace

ordered_json bench_run(const std::string& spec_path, const std::string& out_dir,
                       unsigned threads_override, bool json_mode) {
  json spec;
  try {
    spec = json::parse(read_file(spec_path));
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("run-spec: ") + e.what());
  }
  const auto seed = spec.value("seed", std::uint64_t{1});
  report_seed(seed, json_mode);

  BenchmarkOptions options;
  options.target_fpr = spec.value("target_fpr", options.target_fpr);
  options.threads = threads_override ? threads_override : spec.value("threads", 0U);
  const WatermarkParams wm = watermark_from(spec.value("watermark", json::object()));

  BenchmarkItems items;
  std::vector<GenerationRecord> corpus;
  std::optional<SyntheticText> synthetic_text;
  if (spec.contains("synthetic")) {
    const ScenarioSpec s = scenario_from(spec.at("synthetic"), seed, wm);
    Scenario sc = build_scenario(s, options.threads);
    items = std::move(sc.items);
    corpus = std::move(sc.corpus);
    if (s.source == ScenarioSource::zipf) synthetic_text.emplace(s.text);
  } else if (spec.contains("corpus")) {
    const json& c = spec.at("corpus");
    auto store = CorpusStore::open(c.at("log").get<std::string>(), SyncPolicy::flush);
    corpus = store.scan();
    const auto limit = c.value("machine_limit", corpus.size());
    const auto mode = parse_index_text_mode(c.value("index_text", std::string("generation_only")));
    for (std::size_t i = 0; i < corpus.size() && items.machine.size() < limit; ++i) {
      items.machine.push_back(index_text(corpus[i], mode));
    }
    items.human_calibration = read_texts(c.at("human_calibration").get<std::string>());
    if (c.contains("human_test")) items.human_test = read_texts(c.at("human_test").get<std::string>());
  } else {
    throw InvalidInput("run-spec needs a synthetic or corpus section");
  }
  if (spec.value("same_human_sets", false)) items.human_test.clear();

  Lexicon lexicon;
  const std::string lex = spec.value("lexicon", std::string("bundled"));
  if (lex == "bundled") {
    lexicon = Lexicon::bundled();
  } else if (lex == "synthetic") {
    if (!synthetic_text) throw InvalidInput("lexicon \"synthetic\" needs a zipf synthetic section");
    lexicon = synthetic_text->lexicon();
  } else {
    const auto j = json::parse(read_file(lex));
    for (const auto& [word, alts] : j.items()) lexicon.add(word, alts.get<std::vector<std::string>>());
  }

  const auto names = spec.value("detectors", std::vector<std::string>{"bm25"});
  bool need_embed = false, need_snapshot = false;
  for (const auto& n : names) {
    const auto m = parse_method(n);
    need_snapshot |= m != DetectionMethod::watermark;
    need_embed |= m == DetectionMethod::embed;
  }
  std::shared_ptr<const RetrievalSnapshot> snapshot;
  if (need_snapshot) {
    SnapshotConfig cfg;
    cfg.build_embed = need_embed;
    cfg.embed_dim = spec.value("embed_dim", cfg.embed_dim);
    snapshot = std::make_shared<const RetrievalSnapshot>(RetrievalSnapshot::build(corpus, cfg));
  }
  std::vector<std::unique_ptr<Detector>> owned;
  for (const auto& n : names) {
    const auto m = parse_method(n);
    owned.push_back(m == DetectionMethod::watermark ? make_watermark_detector(wm)
                                                    : make_retrieval_detector(snapshot, m));
  }

  std::vector<Perturbation> attacks;
  const json grid = spec.value("attacks", json::object());
  const auto rates = grid.value("lexical_rates", std::vector<double>{0.0});
  const auto shuffles = grid.value("shuffle", std::vector<bool>{false});
  for (double r : rates) {
    for (bool sh : shuffles) attacks.push_back({r, sh, mix64(seed ^ 0xA77AC4ULL)});
  }
  auto query_words = spec.value("query_words", std::vector<std::size_t>{0});
  if (query_words.empty()) query_words.push_back(0);
  std::optional<double> clip;
  if (spec.contains("roc_clip_fpr")) clip = spec.at("roc_clip_fpr").get<double>();

  std::vector<BenchmarkRow> rows;
  std::vector<std::size_t> row_words;
  for (std::size_t words : query_words) {
    std::vector<std::unique_ptr<Detector>> wrapped;
    std::vector<const Detector*> dets;
    for (const auto& d : owned) {
      if (words == 0) {
        dets.push_back(d.get());
      } else {
        wrapped.push_back(std::make_unique<TruncatingDetector>(*d, words));
        dets.push_back(wrapped.back().get());
      }
    }
    for (const auto& attack : attacks) {
      auto part = run_benchmark(items, dets, attack, lexicon, options);
      for (auto& r : part) {
        if (words) r.attack += "@" + std::to_string(words) + "w";
        rows.push_back(std::move(r));
        row_words.push_back(words);
      }
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream results(std::filesystem::path(out_dir) / "results.csv");
    write_results_csv(results, rows);
    std::ofstream roc_out(std::filesystem::path(out_dir) / "roc.csv");
    write_roc_csv(roc_out, rows, clip);
    if (!results || !roc_out) throw StorageError("cannot write results under " + out_dir);
  }
  if (!json_mode) std::cout << format_results_table(rows);

  ordered_json doc = {{"seed", seed}, {"target_fpr", options.target_fpr}};
  ordered_json jrows = ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    jrows.push_back({{"detector", r.detector},
                     {"attack", r.attack},
                     {"query_words", row_words[i]},
                     {"threshold", r.threshold},
                     {"accuracy_original", r.accuracy_original},
                     {"accuracy_attacked", r.accuracy_attacked},
                     {"auc", r.auc},
                     {"human_fpr", r.human_fpr},
                     {"degenerate_calibration", r.degenerate_calibration}});
  }
  doc["rows"] = std::move(jrows);
  return doc;
}

}  // namespace gendetect::cli
