#include "fixture_runner.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "gendetect/corpus_store.hpp"
#include "gendetect/detect_service.hpp"
#include "gendetect/detectors.hpp"
#include "gendetect/diversity_codes.hpp"
#include "gendetect/errors.hpp"
#include "gendetect/eval_harness.hpp"
#include "gendetect/paragraph_aligner.hpp"
#include "gendetect/reference_texts.hpp"
#include "gendetect/retrieval_index.hpp"
#include "gendetect/rng.hpp"
#include "gendetect/text_normalize.hpp"
#include "gendetect/watermark.hpp"

namespace gendetect::fixtures {
namespace {

namespace fs = std::filesystem;

std::uint64_t parse_hex(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  return std::stoull(j.get<std::string>(), nullptr, 16);
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TokenSeq tokens_of(const json& j) {
  TokenSeq t;
  t.tokens = j.get<std::vector<std::string>>();
  return t;
}

WatermarkParams wm_params(const json& in) {
  WatermarkParams p;
  p.gamma = in.value("gamma", p.gamma);
  p.delta = in.value("delta", p.delta);
  p.vocab_size = in.value("vocab_size", p.vocab_size);
  if (in.contains("hash_key")) p.hash_key = parse_hex(in["hash_key"]);
  return p;
}

json steps_json(const AlignmentPath& path) {
  json steps = json::array();
  for (const auto& s : path.steps) {
    steps.push_back({s.src ? json(*s.src) : json(nullptr), s.tgt ? json(*s.tgt) : json(nullptr)});
  }
  return steps;
}

AlignmentPath path_of(const json& steps) {
  AlignmentPath path;
  for (const auto& s : steps) {
    AlignmentStep step;
    if (!s[0].is_null()) step.src = s[0].get<std::size_t>();
    if (!s[1].is_null()) step.tgt = s[1].get<std::size_t>();
    path.steps.push_back(step);
  }
  return path;
}

std::vector<GenerationRecord> records_of(const json& docs) {
  std::vector<GenerationRecord> out;
  RecordId id = 1;
  for (const auto& d : docs) {
    GenerationRecord r;
    r.id = id++;
    if (d.is_string()) {
      r.generation = d.get<std::string>();
      r.timestamp = static_cast<std::int64_t>(r.id);
    } else {
      r.generation = d.at("gen").get<std::string>();
      r.timestamp = d.value("ts", static_cast<std::int64_t>(r.id));
      r.model_id = d.value("model", std::string());
      r.prompt = d.value("prompt", std::string());
    }
    out.push_back(std::move(r));
  }
  return out;
}

RetrievalSnapshot snapshot_of(const json& docs, std::size_t dim = Embedder::kDefaultDim) {
  SnapshotConfig cfg;
  cfg.embed_dim = dim;
  return RetrievalSnapshot::build(records_of(docs), cfg);
}

json result_json(const DetectionResult& r) {
  json out = {{"score", r.score},
              {"statistic", r.statistic},
              {"verdict", r.verdict},
              {"threshold", r.threshold_used},
              {"method", to_string(r.method)}};
  if (r.matched_id) out["matched_id"] = *r.matched_id;
  return out;
}

std::size_t word_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

std::vector<double> scores_of(const json& in) {
  if (in.contains("range")) {
    const auto lo = in["range"][0].get<int>();
    const auto hi = in["range"][1].get<int>();
    std::vector<double> out;
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  if (in.contains("above")) {
    const double t = in.at("threshold").get<double>();
    std::vector<double> out(in["above"].get<std::size_t>(), t + 1.0);
    out.resize(out.size() + in["below"].get<std::size_t>(), t - 1.0);
    return out;
  }
  return in.at("scores").get<std::vector<double>>();
}

// Sequence whose every token is green for its predecessor.
std::vector<TokenId> all_green_run(std::size_t length, const WatermarkParams& params) {
  std::vector<TokenId> out{0};
  while (out.size() < length) {
    const GreenList g = green_set(out.back(), params);
    TokenId next = 0;
    while (!g.contains(next)) ++next;
    out.push_back(next);
  }
  return out;
}

json run_shell(const std::string& script, const fs::path& cwd, const fs::path& cli) {
  const std::string cmd = "cd '" + cwd.string() + "' && GENDETECT='" + cli.string() +
                          "' /bin/sh -c '" + [&] {
                            std::string quoted;
                            for (char c : script) {
                              if (c == '\'') quoted += "'\\''";
                              else quoted.push_back(c);
                            }
                            return quoted;
                          }() + "' 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {{"exit_code", WIFEXITED(status) ? WEXITSTATUS(status) : -1}, {"stdout", out}};
}

Registry make_registry() {
  Registry r;

  // Hashing and shuffles.
  r["mix64"] = [](const json& in, const Context&) {
    return json{{"value", hex(mix64(parse_hex(in.at("x"))))}};
  };
  r["fnv1a64"] = [](const json& in, const Context&) {
    return json{{"value", hex(fnv1a64(in.at("text").get<std::string>()))}};
  };
  r["splitmix_next"] = [](const json& in, const Context&) {
    SplitMix64 rng(in.at("seed").get<std::uint64_t>());
    json values = json::array();
    for (int i = 0; i < in.at("count").get<int>(); ++i) values.push_back(hex(rng.next()));
    return json{{"values", values}};
  };
  r["splitmix_below"] = [](const json& in, const Context&) {
    SplitMix64 rng(in.at("seed").get<std::uint64_t>());
    json values = json::array();
    for (int i = 0; i < in.at("count").get<int>(); ++i) {
      values.push_back(rng.below(in.at("bound").get<std::uint64_t>()));
    }
    return json{{"values", values}};
  };
  r["seeded_shuffle"] = [](const json& in, const Context&) {
    std::vector<int> items(in.at("n").get<std::size_t>());
    for (std::size_t i = 0; i < items.size(); ++i) items[i] = static_cast<int>(i);
    SplitMix64 rng(in.at("seed").get<std::uint64_t>());
    seeded_shuffle(std::span<int>(items), rng);
    return json{{"order", items}};
  };

  // text-normalize
  r["normalize_tokens"] = [](const json& in, const Context&) {
    return json{{"tokens", normalize_tokens(in.at("text").get<std::string>()).tokens}};
  };
  r["split_sentences"] = [](const json& in, const Context&) {
    const auto text = in.at("text").get<std::string>();
    return json{{"sentences", sentence_texts(text)},
                {"count", split_sentences(text).sentences.size()}};
  };
  r["unigram_f1"] = [](const json& in, const Context&) {
    return json{{"f1", unigram_f1(tokens_of(in.at("a")), tokens_of(in.at("b")))}};
  };

  // diversity-codes
  r["lexical_diversity"] = [](const json& in, const Context&) {
    return json{{"value", lexical_diversity(tokens_of(in.at("src")), tokens_of(in.at("tgt")))}};
  };
  r["order_diversity"] = [](const json& in, const Context&) {
    return json{{"value", order_diversity(tokens_of(in.at("src")), tokens_of(in.at("tgt")))}};
  };
  r["to_scale"] = [](const json& in, const Context&) {
    return json{{"value", to_scale(in.at("raw").get<double>())}};
  };
  r["control_codes"] = [](const json& in, const Context&) {
    const auto c = control_codes(tokens_of(in.at("src")), tokens_of(in.at("tgt")));
    return json{{"lexical", c.lexical}, {"order", c.order}};
  };
  r["render_codes"] = [](const json& in, const Context&) {
    const auto conv = in.value("convention", std::string("diversity")) == "similarity"
                          ? CodeConvention::similarity
                          : CodeConvention::diversity;
    return json{{"text", render_codes({in.at("lexical").get<int>(), in.at("order").get<int>()}, conv)}};
  };

  // paragraph-aligner
  r["align"] = [](const json& in, const Context&) {
    const auto& m = in.at("matrix");
    const std::size_t rows = m.size();
    const std::size_t cols = rows ? m[0].size() : 0;
    std::vector<double> values;
    for (const auto& row : m) {
      for (const auto& v : row) values.push_back(v.get<double>());
    }
    const auto path = align(SimilarityMatrix(rows, cols, values),
                            in.value("gap", kDefaultGapPenalty));
    return json{{"steps", steps_json(path)}, {"score", path.score}};
  };
  r["merge_alignment"] = [](const json& in, const Context&) {
    json blocks = json::array();
    for (const auto& b : merge_alignment(path_of(in.at("steps")))) {
      blocks.push_back({b.src_begin, b.src_end, b.tgt_begin, b.tgt_end});
    }
    return json{{"blocks", blocks}};
  };
  r["make_example"] = [](const json& in, const Context&) {
    const auto p = in.at("p").get<std::vector<std::string>>();
    const auto q = in.at("q").get<std::vector<std::string>>();
    const auto ex = make_example(p, q, path_of(in.at("steps")),
                                 {in["span"][0].get<std::size_t>(), in["span"][1].get<std::size_t>()},
                                 in.at("seed").get<std::uint64_t>());
    return json{{"codes", {ex.codes.lexical, ex.codes.order}},
                {"left", ex.left_context},
                {"right", ex.right_context},
                {"target", ex.target},
                {"input", ex.input_sentences}};
  };

  // watermark
  r["green_set"] = [](const json& in, const Context&) {
    const auto params = wm_params(in);
    const auto g = green_set(in.at("prev").get<TokenId>(), params);
    std::vector<TokenId> members;
    for (TokenId t = 0; t < params.vocab_size; ++t) {
      if (g.contains(t)) members.push_back(t);
    }
    std::vector<TokenId> first(members.begin(),
                               members.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(10, members.size())));
    return json{{"count", g.size()}, {"green", members}, {"first_ten", first}};
  };
  r["green_overlap"] = [](const json& in, const Context&) {
    const auto params = wm_params(in);
    const auto pairs = in.at("pairs").get<std::size_t>();
    double agree = 0.0, both = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
      const auto a = green_set(static_cast<TokenId>((2 * k) % params.vocab_size), params);
      const auto b = green_set(static_cast<TokenId>((2 * k + 1) % params.vocab_size), params);
      for (TokenId t = 0; t < params.vocab_size; ++t) {
        agree += a.contains(t) == b.contains(t);
        both += a.contains(t) && b.contains(t);
      }
    }
    return json{{"mean_agreement", agree / static_cast<double>(pairs)},
                {"mean_intersection", both / static_cast<double>(pairs)}};
  };
  r["vocab_words"] = [](const json& in, const Context&) {
    const WordVocabulary vocab(in.at("vocab_size").get<std::uint32_t>());
    json words = json::array();
    for (const auto& id : in.at("ids")) words.push_back(vocab.word(id.get<TokenId>()));
    return json{{"words", words}};
  };
  r["z_statistic"] = [](const json& in, const Context&) {
    return json{{"z", z_statistic(in.at("scored").get<std::size_t>(), in.at("green").get<std::size_t>(),
                                  in.at("gamma").get<double>())}};
  };
  r["normal_tail"] = [](const json& in, const Context&) {
    return json{{"p", 1.0 - normal_cdf(in.at("z").get<double>())},
                {"p_erfc", 0.5 * std::erfc(in.at("z").get<double>() / std::sqrt(2.0))}};
  };
  const Handler z_tokens = [](const json& in, const Context&) {
    const auto rep = z_score(in.at("tokens").get<std::vector<TokenId>>(), wm_params(in));
    return json{{"scored_tokens", rep.scored_tokens},
                {"green_count", rep.green_count},
                {"z", rep.z},
                {"p_value", rep.p_value}};
  };
  r["z_score"] = z_tokens;
  r["z_score_tokens"] = z_tokens;
  r["detect_watermark"] = [](const json& in, const Context&) {
    const auto params = wm_params(in);
    const auto tokens = all_green_run(in.at("all_green_length").get<std::size_t>(), params);
    const auto res = detect_watermark(tokens, params, in.at("threshold").get<double>());
    return json{{"z", res.statistic}, {"verdict", res.verdict}, {"score", res.score}};
  };
  r["sample_watermarked"] = [](const json& in, const Context&) {
    const auto params = wm_params(in);
    const UniformLogits source(params.vocab_size);
    const auto length = in.at("length").get<std::size_t>();
    const auto seed = in.at("seed").get<std::uint64_t>();
    const auto sequences = in.value("sequences", std::size_t{1});
    bool identical = true;
    std::size_t green = 0, total = 0;
    for (std::size_t s = 0; s < sequences; ++s) {
      const std::vector<TokenId> prompt{static_cast<TokenId>(s % params.vocab_size)};
      const auto wm = sample_watermarked(source, params, prompt, length, 1.0, seed + s);
      const auto plain = sample_plain(source, prompt, length, 1.0, seed + s);
      identical = identical && wm == plain;
      TokenId prev = prompt.back();
      for (TokenId t : wm) {
        green += green_set(prev, params).contains(t);
        prev = t;
      }
      total += wm.size();
    }
    return json{{"identical_to_plain", identical},
                {"green_fraction", static_cast<double>(green) / static_cast<double>(total)}};
  };

  // retrieval-index
  r["embed_signs"] = [](const json& in, const Context&) {
    const Embedder e(in.at("dim").get<std::size_t>());
    json signs = json::array();
    for (double v : e.token_vector(in.at("token").get<std::string>())) signs.push_back(v > 0 ? 1 : -1);
    return json{{"signs", signs}};
  };
  r["embed_cosine"] = [](const json& in, const Context&) {
    const Embedder e(in.value("dim", Embedder::kDefaultDim));
    return json{{"cosine", cosine(e.embed(in.at("a").get<std::string>()),
                                  e.embed(in.at("b").get<std::string>()))}};
  };
  r["embed_text"] = [](const json& in, const Context&) {
    const Embedder e(in.value("dim", Embedder::kDefaultDim));
    const auto v = e.embed(in.at("text").get<std::string>());
    double norm = 0.0;
    for (double x : v) norm += x * x;
    return json{{"unembeddable", is_unembeddable(v)}, {"norm", std::sqrt(norm)}};
  };
  r["bm25_topk"] = [](const json& in, const Context&) {
    std::vector<IndexedDoc> docs;
    RecordId id = 1;
    for (const auto& d : in.at("docs")) docs.push_back({id++, normalize_tokens(d.get<std::string>())});
    const auto index = Bm25Index::build(docs);
    json ranking = json::array(), ids = json::array();
    for (const auto& hit :
         index.topk(normalize_tokens(in.at("query").get<std::string>()), in.at("k").get<std::size_t>())) {
      ranking.push_back({{"id", hit.id}, {"score", hit.score}});
      ids.push_back(hit.id);
    }
    return json{{"ranking", ranking}, {"ids", ids}};
  };
  r["detect_bm25"] = [](const json& in, const Context&) {
    const auto snap = snapshot_of(in.at("docs"));
    return result_json(detect_bm25(snap.bm25(), in.at("candidate").get<std::string>(),
                                   in.at("threshold").get<double>()));
  };
  r["detect_embed"] = [](const json& in, const Context&) {
    const auto snap = snapshot_of(in.at("docs"), in.value("dim", Embedder::kDefaultDim));
    return result_json(detect_embed(snap.embed(), snap.embedder(), in.at("candidate").get<std::string>(),
                                    in.at("threshold").get<double>()));
  };
  r["detect"] = [](const json& in, const Context&) {
    const auto snap = snapshot_of(in.at("records"));
    DetectOptions opts;
    opts.method = parse_method(in.at("method").get<std::string>());
    opts.threshold = in.at("threshold").get<double>();
    if (in.contains("window")) {
      opts.window = TimeWindow{in["window"][0].get<std::int64_t>(), in["window"][1].get<std::int64_t>()};
    }
    return result_json(detect(snap, in.at("candidate").get<std::string>(), opts));
  };

  // corpus-store
  r["append"] = [](const json& in, const Context& ctx) {
    const auto path = ctx.scratch / "corpus.log";
    json ids = json::array();
    auto add = [&](CorpusStore& store, const json& recs) {
      for (const auto& rec : recs) {
        ids.push_back(store.append({rec.value("ts", std::int64_t{0}), rec.value("model", std::string()),
                                    rec.value("prompt", std::string()), rec.at("gen").get<std::string>()}));
      }
    };
    {
      auto store = CorpusStore::open(path, SyncPolicy::flush);
      add(store, in.at("records"));
    }
    if (in.value("reopen", false)) {
      auto store = CorpusStore::open(path, SyncPolicy::flush);
      add(store, in.at("more"));
    }
    return json{{"ids", ids}};
  };
  r["scan"] = [](const json& in, const Context&) {
    auto store = CorpusStore::in_memory();
    for (const auto& rec : in.at("records")) {
      store.append({rec.value("ts", std::int64_t{0}), rec.value("model", std::string()),
                    rec.value("prompt", std::string()), rec.at("gen").get<std::string>()});
    }
    ScanFilter f;
    if (in.contains("window")) {
      f.window = TimeWindow{in["window"][0].get<std::int64_t>(), in["window"][1].get<std::int64_t>()};
    }
    if (in.contains("model")) f.model_id = in["model"].get<std::string>();
    json ids = json::array();
    for (const auto& rec : store.scan(f)) ids.push_back(rec.id);
    return json{{"ids", ids}};
  };
  r["scan_models"] = [](const json& in, const Context&) {
    auto store = CorpusStore::in_memory();
    const auto models = in.at("models").get<std::vector<std::string>>();
    const auto per = in.at("per_model").get<std::size_t>();
    for (std::size_t i = 0; i < per; ++i) {
      for (const auto& m : models) {
        store.append({static_cast<std::int64_t>(i), m, "", m + " generation " + std::to_string(i)});
      }
    }
    ScanFilter f;
    f.model_id = in.at("pick").get<std::string>();
    const auto hits = store.scan(f);
    const bool all = std::all_of(hits.begin(), hits.end(),
                                 [&](const GenerationRecord& rec) { return rec.model_id == *f.model_id; });
    return json{{"count", hits.size()}, {"all_match", all}};
  };
  r["index_text"] = [](const json& in, const Context&) {
    GenerationRecord rec;
    rec.prompt = in.at("prompt").get<std::string>();
    rec.generation = in.at("gen").get<std::string>();
    return json{{"text", index_text(rec, parse_index_text_mode(in.at("mode").get<std::string>()))}};
  };
  r["record_line"] = [](const json& in, const Context&) {
    GenerationRecord rec{in.at("id").get<RecordId>(), in.at("ts").get<std::int64_t>(),
                         in.at("model").get<std::string>(), in.at("prompt").get<std::string>(),
                         in.at("gen").get<std::string>()};
    const auto line = encode_record_line(rec);
    return json{{"line", line}, {"round_trip", decode_record_line(line) == rec}};
  };

  // eval-harness
  r["calibrate_threshold"] = [](const json& in, const Context&) {
    const auto scores = scores_of(in);
    const auto cal = calibrate_threshold(scores, in.at("target_fpr").get<double>());
    const auto above = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > cal.threshold; });
    return json{{"threshold", cal.threshold},
                {"exceedances", above},
                {"degenerate", cal.degenerate},
                {"empirical_fpr", cal.empirical_fpr}};
  };
  r["detection_accuracy"] = [](const json& in, const Context&) {
    return json{{"accuracy", detection_accuracy(scores_of(in), in.at("threshold").get<double>())}};
  };
  r["roc"] = [](const json& in, const Context&) {
    LabeledScores s{in.at("human").get<std::vector<double>>(), in.at("machine").get<std::vector<double>>()};
    std::optional<double> clip;
    if (in.contains("clip")) clip = in["clip"].get<double>();
    const auto curve = roc(s, clip);
    json points = json::array();
    for (const auto& p : curve.points) {
      points.push_back({p.fpr, p.tpr, std::isfinite(p.threshold) ? json(p.threshold) : json(nullptr)});
    }
    return json{{"points", points}, {"auc", curve.auc}};
  };
  r["perturb"] = [](const json& in, const Context&) {
    Lexicon lex;
    if (in.contains("lexicon")) {
      for (const auto& [word, alts] : in["lexicon"].items()) {
        lex.add(word, alts.get<std::vector<std::string>>());
      }
    }
    std::string text;
    if (in.contains("distinct_words")) {
      for (std::size_t i = 0; i < in["distinct_words"].get<std::size_t>(); ++i) {
        if (i) text.push_back(' ');
        text += "word" + std::to_string(i);
      }
    } else {
      text = in.at("text").get<std::string>();
    }
    Perturbation p{in.at("rate").get<double>(), in.value("shuffle", false), in.at("seed").get<std::uint64_t>()};
    const auto out = perturb(text, p, lex);
    std::istringstream a(text), b(out);
    std::size_t changed = 0;
    for (std::string x, y; a >> x && b >> y;) changed += x != y;
    const auto src = normalize_tokens(text);
    const auto tgt = normalize_tokens(out);
    return json{{"text", out},
                {"changed", changed},
                {"f1", unigram_f1(src, tgt)},
                {"lexical", to_scale(lexical_diversity(src, tgt))}};
  };
  r["run_benchmark"] = [](const json& in, const Context&) {
    BenchmarkItems items;
    items.machine = in.at("machine").get<std::vector<std::string>>();
    items.human_calibration = in.at("human").get<std::vector<std::string>>();
    auto snap = std::make_shared<RetrievalSnapshot>(snapshot_of(in.at("machine")));
    std::vector<std::unique_ptr<Detector>> owned;
    for (const auto& name : in.at("detectors")) {
      owned.push_back(make_retrieval_detector(snap, parse_method(name.get<std::string>())));
    }
    std::vector<const Detector*> dets;
    for (const auto& d : owned) dets.push_back(d.get());
    BenchmarkOptions opts;
    opts.threads = 1;
    const auto rows = run_benchmark(items, dets, {}, Lexicon{}, opts);
    json out = {{"rows", rows.size()}};
    if (!rows.empty()) {
      out["accuracy_original"] = rows[0].accuracy_original;
      out["accuracy_attacked"] = rows[0].accuracy_attacked;
    }
    return out;
  };

  // detect-service
  r["service"] = [](const json& in, const Context&) {
    const json config = in.value("config", json::object());
    double now = 1000.0;
    DetectService service(parse_service_config(config.dump()), [&now] { return now; });
    json responses = json::array();
    for (const auto& step : in.at("steps")) {
      now += step.value("advance", 0.0);
      ServiceRequest req;
      req.method = step.at("method").get<std::string>();
      req.path = step.at("path").get<std::string>();
      req.client_id = step.value("client", std::string("fixture"));
      if (step.contains("raw_body")) req.body = step["raw_body"].get<std::string>();
      else if (step.contains("body")) req.body = step["body"].dump();
      const auto resp = service.handle(req);
      json body = json::parse(resp.body, nullptr, false);
      json keys = json::array();
      if (body.is_object()) {
        for (const auto& [k, v] : body.items()) keys.push_back(k);
      }
      responses.push_back({{"status", resp.status},
                           {"body", body},
                           {"keys", keys},
                           {"retry_after", resp.retry_after.has_value()}});
    }
    return json{{"responses", responses}};
  };

  // cli
  r["dispatch"] = [](const json& in, const Context& ctx) {
    if (ctx.cli.empty()) throw std::logic_error("skip: no gendetect executable given");
    const json files = in.value("files", json::object());
    for (const auto& [name, content] : files.items()) {
      std::ofstream(ctx.scratch / name, std::ios::binary) << content.get<std::string>();
    }
    const json run = run_shell(in.at("script").get<std::string>(), ctx.scratch, ctx.cli);
    json out = {{"exit_code", run["exit_code"]}};
    const auto stdout_text = run["stdout"].get<std::string>();
    if (in.contains("stdout_has")) {
      out["found"] = stdout_text.find(in["stdout_has"].get<std::string>()) != std::string::npos;
    } else if (in.contains("json_field")) {
      const json doc = json::parse(stdout_text, nullptr, false);
      const auto field = in["json_field"].get<std::string>();
      out["found"] = doc.is_object() && doc.contains(field) &&
                     doc[field].get<double>() > in.at("above").get<double>();
    }
    return out;
  };

  // bundled corpora
  r["bundled_human_texts"] = [](const json& in, const Context&) {
    const auto texts = bundled_human_texts();
    std::size_t min_words = texts.empty() ? 0 : SIZE_MAX;
    for (const auto& t : texts) min_words = std::min(min_words, word_count(t));
    return json{{"count", texts.size()},
                {"all_long_enough", min_words >= in.at("min_words").get<std::size_t>()}};
  };
  r["bundled_generations"] = [](const json& in, const Context& ctx) {
    const auto src = ctx.fixture_dir / in.at("path").get<std::string>();
    if (!fs::exists(src)) throw StorageError("missing corpus " + src.string());
    const auto copy = ctx.scratch / "corpus.log";
    fs::copy_file(src, copy, fs::copy_options::overwrite_existing);
    const auto store = CorpusStore::open(copy, SyncPolicy::flush);
    const auto records = store.scan();
    const auto snap = RetrievalSnapshot::build(records, SnapshotConfig{});
    std::size_t hits = 0;
    std::size_t min_words = records.empty() ? 0 : SIZE_MAX;
    for (const auto& rec : records) {
      const auto res = detect_bm25(snap.bm25(), rec.generation, 0.99);
      hits += res.verdict && res.matched_id == rec.id;
      min_words = std::min(min_words, word_count(rec.generation));
    }
    return json{{"records", records.size()},
                {"verbatim_detected", hits},
                {"all_long_enough", min_words >= in.at("min_words").get<std::size_t>()}};
  };
  return r;
}

json run_case(const Handler& handler, const json& input, const Context& ctx) {
  try {
    return handler(input, ctx);
  } catch (const InvalidInput& e) {
    return json{{"error", "invalid_input"}, {"message", e.what()}};
  } catch (const StorageError& e) {
    return json{{"error", "storage_error"}, {"message", e.what()}};
  } catch (const FormatError& e) {
    return json{{"error", "format_error"}, {"message", e.what()}};
  }
}

}  // namespace

Registry default_registry() { return make_registry(); }

bool matches(const json& expected, const json& actual, double tolerance, std::string& where) {
  if (expected.is_number() && actual.is_number()) {
    const double e = expected.get<double>();
    const double a = actual.get<double>();
    if (std::abs(e - a) <= tolerance || e == a) return true;
    where += " (expected " + expected.dump() + ", got " + actual.dump() + ")";
    return false;
  }
  if (expected.is_object()) {
    if (!actual.is_object()) {
      where += " (expected an object, got " + actual.dump() + ")";
      return false;
    }
    for (const auto& [k, v] : expected.items()) {
      if (!actual.contains(k)) {
        where += "/" + k + " (missing; output " + actual.dump() + ")";
        return false;
      }
      std::string sub = where + "/" + k;
      if (!matches(v, actual[k], tolerance, sub)) {
        where = sub;
        return false;
      }
    }
    return true;
  }
  if (expected.is_array()) {
    if (!actual.is_array() || actual.size() != expected.size()) {
      where += " (expected " + expected.dump() + ", got " + actual.dump() + ")";
      return false;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      std::string sub = where + "/" + std::to_string(i);
      if (!matches(expected[i], actual[i], tolerance, sub)) {
        where = sub;
        return false;
      }
    }
    return true;
  }
  if (expected == actual) return true;
  where += " (expected " + expected.dump() + ", got " + actual.dump() + ")";
  return false;
}

Report verify(const Registry& registry, const Context& ctx) {
  Report report;
  const auto manifest_path = ctx.fixture_dir / "manifest.json";
  std::ifstream manifest_in(manifest_path);
  if (!manifest_in) {
    report.failures.push_back({"manifest.json", "", "missing fixture file"});
    return report;
  }
  const json manifest = json::parse(manifest_in, nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("files")) {
    report.failures.push_back({"manifest.json", "", "manifest does not parse or lists no files"});
    return report;
  }

  static const std::set<std::string> kOrigins = {"trivial", "derived", "reference"};
  std::set<std::string> exercised;
  std::size_t case_counter = 0;
  for (const auto& entry : manifest["files"]) {
    const std::string file = entry.get<std::string>();
    std::ifstream in(ctx.fixture_dir / file);
    if (!in) {
      report.failures.push_back({file, "", "missing fixture file"});
      continue;
    }
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("cases") || !doc["cases"].is_array()) {
      report.failures.push_back({file, "", "fixture file does not parse or has no cases"});
      continue;
    }
    ++report.files;
    for (const auto& c : doc["cases"]) {
      ++report.cases;
      const std::string name = c.value("name", std::string("<unnamed>"));
      for (const char* key : {"name", "op", "origin", "input", "expected"}) {
        if (!c.contains(key)) {
          report.failures.push_back({file, name, std::string("case lacks field \"") + key + "\""});
          goto next_case;
        }
      }
      {
        const std::string op = c["op"].get<std::string>();
        const std::string origin = c["origin"].get<std::string>();
        if (!kOrigins.contains(origin)) {
          report.failures.push_back({file, name, "unknown origin \"" + origin + "\""});
          continue;
        }
        if (origin != "trivial" && c.value("note", std::string()).empty()) {
          report.failures.push_back({file, name, "a " + origin + " case must name its oracle in \"note\""});
          continue;
        }
        const auto handler = registry.find(op);
        if (handler == registry.end()) {
          report.failures.push_back({file, name, "no handler for operation \"" + op + "\""});
          continue;
        }
        exercised.insert(op);
        Context case_ctx = ctx;
        case_ctx.scratch = ctx.scratch / ("case" + std::to_string(case_counter++));
        std::filesystem::remove_all(case_ctx.scratch);
        std::filesystem::create_directories(case_ctx.scratch);
        json actual;
        try {
          actual = run_case(handler->second, c["input"], case_ctx);
        } catch (const std::logic_error& e) {
          if (std::string_view(e.what()).starts_with("skip:")) {
            ++report.skipped;
            report.warnings.push_back(file + ": " + name + ": skipped (" + std::string(e.what() + 6) + ")");
            continue;
          }
          report.failures.push_back({file, name, std::string("handler threw: ") + e.what()});
          continue;
        } catch (const std::exception& e) {
          report.failures.push_back({file, name, std::string("handler threw: ") + e.what()});
          continue;
        }
        std::string where;
        if (matches(c["expected"], actual, c.value("tolerance", 1e-9), where)) {
          ++report.passed;
        } else {
          report.failures.push_back({file, name, "mismatch at " + (where.empty() ? "/" : where)});
        }
      }
    next_case:;
    }
  }
  for (const auto& [op, handler] : registry) {
    if (!exercised.contains(op)) report.warnings.push_back("operation \"" + op + "\" has no fixture");
  }
  return report;
}

std::string format_report(const Report& report) {
  std::ostringstream out;
  for (const auto& f : report.failures) {
    out << "FAIL " << f.file;
    if (!f.case_name.empty()) out << " :: " << f.case_name;
    out << ": " << f.message << '\n';
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  out << report.passed << "/" << report.cases << " fixture cases passed in " << report.files
      << " files";
  if (report.skipped) out << " (" << report.skipped << " skipped)";
  out << '\n';
  return out.str();
}

}  // namespace gendetect::fixtures
