#include "commands.hpp"

#include <signal.h>

#include <cmath>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "common.hpp"
#include "gendetect/corpus_store.hpp"
#include "gendetect/detect_service.hpp"
#include "gendetect/detectors.hpp"
#include "gendetect/diversity_codes.hpp"
#include "gendetect/errors.hpp"
#include "gendetect/eval_harness.hpp"
#include "gendetect/index_io.hpp"
#include "gendetect/paragraph_aligner.hpp"
#include "gendetect/reference_texts.hpp"
#include "gendetect/retrieval_index.hpp"
#include "gendetect/synthetic.hpp"
#include "gendetect/text_normalize.hpp"
#include "gendetect/watermark.hpp"

namespace gendetect::cli {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  return read_file(path);
}

namespace {

std::string trim_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

void add_watermark_flags(CLI::App* cmd, WatermarkFlags& w) {
  cmd->add_option("--gamma", w.gamma, "Green-list fraction")->capture_default_str();
  cmd->add_option("--delta", w.delta, "Logit boost for green tokens")->capture_default_str();
  cmd->add_option("--key", w.key, "Green-list hash key")->capture_default_str();
  cmd->add_option("--vocab", w.vocab, "Vocabulary size")->capture_default_str();
}

SyncPolicy parse_sync(const std::string& s) {
  return s == "flush" ? SyncPolicy::flush : SyncPolicy::fsync;
}

// ---------------------------------------------------------------------------

struct IngestOpts {
  std::string corpus, text_file, generation, jsonl, model = "unknown", prompt, prompt_file;
  std::string sync = "fsync";
  std::int64_t timestamp = 0;
  CLI::Option* timestamp_opt = nullptr;
  bool json = false;
};

int run_ingest(const IngestOpts& o) {
  auto store = CorpusStore::open(o.corpus, parse_sync(o.sync));
  const std::int64_t now = o.timestamp_opt->count() ? o.timestamp : std::time(nullptr);
  std::vector<RecordId> ids;
  if (!o.jsonl.empty()) {
    std::istringstream lines(read_input(o.jsonl));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (trim_newline(line).empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("generation")) {
        throw InvalidInput("line " + std::to_string(lineno) + ": expected an object with a generation");
      }
      NewRecord r;
      r.generation = j.at("generation").get<std::string>();
      r.model_id = j.value("model_id", o.model);
      r.prompt = j.value("prompt", std::string());
      r.timestamp = j.value("timestamp", now);
      ids.push_back(store.append(r));
    }
  } else {
    NewRecord r;
    r.model_id = o.model;
    r.timestamp = now;
    r.prompt = o.prompt_file.empty() ? o.prompt : trim_newline(read_file(o.prompt_file));
    r.generation = o.generation.empty() ? trim_newline(read_input(o.text_file)) : o.generation;
    ids.push_back(store.append(r));
  }
  if (o.json) {
    emit({{"corpus", o.corpus}, {"ids", ids}});
  } else if (ids.empty()) {
    std::cout << "ingested 0 records\n";
  } else {
    std::cout << "ingested " << ids.size() << " record" << (ids.size() == 1 ? "" : "s")
              << ": ids " << ids.front() << ".." << ids.back() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct IndexOpts {
  std::string corpus, out, index_text = "generation_only";
  std::size_t embed_dim = Embedder::kDefaultDim;
  bool no_embed = false;
  bool json = false;
};

int run_index(const IndexOpts& o) {
  auto store = CorpusStore::open(o.corpus, SyncPolicy::flush);
  SnapshotConfig cfg;
  cfg.text_mode = parse_index_text_mode(o.index_text);
  cfg.embed_dim = o.embed_dim;
  cfg.build_embed = !o.no_embed;
  const auto records = store.scan();
  const auto snap = RetrievalSnapshot::build(records, cfg);
  save_snapshot(o.out, snap);
  if (o.json) {
    emit({{"records", snap.size()},
          {"terms", snap.bm25().data().terms.size()},
          {"embeddings", snap.has_embeddings() && !o.no_embed},
          {"index_text", to_string(cfg.text_mode)},
          {"out", o.out}});
  } else {
    std::cout << "indexed " << snap.size() << " records (" << snap.bm25().data().terms.size()
              << " terms" << (o.no_embed ? "" : ", embeddings") << ") -> " << o.out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct DetectOpts {
  std::string method = "bm25", corpus, index, text, text_file, calibration, index_text = "generation_only";
  double threshold = 0.0;
  double fpr = 0.01;
  std::int64_t from = 0, to = 0;
  std::size_t embed_dim = Embedder::kDefaultDim;
  WatermarkFlags wm;
  CLI::Option *threshold_opt = nullptr, *from_opt = nullptr, *to_opt = nullptr;
  bool json = false;
};

constexpr double kDefaultWatermarkZ = 4.0;

int run_detect(const DetectOpts& o) {
  const DetectionMethod method = parse_method(o.method);
  const std::string candidate = o.text.empty() ? trim_newline(read_input(o.text_file)) : o.text;

  RetrievalSnapshot snap;
  if (method != DetectionMethod::watermark) {
    if (!o.index.empty()) {
      Embedder embedder(o.embed_dim);
      snap = load_snapshot(o.index, &embedder);
    } else if (!o.corpus.empty()) {
      auto store = CorpusStore::open(o.corpus, SyncPolicy::flush);
      SnapshotConfig cfg;
      cfg.text_mode = parse_index_text_mode(o.index_text);
      cfg.embed_dim = o.embed_dim;
      cfg.build_embed = method == DetectionMethod::embed;
      const auto records = store.scan();
      snap = RetrievalSnapshot::build(records, cfg);
    } else {
      throw InvalidInput("retrieval detection needs --corpus or --index");
    }
  }

  DetectOptions opts;
  opts.method = method;
  std::string threshold_source;
  if (o.threshold_opt->count()) {
    opts.threshold = o.threshold;
    threshold_source = "flag";
  } else if (!o.calibration.empty()) {
    const auto human = read_text_lines(o.calibration);
    if (method == DetectionMethod::watermark) {
      const auto params = o.wm.params();
      const WordVocabulary vocab(params.vocab_size);
      std::vector<double> scores;
      for (const auto& t : human) scores.push_back(z_score(vocab.tokenize(t), params).z);
      opts.threshold = calibrate_threshold(scores, o.fpr).threshold;
    } else {
      opts.threshold = calibrate_retrieval(snap, method, human, o.fpr).threshold;
    }
    threshold_source = "calibrated";
  } else if (method == DetectionMethod::watermark) {
    opts.threshold = kDefaultWatermarkZ;
    threshold_source = "default";
  } else {
    opts.threshold = calibrate_retrieval(snap, method, bundled_human_texts(), o.fpr).threshold;
    threshold_source = "calibrated-bundled";
  }
  if (o.from_opt->count() || o.to_opt->count()) {
    opts.window = TimeWindow{o.from_opt->count() ? o.from : std::numeric_limits<std::int64_t>::min(),
                             o.to_opt->count() ? o.to : std::numeric_limits<std::int64_t>::max()};
  }
  if (method == DetectionMethod::watermark) opts.watermark = o.wm.params();

  const DetectionResult r = detect(snap, candidate, opts);
  if (o.json) {
    ordered_json doc = {{"verdict", r.verdict},
                        {"method", to_string(r.method)},
                        {"score", r.score},
                        {"statistic", r.statistic},
                        {"threshold", r.threshold_used},
                        {"threshold_source", threshold_source}};
    doc["matched_id"] = r.matched_id ? ordered_json(*r.matched_id) : ordered_json(nullptr);
    emit(doc);
  } else {
    std::cout << "verdict: " << (r.verdict ? "true" : "false") << '\n'
              << "method: " << to_string(r.method) << '\n'
              << "score: " << r.score << '\n'
              << "statistic: " << r.statistic << '\n'
              << "threshold: " << r.threshold_used << " (" << threshold_source << ")\n";
    if (r.matched_id) std::cout << "matched_id: " << *r.matched_id << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct WmGenerateOpts {
  WatermarkFlags wm;
  std::size_t len = 200;
  std::uint64_t seed = 0;
  double top_p = 1.0;
  std::string source = "uniform";
  std::size_t classes = 50;
  double spread = 3.0;
  std::size_t sentence_length = 12;
  bool plain = false;
  bool json = false;
};

int run_wm_generate(const WmGenerateOpts& o) {
  const WatermarkParams params = o.wm.params();
  std::unique_ptr<LogitSource> source;
  if (o.source == "uniform") {
    source = std::make_unique<UniformLogits>(params.vocab_size);
  } else if (o.source == "bigram") {
    source = std::make_unique<ClassBigramLogits>(params.vocab_size, o.classes, o.spread, o.seed);
  } else {
    throw InvalidInput("unknown logit source: " + o.source);
  }
  const WordVocabulary vocab(params.vocab_size);
  const TokenText t = o.plain ? plain_text(*source, vocab, o.len, o.top_p, o.seed, o.sentence_length)
                              : watermarked_text(*source, vocab, params, o.len, o.top_p, o.seed,
                                                 o.sentence_length);
  report_seed(o.seed, o.json);
  if (o.json) {
    emit({{"seed", o.seed},
          {"watermarked", !o.plain},
          {"gamma", params.gamma},
          {"delta", params.delta},
          {"vocab", params.vocab_size},
          {"length", o.len},
          {"source", o.source},
          {"text", t.text}});
  } else {
    std::cout << t.text << '\n';
  }
  return 0;
}

struct WmDetectOpts {
  WatermarkFlags wm;
  std::string text_file;
  double threshold = kDefaultWatermarkZ;
  bool json = false;
};

int run_wm_detect(const WmDetectOpts& o) {
  const WatermarkParams params = o.wm.params();
  const WordVocabulary vocab(params.vocab_size);
  const auto tokens = vocab.tokenize(read_input(o.text_file));
  const ZReport z = z_score(tokens, params);
  const bool verdict = z.z > o.threshold;
  if (o.json) {
    emit({{"verdict", verdict},
          {"z", z.z},
          {"p_value", z.p_value},
          {"scored_tokens", z.scored_tokens},
          {"green_tokens", z.green_count},
          {"threshold", o.threshold}});
  } else {
    std::cout << "z: " << z.z << '\n'
              << "p_value: " << z.p_value << '\n'
              << "green: " << z.green_count << " / " << z.scored_tokens << '\n'
              << "verdict: " << (verdict ? "true" : "false") << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AlignOpts {
  std::string src, tgt, span, sim = "embed";
  double gap = kDefaultGapPenalty;
  std::uint64_t seed = 0;
  bool json = false;
};

std::string label(char side, const std::optional<std::size_t>& i) {
  return i ? std::string(1, side) + std::to_string(*i + 1) : "-";
}

std::string run_label(char side, std::size_t begin, std::size_t end) {
  if (begin == end) return "-";
  std::string s = std::string(1, side) + std::to_string(begin + 1);
  if (end - begin > 1) s += ".." + std::string(1, side) + std::to_string(end);
  return s;
}

int run_align(const AlignOpts& o) {
  const auto p = sentence_texts(read_file(o.src));
  const auto q = sentence_texts(read_file(o.tgt));
  SentenceSimilarity sim = embedding_similarity();
  if (o.sim == "f1") {
    sim = [](std::string_view a, std::string_view b) {
      return unigram_f1(normalize_tokens(a), normalize_tokens(b));
    };
  }
  const AlignmentPath path = align(p, q, sim, o.gap);
  const auto blocks = merge_alignment(path);

  std::optional<TrainingExample> example;
  if (!o.span.empty()) {
    // 1-based inclusive "first:last".
    const auto colon = o.span.find(':');
    const std::size_t first = std::stoul(o.span.substr(0, colon));
    const std::size_t last = colon == std::string::npos ? first : std::stoul(o.span.substr(colon + 1));
    if (first == 0 || last < first) throw InvalidInput("--span is 1-based first:last");
    example = make_example(p, q, path, {first - 1, last - 1}, o.seed);
    report_seed(o.seed, o.json);
  }

  if (o.json) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : path.steps) {
      steps.push_back({{"src", s.src ? ordered_json(*s.src + 1) : ordered_json(nullptr)},
                       {"tgt", s.tgt ? ordered_json(*s.tgt + 1) : ordered_json(nullptr)}});
    }
    ordered_json jb = ordered_json::array();
    for (const auto& b : blocks) {
      jb.push_back({{"src", {b.src_begin + 1, b.src_end}}, {"tgt", {b.tgt_begin + 1, b.tgt_end}}});
    }
    ordered_json doc = {{"score", path.score}, {"steps", steps}, {"blocks", jb}};
    if (example) {
      doc["seed"] = o.seed;
      doc["example"] = ordered_json::parse(example->to_jsonl());
    }
    emit(doc);
    return 0;
  }
  std::cout << "score: " << path.score << '\n';
  for (const auto& s : path.steps) std::cout << label('p', s.src) << '\t' << label('q', s.tgt) << '\n';
  std::cout << "blocks:\n";
  for (const auto& b : blocks) {
    std::cout << "  " << run_label('p', b.src_begin, b.src_end) << " <-> "
              << run_label('q', b.tgt_begin, b.tgt_end) << '\n';
  }
  if (example) std::cout << example->to_jsonl() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct CodesOpts {
  std::string src, tgt, convention = "diversity";
  bool json = false;
};

int run_codes(const CodesOpts& o) {
  const auto a = normalize_tokens(read_file(o.src));
  const auto b = normalize_tokens(read_file(o.tgt));
  CodeConvention conv;
  if (o.convention == "diversity") conv = CodeConvention::diversity;
  else if (o.convention == "similarity") conv = CodeConvention::similarity;
  else throw InvalidInput("convention must be diversity or similarity");
  const ControlCodes c = control_codes(a, b);
  if (o.json) {
    emit({{"lexical", conv == CodeConvention::diversity ? c.lexical : 100 - c.lexical},
          {"order", conv == CodeConvention::diversity ? c.order : 100 - c.order},
          {"lexical_raw", lexical_diversity(a, b)},
          {"order_raw", order_diversity(a, b)},
          {"convention", o.convention}});
  } else {
    std::cout << render_codes(c, conv) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PerturbOpts {
  std::string text_file, lexicon;
  double rate = 0.0;
  bool shuffle = false;
  std::uint64_t seed = 0;
  bool json = false;
};

Lexicon load_lexicon(const std::string& path) {
  if (path.empty()) return Lexicon::bundled();
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw InvalidInput("lexicon must be a JSON object");
  Lexicon lex;
  for (const auto& [word, alts] : j.items()) lex.add(word, alts.get<std::vector<std::string>>());
  return lex;
}

int run_perturb(const PerturbOpts& o) {
  const std::string text = trim_newline(read_input(o.text_file));
  const Perturbation p{o.rate, o.shuffle, o.seed};
  const std::string out = perturb(text, p, load_lexicon(o.lexicon));
  report_seed(o.seed, o.json);
  if (o.json) {
    const ControlCodes c = control_codes(normalize_tokens(text), normalize_tokens(out));
    emit({{"seed", o.seed},
          {"lexical_rate", o.rate},
          {"shuffle_sentences", o.shuffle},
          {"codes", {{"lexical", c.lexical}, {"order", c.order}}},
          {"text", out}});
  } else {
    std::cout << out << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchOpts {
  std::string spec, out_dir;
  unsigned threads = 0;
  bool json = false;
};

struct ServeOpts {
  std::string config, host, corpus, index;
  int port = 0;
  unsigned rate_limit = 0;
  CLI::Option *port_opt = nullptr, *rate_opt = nullptr;
  bool scores = false;
};

int run_serve(const ServeOpts& o) {
  ServiceConfig cfg = o.config.empty() ? ServiceConfig{} : parse_service_config(read_file(o.config));
  if (!o.host.empty()) cfg.host = o.host;
  if (o.port_opt->count()) cfg.port = o.port;
  if (!o.corpus.empty()) cfg.corpus_path = o.corpus;
  if (!o.index.empty()) cfg.index_path = o.index;
  if (o.rate_opt->count()) cfg.rate_limit = o.rate_limit;
  if (o.scores) cfg.binary_only = false;
  cfg.validate();

  // Route SIGINT/SIGTERM to a waiter thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  DetectService service(cfg);
  HttpServer server(service);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  std::cerr << "listening on " << cfg.host << ':' << cfg.port << " ("
            << service.snapshot_size() << " records indexed, "
            << (cfg.binary_only ? "binary" : "score") << " responses)\n";
  const bool ok = server.listen(cfg.host, cfg.port);
  if (!ok) {
    std::cerr << "error: cannot listen on " << cfg.host << ':' << cfg.port << '\n';
    pthread_kill(waiter.native_handle(), SIGTERM);
  }
  waiter.join();
  return ok ? 0 : 1;
}

template <typename Opts>
std::shared_ptr<Opts> make_opts() {
  return std::make_shared<Opts>();
}

}  // namespace

void register_commands(CLI::App& app, int& exit_code) {
  const auto in_file = CLI::ExistingFile;

  {
    auto o = make_opts<IngestOpts>();
    auto* cmd = app.add_subcommand("ingest", "Append generations to a corpus log");
    cmd->add_option("--corpus", o->corpus, "Corpus log path (created if missing)")->required();
    auto* text = cmd->add_option("--text-file", o->text_file, "Generation text file ('-' for stdin)");
    auto* gen = cmd->add_option("--generation", o->generation, "Generation text");
    auto* jl = cmd->add_option("--jsonl", o->jsonl,
                               "One {model_id, prompt, generation, timestamp} object per line");
    text->excludes(gen)->excludes(jl);
    gen->excludes(jl);
    cmd->add_option("--model", o->model, "Model id")->capture_default_str();
    cmd->add_option("--prompt", o->prompt, "Prompt text");
    cmd->add_option("--prompt-file", o->prompt_file, "Prompt file")->check(in_file);
    o->timestamp_opt = cmd->add_option("--timestamp", o->timestamp, "UTC seconds (default: now)");
    cmd->add_option("--sync", o->sync, "fsync or flush")
        ->check(CLI::IsMember({"fsync", "flush"}))
        ->capture_default_str();
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] {
      if (o->jsonl.empty() && o->generation.empty() && o->text_file.empty()) {
        throw CLI::ValidationError("ingest", "one of --text-file, --generation, --jsonl is required");
      }
      exit_code = run_ingest(*o);
    });
  }
  {
    auto o = make_opts<IndexOpts>();
    auto* cmd = app.add_subcommand("index", "Build a BM25 + embedding index file from a corpus");
    cmd->add_option("--corpus", o->corpus, "Corpus log")->required()->check(in_file);
    cmd->add_option("--out", o->out, "Index file to write")->required();
    cmd->add_option("--index-text", o->index_text, "generation_only or prompt_plus_generation")
        ->check(CLI::IsMember({"generation_only", "prompt_plus_generation"}))
        ->capture_default_str();
    cmd->add_option("--embed-dim", o->embed_dim, "Embedding dimension")->capture_default_str();
    cmd->add_flag("--no-embed", o->no_embed, "Skip the embedding index");
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_index(*o); });
  }
  {
    auto o = make_opts<DetectOpts>();
    auto* cmd = app.add_subcommand("detect", "Score one candidate text");
    cmd->add_option("--method", o->method, "bm25, embed or watermark")
        ->check(CLI::IsMember({"bm25", "embed", "watermark"}))
        ->capture_default_str();
    auto* corpus = cmd->add_option("--corpus", o->corpus, "Corpus log to index on the fly")->check(in_file);
    auto* index = cmd->add_option("--index", o->index, "Prebuilt index file")->check(in_file);
    corpus->excludes(index);
    auto* text = cmd->add_option("--text", o->text, "Candidate text");
    cmd->add_option("--text-file", o->text_file, "Candidate file ('-' or omitted: stdin)")->excludes(text);
    o->threshold_opt = cmd->add_option("--threshold", o->threshold,
                                       "Decision threshold (retrieval score or z)");
    cmd->add_option("--calibration", o->calibration,
                    "Human texts, one per line; threshold set at --fpr")
        ->check(in_file)
        ->excludes(o->threshold_opt);
    cmd->add_option("--fpr", o->fpr, "Target false-positive rate for calibration")
        ->capture_default_str();
    o->from_opt = cmd->add_option("--from", o->from, "Window start, UTC seconds");
    o->to_opt = cmd->add_option("--to", o->to, "Window end, UTC seconds");
    cmd->add_option("--index-text", o->index_text, "Text indexed per record with --corpus")
        ->check(CLI::IsMember({"generation_only", "prompt_plus_generation"}));
    cmd->add_option("--embed-dim", o->embed_dim, "Embedding dimension")->capture_default_str();
    add_watermark_flags(cmd, o->wm);
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_detect(*o); });
  }
  {
    auto o = make_opts<WmGenerateOpts>();
    auto* cmd = app.add_subcommand("wm-generate", "Sample a watermarked word sequence");
    add_watermark_flags(cmd, o->wm);
    cmd->add_option("--len", o->len, "Tokens to generate")->capture_default_str();
    cmd->add_option("--seed", o->seed, "Sampling seed")->capture_default_str();
    cmd->add_option("--top-p", o->top_p, "Nucleus mass")->capture_default_str();
    cmd->add_option("--source", o->source, "uniform or bigram")
        ->check(CLI::IsMember({"uniform", "bigram"}))
        ->capture_default_str();
    cmd->add_option("--classes", o->classes, "Bigram classes")->capture_default_str();
    cmd->add_option("--spread", o->spread, "Bigram logit spread")->capture_default_str();
    cmd->add_option("--sentence-length", o->sentence_length, "Words per rendered sentence")
        ->capture_default_str();
    cmd->add_flag("--plain", o->plain, "Sample without the watermark");
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_wm_generate(*o); });
  }
  {
    auto o = make_opts<WmDetectOpts>();
    auto* cmd = app.add_subcommand("wm-detect", "Watermark z-test on a text");
    add_watermark_flags(cmd, o->wm);
    cmd->add_option("--text-file", o->text_file, "Input ('-' or omitted: stdin)");
    cmd->add_option("--threshold", o->threshold, "z threshold")->capture_default_str();
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_wm_detect(*o); });
  }
  {
    auto o = make_opts<AlignOpts>();
    auto* cmd = app.add_subcommand("align", "Align the sentences of two paragraphs");
    cmd->add_option("--src", o->src, "Source paragraph file")->required()->check(in_file);
    cmd->add_option("--tgt", o->tgt, "Target paragraph file")->required()->check(in_file);
    cmd->add_option("--gap", o->gap, "Gap penalty")->capture_default_str();
    cmd->add_option("--sim", o->sim, "Sentence similarity: embed (cosine) or f1 (unigram F1)")
        ->check(CLI::IsMember({"embed", "f1"}))
        ->capture_default_str();
    cmd->add_option("--span", o->span, "Emit a training example for source sentences first:last");
    cmd->add_option("--seed", o->seed, "Shuffle seed for --span")->capture_default_str();
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_align(*o); });
  }
  {
    auto o = make_opts<CodesOpts>();
    auto* cmd = app.add_subcommand("codes", "Lexical and order diversity codes of a rewrite");
    cmd->add_option("--src", o->src, "Original text file")->required()->check(in_file);
    cmd->add_option("--tgt", o->tgt, "Rewritten text file")->required()->check(in_file);
    cmd->add_option("--convention", o->convention, "diversity or similarity")
        ->check(CLI::IsMember({"diversity", "similarity"}))
        ->capture_default_str();
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_codes(*o); });
  }
  {
    auto o = make_opts<PerturbOpts>();
    auto* cmd = app.add_subcommand("perturb", "Apply the synthetic paraphrase attack");
    cmd->add_option("--text-file", o->text_file, "Input ('-' or omitted: stdin)");
    cmd->add_option("--rate", o->rate, "Fraction of words replaced")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_flag("--shuffle", o->shuffle, "Shuffle sentence order");
    cmd->add_option("--seed", o->seed, "Perturbation seed")->capture_default_str();
    cmd->add_option("--lexicon", o->lexicon, "JSON object word -> [alternatives]")->check(in_file);
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] { exit_code = run_perturb(*o); });
  }
  {
    auto o = make_opts<BenchOpts>();
    auto* cmd = app.add_subcommand("bench", "Run a detection benchmark from a run-spec file");
    cmd->add_option("--spec", o->spec, "Run-spec JSON")->required()->check(in_file);
    cmd->add_option("--out-dir", o->out_dir, "Write results.csv and roc.csv here");
    cmd->add_option("--threads", o->threads, "Worker threads (0: all cores)");
    cmd->add_flag("--json", o->json, "Machine-readable output");
    cmd->callback([o, &exit_code] {
      const auto doc = bench_run(o->spec, o->out_dir, o->threads, o->json);
      if (o->json) emit(doc);
      exit_code = 0;
    });
  }
  {
    auto o = make_opts<ServeOpts>();
    auto* cmd = app.add_subcommand("serve", "Run the HTTP detection service");
    cmd->add_option("--config", o->config, "Service config JSON")->check(in_file);
    cmd->add_option("--host", o->host, "Listen address");
    o->port_opt = cmd->add_option("--port", o->port, "Listen port");
    cmd->add_option("--corpus", o->corpus, "Corpus log");
    cmd->add_option("--index", o->index, "Initial index file")->check(in_file);
    o->rate_opt = cmd->add_option("--rate-limit", o->rate_limit, "Detect queries per client per window");
    cmd->add_flag("--scores", o->scores, "Return scores and matched ids, not just verdicts");
    cmd->callback([o, &exit_code] { exit_code = run_serve(*o); });
  }
}

}  // namespace gendetect::cli
