#include "gendetect/retrieval_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gendetect/errors.hpp"
#include "gendetect/rng.hpp"

namespace gendetect {
namespace {

bool eligible(const SlotMask* mask, std::size_t slot) {
  return mask == nullptr || (slot < mask->size() && (*mask)[slot] != 0);
}

DetectionResult empty_result(DetectionMethod method, double threshold) {
  DetectionResult r;
  r.method = method;
  r.threshold_used = threshold;
  return r;
}

void finish_result(DetectionResult& r) {
  r.statistic = r.score;
  r.verdict = r.score > r.threshold_used;
}

double dot_mixed(const double* q, const float* v, std::size_t n) {
  double acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t k = 0; k < 8; ++k) acc[k] += q[i + k] * static_cast<double>(v[i + k]);
  }
  double sum = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) sum += q[i] * static_cast<double>(v[i]);
  return sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bm25Index

Bm25Index Bm25Index::build(std::span<const IndexedDoc> docs, Bm25Params params) {
  Bm25Index index;
  index.data_.params = params;
  index.data_.ids.reserve(docs.size());
  index.data_.doc_terms.reserve(docs.size());

  for (std::size_t slot = 0; slot < docs.size(); ++slot) {
    const auto& doc = docs[slot];
    if (slot > 0 && doc.id <= index.data_.ids.back()) {
      throw InvalidInput("indexed record ids must be strictly increasing");
    }
    std::vector<std::uint32_t> terms;
    terms.reserve(doc.tokens.size());
    for (const auto& tok : doc.tokens) {
      auto [it, inserted] =
          index.term_ids_.try_emplace(tok, static_cast<std::uint32_t>(index.data_.terms.size()));
      if (inserted) {
        index.data_.terms.push_back(tok);
        index.data_.postings.emplace_back();
      }
      terms.push_back(it->second);
    }
    std::sort(terms.begin(), terms.end());
    for (std::size_t i = 0; i < terms.size();) {
      std::size_t j = i;
      while (j < terms.size() && terms[j] == terms[i]) ++j;
      index.data_.postings[terms[i]].push_back(
          {static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(j - i)});
      i = j;
    }
    index.data_.ids.push_back(doc.id);
    index.data_.doc_terms.push_back(std::move(terms));
  }
  index.finish();
  return index;
}

Bm25Index Bm25Index::from_data(Data data) {
  Bm25Index index;
  if (data.postings.size() != data.terms.size() || data.doc_terms.size() != data.ids.size()) {
    throw FormatError("bm25 index sections disagree in length");
  }
  for (std::size_t s = 1; s < data.ids.size(); ++s) {
    if (data.ids[s] <= data.ids[s - 1]) throw FormatError("bm25 record ids not increasing");
  }
  for (std::uint32_t t = 0; t < data.terms.size(); ++t) {
    if (!index.term_ids_.emplace(data.terms[t], t).second) {
      throw FormatError("duplicate term in bm25 index");
    }
    for (const auto& p : data.postings[t]) {
      if (p.slot >= data.ids.size() || p.tf == 0) throw FormatError("bad bm25 posting");
    }
  }
  for (const auto& terms : data.doc_terms) {
    for (auto t : terms) {
      if (t >= data.terms.size()) throw FormatError("bad term id in bm25 document");
    }
    if (!std::is_sorted(terms.begin(), terms.end())) {
      throw FormatError("bm25 document terms not sorted");
    }
  }
  index.data_ = std::move(data);
  index.finish();
  return index;
}

void Bm25Index::finish() {
  std::size_t total = 0;
  for (const auto& t : data_.doc_terms) total += t.size();
  avg_doc_len_ = data_.ids.empty() ? 0.0
                                   : static_cast<double>(total) / static_cast<double>(data_.ids.size());
}

std::size_t Bm25Index::document_frequency(std::string_view term) const {
  auto it = term_ids_.find(std::string(term));
  return it == term_ids_.end() ? 0 : data_.postings[it->second].size();
}

std::vector<ScoredDoc> Bm25Index::topk(const TokenSeq& query, std::size_t k,
                                       const SlotMask* mask) const {
  const std::size_t n = doc_count();
  if (n == 0 || query.empty() || k == 0) return {};

  std::vector<std::uint32_t> query_terms;
  for (const auto& tok : query) {
    auto it = term_ids_.find(tok);
    if (it == term_ids_.end()) continue;
    if (std::find(query_terms.begin(), query_terms.end(), it->second) == query_terms.end()) {
      query_terms.push_back(it->second);
    }
  }
  if (query_terms.empty()) return {};

  const double k1 = data_.params.k1;
  const double b = data_.params.b;
  const double nd = static_cast<double>(n);
  std::vector<double> scores(n, 0.0);
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::uint32_t> touched;

  for (auto term : query_terms) {
    const auto& postings = data_.postings[term];
    const double df = static_cast<double>(postings.size());
    const double idf = std::log(1.0 + (nd - df + 0.5) / (df + 0.5));
    for (const auto& p : postings) {
      if (!eligible(mask, p.slot)) continue;
      const double tf = static_cast<double>(p.tf);
      const double len = static_cast<double>(data_.doc_terms[p.slot].size());
      scores[p.slot] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg_doc_len_));
      if (!seen[p.slot]) {
        seen[p.slot] = 1;
        touched.push_back(p.slot);
      }
    }
  }

  auto better = [&](std::uint32_t a, std::uint32_t c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return data_.ids[a] < data_.ids[c];
  };
  const std::size_t take = std::min(k, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(take),
                    touched.end(), better);
  std::vector<ScoredDoc> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back({data_.ids[touched[i]], scores[touched[i]], touched[i]});
  }
  return out;
}

double Bm25Index::overlap_f1(std::size_t slot, const TokenSeq& query) const {
  const auto& doc = data_.doc_terms.at(slot);
  if (query.empty() && doc.empty()) return 1.0;
  if (query.empty() || doc.empty()) return 0.0;
  std::vector<std::uint32_t> known;
  known.reserve(query.size());
  for (const auto& tok : query) {
    if (auto it = term_ids_.find(tok); it != term_ids_.end()) known.push_back(it->second);
  }
  std::sort(known.begin(), known.end());
  std::size_t matches = 0;
  for (std::size_t i = 0, j = 0; i < known.size() && j < doc.size();) {
    if (known[i] < doc[j]) {
      ++i;
    } else if (doc[j] < known[i]) {
      ++j;
    } else {
      ++matches;
      ++i;
      ++j;
    }
  }
  if (matches == 0) return 0.0;
  const double precision = static_cast<double>(matches) / static_cast<double>(query.size());
  const double recall = static_cast<double>(matches) / static_cast<double>(doc.size());
  return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Embedder

Embedder::Embedder(std::size_t dim, std::uint64_t hash_key) : dim_(dim), hash_key_(hash_key) {
  if (dim_ < 16) throw InvalidInput("embedding dimension must be at least 16");
}

void Embedder::set_vector(std::string token, std::vector<double> values) {
  if (values.size() != dim_) throw InvalidInput("vector table entry has the wrong width");
  if (!table_) {
    table_ = std::make_shared<std::unordered_map<std::string, std::vector<double>>>();
  } else if (table_.use_count() > 1) {
    table_ = std::make_shared<std::unordered_map<std::string, std::vector<double>>>(*table_);
  }
  (*table_)[std::move(token)] = std::move(values);
}

void Embedder::load_vector_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot read vector table " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    values.reserve(dim_);
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (!fields.eof() || values.size() != dim_) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected a token and " + std::to_string(dim_) + " floats");
    }
    set_vector(std::move(token), std::move(values));
  }
}

void Embedder::accumulate(std::string_view token, double weight, std::span<double> acc) const {
  if (table_) {
    if (auto it = table_->find(std::string(token)); it != table_->end()) {
      for (std::size_t c = 0; c < dim_; ++c) acc[c] += weight * it->second[c];
      return;
    }
  }
  const double w = weight / std::sqrt(static_cast<double>(dim_));
  const std::uint64_t seed = mix64(hash_key_ ^ fnv1a64(token));
  for (std::size_t block = 0; block * 64 < dim_; ++block) {
    const std::uint64_t bits = mix64(seed + block);
    const std::size_t base = block * 64;
    const std::size_t width = std::min<std::size_t>(64, dim_ - base);
    for (std::size_t k = 0; k < width; ++k) {
      acc[base + k] += ((bits >> k) & 1U) ? -w : w;
    }
  }
}

std::vector<double> Embedder::token_vector(std::string_view token) const {
  std::vector<double> v(dim_, 0.0);
  accumulate(token, 1.0, v);
  return v;
}

std::vector<double> Embedder::embed_tokens(const TokenSeq& tokens) const {
  std::vector<double> acc(dim_, 0.0);
  if (tokens.empty()) return acc;
  std::map<std::string_view, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  for (const auto& [tok, count] : counts) accumulate(tok, static_cast<double>(count), acc);

  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return std::vector<double>(dim_, 0.0);
  for (double& x : acc) x /= norm;
  return acc;
}

std::vector<double> Embedder::embed(std::string_view text) const {
  return embed_tokens(normalize_tokens(text));
}

bool is_unembeddable(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

double cosine(std::span<const double> a, std::span<const double> b) noexcept {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::function<double(std::string_view, std::string_view)> embedding_similarity(Embedder embedder) {
  return [e = std::move(embedder)](std::string_view a, std::string_view b) {
    return std::clamp(cosine(e.embed(a), e.embed(b)), 0.0, 1.0);
  };
}

// ---------------------------------------------------------------------------
// EmbedIndex

EmbedIndex EmbedIndex::build(const Embedder& embedder, std::span<const IndexedDoc> docs) {
  EmbedIndex index;
  index.data_.dim = embedder.dim();
  index.data_.hash_key = embedder.hash_key();
  index.data_.ids.reserve(docs.size());
  index.data_.vectors.reserve(docs.size() * embedder.dim());
  for (const auto& doc : docs) {
    const auto v = embedder.embed_tokens(doc.tokens);
    index.data_.ids.push_back(doc.id);
    for (double x : v) index.data_.vectors.push_back(static_cast<float>(x));
  }
  index.finish();
  return index;
}

EmbedIndex EmbedIndex::from_data(Data data) {
  if (data.dim == 0 || data.vectors.size() != data.ids.size() * data.dim) {
    throw FormatError("embedding index has the wrong number of floats");
  }
  EmbedIndex index;
  index.data_ = std::move(data);
  index.finish();
  for (double n : index.norms_) {
    if (n != 0.0 && std::abs(n - 1.0) > 1e-6) throw FormatError("stored embedding is not unit length");
  }
  return index;
}

void EmbedIndex::finish() {
  norms_.assign(data_.ids.size(), 0.0);
  for (std::size_t s = 0; s < data_.ids.size(); ++s) {
    const float* v = data_.vectors.data() + s * data_.dim;
    double sq = 0.0;
    for (std::size_t i = 0; i < data_.dim; ++i) sq += static_cast<double>(v[i]) * v[i];
    norms_[s] = std::sqrt(sq);
  }
}

std::span<const float> EmbedIndex::vector(std::size_t slot) const {
  if (slot >= size()) throw std::out_of_range("embedding slot");
  return {data_.vectors.data() + slot * data_.dim, data_.dim};
}

std::optional<EmbedIndex::Match> EmbedIndex::best_match(std::span<const double> query,
                                                        const SlotMask* mask) const {
  if (query.size() != data_.dim) throw InvalidInput("query embedding has the wrong dimension");
  double qn = 0.0;
  for (double x : query) qn += x * x;
  qn = std::sqrt(qn);
  if (qn == 0.0) return std::nullopt;

  std::optional<Match> best;
  for (std::size_t s = 0; s < data_.ids.size(); ++s) {
    if (norms_[s] == 0.0 || !eligible(mask, s)) continue;
    const double c =
        dot_mixed(query.data(), data_.vectors.data() + s * data_.dim, data_.dim) / (qn * norms_[s]);
    if (!best || c > best->cosine) best = Match{s, data_.ids[s], c};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Detection

DetectionResult detect_bm25(const Bm25Index& index, std::string_view candidate, double threshold,
                            const SlotMask* mask) {
  DetectionResult r = empty_result(DetectionMethod::bm25, threshold);
  const TokenSeq tokens = normalize_tokens(candidate);
  if (!tokens.empty()) {
    const auto top = index.topk(tokens, 1, mask);
    if (!top.empty()) {
      r.matched_id = top.front().id;
      r.score = index.overlap_f1(top.front().slot, tokens);
    }
  }
  finish_result(r);
  return r;
}

DetectionResult detect_embed(const EmbedIndex& index, const Embedder& embedder,
                             std::string_view candidate, double threshold, const SlotMask* mask) {
  DetectionResult r = empty_result(DetectionMethod::embed, threshold);
  if (index.size() > 0) {
    if (embedder.dim() != index.dim()) throw InvalidInput("embedder and index dimensions differ");
    const auto query = embedder.embed(candidate);
    if (auto m = index.best_match(query, mask)) {
      r.matched_id = m->id;
      r.score = std::clamp(m->cosine, 0.0, 1.0);
    }
  }
  finish_result(r);
  return r;
}

RetrievalSnapshot RetrievalSnapshot::build(std::span<const GenerationRecord> records,
                                           const SnapshotConfig& config) {
  return build(records, config, Embedder(config.embed_dim, config.embed_key));
}

RetrievalSnapshot RetrievalSnapshot::build(std::span<const GenerationRecord> records,
                                           const SnapshotConfig& config, const Embedder& embedder) {
  std::vector<IndexedDoc> docs;
  docs.reserve(records.size());
  RetrievalSnapshot snap;
  snap.timestamps_.reserve(records.size());
  for (const auto& r : records) {
    docs.push_back({r.id, normalize_tokens(index_text(r, config.text_mode))});
    snap.timestamps_.push_back(r.timestamp);
  }
  snap.bm25_ = Bm25Index::build(docs, config.bm25);
  snap.embedder_ = embedder;
  if (config.build_embed) snap.embed_ = EmbedIndex::build(embedder, docs);
  snap.text_mode_ = config.text_mode;
  return snap;
}

RetrievalSnapshot RetrievalSnapshot::from_parts(Bm25Index bm25, EmbedIndex embed,
                                                std::vector<std::int64_t> timestamps,
                                                Embedder embedder, IndexTextMode text_mode) {
  if (bm25.doc_count() != timestamps.size()) {
    throw FormatError("snapshot timestamps do not match the bm25 index");
  }
  if (embed.size() != 0) {
    if (embed.size() != timestamps.size()) throw FormatError("embedding index size mismatch");
    if (embed.data().ids != bm25.data().ids) throw FormatError("index slots disagree");
    if (embed.dim() != embedder.dim()) throw FormatError("embedder dimension mismatch");
  }
  RetrievalSnapshot snap;
  snap.bm25_ = std::move(bm25);
  snap.embed_ = std::move(embed);
  snap.timestamps_ = std::move(timestamps);
  snap.embedder_ = std::move(embedder);
  snap.text_mode_ = text_mode;
  return snap;
}

SlotMask RetrievalSnapshot::window_mask(const TimeWindow& window) const {
  SlotMask mask(timestamps_.size(), 0);
  for (std::size_t s = 0; s < timestamps_.size(); ++s) {
    mask[s] = window.contains(timestamps_[s]) ? 1 : 0;
  }
  return mask;
}

DetectionResult detect(const RetrievalSnapshot& snapshot, std::string_view candidate,
                       const DetectOptions& options) {
  if (options.window && options.window->from > options.window->to) {
    throw InvalidInput("time window has from > to");
  }
  if (options.method == DetectionMethod::watermark) {
    if (!options.watermark) throw InvalidInput("watermark detection needs watermark parameters");
    const WordVocabulary vocab(options.watermark->vocab_size);
    return detect_watermark(vocab.tokenize(candidate), *options.watermark, options.threshold);
  }

  std::optional<SlotMask> mask;
  if (options.window) mask = snapshot.window_mask(*options.window);
  const SlotMask* m = mask ? &*mask : nullptr;
  if (options.method == DetectionMethod::bm25) {
    return detect_bm25(snapshot.bm25(), candidate, options.threshold, m);
  }
  if (snapshot.size() > 0 && !snapshot.has_embeddings()) {
    throw InvalidInput("snapshot was built without embeddings");
  }
  return detect_embed(snapshot.embed(), snapshot.embedder(), candidate, options.threshold, m);
}

std::string_view to_string(DetectionMethod m) noexcept {
  switch (m) {
    case DetectionMethod::bm25: return "bm25";
    case DetectionMethod::embed: return "embed";
    case DetectionMethod::watermark: return "watermark";
  }
  return "unknown";
}

DetectionMethod parse_method(std::string_view name) {
  if (name == "bm25") return DetectionMethod::bm25;
  if (name == "embed") return DetectionMethod::embed;
  if (name == "watermark") return DetectionMethod::watermark;
  throw InvalidInput("unknown detection method: " + std::string(name));
}

}  // namespace gendetect
