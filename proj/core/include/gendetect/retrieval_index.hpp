#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gendetect/corpus_store.hpp"
#include "gendetect/detection.hpp"
#include "gendetect/text_normalize.hpp"
#include "gendetect/watermark.hpp"

namespace gendetect {

/// Per-slot eligibility flags (1 = searchable). Slots are index positions.
using SlotMask = std::vector<std::uint8_t>;

struct IndexedDoc {
  RecordId id = 0;
  TokenSeq tokens;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct ScoredDoc {
  RecordId id = 0;
  double score = 0.0;
  std::size_t slot = 0;
};

/// Okapi BM25 over an in-memory inverted index.
class Bm25Index {
 public:
  struct Posting {
    std::uint32_t slot = 0;
    std::uint32_t tf = 0;
  };

  /// Everything the index holds; the unit of persistence.
  struct Data {
    Bm25Params params;
    std::vector<std::string> terms;
    std::vector<std::vector<Posting>> postings;  // by term id, ascending slot
    std::vector<RecordId> ids;                   // by slot, ascending
    std::vector<std::vector<std::uint32_t>> doc_terms;  // by slot, sorted term ids (multiset)
  };

  Bm25Index() = default;
  /// Record ids must be strictly increasing.
  static Bm25Index build(std::span<const IndexedDoc> docs, Bm25Params params = {});
  /// Validates the invariants; throws FormatError when they do not hold.
  static Bm25Index from_data(Data data);

  const Data& data() const noexcept { return data_; }
  std::size_t doc_count() const noexcept { return data_.ids.size(); }
  double avg_doc_len() const noexcept { return avg_doc_len_; }
  std::size_t doc_length(std::size_t slot) const { return data_.doc_terms.at(slot).size(); }
  std::size_t document_frequency(std::string_view term) const;
  RecordId record_id(std::size_t slot) const { return data_.ids.at(slot); }

  /// Okapi score summed over distinct query terms, with
  /// IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5)). Only documents sharing at
  /// least one term are returned; order is score descending, record id
  /// ascending.
  std::vector<ScoredDoc> topk(const TokenSeq& query, std::size_t k,
                              const SlotMask* mask = nullptr) const;

  /// Multiset unigram F1 between `query` and the document in `slot`.
  double overlap_f1(std::size_t slot, const TokenSeq& query) const;

 private:
  void finish();

  Data data_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  double avg_doc_len_ = 0.0;
};

/// Bag-of-words embedder: the L2-normalized mean of per-token vectors. Tokens
/// absent from the optional vector table get entries of +-1/sqrt(dim), with
/// signs taken from mix64 streams keyed on (hash_key, token, coordinate
/// block).
class Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 512;
  static constexpr std::uint64_t kDefaultKey = 0xE3BEDDED5EEDULL;

  explicit Embedder(std::size_t dim = kDefaultDim, std::uint64_t hash_key = kDefaultKey);

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t hash_key() const noexcept { return hash_key_; }

  /// Text table: one token per line followed by dim floats, whitespace
  /// separated. Throws FormatError on a bad line or wrong width.
  void load_vector_table(const std::filesystem::path& path);
  void set_vector(std::string token, std::vector<double> values);
  std::size_t table_size() const noexcept { return table_ ? table_->size() : 0; }

  /// All-zero when the text has no tokens (the unembeddable sentinel).
  std::vector<double> embed(std::string_view text) const;
  std::vector<double> embed_tokens(const TokenSeq& tokens) const;

  /// The per-token vector before averaging.
  std::vector<double> token_vector(std::string_view token) const;

 private:
  void accumulate(std::string_view token, double weight, std::span<double> acc) const;

  std::size_t dim_;
  std::uint64_t hash_key_;
  std::shared_ptr<std::unordered_map<std::string, std::vector<double>>> table_;
};

bool is_unembeddable(std::span<const double> v) noexcept;
double cosine(std::span<const double> a, std::span<const double> b) noexcept;

/// Sentence similarity for the aligner: embedding cosine clamped to [0, 1].
/// The returned function holds its own copy of the embedder.
std::function<double(std::string_view, std::string_view)> embedding_similarity(
    Embedder embedder = Embedder());

/// Exact-scan store of unit vectors.
class EmbedIndex {
 public:
  struct Data {
    std::size_t dim = 0;
    std::uint64_t hash_key = 0;
    std::vector<RecordId> ids;
    std::vector<float> vectors;  // ids.size() * dim, row-major
  };

  struct Match {
    std::size_t slot = 0;
    RecordId id = 0;
    double cosine = 0.0;
  };

  EmbedIndex() = default;
  /// Unembeddable documents are stored as zero rows and never match.
  static EmbedIndex build(const Embedder& embedder, std::span<const IndexedDoc> docs);
  static EmbedIndex from_data(Data data);

  const Data& data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.ids.size(); }
  std::size_t dim() const noexcept { return data_.dim; }
  std::span<const float> vector(std::size_t slot) const;

  /// Highest cosine over eligible slots; ties go to the lower slot.
  std::optional<Match> best_match(std::span<const double> query,
                                  const SlotMask* mask = nullptr) const;

 private:
  void finish();

  Data data_;
  std::vector<double> norms_;
};

/// Retrieve the top BM25 document, then score = unigram F1 against it.
DetectionResult detect_bm25(const Bm25Index& index, std::string_view candidate, double threshold,
                            const SlotMask* mask = nullptr);

/// score = max cosine over the stored vectors.
DetectionResult detect_embed(const EmbedIndex& index, const Embedder& embedder,
                             std::string_view candidate, double threshold,
                             const SlotMask* mask = nullptr);

struct SnapshotConfig {
  IndexTextMode text_mode = IndexTextMode::generation_only;
  Bm25Params bm25;
  std::size_t embed_dim = Embedder::kDefaultDim;
  std::uint64_t embed_key = Embedder::kDefaultKey;
  bool build_embed = true;
};

/// Immutable BM25 + embedding indices over one corpus prefix, sharing slots.
class RetrievalSnapshot {
 public:
  RetrievalSnapshot() = default;
  static RetrievalSnapshot build(std::span<const GenerationRecord> records,
                                 const SnapshotConfig& config = {});
  static RetrievalSnapshot build(std::span<const GenerationRecord> records,
                                 const SnapshotConfig& config, const Embedder& embedder);
  static RetrievalSnapshot from_parts(Bm25Index bm25, EmbedIndex embed,
                                      std::vector<std::int64_t> timestamps, Embedder embedder,
                                      IndexTextMode text_mode);

  std::size_t size() const noexcept { return timestamps_.size(); }
  const Bm25Index& bm25() const noexcept { return bm25_; }
  const EmbedIndex& embed() const noexcept { return embed_; }
  const Embedder& embedder() const noexcept { return embedder_; }
  const std::vector<std::int64_t>& timestamps() const noexcept { return timestamps_; }
  IndexTextMode text_mode() const noexcept { return text_mode_; }
  bool has_embeddings() const noexcept { return embed_.size() == size(); }

  SlotMask window_mask(const TimeWindow& window) const;

 private:
  Bm25Index bm25_;
  EmbedIndex embed_;
  Embedder embedder_;
  std::vector<std::int64_t> timestamps_;
  IndexTextMode text_mode_ = IndexTextMode::generation_only;
};

struct DetectOptions {
  DetectionMethod method = DetectionMethod::bm25;
  std::optional<TimeWindow> window;
  double threshold = 0.0;
  /// Required for the watermark method.
  std::optional<WatermarkParams> watermark;
};

/// Dispatches on method. Retrieval methods search only records whose
/// timestamps fall in the window; the watermark ignores the corpus and the
/// window. Throws InvalidInput when window.from > window.to.
DetectionResult detect(const RetrievalSnapshot& snapshot, std::string_view candidate,
                       const DetectOptions& options);

}  // namespace gendetect
