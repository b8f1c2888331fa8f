#include "gendetect/index_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gendetect/errors.hpp"

namespace gendetect {
namespace {

constexpr std::uint32_t tag(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

constexpr std::uint32_t kMetaTag = tag("META");
constexpr std::uint32_t kBm25Tag = tag("BM25");
constexpr std::uint32_t kEmbedTag = tag("EMBD");

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string& str() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(le(4))); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  /// Count prefix checked against the bytes left, given a minimum item size.
  std::uint64_t count(std::size_t min_item_bytes) {
    const auto n = u64();
    if (min_item_bytes > 0 && n > remaining() / min_item_bytes) throw FormatError("index count overruns payload");
    return n;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("index container is truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void section(Writer& w, std::uint32_t t, const std::string& payload) {
  w.u32(t);
  w.u64(payload.size());
  w.bytes(payload);
}

}  // namespace

std::string encode_snapshot(const RetrievalSnapshot& snapshot) {
  Writer meta;
  meta.u8(snapshot.text_mode() == IndexTextMode::generation_only ? 0 : 1);
  meta.u64(snapshot.timestamps().size());
  for (auto ts : snapshot.timestamps()) meta.i64(ts);

  const auto& bm = snapshot.bm25().data();
  Writer bm25;
  bm25.f64(bm.params.k1);
  bm25.f64(bm.params.b);
  bm25.u64(bm.ids.size());
  for (std::size_t s = 0; s < bm.ids.size(); ++s) {
    bm25.u64(bm.ids[s]);
    bm25.u32(static_cast<std::uint32_t>(bm.doc_terms[s].size()));
    for (auto t : bm.doc_terms[s]) bm25.u32(t);
  }
  bm25.u64(bm.terms.size());
  for (std::size_t t = 0; t < bm.terms.size(); ++t) {
    bm25.u32(static_cast<std::uint32_t>(bm.terms[t].size()));
    bm25.bytes(bm.terms[t]);
    bm25.u64(bm.postings[t].size());
    for (const auto& p : bm.postings[t]) {
      bm25.u32(p.slot);
      bm25.u32(p.tf);
    }
  }

  Writer out;
  out.bytes(std::string_view(kIndexMagic, 4));
  out.u32(kIndexFormatVersion);
  const bool with_embed = snapshot.has_embeddings() && snapshot.size() > 0;
  out.u32(with_embed ? 3 : 2);
  section(out, kMetaTag, meta.str());
  section(out, kBm25Tag, bm25.str());
  if (with_embed) {
    const auto& em = snapshot.embed().data();
    Writer embed;
    embed.u32(static_cast<std::uint32_t>(em.dim));
    embed.u64(em.hash_key);
    embed.u64(em.ids.size());
    for (std::size_t s = 0; s < em.ids.size(); ++s) {
      embed.u64(em.ids[s]);
      for (std::size_t i = 0; i < em.dim; ++i) embed.f32(em.vectors[s * em.dim + i]);
    }
    section(out, kEmbedTag, embed.str());
  }
  return std::move(out.str());
}

RetrievalSnapshot decode_snapshot(std::string_view bytes, const Embedder* embedder) {
  Reader in(bytes);
  if (in.bytes(4) != std::string_view(kIndexMagic, 4)) throw FormatError("not a VDX1 index container");
  if (const auto v = in.u32(); v != kIndexFormatVersion) {
    throw FormatError("unsupported index format version " + std::to_string(v));
  }
  const auto sections = in.u32();

  std::optional<std::vector<std::int64_t>> timestamps;
  IndexTextMode mode = IndexTextMode::generation_only;
  std::optional<Bm25Index> bm25;
  EmbedIndex embed;
  std::optional<Embedder> embedder_out;

  for (std::uint32_t s = 0; s < sections; ++s) {
    const auto t = in.u32();
    const auto len = in.u64();
    if (len > in.remaining()) throw FormatError("index section overruns the file");
    Reader body(in.bytes(static_cast<std::size_t>(len)));
    if (t == kMetaTag) {
      const auto m = body.u8();
      if (m > 1) throw FormatError("bad text mode in index");
      mode = m == 0 ? IndexTextMode::generation_only : IndexTextMode::prompt_plus_generation;
      const auto n = body.count(8);
      std::vector<std::int64_t> ts(static_cast<std::size_t>(n));
      for (auto& x : ts) x = body.i64();
      timestamps = std::move(ts);
    } else if (t == kBm25Tag) {
      Bm25Index::Data d;
      d.params.k1 = body.f64();
      d.params.b = body.f64();
      const auto docs = body.count(12);
      d.ids.resize(static_cast<std::size_t>(docs));
      d.doc_terms.resize(static_cast<std::size_t>(docs));
      for (std::size_t i = 0; i < docs; ++i) {
        d.ids[i] = body.u64();
        const auto n = body.u32();
        if (n > body.remaining() / 4) throw FormatError("bm25 document overruns payload");
        d.doc_terms[i].resize(n);
        for (auto& x : d.doc_terms[i]) x = body.u32();
      }
      const auto terms = body.count(12);
      d.terms.resize(static_cast<std::size_t>(terms));
      d.postings.resize(static_cast<std::size_t>(terms));
      for (std::size_t i = 0; i < terms; ++i) {
        d.terms[i] = std::string(body.bytes(body.u32()));
        const auto n = body.count(8);
        d.postings[i].resize(static_cast<std::size_t>(n));
        for (auto& p : d.postings[i]) {
          p.slot = body.u32();
          p.tf = body.u32();
        }
      }
      bm25 = Bm25Index::from_data(std::move(d));
    } else if (t == kEmbedTag) {
      EmbedIndex::Data d;
      d.dim = body.u32();
      d.hash_key = body.u64();
      if (d.dim == 0) throw FormatError("embedding dimension is zero");
      const auto n = body.count(8 + 4 * d.dim);
      d.ids.resize(static_cast<std::size_t>(n));
      d.vectors.resize(static_cast<std::size_t>(n) * d.dim);
      for (std::size_t i = 0; i < n; ++i) {
        d.ids[i] = body.u64();
        for (std::size_t c = 0; c < d.dim; ++c) d.vectors[i * d.dim + c] = body.f32();
      }
      if (embedder && (embedder->dim() != d.dim || embedder->hash_key() != d.hash_key)) {
        throw FormatError("supplied embedder does not match the stored embeddings");
      }
      embedder_out = embedder ? *embedder : Embedder(d.dim, d.hash_key);
      embed = EmbedIndex::from_data(std::move(d));
    }
    // Unknown sections are skipped.
  }
  if (!in.done()) throw FormatError("trailing bytes after the last index section");
  if (!timestamps || !bm25) throw FormatError("index container lacks META or BM25 section");
  return RetrievalSnapshot::from_parts(std::move(*bm25), std::move(embed), std::move(*timestamps),
                                       embedder_out.value_or(embedder ? *embedder : Embedder()),
                                       mode);
}

void save_snapshot(const std::filesystem::path& path, const RetrievalSnapshot& snapshot) {
  const std::string bytes = encode_snapshot(snapshot);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write index " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw StorageError("short write to index " + path.string());
}

RetrievalSnapshot load_snapshot(const std::filesystem::path& path, const Embedder* embedder) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read index " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes, embedder);
}

}  // namespace gendetect
