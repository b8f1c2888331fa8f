#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gendetect/detection.hpp"

namespace gendetect {

/// A generation submitted for storage; the store assigns the id.
struct NewRecord {
  std::int64_t timestamp = 0;
  std::string model_id;
  std::string prompt;
  std::string generation;
};

struct GenerationRecord {
  RecordId id = 0;
  std::int64_t timestamp = 0;
  std::string model_id;
  std::string prompt;
  std::string generation;

  bool operator==(const GenerationRecord&) const = default;
};

enum class IndexTextMode { generation_only, prompt_plus_generation };

std::string_view to_string(IndexTextMode mode) noexcept;
IndexTextMode parse_index_text_mode(std::string_view name);

/// The text retrieval sees for a record: the generation, or prompt + " " +
/// generation (just the generation when the prompt is empty).
std::string index_text(const GenerationRecord& record, IndexTextMode mode);

struct ScanFilter {
  std::optional<TimeWindow> window;
  std::optional<std::string> model_id;

  bool matches(const GenerationRecord& r) const;
};

/// Corpus log line codec. Fields are id, ts, model, prompt, gen separated by
/// TAB; backslash, TAB, LF and CR inside text fields are written as \\, \t,
/// \n and \r.
std::string encode_record_line(const GenerationRecord& record);
/// Throws FormatError on a malformed line (without trailing newline).
GenerationRecord decode_record_line(std::string_view line);

enum class SyncPolicy {
  fsync,  ///< fdatasync after every append
  flush,  ///< write(2) only
};

/// Append-only store of generations backed by a line-delimited log.
///
/// One appender at a time; readers run concurrently and see a prefix of the
/// log. Ids start at 1 and increase by one per append.
class CorpusStore {
 public:
  /// Opens (creating if needed) the log at `path` and replays it. A trailing
  /// partial line left by a crash is truncated away.
  static CorpusStore open(const std::filesystem::path& path, SyncPolicy sync = SyncPolicy::fsync);
  /// A store with no backing file.
  static CorpusStore in_memory();

  CorpusStore(CorpusStore&&) noexcept;
  CorpusStore& operator=(CorpusStore&&) noexcept;
  ~CorpusStore();

  /// Throws InvalidInput for an empty generation and StorageError when the
  /// log write fails; a failed append leaves the store unchanged.
  RecordId append(const NewRecord& record);

  /// Matching records in id order.
  std::vector<GenerationRecord> scan(const ScanFilter& filter = {}) const;
  /// Visits matching records in id order under a read lock.
  void for_each(const ScanFilter& filter,
                const std::function<void(const GenerationRecord&)>& visit) const;

  std::optional<GenerationRecord> get(RecordId id) const;
  std::size_t size() const;
  RecordId last_id() const;
  const std::optional<std::filesystem::path>& path() const;

  /// Writes every record to a fresh log at `path`.
  void export_to(const std::filesystem::path& path) const;

 private:
  struct Impl;
  explicit CorpusStore(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace gendetect
