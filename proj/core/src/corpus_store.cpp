#include "gendetect/corpus_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <mutex>
#include <shared_mutex>

#include "gendetect/errors.hpp"

namespace gendetect {
namespace {

void escape_into(std::string& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
}

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (++i == s.size()) throw FormatError("dangling escape in corpus line");
    switch (s[i]) {
      case '\\': out.push_back('\\'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: throw FormatError("unknown escape in corpus line");
    }
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view s, const char* what) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError(std::string("bad ") + what + " field in corpus line");
  }
  return v;
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError(std::string("corpus log write failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string_view to_string(IndexTextMode mode) noexcept {
  return mode == IndexTextMode::generation_only ? "generation_only" : "prompt_plus_generation";
}

IndexTextMode parse_index_text_mode(std::string_view name) {
  if (name == "generation_only") return IndexTextMode::generation_only;
  if (name == "prompt_plus_generation") return IndexTextMode::prompt_plus_generation;
  throw InvalidInput("unknown index text mode: " + std::string(name));
}

std::string index_text(const GenerationRecord& record, IndexTextMode mode) {
  if (mode == IndexTextMode::generation_only || record.prompt.empty()) return record.generation;
  return record.prompt + " " + record.generation;
}

bool ScanFilter::matches(const GenerationRecord& r) const {
  if (window && !window->contains(r.timestamp)) return false;
  if (model_id && r.model_id != *model_id) return false;
  return true;
}

std::string encode_record_line(const GenerationRecord& record) {
  std::string line = std::to_string(record.id);
  line.push_back('\t');
  line += std::to_string(record.timestamp);
  line.push_back('\t');
  escape_into(line, record.model_id);
  line.push_back('\t');
  escape_into(line, record.prompt);
  line.push_back('\t');
  escape_into(line, record.generation);
  return line;
}

GenerationRecord decode_record_line(std::string_view line) {
  std::string_view fields[5];
  std::size_t start = 0;
  for (int f = 0; f < 5; ++f) {
    const auto tab = line.find('\t', start);
    if ((f < 4) == (tab == std::string_view::npos)) {
      throw FormatError("corpus line must have exactly 5 tab-separated fields");
    }
    const auto end = f < 4 ? tab : line.size();
    fields[f] = line.substr(start, end - start);
    start = end + 1;
  }
  GenerationRecord r;
  r.id = parse_int<RecordId>(fields[0], "id");
  r.timestamp = parse_int<std::int64_t>(fields[1], "ts");
  r.model_id = unescape(fields[2]);
  r.prompt = unescape(fields[3]);
  r.generation = unescape(fields[4]);
  return r;
}

struct CorpusStore::Impl {
  mutable std::shared_mutex mu;
  std::vector<GenerationRecord> records;
  std::optional<std::filesystem::path> path;
  SyncPolicy sync = SyncPolicy::fsync;
  int fd = -1;

  ~Impl() {
    if (fd >= 0) ::close(fd);
  }
};

CorpusStore::CorpusStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
CorpusStore::CorpusStore(CorpusStore&&) noexcept = default;
CorpusStore& CorpusStore::operator=(CorpusStore&&) noexcept = default;
CorpusStore::~CorpusStore() = default;

CorpusStore CorpusStore::in_memory() { return CorpusStore(std::make_unique<Impl>()); }

CorpusStore CorpusStore::open(const std::filesystem::path& path, SyncPolicy sync) {
  auto impl = std::make_unique<Impl>();
  impl->path = path;
  impl->sync = sync;

  std::uintmax_t complete_bytes = 0;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read corpus log " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;  // torn tail
      ++line_no;
      std::string_view line(content.data() + pos, nl - pos);
      GenerationRecord r;
      try {
        r = decode_record_line(line);
      } catch (const FormatError& e) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!impl->records.empty() && r.id <= impl->records.back().id) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": ids not increasing");
      }
      impl->records.push_back(std::move(r));
      pos = nl + 1;
    }
    complete_bytes = pos;
    if (complete_bytes != content.size()) std::filesystem::resize_file(path, complete_bytes);
  }

  impl->fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (impl->fd < 0) {
    throw StorageError("cannot open corpus log " + path.string() + ": " + std::strerror(errno));
  }
  return CorpusStore(std::move(impl));
}

RecordId CorpusStore::append(const NewRecord& record) {
  if (record.generation.empty()) throw InvalidInput("generation must be non-empty");
  std::unique_lock lock(impl_->mu);
  GenerationRecord r{impl_->records.empty() ? 1 : impl_->records.back().id + 1, record.timestamp,
                     record.model_id, record.prompt, record.generation};
  if (impl_->fd >= 0) {
    std::string line = encode_record_line(r);
    line.push_back('\n');
    write_all(impl_->fd, line);
    if (impl_->sync == SyncPolicy::fsync && ::fdatasync(impl_->fd) != 0) {
      throw StorageError(std::string("corpus log sync failed: ") + std::strerror(errno));
    }
  }
  impl_->records.push_back(std::move(r));
  return impl_->records.back().id;
}

std::vector<GenerationRecord> CorpusStore::scan(const ScanFilter& filter) const {
  std::vector<GenerationRecord> out;
  for_each(filter, [&out](const GenerationRecord& r) { out.push_back(r); });
  return out;
}

void CorpusStore::for_each(const ScanFilter& filter,
                           const std::function<void(const GenerationRecord&)>& visit) const {
  std::shared_lock lock(impl_->mu);
  for (const auto& r : impl_->records) {
    if (filter.matches(r)) visit(r);
  }
}

std::optional<GenerationRecord> CorpusStore::get(RecordId id) const {
  std::shared_lock lock(impl_->mu);
  auto it = std::lower_bound(impl_->records.begin(), impl_->records.end(), id,
                             [](const GenerationRecord& r, RecordId v) { return r.id < v; });
  if (it == impl_->records.end() || it->id != id) return std::nullopt;
  return *it;
}

std::size_t CorpusStore::size() const {
  std::shared_lock lock(impl_->mu);
  return impl_->records.size();
}

RecordId CorpusStore::last_id() const {
  std::shared_lock lock(impl_->mu);
  return impl_->records.empty() ? 0 : impl_->records.back().id;
}

const std::optional<std::filesystem::path>& CorpusStore::path() const { return impl_->path; }

void CorpusStore::export_to(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write " + path.string());
  std::shared_lock lock(impl_->mu);
  for (const auto& r : impl_->records) out << encode_record_line(r) << '\n';
  out.flush();
  if (!out) throw StorageError("short write to " + path.string());
}

}  // namespace gendetect
