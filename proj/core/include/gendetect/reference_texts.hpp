#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gendetect {

/// One hundred short human-written English paragraphs compiled into the
/// library. Used to calibrate retrieval thresholds when none is configured.
std::span<const std::string> bundled_human_texts();

/// One text per non-empty line. A path ending in ".jsonl" holds one JSON
/// object per line with a "text" field. Throws StorageError when the file
/// cannot be read and InvalidInput on a malformed line.
std::vector<std::string> read_text_lines(const std::filesystem::path& path);

}  // namespace gendetect
