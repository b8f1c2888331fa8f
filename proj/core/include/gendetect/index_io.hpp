#pragma once

#include <filesystem>
#include <string>

#include "gendetect/retrieval_index.hpp"

namespace gendetect {

inline constexpr char kIndexMagic[4] = {'V', 'D', 'X', '1'};
inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// Serializes a snapshot into the VDX1 container (layout in docs/formats.md).
std::string encode_snapshot(const RetrievalSnapshot& snapshot);
/// Throws FormatError on bad magic, an unsupported version, or a truncated
/// or inconsistent payload. `embedder` supplies any external vector table;
/// its dim and key must match the stored embedding section.
RetrievalSnapshot decode_snapshot(std::string_view bytes, const Embedder* embedder = nullptr);

void save_snapshot(const std::filesystem::path& path, const RetrievalSnapshot& snapshot);
RetrievalSnapshot load_snapshot(const std::filesystem::path& path,
                                const Embedder* embedder = nullptr);

}  // namespace gendetect
