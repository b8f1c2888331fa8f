#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "gendetect/text_normalize.hpp"

namespace gendetect {

inline constexpr std::array<int, 6> kCodeScale = {0, 20, 40, 60, 80, 100};

/// Lexical (L) and order (O) diversity on the 6-point scale.
struct ControlCodes {
  int lexical = 0;
  int order = 0;

  bool operator==(const ControlCodes&) const = default;
};

/// How codes are written out. `diversity` renders L and O as computed;
/// `similarity` renders 100-L and 100-O, the convention of the released
/// paraphraser checkpoints.
enum class CodeConvention { diversity, similarity };

/// 100 * (1 - unigram_f1(src, tgt)).
double lexical_diversity(const TokenSeq& src, const TokenSeq& tgt);

/// 50 * (1 - tau_a) over the first-occurrence positions of the token types
/// shared by both sequences; 0 when fewer than two types are shared.
double order_diversity(const TokenSeq& src, const TokenSeq& tgt);

/// Nearest multiple of 20; midpoints round up. Throws InvalidInput outside
/// [0, 100].
int to_scale(double raw);

ControlCodes control_codes(const TokenSeq& src, const TokenSeq& tgt);

/// "lexical = L, order = O"
std::string render_codes(ControlCodes codes, CodeConvention convention = CodeConvention::diversity);

/// Inverse of render_codes for the given convention; nullopt if `text` does
/// not start with a well-formed code prefix. On success `consumed` receives
/// the prefix length.
std::optional<ControlCodes> parse_codes(std::string_view text,
                                        CodeConvention convention = CodeConvention::diversity,
                                        std::size_t* consumed = nullptr);

}  // namespace gendetect
