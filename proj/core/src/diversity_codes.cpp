#include "gendetect/diversity_codes.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gendetect/errors.hpp"

namespace gendetect {
namespace {

// Counts inversions of `v` by merge sort; `v` is consumed.
std::uint64_t count_inversions(std::vector<std::size_t>& v) {
  std::vector<std::size_t> buf(v.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          inversions += mid - i;
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return inversions;
}

bool expect(std::string_view& s, std::string_view lit) {
  if (s.substr(0, lit.size()) != lit) return false;
  s.remove_prefix(lit.size());
  return true;
}

std::optional<int> take_int(std::string_view& s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr == s.data()) return std::nullopt;
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  return value;
}

bool on_scale(int v) {
  for (int p : kCodeScale) {
    if (p == v) return true;
  }
  return false;
}

}  // namespace

double lexical_diversity(const TokenSeq& src, const TokenSeq& tgt) {
  return 100.0 * (1.0 - unigram_f1(src, tgt));
}

double order_diversity(const TokenSeq& src, const TokenSeq& tgt) {
  std::unordered_map<std::string_view, std::size_t> first_in_src;
  first_in_src.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) first_in_src.emplace(src[i], i);

  // Source positions of shared types, in order of first appearance in tgt.
  std::vector<std::size_t> src_positions;
  std::unordered_map<std::string_view, bool> seen;
  for (const auto& tok : tgt) {
    if (!seen.emplace(tok, true).second) continue;
    if (auto it = first_in_src.find(tok); it != first_in_src.end()) {
      src_positions.push_back(it->second);
    }
  }
  const std::size_t n = src_positions.size();
  if (n < 2) return 0.0;
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double discordant = static_cast<double>(count_inversions(src_positions));
  // 50 * (1 - tau) with tau = (pairs - 2*discordant) / pairs.
  return 100.0 * discordant / pairs;
}

int to_scale(double raw) {
  if (!(raw >= 0.0 && raw <= 100.0)) {
    throw InvalidInput("diversity value outside [0, 100]");
  }
  // The epsilon keeps values that are midpoints in exact arithmetic (e.g.
  // 100 * (1 - 0.9)) from landing just below the rounding boundary.
  return 20 * static_cast<int>(std::floor(raw / 20.0 + 0.5 + 1e-9));
}

ControlCodes control_codes(const TokenSeq& src, const TokenSeq& tgt) {
  return {to_scale(lexical_diversity(src, tgt)), to_scale(order_diversity(src, tgt))};
}

std::string render_codes(ControlCodes codes, CodeConvention convention) {
  int l = codes.lexical;
  int o = codes.order;
  if (convention == CodeConvention::similarity) {
    l = 100 - l;
    o = 100 - o;
  }
  return "lexical = " + std::to_string(l) + ", order = " + std::to_string(o);
}

std::optional<ControlCodes> parse_codes(std::string_view text, CodeConvention convention,
                                        std::size_t* consumed) {
  std::string_view s = text;
  if (!expect(s, "lexical = ")) return std::nullopt;
  auto l = take_int(s);
  if (!l || !expect(s, ", order = ")) return std::nullopt;
  auto o = take_int(s);
  if (!o || !on_scale(*l) || !on_scale(*o)) return std::nullopt;
  if (consumed) *consumed = text.size() - s.size();
  if (convention == CodeConvention::similarity) return ControlCodes{100 - *l, 100 - *o};
  return ControlCodes{*l, *o};
}

}  // namespace gendetect
