#pragma once

#include <filesystem>
#include <iostream>
#include <string>

#include "gendetect/watermark.hpp"
#include "json.hpp"

namespace gendetect::cli {

using nlohmann::ordered_json;

/// Whole file, or all of stdin when path is "-" or empty.
std::string read_input(const std::string& path);
std::string read_file(const std::filesystem::path& path);

/// Exactly one JSON document per invocation on stdout.
inline void emit(const ordered_json& doc) { std::cout << doc.dump(2) << '\n'; }

/// Stochastic commands report the seed they ran with; in text mode the
/// line goes to stderr so stdout stays pipeable.
inline void report_seed(std::uint64_t seed, bool json) {
  if (!json) std::cerr << "seed: " << seed << '\n';
}

struct WatermarkFlags {
  double gamma = 0.5;
  double delta = 2.0;
  std::uint64_t key = WatermarkParams{}.hash_key;
  std::uint32_t vocab = 1000;

  WatermarkParams params() const {
    WatermarkParams p;
    p.gamma = gamma;
    p.delta = delta;
    p.hash_key = key;
    p.vocab_size = vocab;
    p.validate();
    return p;
  }
};

ordered_json bench_run(const std::string& spec_path, const std::string& out_dir,
                       unsigned threads_override, bool json);

}  // namespace gendetect::cli
