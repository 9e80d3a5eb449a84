#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "glyphner/glyph_dict.hpp"
#include "glyphner/synthetic.hpp"
#include "glyphner/tensor.hpp"

namespace glyphner::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("glyphner_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline nd::Tensor random_tensor(const nd::Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  nd::Tensor t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline GlyphBitmap synthetic_glyph(std::uint64_t seed) { return synth::stroke_glyph(seed); }

// Dictionary of `count` synthetic glyphs keyed from U+4E00 upward.
inline GlyphDictionary synthetic_dictionary(std::size_t count, std::uint64_t seed = 7) {
  return synth::stroke_dictionary(count, seed);
}

}  // namespace glyphner::testing
