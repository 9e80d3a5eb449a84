#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace glyphner {

using Codepoint = char32_t;

inline constexpr std::size_t kGlyphSide = 64;
inline constexpr std::size_t kGlyphPixels = kGlyphSide * kGlyphSide;

/// A 64x64 grayscale glyph, row-major. Stored as bytes where 255 is full ink;
/// `value()` exposes the normalized real in [0,1] (1.0 = black, 0.0 = white).
class GlyphBitmap {
 public:
  using Bytes = std::array<std::uint8_t, kGlyphPixels>;

  GlyphBitmap() { bytes_.fill(0); }
  explicit GlyphBitmap(const Bytes& bytes) : bytes_(bytes) {}

  // Throws FormatError(kMismatch) unless exactly 4096 bytes are given.
  static GlyphBitmap from_bytes(std::span<const std::uint8_t> bytes);
  // Quantizes values in [0,1] to the byte grid; values outside are clamped.
  static GlyphBitmap from_values(std::span<const double> values);

  static GlyphBitmap black();
  static GlyphBitmap white();

  double value(std::size_t index) const noexcept { return bytes_[index] / 255.0; }
  double at(std::size_t row, std::size_t col) const noexcept { return value(row * kGlyphSide + col); }
  std::uint8_t byte(std::size_t index) const noexcept { return bytes_[index]; }
  const Bytes& bytes() const noexcept { return bytes_; }

  // Appends the 4096 normalized values to `out`.
  void append_values(std::vector<double>& out) const;

  friend bool operator==(const GlyphBitmap&, const GlyphBitmap&) = default;

 private:
  Bytes bytes_;
};

enum class CharClass { kChineseInDict, kChineseOov, kNonChinese };

enum class DictMode { kBase, kExtended };

// CJK Unified Ideographs, Extension A, and Compatibility Ideographs.
constexpr bool is_cjk(Codepoint cp) noexcept {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0xF900 && cp <= 0xFAFF);
}

constexpr bool is_scalar_value(Codepoint cp) noexcept { return cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF); }

/// Codepoint -> bitmap store. Base dictionaries hold only CJK keys; extended
/// dictionaries may hold anything and change how non-CJK keys resolve.
/// Immutable once built; concurrent readers are safe.
class GlyphDictionary {
 public:
  explicit GlyphDictionary(DictMode mode = DictMode::kBase) : mode_(mode) {}

  // Throws FormatError(kDuplicateKey) on repeats and FormatError(kBadValue)
  // for non-CJK keys in base mode or non-scalar codepoints.
  void insert(Codepoint cp, const GlyphBitmap& bitmap);

  const GlyphBitmap* find(Codepoint cp) const noexcept;
  bool contains(Codepoint cp) const noexcept { return entries_.contains(cp); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  DictMode mode() const noexcept { return mode_; }
  const std::map<Codepoint, GlyphBitmap>& entries() const noexcept { return entries_; }

  friend bool operator==(const GlyphDictionary&, const GlyphDictionary&) = default;

 private:
  DictMode mode_;
  std::map<Codepoint, GlyphBitmap> entries_;
};

CharClass classify_char(Codepoint cp, const GlyphDictionary& dict) noexcept;

// Base: stored if in-dict CJK, BLACK if OOV CJK, WHITE otherwise.
// Extended: stored whenever the key exists, else BLACK for CJK and WHITE otherwise.
const GlyphBitmap& resolve_bitmap(Codepoint cp, const GlyphDictionary& dict) noexcept;

// Binary "GLYD" v1 format. The file carries no mode flag: a dictionary
// containing any non-CJK key loads as extended, otherwise as base. The two
// modes resolve identically when every key is CJK.
GlyphDictionary load_dictionary(const std::filesystem::path& path);
GlyphDictionary decode_dictionary(std::span<const std::uint8_t> data);
void save_dictionary(const GlyphDictionary& dict, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dictionary(const GlyphDictionary& dict);

// Throws FormatError(kDuplicateKey) naming the first colliding codepoint.
GlyphDictionary extend_dictionary(const GlyphDictionary& base, const std::map<Codepoint, GlyphBitmap>& extra);

// Binary PGM (P5), 64x64, maxval 255, 0 = white paper. Returns ink-convention bitmap.
GlyphBitmap read_pgm(const std::filesystem::path& path);
void write_pgm(const GlyphBitmap& bitmap, const std::filesystem::path& path);

// Reads every `U+XXXX.pgm` in `dir`; other files are ignored.
std::map<Codepoint, GlyphBitmap> import_pgm_directory(const std::filesystem::path& dir);

// Parses "U+4E00" style names; nullopt when the name does not match.
std::optional<Codepoint> parse_codepoint_name(std::string_view stem);

}  // namespace glyphner
