#include "glyphner/glyph_dict.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "glyphner/binary_io.hpp"
#include "glyphner/errors.hpp"

namespace glyphner {
namespace {

constexpr std::string_view kMagic = "GLYD";
constexpr std::uint8_t kVersion = 0x01;

std::string hex_name(Codepoint cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

GlyphBitmap filled(std::uint8_t v) {
  GlyphBitmap::Bytes b;
  b.fill(v);
  return GlyphBitmap(b);
}

const GlyphBitmap kBlack = filled(255);
const GlyphBitmap kWhite = filled(0);

}  // namespace

GlyphBitmap GlyphBitmap::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kGlyphPixels) {
    throw FormatError(FormatFault::kMismatch,
                      "glyph bitmap needs " + std::to_string(kGlyphPixels) + " bytes, got " + std::to_string(bytes.size()));
  }
  Bytes b;
  std::copy(bytes.begin(), bytes.end(), b.begin());
  return GlyphBitmap(b);
}

GlyphBitmap GlyphBitmap::from_values(std::span<const double> values) {
  if (values.size() != kGlyphPixels) {
    throw FormatError(FormatFault::kMismatch, "glyph bitmap needs 4096 values");
  }
  Bytes b;
  for (std::size_t i = 0; i < kGlyphPixels; ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    b[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return GlyphBitmap(b);
}

GlyphBitmap GlyphBitmap::black() { return kBlack; }
GlyphBitmap GlyphBitmap::white() { return kWhite; }

void GlyphBitmap::append_values(std::vector<double>& out) const {
  out.reserve(out.size() + kGlyphPixels);
  for (auto b : bytes_) out.push_back(b / 255.0);
}

void GlyphDictionary::insert(Codepoint cp, const GlyphBitmap& bitmap) {
  if (!is_scalar_value(cp)) {
    throw FormatError(FormatFault::kBadValue, "not a Unicode scalar value: " + hex_name(cp));
  }
  if (mode_ == DictMode::kBase && !is_cjk(cp)) {
    throw FormatError(FormatFault::kBadValue, "base dictionary accepts only CJK codepoints, got " + hex_name(cp));
  }
  if (!entries_.emplace(cp, bitmap).second) {
    throw FormatError(FormatFault::kDuplicateKey, "duplicate codepoint " + hex_name(cp));
  }
}

const GlyphBitmap* GlyphDictionary::find(Codepoint cp) const noexcept {
  auto it = entries_.find(cp);
  return it == entries_.end() ? nullptr : &it->second;
}

CharClass classify_char(Codepoint cp, const GlyphDictionary& dict) noexcept {
  if (!is_cjk(cp)) return CharClass::kNonChinese;
  return dict.contains(cp) ? CharClass::kChineseInDict : CharClass::kChineseOov;
}

const GlyphBitmap& resolve_bitmap(Codepoint cp, const GlyphDictionary& dict) noexcept {
  if (dict.mode() == DictMode::kExtended) {
    if (const auto* stored = dict.find(cp)) return *stored;
    return is_cjk(cp) ? kBlack : kWhite;
  }
  switch (classify_char(cp, dict)) {
    case CharClass::kChineseInDict:
      return *dict.find(cp);
    case CharClass::kChineseOov:
      return kBlack;
    case CharClass::kNonChinese:
      break;
  }
  return kWhite;
}

std::vector<std::uint8_t> encode_dictionary(const GlyphDictionary& dict) {
  io::ByteWriter w;
  w.tag(kMagic);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(dict.size()));
  for (const auto& [cp, bitmap] : dict.entries()) {  // std::map keeps ascending order
    w.u32(static_cast<std::uint32_t>(cp));
    w.bytes(bitmap.bytes());
  }
  return w.buffer();
}

GlyphDictionary decode_dictionary(std::span<const std::uint8_t> data) {
  io::ByteReader r(data, "glyph dictionary");
  r.expect_tag(kMagic);
  if (const auto v = r.u8(); v != kVersion) {
    throw FormatError(FormatFault::kBadVersion, "glyph dictionary: unsupported version " + std::to_string(v));
  }
  const auto count = r.u32();
  std::vector<std::pair<Codepoint, GlyphBitmap>> records;
  records.reserve(std::min<std::size_t>(count, r.remaining() / (4 + kGlyphPixels) + 1));
  bool any_non_cjk = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto cp = static_cast<Codepoint>(r.u32());
    records.emplace_back(cp, GlyphBitmap::from_bytes(r.bytes(kGlyphPixels)));
    any_non_cjk = any_non_cjk || !is_cjk(cp);
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatFault::kMismatch, "glyph dictionary: " + std::to_string(r.remaining()) +
                                                  " trailing bytes after " + std::to_string(count) + " records");
  }
  GlyphDictionary dict(any_non_cjk ? DictMode::kExtended : DictMode::kBase);
  for (const auto& [cp, bitmap] : records) dict.insert(cp, bitmap);
  return dict;
}

GlyphDictionary load_dictionary(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("glyph dictionary not found: " + path.string());
  return decode_dictionary(io::read_file(path));
}

void save_dictionary(const GlyphDictionary& dict, const std::filesystem::path& path) {
  io::write_file(path, encode_dictionary(dict));
}

GlyphDictionary extend_dictionary(const GlyphDictionary& base, const std::map<Codepoint, GlyphBitmap>& extra) {
  GlyphDictionary out(DictMode::kExtended);
  for (const auto& [cp, bitmap] : base.entries()) out.insert(cp, bitmap);
  for (const auto& [cp, bitmap] : extra) {
    if (base.contains(cp)) {
      throw FormatError(FormatFault::kDuplicateKey, "extension collides with base dictionary at " + hex_name(cp));
    }
    out.insert(cp, bitmap);
  }
  return out;
}

std::optional<Codepoint> parse_codepoint_name(std::string_view stem) {
  if (stem.size() < 6 || stem.size() > 8 || stem[0] != 'U' || stem[1] != '+') return std::nullopt;
  unsigned value = 0;
  const auto* first = stem.data() + 2;
  const auto* last = stem.data() + stem.size();
  auto [ptr, ec] = std::from_chars(first, last, value, 16);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  const auto cp = static_cast<Codepoint>(value);
  if (!is_scalar_value(cp)) return std::nullopt;
  return cp;
}

GlyphBitmap read_pgm(const std::filesystem::path& path) {
  const auto data = io::read_file(path);
  const std::string ctx = "pgm " + path.filename().string();
  // Header: "P5" whitespace width whitespace height whitespace maxval single-whitespace, '#' comments allowed.
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    int v = 0;
    const auto start = pos;
    while (pos < data.size() && std::isdigit(data[pos])) v = v * 10 + (data[pos++] - '0');
    if (pos == start) throw FormatError(FormatFault::kBadValue, ctx + ": malformed header");
    return v;
  };
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') {
    throw FormatError(FormatFault::kBadMagic, ctx + ": expected binary PGM (P5)");
  }
  pos = 2;
  const int width = read_int();
  const int height = read_int();
  const int maxval = read_int();
  if (width != static_cast<int>(kGlyphSide) || height != static_cast<int>(kGlyphSide)) {
    throw FormatError(FormatFault::kMismatch, ctx + ": expected 64x64, got " + std::to_string(width) + "x" +
                                                  std::to_string(height));
  }
  if (maxval != 255) throw FormatError(FormatFault::kBadValue, ctx + ": maxval must be 255");
  if (pos >= data.size() || !std::isspace(data[pos])) throw FormatError(FormatFault::kTruncated, ctx + ": no raster");
  ++pos;
  if (data.size() - pos < kGlyphPixels) throw FormatError(FormatFault::kTruncated, ctx + ": raster truncated");
  GlyphBitmap::Bytes ink;
  for (std::size_t i = 0; i < kGlyphPixels; ++i) ink[i] = static_cast<std::uint8_t>(255 - data[pos + i]);
  return GlyphBitmap(ink);
}

void write_pgm(const GlyphBitmap& bitmap, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.tag("P5\n64 64\n255\n");
  for (auto b : bitmap.bytes()) w.u8(static_cast<std::uint8_t>(255 - b));
  io::write_file(path, w.buffer());
}

std::map<Codepoint, GlyphBitmap> import_pgm_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<Codepoint, GlyphBitmap> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".pgm") continue;
    const auto cp = parse_codepoint_name(entry.path().stem().string());
    if (!cp) continue;
    if (!out.emplace(*cp, read_pgm(entry.path())).second) {
      throw FormatError(FormatFault::kDuplicateKey, "duplicate glyph file for " + hex_name(*cp));
    }
  }
  return out;
}

}  // namespace glyphner
