#include <fstream>
#include <functional>

#include "doctest.h"
#include "glyphner/binary_io.hpp"
#include "glyphner/errors.hpp"
#include "glyphner/glyph_dict.hpp"
#include "test_util.hpp"

using namespace glyphner;
using glyphner::testing::synthetic_glyph;
using glyphner::testing::TempDir;

namespace {

FormatFault fault_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.fault();
  }
  FAIL("expected FormatError");
  return FormatFault::kMismatch;
}

}  // namespace

TEST_CASE("black and white constants") {
  const auto black = GlyphBitmap::black();
  const auto white = GlyphBitmap::white();
  for (std::size_t i = 0; i < kGlyphPixels; ++i) {
    CHECK(black.value(i) == 1.0);
    CHECK(white.value(i) == 0.0);
  }
}

TEST_CASE("classify_char") {
  GlyphDictionary dict;
  dict.insert(0x4E00, synthetic_glyph(1));
  CHECK(classify_char(0x4E00, dict) == CharClass::kChineseInDict);
  CHECK(classify_char(U'A', dict) == CharClass::kNonChinese);
  CHECK(classify_char(0x9FFF, dict) == CharClass::kChineseOov);
  CHECK(classify_char(0x3400, dict) == CharClass::kChineseOov);
  CHECK(classify_char(0xF900, dict) == CharClass::kChineseOov);
  CHECK(classify_char(0x3002, dict) == CharClass::kNonChinese);  // ideographic full stop
}

TEST_CASE("resolve_bitmap base mode") {
  GlyphDictionary dict;
  const auto g = synthetic_glyph(3);
  dict.insert(0x4E2D, g);
  CHECK(resolve_bitmap(0x4E2D, dict) == g);
  CHECK(resolve_bitmap(0x56FD, dict) == GlyphBitmap::black());
  CHECK(resolve_bitmap(U'A', dict) == GlyphBitmap::white());
  CHECK(resolve_bitmap(U'7', dict) == GlyphBitmap::white());
}

TEST_CASE("base dictionary rejects non-CJK keys") {
  GlyphDictionary dict;
  CHECK(fault_of([&] { dict.insert(U'A', synthetic_glyph(1)); }) == FormatFault::kBadValue);
  CHECK(fault_of([&] { dict.insert(0xD800, synthetic_glyph(1)); }) == FormatFault::kBadValue);
}

TEST_CASE("extended mode resolves stored non-CJK glyphs") {
  GlyphDictionary base;
  base.insert(0x4E00, synthetic_glyph(1));
  const auto a_glyph = synthetic_glyph(42);
  const auto ext = extend_dictionary(base, {{U'A', a_glyph}});
  CHECK(ext.mode() == DictMode::kExtended);
  CHECK(ext.size() == 2);
  CHECK(resolve_bitmap(U'A', ext) == a_glyph);
  CHECK(resolve_bitmap(U'B', ext) == GlyphBitmap::white());
  CHECK(resolve_bitmap(0x4E01, ext) == GlyphBitmap::black());
  CHECK(resolve_bitmap(0x4E00, ext) == resolve_bitmap(0x4E00, base));
}

TEST_CASE("extend with empty extra keeps entries") {
  GlyphDictionary base;
  base.insert(0x4E00, synthetic_glyph(1));
  base.insert(0x4E01, synthetic_glyph(2));
  const auto ext = extend_dictionary(base, {});
  CHECK(ext.mode() == DictMode::kExtended);
  CHECK(ext.entries() == base.entries());
}

TEST_CASE("extend collision names the codepoint") {
  GlyphDictionary base;
  base.insert(0x4E00, synthetic_glyph(1));
  try {
    extend_dictionary(base, {{0x4E00, synthetic_glyph(2)}});
    FAIL("expected collision");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kDuplicateKey);
    CHECK(std::string(e.what()).find("U+4E00") != std::string::npos);
  }
}

TEST_CASE("extension differs from base exactly where stored bitmap differs from fallback") {
  GlyphDictionary base;
  base.insert(0x4E00, synthetic_glyph(1));
  // One extra equals the fallback it replaces, the other does not.
  const std::map<Codepoint, GlyphBitmap> extra{{U'A', GlyphBitmap::white()}, {U'B', synthetic_glyph(9)}};
  const auto ext = extend_dictionary(base, extra);
  for (const auto& [cp, bitmap] : extra) {
    const bool differs = !(resolve_bitmap(cp, ext) == resolve_bitmap(cp, base));
    CHECK(differs == !(bitmap == resolve_bitmap(cp, base)));
  }
}

TEST_CASE("save/load round trip is bit exact") {
  TempDir dir("dict");
  auto dict = glyphner::testing::synthetic_dictionary(25);
  save_dictionary(dict, dir / "d.glyd");
  const auto loaded = load_dictionary(dir / "d.glyd");
  CHECK(loaded == dict);
  CHECK(io::read_file(dir / "d.glyd") == encode_dictionary(loaded));

  GlyphDictionary two;
  two.insert(0x4E00, synthetic_glyph(1));
  two.insert(0x4E01, synthetic_glyph(2));
  save_dictionary(two, dir / "two.glyd");
  CHECK(load_dictionary(dir / "two.glyd").size() == 2);
}

TEST_CASE("extended dictionary round trips as extended") {
  TempDir dir("dict_ext");
  GlyphDictionary base;
  base.insert(0x4E00, synthetic_glyph(1));
  const auto ext = extend_dictionary(base, {{U'A', synthetic_glyph(5)}});
  save_dictionary(ext, dir / "e.glyd");
  CHECK(load_dictionary(dir / "e.glyd") == ext);
}

TEST_CASE("empty dictionary file is header only") {
  const auto bytes = encode_dictionary(GlyphDictionary{});
  REQUIRE(bytes.size() == 9);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GLYD");
  CHECK(bytes[4] == 0x01);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 0);
  CHECK(decode_dictionary(bytes).empty());
}

TEST_CASE("count field and record layout") {
  GlyphDictionary dict;
  for (Codepoint cp = 0x4E00; cp < 0x4E00 + 4200; ++cp) dict.insert(cp, GlyphBitmap::white());
  const auto bytes = encode_dictionary(dict);
  io::ByteReader r(bytes, "test");
  r.expect_tag("GLYD");
  r.u8();
  CHECK(r.u32() == 4200);
  CHECK(r.u32() == 0x4E00);
  CHECK(bytes.size() == 9 + 4200 * (4 + kGlyphPixels));
}

TEST_CASE("pixel byte 255 loads as 1.0") {
  GlyphBitmap::Bytes px{};
  px[0] = 255;
  px[1] = 51;
  GlyphDictionary dict;
  dict.insert(0x4E00, GlyphBitmap(px));
  const auto loaded = decode_dictionary(encode_dictionary(dict));
  CHECK(loaded.find(0x4E00)->value(0) == 1.0);
  CHECK(loaded.find(0x4E00)->value(1) == doctest::Approx(0.2));
}

TEST_CASE("load errors are distinct") {
  TempDir dir("dict_err");
  CHECK_THROWS_AS(load_dictionary(dir / "missing.glyd"), IoError);

  auto good = encode_dictionary(glyphner::testing::synthetic_dictionary(2));
  auto bad_magic = good;
  std::copy_n("XXXX", 4, bad_magic.begin());
  CHECK(fault_of([&] { decode_dictionary(bad_magic); }) == FormatFault::kBadMagic);

  auto truncated = good;
  truncated.resize(truncated.size() - 100);
  CHECK(fault_of([&] { decode_dictionary(truncated); }) == FormatFault::kTruncated);

  auto bad_version = good;
  bad_version[4] = 9;
  CHECK(fault_of([&] { decode_dictionary(bad_version); }) == FormatFault::kBadVersion);

  // Duplicate: write the same record twice with count 2.
  io::ByteWriter w;
  w.tag("GLYD");
  w.u8(1);
  w.u32(2);
  for (int i = 0; i < 2; ++i) {
    w.u32(0x4E00);
    w.bytes(GlyphBitmap::black().bytes());
  }
  CHECK(fault_of([&] { decode_dictionary(w.buffer()); }) == FormatFault::kDuplicateKey);
}

TEST_CASE("pgm import inverts to ink convention") {
  TempDir dir("pgm");
  const auto g = synthetic_glyph(11);
  write_pgm(g, dir / "U+4E2D.pgm");
  write_pgm(GlyphBitmap::white(), dir / "U+0041.pgm");
  std::ofstream(dir / "notes.txt") << "ignored";
  {
    // Raw paper-white raster: every pixel 255 means no ink.
    std::ofstream raw(dir / "U+4E00.pgm", std::ios::binary);
    raw << "P5\n# comment\n64 64\n255\n";
    for (std::size_t i = 0; i < kGlyphPixels; ++i) raw.put(static_cast<char>(255));
  }
  const auto imported = import_pgm_directory(dir.path());
  REQUIRE(imported.size() == 3);
  CHECK(imported.at(0x4E2D) == g);
  CHECK(imported.at(0x4E00) == GlyphBitmap::white());
  CHECK(imported.contains(U'A'));
}

TEST_CASE("pgm with wrong size is rejected") {
  TempDir dir("pgm_bad");
  {
    std::ofstream raw(dir / "U+4E00.pgm", std::ios::binary);
    raw << "P5 32 32 255\n" << std::string(32 * 32, '\0');
  }
  CHECK_THROWS_AS(read_pgm(dir / "U+4E00.pgm"), FormatError);
}

TEST_CASE("codepoint file names") {
  CHECK(parse_codepoint_name("U+4E00") == Codepoint{0x4E00});
  CHECK(parse_codepoint_name("U+0041") == Codepoint{0x41});
  CHECK(parse_codepoint_name("U+1F600") == Codepoint{0x1F600});
  CHECK_FALSE(parse_codepoint_name("4E00").has_value());
  CHECK_FALSE(parse_codepoint_name("U+ZZZZ").has_value());
  CHECK_FALSE(parse_codepoint_name("U+D800").has_value());
}

TEST_CASE("resolution is total over a codepoint sweep") {
  auto dict = glyphner::testing::synthetic_dictionary(10);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> cp(0, 0x10FFFF);
  for (int i = 0; i < 5000; ++i) {
    const auto c = static_cast<Codepoint>(cp(rng));
    const auto& bm = resolve_bitmap(c, dict);
    switch (classify_char(c, dict)) {
      case CharClass::kNonChinese:
        CHECK(bm == GlyphBitmap::white());
        break;
      case CharClass::kChineseOov:
        CHECK(bm == GlyphBitmap::black());
        break;
      case CharClass::kChineseInDict:
        CHECK(bm == *dict.find(c));
        break;
    }
  }
}
