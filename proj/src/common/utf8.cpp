#include "glyphner/utf8.hpp"

#include <cstdint>

#include "glyphner/errors.hpp"

namespace glyphner::utf8 {

std::vector<Codepoint> decode(std::string_view text) {
  std::vector<Codepoint> out;
  out.reserve(text.size());
  std::size_t i = 0;
  auto fail = [&](const char* what) {
    throw FormatError(FormatFault::kBadValue, std::string("invalid UTF-8 (") + what + ") at byte " + std::to_string(i));
  };
  while (i < text.size()) {
    const auto b0 = static_cast<std::uint8_t>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      fail("bad lead byte");
    }
    if (i + len > text.size()) fail("truncated sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<std::uint8_t>(text[i + k]);
      if ((b & 0xC0) != 0x80) fail("bad continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len]) fail("overlong encoding");
    if (!is_scalar_value(cp)) fail("not a scalar value");
    out.push_back(cp);
    i += len;
  }
  return out;
}

void append(std::string& out, Codepoint cp) {
  if (!is_scalar_value(cp)) throw FormatError(FormatFault::kBadValue, "cannot encode a non-scalar codepoint");
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(Codepoint cp) {
  std::string s;
  append(s, cp);
  return s;
}

std::string encode(const std::vector<Codepoint>& cps) {
  std::string s;
  for (auto cp : cps) append(s, cp);
  return s;
}

}  // namespace glyphner::utf8
