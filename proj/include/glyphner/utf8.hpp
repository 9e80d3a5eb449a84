#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "glyphner/glyph_dict.hpp"

namespace glyphner::utf8 {

// Throws FormatError(kBadValue) on malformed, overlong or surrogate sequences.
std::vector<Codepoint> decode(std::string_view text);
void append(std::string& out, Codepoint cp);
std::string encode(Codepoint cp);
std::string encode(const std::vector<Codepoint>& cps);

}  // namespace glyphner::utf8
