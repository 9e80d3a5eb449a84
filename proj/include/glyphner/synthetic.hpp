#pragma once

#include <cstddef>
#include <cstdint>

#include "glyphner/corpus.hpp"
#include "glyphner/embeddings.hpp"
#include "glyphner/glyph_dict.hpp"

namespace glyphner::synth {

inline constexpr Codepoint kFirstCodepoint = 0x4E00;

// Stroke-based pseudo glyph: a few thick horizontal, vertical and diagonal
// bars, deterministic in `seed`.
GlyphBitmap stroke_glyph(std::uint64_t seed);

// `count` stroke glyphs keyed from U+4E00 upward.
GlyphDictionary stroke_dictionary(std::size_t count, std::uint64_t seed = 7);

struct CorpusSpec {
  std::size_t sentences = 20;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  // Disjoint character pools starting at U+4E00: PER, then LOC, then filler.
  std::size_t per_chars = 8;
  std::size_t loc_chars = 8;
  std::size_t other_chars = 16;
  std::uint64_t seed = 1;

  std::size_t alphabet() const noexcept { return per_chars + loc_chars + other_chars; }
};

// IOB-tagged sentences with PER and LOC mentions of 1-3 characters. Every
// sentence holds at least one mention.
corpus::Corpus make_corpus(const CorpusSpec& spec);

// Everything a synthetic run needs: a stroke dictionary covering the
// alphabet, train/dev/test splits drawn with different seeds, and random
// static context vectors.
struct Workspace {
  GlyphDictionary dict;
  corpus::Corpus train;
  corpus::Corpus dev;
  corpus::Corpus test;
  ctx::ContextEmbeddings context;
};

Workspace make_workspace(const CorpusSpec& spec = {}, std::size_t context_dim = 16, std::size_t eval_sentences = 10);

}  // namespace glyphner::synth
