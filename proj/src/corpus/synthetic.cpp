#include "glyphner/synthetic.hpp"

#include <algorithm>
#include <random>

#include "glyphner/errors.hpp"

namespace glyphner::synth {

GlyphBitmap stroke_glyph(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(8, 55);
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> strokes(3, 6);
  GlyphBitmap::Bytes px{};
  const int n = strokes(rng);
  for (int s = 0; s < n; ++s) {
    const int k = kind(rng);
    const int a = pos(rng), b = pos(rng), c = pos(rng);
    const int lo = std::min(b, c), hi = std::max(b, c);
    for (int t = lo; t <= hi; ++t)
      for (int w = -2; w <= 2; ++w) {
        int row = 0, col = 0;
        if (k == 0) row = a + w, col = t;                    // horizontal
        else if (k == 1) row = t, col = a + w;               // vertical
        else if (k == 2) row = t, col = t - lo + a / 2 + w;  // diagonal
        else row = t, col = hi - t + a / 2 + w;              // anti-diagonal
        if (row >= 0 && row < 64 && col >= 0 && col < 64) px[static_cast<std::size_t>(row * 64 + col)] = 255;
      }
  }
  return GlyphBitmap(px);
}

GlyphDictionary stroke_dictionary(std::size_t count, std::uint64_t seed) {
  GlyphDictionary dict;
  for (std::size_t i = 0; i < count; ++i) dict.insert(kFirstCodepoint + static_cast<Codepoint>(i), stroke_glyph(seed * 1000 + i));
  return dict;
}

corpus::Corpus make_corpus(const CorpusSpec& spec) {
  if (spec.sentences == 0 || spec.min_length < 3 || spec.max_length < spec.min_length) {
    throw ConfigError("synthetic corpus needs sentences >= 1 and 3 <= min_length <= max_length");
  }
  if (spec.per_chars == 0 || spec.loc_chars == 0 || spec.other_chars == 0) {
    throw ConfigError("synthetic corpus needs non-empty character pools");
  }
  std::mt19937_64 rng(spec.seed);
  auto pick = [&](std::size_t lo, std::size_t n) {
    return kFirstCodepoint + static_cast<Codepoint>(lo + std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  };
  std::uniform_int_distribution<std::size_t> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> mention(1, 3);
  std::bernoulli_distribution start_mention(0.3), is_per(0.5);

  corpus::Corpus c;
  c.scheme = corpus::Scheme::kIob;
  c.split = "synthetic";
  std::size_t line = 1;
  for (std::size_t s = 0; s < spec.sentences; ++s) {
    const std::size_t n = length(rng);
    corpus::Sentence sent;
    sent.line = line;
    // One guaranteed mention at a random offset, more by chance.
    const std::size_t forced = std::uniform_int_distribution<std::size_t>(0, n - 3)(rng);
    for (std::size_t t = 0; t < n;) {
      if (t == forced || (t > 0 && start_mention(rng))) {
        const bool per = is_per(rng);
        const std::size_t len = std::min(mention(rng), n - t);
        const std::string type = per ? "PER" : "LOC";
        for (std::size_t k = 0; k < len; ++k) {
          sent.chars.push_back(per ? pick(0, spec.per_chars) : pick(spec.per_chars, spec.loc_chars));
          sent.tags.push_back((k == 0 ? "B-" : "I-") + type);
        }
        t += len;
        if (t < n) {  // separate mentions so spans never merge
          sent.chars.push_back(pick(spec.per_chars + spec.loc_chars, spec.other_chars));
          sent.tags.emplace_back("O");
          ++t;
        }
      } else {
        sent.chars.push_back(pick(spec.per_chars + spec.loc_chars, spec.other_chars));
        sent.tags.emplace_back("O");
        ++t;
      }
    }
    line += sent.chars.size() + 1;
    c.sentences.push_back(std::move(sent));
  }
  return c;
}

Workspace make_workspace(const CorpusSpec& spec, std::size_t context_dim, std::size_t eval_sentences) {
  Workspace w;
  w.dict = stroke_dictionary(spec.alphabet());
  w.train = make_corpus(spec);
  w.train.split = "train";
  CorpusSpec held = spec;
  held.sentences = eval_sentences;
  held.seed = spec.seed + 1000;
  w.dev = make_corpus(held);
  w.dev.split = "dev";
  held.seed = spec.seed + 2000;
  w.test = make_corpus(held);
  w.test.split = "test";
  std::vector<Codepoint> cps;
  for (const auto& [cp, bitmap] : w.dict.entries()) cps.push_back(cp);
  std::mt19937_64 rng(spec.seed + 3000);
  w.context = ctx::ContextEmbeddings::random_table(context_dim, cps, rng);
  return w;
}

}  // namespace glyphner::synth
