#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "glyphner/glyph_dict.hpp"

namespace glyphner::corpus {

enum class Scheme { kIob, kBioes };

std::string to_string(Scheme scheme);
// Accepts "iob" and "bioes" (any case); throws ConfigError otherwise.
Scheme parse_scheme(std::string_view name);

// Inclusive token range with an entity type.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;
  auto operator<=>(const Span&) const = default;
};

// Splits "B-PER" into ('B', "PER"); "O" gives ('O', ""). Returns nullopt for
// anything else, including prefixes the scheme does not define.
std::optional<std::pair<char, std::string>> split_tag(std::string_view tag, Scheme scheme);

// Maximal spans. An I- or E- tag that cannot continue the open span starts a
// new one; unrecognized tags act as O.
std::vector<Span> extract_spans(const std::vector<std::string>& tags, Scheme scheme);

// Canonical tags for non-overlapping spans over `length` tokens.
std::vector<std::string> tags_from_spans(std::size_t length, const std::vector<Span>& spans, Scheme scheme);

// Token positions whose tag breaks the scheme's grammar.
std::vector<std::size_t> scheme_violations(const std::vector<std::string>& tags, Scheme scheme);

struct Sentence {
  std::vector<Codepoint> chars;
  std::vector<std::string> tags;
  std::size_t line = 0;  // 1-based line of the first token, 0 when synthesized
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Violation {
  std::size_t line = 0;
  std::string tag;
};

struct Corpus {
  std::vector<Sentence> sentences;
  Scheme scheme = Scheme::kIob;
  std::string split;
  std::vector<Violation> violations;

  std::size_t token_count() const noexcept;
  // Sorted distinct tags.
  std::vector<std::string> tag_set() const;
};

// One `char<TAB or space>tag` per line, blank line between sentences.
// Throws FormatError with the line number for a line without exactly two
// fields or a char field that is not one codepoint, and for an empty corpus.
// Scheme violations are recorded, not thrown.
Corpus parse_conll_text(std::string_view text, Scheme scheme, const std::string& source = "<memory>");
Corpus parse_conll(const std::filesystem::path& path, Scheme scheme, std::string split = {});

std::string serialize_conll(const Corpus& corpus);
void write_conll(const Corpus& corpus, const std::filesystem::path& path);

// Re-tags every sentence; span sets are preserved. Throws FormatError on a
// tag the source scheme cannot parse.
Corpus convert_scheme(const Corpus& corpus, Scheme target);

struct CorpusStats {
  std::size_t tokens = 0;
  std::size_t entities = 0;
  std::size_t sentences = 0;
  CorpusStats& operator+=(const CorpusStats& o);
  friend CorpusStats operator+(CorpusStats a, const CorpusStats& b) { return a += b; }
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats corpus_stats(const Corpus& corpus);

// Splits off the first floor(fraction * n) sentences as a dev set; returns
// (dev, remainder).
std::pair<Corpus, Corpus> carve_dev(const Corpus& test, double fraction = 0.1);

// Tag inventory with "O" at index 0 and the rest sorted.
class TagVocab {
 public:
  TagVocab() = default;
  explicit TagVocab(std::vector<std::string> tags);
  static TagVocab from_corpora(const std::vector<const Corpus*>& corpora);

  std::optional<std::size_t> find(std::string_view tag) const;
  // Throws ConfigError for a tag outside the inventory.
  std::size_t index(std::string_view tag) const;
  const std::string& tag(std::size_t i) const { return tags_.at(i); }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  std::size_t size() const noexcept { return tags_.size(); }
  friend bool operator==(const TagVocab&, const TagVocab&) = default;

 private:
  std::vector<std::string> tags_;
};

inline constexpr std::size_t kDefaultBatchSize = 8;

struct Batch {
  std::vector<std::size_t> sentence_ids;
  std::size_t max_len = 0;
  std::vector<Codepoint> chars;   // [B, max_len], 0 on padding
  std::vector<int> tags;          // [B, max_len], -1 on padding
  std::vector<std::uint8_t> mask; // [B, max_len], 1 on real tokens
  std::size_t size() const noexcept { return sentence_ids.size(); }
  std::size_t length(std::size_t b) const;
};

// Partitions the corpus into batches of at most `size` sentences, shuffled
// with `seed` when given. Throws ConfigError when size is 0 or a tag is
// missing from `vocab`.
std::vector<Batch> make_batches(const Corpus& corpus, const TagVocab& vocab, std::size_t size = kDefaultBatchSize,
                                std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace glyphner::corpus
