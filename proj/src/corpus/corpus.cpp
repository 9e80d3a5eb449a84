#include "glyphner/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "glyphner/binary_io.hpp"
#include "glyphner/errors.hpp"
#include "glyphner/utf8.hpp"

namespace glyphner::corpus {
namespace {

bool allowed_prefix(char p, Scheme scheme) {
  switch (p) {
    case 'B':
    case 'I':
      return true;
    case 'E':
    case 'S':
      return scheme == Scheme::kBioes;
    default:
      return false;
  }
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view trim_right(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string to_string(Scheme scheme) { return scheme == Scheme::kIob ? "iob" : "bioes"; }

Scheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "iob") return Scheme::kIob;
  if (lower == "bioes") return Scheme::kBioes;
  throw ConfigError("unknown tag scheme '" + std::string(name) + "' (expected iob or bioes)");
}

std::optional<std::pair<char, std::string>> split_tag(std::string_view tag, Scheme scheme) {
  if (tag == "O") return std::pair<char, std::string>{'O', ""};
  if (tag.size() < 3 || tag[1] != '-' || !allowed_prefix(tag[0], scheme)) return std::nullopt;
  return std::pair<char, std::string>{tag[0], std::string(tag.substr(2))};
}

std::vector<Span> extract_spans(const std::vector<std::string>& tags, Scheme scheme) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto close = [&] {
    if (open) spans.push_back(*open);
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto parsed = split_tag(tags[i], scheme);
    if (!parsed || parsed->first == 'O') {
      close();
      continue;
    }
    const auto& [prefix, type] = *parsed;
    const bool continues = open && open->type == type && (prefix == 'I' || prefix == 'E');
    if (continues) {
      open->end = i;
    } else {
      close();
      open = Span{i, i, type};
    }
    if (prefix == 'E' || prefix == 'S') close();
  }
  close();
  return spans;
}

std::vector<std::string> tags_from_spans(std::size_t length, const std::vector<Span>& spans, Scheme scheme) {
  std::vector<std::string> tags(length, "O");
  for (const auto& s : spans) {
    if (s.end < s.start || s.end >= length) throw ShapeError("span outside the sentence");
    if (scheme == Scheme::kBioes && s.start == s.end) {
      tags[s.start] = "S-" + s.type;
      continue;
    }
    tags[s.start] = "B-" + s.type;
    for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = "I-" + s.type;
    if (scheme == Scheme::kBioes) tags[s.end] = "E-" + s.type;
  }
  return tags;
}

std::vector<std::size_t> scheme_violations(const std::vector<std::string>& tags, Scheme scheme) {
  std::vector<std::size_t> bad;
  std::vector<std::optional<std::pair<char, std::string>>> parsed;
  parsed.reserve(tags.size());
  for (const auto& t : tags) parsed.push_back(split_tag(t, scheme));
  auto inside_of = [&](std::size_t i, const std::string& type) {
    return parsed[i] && (parsed[i]->first == 'B' || parsed[i]->first == 'I') && parsed[i]->second == type;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!parsed[i]) {
      bad.push_back(i);
      continue;
    }
    const auto& [prefix, type] = *parsed[i];
    const bool after_open = i > 0 && inside_of(i - 1, type);
    bool ok = true;
    if (prefix == 'I' || prefix == 'E') ok = after_open;
    if (scheme == Scheme::kBioes && (prefix == 'B' || prefix == 'I')) {
      // An open BIOES span must continue with I or E of the same type.
      ok = ok && i + 1 < tags.size() && parsed[i + 1] && (parsed[i + 1]->first == 'I' || parsed[i + 1]->first == 'E') &&
           parsed[i + 1]->second == type;
    }
    if (!ok) bad.push_back(i);
  }
  return bad;
}

std::size_t Corpus::token_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.chars.size();
  return n;
}

std::vector<std::string> Corpus::tag_set() const {
  std::set<std::string> tags;
  for (const auto& s : sentences) tags.insert(s.tags.begin(), s.tags.end());
  return {tags.begin(), tags.end()};
}

Corpus parse_conll_text(std::string_view text, Scheme scheme, const std::string& source) {
  Corpus corpus;
  corpus.scheme = scheme;
  Sentence current;
  auto flush = [&] {
    if (current.chars.empty()) return;
    for (std::size_t pos : scheme_violations(current.tags, scheme)) {
      corpus.violations.push_back({current.line + pos, current.tags[pos]});
    }
    corpus.sentences.push_back(std::move(current));
    current = Sentence{};
  };
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim_right(raw);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      continue;
    }
    if (line.starts_with("-DOCSTART-")) continue;
    const auto fields = split_fields(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() != 2) {
      throw FormatError(FormatFault::kBadValue,
                        where + ": expected 2 fields (char, tag), got " + std::to_string(fields.size()));
    }
    std::vector<Codepoint> cps;
    try {
      cps = utf8::decode(fields[0]);
    } catch (const FormatError& e) {
      throw FormatError(FormatFault::kBadValue, where + ": " + e.what());
    }
    if (cps.size() != 1) {
      throw FormatError(FormatFault::kBadValue, where + ": char field must be a single codepoint, got '" +
                                                    std::string(fields[0]) + "'");
    }
    if (current.chars.empty()) current.line = line_no;
    current.chars.push_back(cps[0]);
    current.tags.emplace_back(fields[1]);
  }
  flush();
  if (corpus.sentences.empty()) throw FormatError(FormatFault::kTruncated, source + ": corpus has no sentences");
  return corpus;
}

Corpus parse_conll(const std::filesystem::path& path, Scheme scheme, std::string split) {
  if (!std::filesystem::exists(path)) throw IoError("corpus not found: " + path.string());
  const auto bytes = io::read_file(path);
  Corpus c = parse_conll_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), scheme,
                              path.string());
  c.split = std::move(split);
  return c;
}

std::string serialize_conll(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.chars.size(); ++i) {
      utf8::append(out, s.chars[i]);
      out += '\t';
      out += s.tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_conll(const Corpus& corpus, const std::filesystem::path& path) {
  const auto text = serialize_conll(corpus);
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Corpus convert_scheme(const Corpus& corpus, Scheme target) {
  Corpus out = corpus;
  out.scheme = target;
  out.violations.clear();
  for (auto& s : out.sentences) {
    for (std::size_t i = 0; i < s.tags.size(); ++i) {
      if (!split_tag(s.tags[i], corpus.scheme)) {
        throw FormatError(FormatFault::kBadValue, "cannot convert tag '" + s.tags[i] + "' at line " +
                                                      std::to_string(s.line + i) + " from " +
                                                      to_string(corpus.scheme));
      }
    }
    s.tags = tags_from_spans(s.chars.size(), extract_spans(s.tags, corpus.scheme), target);
  }
  return out;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
  tokens += o.tokens;
  entities += o.entities;
  sentences += o.sentences;
  return *this;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.sentences = corpus.sentences.size();
  for (const auto& s : corpus.sentences) {
    st.tokens += s.chars.size();
    st.entities += extract_spans(s.tags, corpus.scheme).size();
  }
  return st;
}

std::pair<Corpus, Corpus> carve_dev(const Corpus& test, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("dev fraction must lie in [0,1]");
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(test.sentences.size())));
  Corpus dev, rest;
  dev.scheme = rest.scheme = test.scheme;
  dev.split = "dev";
  rest.split = test.split;
  dev.sentences.assign(test.sentences.begin(), test.sentences.begin() + static_cast<std::ptrdiff_t>(n));
  rest.sentences.assign(test.sentences.begin() + static_cast<std::ptrdiff_t>(n), test.sentences.end());
  return {std::move(dev), std::move(rest)};
}

TagVocab::TagVocab(std::vector<std::string> tags) {
  std::set<std::string> uniq(tags.begin(), tags.end());
  uniq.erase("O");
  tags_.push_back("O");
  tags_.insert(tags_.end(), uniq.begin(), uniq.end());
}

TagVocab TagVocab::from_corpora(const std::vector<const Corpus*>& corpora) {
  std::vector<std::string> all;
  for (const auto* c : corpora) {
    const auto ts = c->tag_set();
    all.insert(all.end(), ts.begin(), ts.end());
  }
  return TagVocab(std::move(all));
}

std::optional<std::size_t> TagVocab::find(std::string_view tag) const {
  auto it = std::find(tags_.begin(), tags_.end(), tag);
  if (it == tags_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - tags_.begin());
}

std::size_t TagVocab::index(std::string_view tag) const {
  if (auto i = find(tag)) return *i;
  throw ConfigError("tag '" + std::string(tag) + "' is not in the model's tag set");
}

std::size_t Batch::length(std::size_t b) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < max_len; ++t) n += mask[b * max_len + t];
  return n;
}

std::vector<Batch> make_batches(const Corpus& corpus, const TagVocab& vocab, std::size_t size,
                                std::optional<std::uint64_t> seed) {
  if (size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(corpus.sentences.size());
  std::iota(order.begin(), order.end(), 0);
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += size) {
    Batch b;
    b.sentence_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + size)));
    for (auto id : b.sentence_ids) b.max_len = std::max(b.max_len, corpus.sentences[id].chars.size());
    b.chars.assign(b.size() * b.max_len, 0);
    b.tags.assign(b.size() * b.max_len, -1);
    b.mask.assign(b.size() * b.max_len, 0);
    for (std::size_t r = 0; r < b.size(); ++r) {
      const auto& s = corpus.sentences[b.sentence_ids[r]];
      for (std::size_t t = 0; t < s.chars.size(); ++t) {
        b.chars[r * b.max_len + t] = s.chars[t];
        b.tags[r * b.max_len + t] = static_cast<int>(vocab.index(s.tags[t]));
        b.mask[r * b.max_len + t] = 1;
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace glyphner::corpus
