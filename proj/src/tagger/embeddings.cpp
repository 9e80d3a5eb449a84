#include "glyphner/embeddings.hpp"

#include <algorithm>
#include <string>

#include "glyphner/binary_io.hpp"
#include "glyphner/errors.hpp"

namespace glyphner::ctx {
namespace {

constexpr std::string_view kStaticMagic = "CEMB";
constexpr std::string_view kSequenceMagic = "CSEQ";

void check_dim(std::size_t dim) {
  if (dim == 0) throw ConfigError("context embedding dim must be positive");
}

}  // namespace

ContextEmbeddings ContextEmbeddings::from_table(std::size_t dim, Table table) {
  check_dim(dim);
  for (const auto& [cp, v] : table) {
    if (v.size() != dim) {
      throw ConfigError("context vector for U+" + std::to_string(static_cast<std::uint32_t>(cp)) + " has extent " +
                        std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
  }
  ContextEmbeddings e;
  e.kind_ = ContextKind::kStatic;
  e.dim_ = dim;
  e.table_ = std::move(table);
  return e;
}

ContextEmbeddings ContextEmbeddings::from_sequences(std::size_t dim, std::vector<std::vector<float>> sequences) {
  check_dim(dim);
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    if (sequences[s].size() % dim != 0) {
      throw ConfigError("contextual sentence " + std::to_string(s) + " is not a whole number of vectors");
    }
  }
  ContextEmbeddings e;
  e.kind_ = ContextKind::kContextual;
  e.dim_ = dim;
  e.sequences_ = std::move(sequences);
  return e;
}

ContextEmbeddings ContextEmbeddings::random_table(std::size_t dim, std::span<const Codepoint> codepoints,
                                                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Table t;
  for (auto cp : codepoints) {
    if (t.contains(cp)) continue;
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(normal(rng));
    t.emplace(cp, std::move(v));
  }
  return from_table(dim, std::move(t));
}

void ContextEmbeddings::check_alignment(const corpus::Corpus& corpus) const {
  if (kind_ == ContextKind::kStatic) return;
  const std::string where = corpus.split.empty() ? std::string("corpus") : corpus.split + " corpus";
  if (sequences_.size() != corpus.sentences.size()) {
    throw FormatError(FormatFault::kMismatch, "contextual embeddings hold " + std::to_string(sequences_.size()) +
                                                  " sentences but the " + where + " has " +
                                                  std::to_string(corpus.sentences.size()));
  }
  for (std::size_t s = 0; s < sequences_.size(); ++s) {
    const auto tokens = sequences_[s].size() / dim_;
    if (tokens != corpus.sentences[s].chars.size()) {
      throw FormatError(FormatFault::kMismatch, "contextual embeddings: sentence " + std::to_string(s) + " has " +
                                                    std::to_string(tokens) + " vectors for " +
                                                    std::to_string(corpus.sentences[s].chars.size()) + " tokens");
    }
  }
}

nd::Tensor ContextEmbeddings::sentence(const corpus::Corpus& corpus, std::size_t index) const {
  const auto& chars = corpus.sentences.at(index).chars;
  nd::Tensor out({chars.size(), dim_}, 0.0);
  if (kind_ == ContextKind::kContextual) {
    const auto& seq = sequences_.at(index);
    if (seq.size() != chars.size() * dim_) throw FormatError(FormatFault::kMismatch, "contextual embeddings misaligned");
    std::ranges::copy(seq, out.ptr());
    return out;
  }
  for (std::size_t t = 0; t < chars.size(); ++t) {
    if (const auto it = table_.find(chars[t]); it != table_.end()) std::ranges::copy(it->second, out.ptr() + t * dim_);
  }
  return out;
}

ContextEmbeddings parse_context_embeddings(std::span<const std::uint8_t> data, const std::string& source) {
  io::ByteReader r(data, source);
  if (data.size() < 4) throw FormatError(FormatFault::kTruncated, source + ": too short for an embedding file");
  const std::string magic(data.begin(), data.begin() + 4);
  if (magic != kStaticMagic && magic != kSequenceMagic) {
    throw FormatError(FormatFault::kBadMagic, source + ": expected CEMB or CSEQ, found '" + magic + "'");
  }
  r.expect_tag(magic);
  const std::size_t dim = r.u32();
  if (dim == 0) throw FormatError(FormatFault::kBadValue, source + ": embedding dim is 0");
  const std::uint32_t count = r.u32();
  auto read_reals = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = r.f32();
    return v;
  };
  ContextEmbeddings out;
  if (magic == kStaticMagic) {
    ContextEmbeddings::Table table;
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto cp = static_cast<Codepoint>(r.u32());
      if (!table.emplace(cp, read_reals(dim)).second) {
        throw FormatError(FormatFault::kDuplicateKey,
                          source + ": duplicate codepoint U+" + std::to_string(static_cast<std::uint32_t>(cp)));
      }
    }
    out = ContextEmbeddings::from_table(dim, std::move(table));
  } else {
    std::vector<std::vector<float>> seqs;
    for (std::uint32_t s = 0; s < count; ++s) {
      const std::size_t tokens = r.u32();
      if (tokens * dim * 4 > r.remaining()) {
        throw FormatError(FormatFault::kTruncated, source + ": sentence " + std::to_string(s) + " runs past the end");
      }
      seqs.push_back(read_reals(tokens * dim));
    }
    out = ContextEmbeddings::from_sequences(dim, std::move(seqs));
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatFault::kMismatch, source + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return out;
}

std::vector<std::uint8_t> serialize_context_embeddings(const ContextEmbeddings& emb) {
  io::ByteWriter w;
  if (emb.kind() == ContextKind::kStatic) {
    w.tag(kStaticMagic);
    w.u32(static_cast<std::uint32_t>(emb.dim()));
    w.u32(static_cast<std::uint32_t>(emb.table().size()));
    for (const auto& [cp, v] : emb.table()) {
      w.u32(static_cast<std::uint32_t>(cp));
      for (float x : v) w.f32(x);
    }
  } else {
    w.tag(kSequenceMagic);
    w.u32(static_cast<std::uint32_t>(emb.dim()));
    w.u32(static_cast<std::uint32_t>(emb.sequences().size()));
    for (const auto& seq : emb.sequences()) {
      w.u32(static_cast<std::uint32_t>(seq.size() / emb.dim()));
      for (float x : seq) w.f32(x);
    }
  }
  return w.buffer();
}

ContextEmbeddings load_context_embeddings(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("context embeddings not found: " + path.string());
  return parse_context_embeddings(io::read_file(path), path.string());
}

void save_context_embeddings(const ContextEmbeddings& emb, const std::filesystem::path& path) {
  io::write_file(path, serialize_context_embeddings(emb));
}

}  // namespace glyphner::ctx
