#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "glyphner/corpus.hpp"
#include "glyphner/tensor.hpp"

namespace glyphner::ctx {

enum class ContextKind { kStatic, kContextual };

// Frozen per-character context vectors. Static tables map codepoints to
// vectors (unknown codepoints read the zero UNK vector); contextual files
// carry one vector per corpus token, in corpus order. Values are kept as the
// 32-bit reals read from disk.
class ContextEmbeddings {
 public:
  using Table = std::map<Codepoint, std::vector<float>>;

  // Throws ConfigError for dim 0 or a vector of the wrong extent.
  static ContextEmbeddings from_table(std::size_t dim, Table table);
  // `sequences[s]` holds token_count * dim values.
  static ContextEmbeddings from_sequences(std::size_t dim, std::vector<std::vector<float>> sequences);
  // Gaussian vectors for each codepoint, for synthetic runs.
  static ContextEmbeddings random_table(std::size_t dim, std::span<const Codepoint> codepoints, std::mt19937_64& rng);

  ContextKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  const Table& table() const noexcept { return table_; }
  const std::vector<std::vector<float>>& sequences() const noexcept { return sequences_; }

  // Contextual embeddings must match the corpus sentence and token counts
  // exactly (FormatError kMismatch); static embeddings always align.
  void check_alignment(const corpus::Corpus& corpus) const;
  // Rows [T, dim] for sentence `index` of an aligned corpus.
  nd::Tensor sentence(const corpus::Corpus& corpus, std::size_t index) const;

  friend bool operator==(const ContextEmbeddings&, const ContextEmbeddings&) = default;

 private:
  ContextKind kind_ = ContextKind::kStatic;
  std::size_t dim_ = 0;
  Table table_;
  std::vector<std::vector<float>> sequences_;
};

// Detects CEMB or CSEQ by magic.
ContextEmbeddings parse_context_embeddings(std::span<const std::uint8_t> data, const std::string& source = "<memory>");
std::vector<std::uint8_t> serialize_context_embeddings(const ContextEmbeddings& emb);
ContextEmbeddings load_context_embeddings(const std::filesystem::path& path);
void save_context_embeddings(const ContextEmbeddings& emb, const std::filesystem::path& path);

}  // namespace glyphner::ctx
