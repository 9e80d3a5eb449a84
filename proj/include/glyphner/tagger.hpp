#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "glyphner/checkpoint.hpp"
#include "glyphner/config.hpp"
#include "glyphner/corpus.hpp"
#include "glyphner/encoders.hpp"
#include "glyphner/lstm.hpp"

namespace glyphner::tagger {

struct ModelConfig {
  EncoderKind encoder = EncoderKind::kGlynn;
  std::size_t context_dim = 0;
  std::size_t hidden = 256;
  double lstm_dropout = 0.5;
  enc::GlynnConfig glynn;
  corpus::TagVocab tags;

  // Needs run.tags and run.context_dim filled in.
  static ModelConfig from_run(const RunConfig& run);
};

// One sentence as the model sees it: codepoints plus frozen context rows [T, context_dim].
struct SentenceInput {
  std::span<const Codepoint> chars;
  nd::Tensor context;
};

std::size_t glyph_dim(EncoderKind kind) noexcept;

// Context vector ++ glyph vector per character, one BiLSTM layer, dropout,
// a dense emission layer and a linear-chain CRF.
class Tagger {
 public:
  // `dict` must outlive the tagger and is required unless encoder is none.
  Tagger(ModelConfig config, const GlyphDictionary* dict, std::mt19937_64& rng);
  Tagger(const Tagger&) = delete;
  Tagger& operator=(const Tagger&) = delete;
  Tagger(Tagger&&) = default;
  Tagger& operator=(Tagger&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t rep_dim() const noexcept { return config_.context_dim + glyph_dim(config_.encoder); }
  std::size_t num_tags() const noexcept { return config_.tags.size(); }

  // Rows [T, rep_dim] per sentence. Glyph vectors are computed once per
  // distinct bitmap in the batch.
  std::vector<nd::Var> representations(std::span<const SentenceInput> batch, nd::Mode mode, std::mt19937_64& rng);
  // Emission scores [T, L] per sentence.
  std::vector<nd::Var> emissions(std::span<const SentenceInput> batch, nd::Mode mode, std::mt19937_64& rng);
  // Mean CRF negative log-likelihood over the batch.
  nd::Var loss(std::span<const SentenceInput> batch, std::span<const std::vector<std::size_t>> gold, nd::Mode mode,
               std::mt19937_64& rng);
  // Viterbi tag indices in infer mode.
  std::vector<std::vector<std::size_t>> decode(std::span<const SentenceInput> batch);

  nd::ParameterSet& params() noexcept { return params_; }
  const nd::ParameterSet& params() const noexcept { return params_; }
  enc::BufferList buffers();
  const nd::Var& transitions() const { return params_.at("crf.transitions"); }

  // Copies pretrained GLYNN weights in by name (encoder must be glynn).
  void load_glyph_encoder(enc::GlynnEncoder& source);

  ckpt::Checkpoint to_checkpoint(std::string config_text);
  // Restores parameters and buffers; FormatError kMismatch on a missing or misshapen tensor.
  void load_state(const ckpt::Checkpoint& ckpt);

 private:
  nd::Var glyph_vectors(const std::vector<const GlyphBitmap*>& glyphs, nd::Mode mode, std::mt19937_64& rng);

  ModelConfig config_;
  const GlyphDictionary* dict_;
  nd::ParameterSet params_;
  std::unique_ptr<enc::StridedEncoder> strided_;
  std::unique_ptr<enc::GlynnEncoder> glynn_;
  std::unique_ptr<lstm::BiLstm> lstm_;
};

// Builds the model a checkpoint describes and loads its state.
Tagger tagger_from_checkpoint(const ckpt::Checkpoint& ckpt, const GlyphDictionary* dict);

}  // namespace glyphner::tagger
