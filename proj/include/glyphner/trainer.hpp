#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glyphner/autoencoder.hpp"
#include "glyphner/checkpoint.hpp"
#include "glyphner/config.hpp"
#include "glyphner/embeddings.hpp"
#include "glyphner/eval.hpp"
#include "glyphner/tagger.hpp"

namespace glyphner::tagger {

// A corpus with the context embeddings aligned to it.
struct Dataset {
  const corpus::Corpus* corpus = nullptr;
  const ctx::ContextEmbeddings* context = nullptr;
};

// Model inputs for a set of sentences; throws on misalignment.
std::vector<SentenceInput> sentence_inputs(const Dataset& data, std::span<const std::size_t> ids);
// Tag indices; ConfigError when a gold tag is missing from the model's tag set.
std::vector<std::size_t> gold_indices(const corpus::Sentence& s, const corpus::TagVocab& vocab);

struct EvalResult {
  double loss = 0.0;  // mean CRF NLL per sentence, infer mode
  eval::F1Report report;
  std::vector<std::vector<std::string>> predicted;
};

// Scores every sentence; batches are only a memory bound.
EvalResult evaluate(Tagger& model, const Dataset& data, std::size_t batch_size = 32);
// Predicted tags only; the input's own tags are ignored.
std::vector<std::vector<std::string>> predict(Tagger& model, const Dataset& data, std::size_t batch_size = 32);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> dev_loss;
  std::optional<double> dev_f1;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;  // 0 = the initialization
  bool stopped_early = false;
  std::uint64_t steps = 0;
};

// Mini-batch training: forward, CRF loss, backward, global-norm clipping,
// optimizer step (on the cosine schedule unless Adafactor runs in
// relative-step mode). After every epoch the dev set (when given) is scored.
// The model is left holding the epoch with the best dev F1 (earliest on ties;
// the last epoch without a dev set). Throws NumericError naming the epoch and
// batch when a loss turns non-finite.
TrainResult train(Tagger& model, const Dataset& train_data, const std::optional<Dataset>& dev, const RunConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

// Model setup shared by the CLI and the acceptance runs: fills tags and
// context dim into `config`, builds the tagger and loads pretrained GLYNN
// weights when config.pretrain is on (from config.pretrained, or by
// pretraining on the dictionary when that is empty).
Tagger build_model(RunConfig& config, const std::vector<const corpus::Corpus*>& corpora, std::size_t context_dim,
                   const GlyphDictionary* dict);

// Autoencoder checkpoints reuse the GTCK container.
ckpt::Checkpoint autoencoder_checkpoint(const enc::AutoencoderStack& stack, const std::string& config_text);
enc::AutoencoderStack autoencoder_from_checkpoint(const ckpt::Checkpoint& ckpt);

}  // namespace glyphner::tagger
