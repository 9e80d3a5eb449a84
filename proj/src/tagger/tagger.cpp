#include "glyphner/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "glyphner/crf.hpp"
#include "glyphner/errors.hpp"

namespace glyphner::tagger {
namespace {

using nd::Var;

constexpr const char* kGlyphPrefix = "glyph.";

}  // namespace

ModelConfig ModelConfig::from_run(const RunConfig& run) {
  if (run.tags.empty()) throw ConfigError("model config needs a tag set");
  ModelConfig m;
  m.encoder = run.encoder;
  m.context_dim = run.context_dim;
  m.hidden = run.hidden_size_lstm;
  m.lstm_dropout = run.dropout_lstm;
  m.glynn = {run.glynn_dropout1, run.glynn_dropout2};
  m.tags = corpus::TagVocab(run.tags);
  return m;
}

std::size_t glyph_dim(EncoderKind kind) noexcept {
  switch (kind) {
    case EncoderKind::kStrided:
      return enc::kStridedDim;
    case EncoderKind::kGlynn:
      return enc::kGlynnDim;
    case EncoderKind::kNone:
      break;
  }
  return 0;
}

Tagger::Tagger(ModelConfig config, const GlyphDictionary* dict, std::mt19937_64& rng)
    : config_(std::move(config)), dict_(dict) {
  if (config_.tags.size() == 0) throw ConfigError("tagger needs at least one tag");
  if (config_.encoder != EncoderKind::kNone && !dict_) throw ConfigError("a glyph encoder needs a glyph dictionary");
  if (rep_dim() == 0) throw ConfigError("character representation would be empty (no context and no encoder)");
  if (!(config_.lstm_dropout >= 0.0 && config_.lstm_dropout < 1.0)) throw ConfigError("LSTM dropout must lie in [0,1)");

  if (config_.encoder == EncoderKind::kStrided) {
    strided_ = std::make_unique<enc::StridedEncoder>(rng);
    params_.append(strided_->params(), kGlyphPrefix);
  } else if (config_.encoder == EncoderKind::kGlynn) {
    glynn_ = std::make_unique<enc::GlynnEncoder>(rng, config_.glynn);
    params_.append(glynn_->params(), kGlyphPrefix);
  }
  lstm_ = std::make_unique<lstm::BiLstm>(rep_dim(), config_.hidden, params_, rng);
  const std::size_t L = num_tags(), H2 = 2 * config_.hidden;
  params_.add("emit.weight", nd::ParamKind::kWeight,
              nd::truncated_normal({H2, L}, std::sqrt(1.0 / static_cast<double>(H2)), rng));
  params_.add("emit.bias", nd::ParamKind::kBias, nd::Tensor({L}, 0.0));
  params_.add("crf.transitions", nd::ParamKind::kBias, nd::Tensor({L + 2, L + 2}, 0.0));
}

Var Tagger::glyph_vectors(const std::vector<const GlyphBitmap*>& glyphs, nd::Mode mode, std::mt19937_64& rng) {
  const Var images = Var::constant(enc::glyph_batch(std::span<const GlyphBitmap* const>(glyphs)));
  if (strided_) return strided_->forward(images);
  return glynn_->forward(images, mode, rng);
}

std::vector<Var> Tagger::representations(std::span<const SentenceInput> batch, nd::Mode mode, std::mt19937_64& rng) {
  for (const auto& s : batch) {
    if (s.chars.empty()) throw ShapeError("cannot tag an empty sentence");
    if (s.context.rank() != 2 || s.context.dim(0) != s.chars.size() || s.context.dim(1) != config_.context_dim) {
      throw ShapeError("context rows " + nd::shape_string(s.context.shape()) + " do not match a " +
                       std::to_string(s.chars.size()) + "-token sentence of context dim " +
                       std::to_string(config_.context_dim));
    }
  }
  std::vector<Var> out;
  out.reserve(batch.size());
  if (config_.encoder == EncoderKind::kNone) {
    for (const auto& s : batch) out.push_back(Var::constant(s.context));
    return out;
  }

  // Distinct bitmaps in first-occurrence order.
  std::vector<const GlyphBitmap*> glyphs;
  std::map<const GlyphBitmap*, std::size_t> slot;
  std::vector<std::vector<std::size_t>> rows(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (auto cp : batch[b].chars) {
      const GlyphBitmap* g = &resolve_bitmap(cp, *dict_);
      auto [it, fresh] = slot.emplace(g, glyphs.size());
      if (fresh) glyphs.push_back(g);
      rows[b].push_back(it->second);
    }
  }
  // Batch statistics need two samples; pad with a bitmap the batch lacks.
  if (mode == nd::Mode::kTrain && glynn_ && glyphs.size() < 2) {
    static const GlyphBitmap kWhite = GlyphBitmap::white(), kBlack = GlyphBitmap::black();
    glyphs.push_back(*glyphs.front() == kWhite ? &kBlack : &kWhite);
  }
  const Var vectors = glyph_vectors(glyphs, mode, rng);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Var g = nd::gather_rows(vectors, rows[b]);
    out.push_back(config_.context_dim == 0 ? g : nd::concat_cols(Var::constant(batch[b].context), g));
  }
  return out;
}

std::vector<Var> Tagger::emissions(std::span<const SentenceInput> batch, nd::Mode mode, std::mt19937_64& rng) {
  auto reps = representations(batch, mode, rng);
  const auto& w = params_.at("emit.weight");
  const auto& bias = params_.at("emit.bias");
  std::vector<Var> out;
  out.reserve(reps.size());
  for (const auto& r : reps) {
    const Var h = nd::dropout(lstm_->forward(r), config_.lstm_dropout, mode, rng);
    out.push_back(nd::dense(h, w, bias));
  }
  return out;
}

Var Tagger::loss(std::span<const SentenceInput> batch, std::span<const std::vector<std::size_t>> gold, nd::Mode mode,
                 std::mt19937_64& rng) {
  if (gold.size() != batch.size()) throw ShapeError("gold paths do not match the batch size");
  if (batch.empty()) throw ShapeError("empty batch");
  const auto em = emissions(batch, mode, rng);
  Var total;
  for (std::size_t b = 0; b < em.size(); ++b) {
    const Var l = crf::nll(em[b], transitions(), gold[b]);
    total = total ? nd::add(total, l) : l;
  }
  return nd::scale(total, 1.0 / static_cast<double>(batch.size()));
}

std::vector<std::vector<std::size_t>> Tagger::decode(std::span<const SentenceInput> batch) {
  std::mt19937_64 unused(0);
  const auto em = emissions(batch, nd::Mode::kInfer, unused);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(em.size());
  for (const auto& e : em) out.push_back(crf::decode({e.value(), {}}, transitions().value()).path);
  return out;
}

enc::BufferList Tagger::buffers() {
  enc::BufferList out;
  if (glynn_)
    for (auto& [name, t] : glynn_->buffers()) out.emplace_back(kGlyphPrefix + name, t);
  return out;
}

void Tagger::load_glyph_encoder(enc::GlynnEncoder& source) {
  if (!glynn_) throw ConfigError("pretrained glyph weights need encoder=glynn");
  for (auto& p : glynn_->params().items()) {
    const auto& src = source.params().at(p.name);
    if (src.shape() != p.var.shape()) throw ShapeError("pretrained " + p.name + " has a different shape");
    p.var.mutable_value() = src.value();
  }
  auto dst = glynn_->buffers();
  auto src = source.buffers();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].second = *src[i].second;
}

ckpt::Checkpoint Tagger::to_checkpoint(std::string config_text) {
  ckpt::Checkpoint c;
  c.config = std::move(config_text);
  ckpt::add_params(c, params_);
  for (auto& [name, t] : buffers()) c.tensors.emplace_back(name, *t);
  return c;
}

void Tagger::load_state(const ckpt::Checkpoint& ckpt) {
  ckpt::restore_params(ckpt, params_);
  for (auto& [name, t] : buffers()) {
    const auto& src = ckpt.at(name);
    if (src.shape() != t->shape()) throw FormatError(FormatFault::kMismatch, "checkpoint buffer " + name + " misshapen");
    *t = src;
  }
}

Tagger tagger_from_checkpoint(const ckpt::Checkpoint& ckpt, const GlyphDictionary* dict) {
  const RunConfig run = parse_config_text(ckpt.config, RunConfig{}, "checkpoint config");
  std::mt19937_64 rng(run.seed);
  Tagger t(ModelConfig::from_run(run), dict, rng);
  t.load_state(ckpt);
  return t;
}

}  // namespace glyphner::tagger
