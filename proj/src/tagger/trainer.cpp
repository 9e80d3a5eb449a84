#include "glyphner/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glyphner/crf.hpp"
#include "glyphner/errors.hpp"
#include "glyphner/optim.hpp"

namespace glyphner::tagger {
namespace {

// Independent streams for initialization, shuffling and dropout.
constexpr std::uint64_t kShuffleStream = 0x5DEECE66DULL;
constexpr std::uint64_t kDropoutStream = 0x9E3779B97F4A7C15ULL;

void check_dataset(const Dataset& d, const char* what) {
  if (!d.corpus || !d.context) throw ConfigError(std::string(what) + " set needs a corpus and context embeddings");
  d.context->check_alignment(*d.corpus);
}

std::vector<std::size_t> all_ids(const corpus::Corpus& c) {
  std::vector<std::size_t> ids(c.sentences.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

}  // namespace

std::vector<SentenceInput> sentence_inputs(const Dataset& data, std::span<const std::size_t> ids) {
  std::vector<SentenceInput> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    const auto& s = data.corpus->sentences.at(id);
    out.push_back({s.chars, data.context->sentence(*data.corpus, id)});
  }
  return out;
}

std::vector<std::size_t> gold_indices(const corpus::Sentence& s, const corpus::TagVocab& vocab) {
  std::vector<std::size_t> out;
  out.reserve(s.tags.size());
  for (const auto& t : s.tags) {
    const auto i = vocab.find(t);
    if (!i) throw ConfigError("tag '" + t + "' (line " + std::to_string(s.line) + ") is not in the model's tag set");
    out.push_back(*i);
  }
  return out;
}

EvalResult evaluate(Tagger& model, const Dataset& data, std::size_t batch_size) {
  check_dataset(data, "evaluation");
  const auto& sentences = data.corpus->sentences;
  const auto& vocab = model.config().tags;
  EvalResult r;
  std::vector<std::vector<std::string>> gold;
  double total = 0.0;
  std::mt19937_64 unused(0);
  const auto ids = all_ids(*data.corpus);
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const auto chunk = std::span(ids).subspan(start, std::min(batch_size, ids.size() - start));
    const auto inputs = sentence_inputs(data, chunk);
    const auto em = model.emissions(inputs, nd::Mode::kInfer, unused);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const auto& s = sentences[chunk[b]];
      const crf::TagLattice lattice{em[b].value(), {}};
      const auto g = gold_indices(s, vocab);
      total += crf::log_partition(lattice, model.transitions().value()) -
               crf::path_score(lattice, model.transitions().value(), g);
      const auto path = crf::decode(lattice, model.transitions().value()).path;
      std::vector<std::string> tags;
      for (auto p : path) tags.push_back(vocab.tag(p));
      r.predicted.push_back(std::move(tags));
      gold.push_back(s.tags);
    }
  }
  r.loss = total / static_cast<double>(sentences.size());
  r.report = eval::score_f1(gold, r.predicted, data.corpus->scheme);
  return r;
}

std::vector<std::vector<std::string>> predict(Tagger& model, const Dataset& data, std::size_t batch_size) {
  check_dataset(data, "prediction");
  std::vector<std::vector<std::string>> out;
  const auto ids = all_ids(*data.corpus);
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const auto chunk = std::span(ids).subspan(start, std::min(batch_size, ids.size() - start));
    for (const auto& path : model.decode(sentence_inputs(data, chunk))) {
      std::vector<std::string> tags;
      for (auto p : path) tags.push_back(model.config().tags.tag(p));
      out.push_back(std::move(tags));
    }
  }
  return out;
}

TrainResult train(Tagger& model, const Dataset& train_data, const std::optional<Dataset>& dev, const RunConfig& config,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  check_dataset(train_data, "training");
  if (dev) check_dataset(*dev, "dev");
  const auto& corpus = *train_data.corpus;
  if (corpus.sentences.empty()) throw ConfigError("training corpus is empty");

  std::vector<std::vector<std::size_t>> gold;
  gold.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) gold.push_back(gold_indices(s, model.config().tags));

  optim::Optimizer opt(config.optimizer_config());
  const auto sched = config.schedule_config();
  std::mt19937_64 dropout_rng(config.seed ^ kDropoutStream);
  optim::EarlyStopping stopper(config.early_stop_patience);

  TrainResult result;
  auto best = model.to_checkpoint({});
  std::optional<double> best_f1;

  for (std::size_t epoch = 1; epoch <= config.training_epochs; ++epoch) {
    const auto batches = corpus::make_batches(corpus, model.config().tags, config.mini_batch_size,
                                              config.seed * kShuffleStream + epoch);
    double total = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& ids = batches[bi].sentence_ids;
      const auto inputs = sentence_inputs(train_data, ids);
      std::vector<std::vector<std::size_t>> g;
      for (auto id : ids) g.push_back(gold[id]);

      model.params().zero_grad();
      const nd::Var loss = model.loss(inputs, g, nd::Mode::kTrain, dropout_rng);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi + 1));
      }
      nd::backward(loss);
      optim::clip_global_norm(model.params(), config.clip_grad_norm);
      if (opt.uses_schedule()) opt.step(model.params(), optim::lr_at_step(opt.steps(), sched));
      else opt.step(model.params());
      total += value * static_cast<double>(ids.size());
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = total / static_cast<double>(corpus.sentences.size());
    if (dev) {
      const auto ev = evaluate(model, *dev);
      m.dev_loss = ev.loss;
      m.dev_f1 = ev.report.micro.f1;
      if (!best_f1 || *m.dev_f1 > *best_f1) {
        best_f1 = m.dev_f1;
        best = model.to_checkpoint({});
        result.best_epoch = epoch;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
    if (config.early_stop_patience > 0 && stopper.observe(m.dev_loss.value_or(m.train_loss))) {
      result.stopped_early = epoch < config.training_epochs;
      break;
    }
  }
  if (dev) model.load_state(best);
  result.steps = opt.steps();
  return result;
}

Tagger build_model(RunConfig& config, const std::vector<const corpus::Corpus*>& corpora, std::size_t context_dim,
                   const GlyphDictionary* dict) {
  config.validate();
  if (config.tags.empty()) config.tags = corpus::TagVocab::from_corpora(corpora).tags();
  else config.tags = corpus::TagVocab(config.tags).tags();
  config.context_dim = context_dim;
  std::mt19937_64 rng(config.seed);
  Tagger model(ModelConfig::from_run(config), dict, rng);
  if (!config.pretrain) return model;

  enc::AutoencoderStack stack = [&] {
    if (!config.pretrained.empty()) return autoencoder_from_checkpoint(ckpt::load(config.pretrained));
    if (!dict) throw ConfigError("pretraining needs a glyph dictionary");
    std::mt19937_64 ae_rng(config.seed);
    auto s = enc::AutoencoderStack::glynn_mirror(ae_rng);
    enc::PretrainConfig pc;
    pc.epochs = config.pretrain_epochs;
    pc.seed = config.seed;
    enc::pretrain_autoencoder(*dict, s, pc);
    return s;
  }();
  std::mt19937_64 ex_rng(config.seed);
  auto glynn = enc::extract_encoder(stack, ex_rng, {config.glynn_dropout1, config.glynn_dropout2});
  model.load_glyph_encoder(glynn);
  return model;
}

ckpt::Checkpoint autoencoder_checkpoint(const enc::AutoencoderStack& stack, const std::string& config_text) {
  ckpt::Checkpoint c;
  c.config = config_text;
  ckpt::add_params(c, stack.params());
  return c;
}

enc::AutoencoderStack autoencoder_from_checkpoint(const ckpt::Checkpoint& ckpt) {
  std::mt19937_64 rng(0);
  auto stack = enc::AutoencoderStack::glynn_mirror(rng);
  ckpt::restore_params(ckpt, stack.params());
  return stack;
}

}  // namespace glyphner::tagger
