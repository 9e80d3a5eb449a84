#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "glyphner/binary_io.hpp"
#include "glyphner/crf.hpp"
#include "glyphner/errors.hpp"
#include "glyphner/grad_check.hpp"
#include "glyphner/trainer.hpp"
#include "test_util.hpp"

using namespace glyphner;
using nd::Tensor;
using nd::Var;

namespace {

struct Instance {
  crf::TagLattice lattice;
  Tensor transitions;
};

Instance random_instance(std::mt19937_64& rng, std::size_t T, std::size_t L) {
  return {{testing::random_tensor({T, L}, rng, -2, 2), {}}, testing::random_tensor({L + 2, L + 2}, rng, -2, 2)};
}

std::vector<std::size_t> random_path(std::mt19937_64& rng, std::size_t n, std::size_t L) {
  std::uniform_int_distribution<std::size_t> d(0, L - 1);
  std::vector<std::size_t> p(n);
  for (auto& x : p) x = d(rng);
  return p;
}

double crf_loss(const Instance& in, std::span<const std::size_t> gold) {
  return crf::nll(Var::constant(in.lattice.emissions), Var::constant(in.transitions), gold, in.lattice.mask).value()[0];
}

// Small tagger on a synthetic corpus, shared by several cases.
struct Fixture {
  GlyphDictionary dict = testing::synthetic_dictionary(32);
  corpus::Corpus corpus = synth::make_corpus({.sentences = 6, .min_length = 4, .max_length = 7, .seed = 3});
  ctx::ContextEmbeddings context;
  RunConfig config;

  explicit Fixture(EncoderKind encoder = EncoderKind::kGlynn, std::size_t dim = 6) {
    std::vector<Codepoint> cps;
    for (const auto& [cp, b] : dict.entries()) cps.push_back(cp);
    std::mt19937_64 rng(11);
    context = ctx::ContextEmbeddings::random_table(dim, cps, rng);
    config.encoder = encoder;
    config.hidden_size_lstm = 8;
    config.mini_batch_size = 3;
    config.training_epochs = 2;
  }
  tagger::Tagger model() { return tagger::build_model(config, {&corpus}, context.dim(), &dict); }
  tagger::Dataset data() const { return {&corpus, &context}; }
};

}  // namespace

// ---- CRF -------------------------------------------------------------------

TEST_CASE("CRF analytic anchors") {
  const Tensor zero_tr({4, 4}, 0.0);
  const crf::TagLattice one{Tensor({1, 2}, 0.0), {}};
  CHECK(crf::log_partition(one, zero_tr) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(crf::brute_oracle(one, zero_tr).log_z == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  for (std::size_t g = 0; g < 2; ++g) {
    const std::vector<std::size_t> gold{g};
    CHECK(crf::nll(Var::constant(one.emissions), Var::constant(zero_tr), gold).value()[0] ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  }
  const crf::TagLattice two{Tensor({2, 2}, 0.0), {}};
  CHECK(crf::log_partition(two, zero_tr) == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-15));
  CHECK(crf::brute_oracle(two, zero_tr).log_z == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("CRF forward algorithm and Viterbi agree with enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 5), tags(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(rng, len(rng), tags(rng));
    const auto oracle = crf::brute_oracle(in.lattice, in.transitions);
    CHECK(std::abs(crf::log_partition(in.lattice, in.transitions) - oracle.log_z) <= 1e-8);
    const auto vit = crf::decode(in.lattice, in.transitions);
    CHECK(vit.path == oracle.best.path);
    CHECK(vit.score == doctest::Approx(oracle.best.score).epsilon(1e-12));
    CHECK(crf::path_score(in.lattice, in.transitions, vit.path) == doctest::Approx(vit.score).epsilon(1e-12));
  }
}

TEST_CASE("CRF loss is a negative log probability") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, 1 + trial % 5, 1 + trial % 4);
    const auto gold = random_path(rng, in.lattice.length(), in.lattice.num_tags());
    const double loss = crf_loss(in, gold);
    CHECK(loss >= 0.0);
    CHECK(std::exp(-loss) <= 1.0);
    CHECK(std::exp(-loss) > 0.0);
  }
  // A path with a wide margin takes almost all the mass.
  Tensor em({3, 3}, 0.0);
  const std::vector<std::size_t> gold{2, 0, 1};
  for (std::size_t t = 0; t < 3; ++t) em[t * 3 + gold[t]] = 20.0;
  const double loss = crf::nll(Var::constant(em), Var::constant(Tensor({5, 5}, 0.0)), gold).value()[0];
  CHECK(loss > 0.0);
  CHECK(loss < 1e-6);
}

TEST_CASE("CRF decode examples") {
  std::mt19937_64 rng(8);
  const crf::TagLattice single{testing::random_tensor({4, 1}, rng), {}};
  CHECK(crf::decode(single, testing::random_tensor({3, 3}, rng)).path == std::vector<std::size_t>(4, 0));
  Tensor em({4, 3}, 0.0);
  const std::vector<std::size_t> want{1, 1, 0, 2};
  for (std::size_t t = 0; t < 4; ++t) em[t * 3 + want[t]] = 5.0;
  CHECK(crf::decode({em, {}}, Tensor({5, 5}, 0.0)).path == want);
  // All-equal scores: every backpointer takes tag 0.
  CHECK(crf::decode({Tensor({3, 3}, 0.0), {}}, Tensor({5, 5}, 0.0)).path == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("CRF masked positions are inert") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = random_instance(rng, 5, 3);
    in.lattice.mask = {1, 0, 1, 1, 0};
    const auto gold = random_path(rng, 3, 3);
    const double loss = crf_loss(in, gold);
    const auto path = crf::decode(in.lattice, in.transitions).path;
    // Compacted lattice over the active rows only.
    Tensor compact({3, 3});
    const std::size_t rows[] = {0, 2, 3};
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 3; ++j) compact[k * 3 + j] = in.lattice.emissions[rows[k] * 3 + j];
    CHECK(crf::log_partition(in.lattice, in.transitions) ==
          doctest::Approx(crf::log_partition({compact, {}}, in.transitions)).epsilon(1e-14));
    for (std::size_t j = 0; j < 3; ++j) {
      in.lattice.emissions[1 * 3 + j] = 1e3 * (j + 1);
      in.lattice.emissions[4 * 3 + j] = -7.0 * j;
    }
    CHECK(crf_loss(in, gold) == loss);
    CHECK(crf::decode(in.lattice, in.transitions).path == path);
  }
}

TEST_CASE("CRF loss gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t T = 1 + seed % 5, L = 1 + seed % 4;
    const auto in = random_instance(rng, T, L);
    const auto gold = random_path(rng, T, L);
    Var em = Var::leaf(in.lattice.emissions), tr = Var::leaf(in.transitions);
    const double err = nd::grad_check_leaves([&] { return crf::nll(em, tr, gold); }, {em, tr});
    CAPTURE(seed);
    CHECK(err <= 1e-4);
  }
  // Masked variant.
  std::mt19937_64 rng(77);
  const auto in = random_instance(rng, 4, 3);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1};
  const auto gold = random_path(rng, 3, 3);
  Var em = Var::leaf(in.lattice.emissions), tr = Var::leaf(in.transitions);
  CHECK(nd::grad_check_leaves([&] { return crf::nll(em, tr, gold, mask); }, {em, tr}) <= 1e-4);
}

TEST_CASE("CRF argument errors") {
  std::mt19937_64 rng(1);
  const auto in = random_instance(rng, 3, 2);
  const std::vector<std::size_t> out_of_set{0, 2, 1}, short_path{0, 1};
  CHECK_THROWS_AS(crf_loss(in, out_of_set), ConfigError);
  CHECK_THROWS_AS(crf_loss(in, short_path), ShapeError);
  CHECK_THROWS_AS(crf::decode(in.lattice, Tensor({3, 3})), ShapeError);
  const auto big = random_instance(rng, 11, 4);  // 4^11 > 10^6
  CHECK_THROWS_AS(crf::brute_oracle(big.lattice, big.transitions), ConfigError);
}

// ---- BiLSTM ------------------------------------------------------------------

TEST_CASE("BiLSTM output extent and zero state") {
  std::mt19937_64 rng(3);
  nd::ParameterSet ps;
  const lstm::BiLstm bi(5, 256, ps, rng);
  CHECK(bi.forward(Var::constant(testing::random_tensor({1, 5}, rng))).shape() == nd::Shape{1, 512});
  CHECK(bi.forward(Var::constant(testing::random_tensor({7, 5}, rng))).shape() == nd::Shape{7, 512});
  for (auto& p : ps.items()) p.var.mutable_value().fill(0.0);
  const auto out = bi.forward(Var::constant(Tensor({4, 5}, 0.0)));
  for (double v : out.value().data()) CHECK(v == 0.0);
}

TEST_CASE("BiLSTM reversal swaps the directions") {
  std::mt19937_64 rng(4);
  nd::ParameterSet ps;
  const std::size_t H = 6;
  const lstm::BiLstm bi(3, H, ps, rng);
  for (const char* w : {"wx", "wh", "b"}) ps.at(std::string("lstm.bw.") + w).mutable_value() = ps.at(std::string("lstm.fw.") + w).value();
  const auto x = testing::random_tensor({5, 3}, rng);
  const auto out = bi.forward(Var::constant(x)).value();
  const auto rev = bi.forward(nd::reverse_rows(Var::constant(x))).value();
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < H; ++j) CHECK(rev[(4 - t) * 2 * H + H + j] == doctest::Approx(out[t * 2 * H + j]).epsilon(1e-14));
}

TEST_CASE("LSTM cell gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    nd::ParameterSet ps;
    const lstm::BiLstm bi(3, 4, ps, rng);
    const auto w = bi.fw();
    Var x = Var::leaf(testing::random_tensor({2, 3}, rng));
    Var h = Var::leaf(testing::random_tensor({2, 4}, rng));
    Var c = Var::leaf(testing::random_tensor({2, 4}, rng));
    const Var probe = Var::constant(testing::random_tensor({2, 4}, rng));
    const auto loss = [&] {
      const auto s = lstm::cell(x, {h, c}, w);
      return nd::add(nd::sum(nd::mul(s.h, probe)), nd::sum(nd::mul(s.c, s.c)));
    };
    CAPTURE(seed);
    CHECK(nd::grad_check_leaves(loss, {x, h, c, w.wx, w.wh, w.b}) <= 1e-4);
  }
}

TEST_CASE("BiLSTM sequence gradients match finite differences") {
  std::mt19937_64 rng(55);
  nd::ParameterSet ps;
  const lstm::BiLstm bi(3, 4, ps, rng);
  Var x = Var::leaf(testing::random_tensor({4, 3}, rng));
  const Var probe = Var::constant(testing::random_tensor({4, 8}, rng));
  std::vector<Var> leaves{x};
  for (auto& p : ps.items()) leaves.push_back(p.var);
  CHECK(nd::grad_check_leaves([&] { return nd::sum(nd::mul(bi.forward(x), probe)); }, leaves) <= 1e-4);
}

// ---- Context embeddings ------------------------------------------------------

TEST_CASE("static embedding files") {
  std::mt19937_64 rng(6);
  const std::vector<Codepoint> cps{0x4E00, 0x4E01, U'A'};
  const auto e = ctx::ContextEmbeddings::random_table(8, cps, rng);
  const auto bytes = ctx::serialize_context_embeddings(e);
  CHECK(bytes.size() == 12 + 3 * (4 + 32));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CEMB");
  CHECK(bytes[4] == 8);
  CHECK(bytes[8] == 3);
  const auto back = ctx::parse_context_embeddings(bytes);
  CHECK(back.kind() == ctx::ContextKind::kStatic);
  CHECK(back.dim() == 8);
  CHECK(back.table().size() == 3);
  CHECK(back == e);
  CHECK(ctx::serialize_context_embeddings(back) == bytes);

  // Unseen codepoints read the zero vector.
  const auto c = corpus::parse_conll_text("\xE4\xB8\x80 O\n\xE9\xBE\x8D O\n", corpus::Scheme::kIob);
  const auto rows = e.sentence(c, 0);
  CHECK(rows[0] == static_cast<double>(e.table().at(0x4E00)[0]));
  for (std::size_t j = 0; j < 8; ++j) CHECK(rows[8 + j] == 0.0);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(ctx::parse_context_embeddings(truncated), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(ctx::parse_context_embeddings(magic), FormatError);
  testing::TempDir dir("emb");
  ctx::save_context_embeddings(e, dir / "e.cemb");
  CHECK(io::read_file(dir / "e.cemb") == bytes);
  CHECK_THROWS_AS(ctx::load_context_embeddings(dir / "missing"), IoError);
}

TEST_CASE("contextual embedding files and alignment") {
  const auto c = corpus::parse_conll_text("a O\nb O\n\nc O\n", corpus::Scheme::kIob);
  const auto e = ctx::ContextEmbeddings::from_sequences(2, {{1, 2, 3, 4}, {5, 6}});
  e.check_alignment(c);
  const auto back = ctx::parse_context_embeddings(ctx::serialize_context_embeddings(e));
  CHECK(back == e);
  CHECK(back.kind() == ctx::ContextKind::kContextual);
  CHECK(e.sentence(c, 0) == Tensor({2, 2}, {1, 2, 3, 4}));

  const auto wrong_tokens = ctx::ContextEmbeddings::from_sequences(2, {{1, 2}, {5, 6}});
  try {
    wrong_tokens.check_alignment(c);
    FAIL("expected an alignment error");
  } catch (const FormatError& err) {
    CHECK(err.fault() == FormatFault::kMismatch);
  }
  const auto wrong_count = ctx::ContextEmbeddings::from_sequences(2, {{1, 2, 3, 4}});
  CHECK_THROWS_AS(wrong_count.check_alignment(c), FormatError);
}

// ---- Character representations -------------------------------------------------

TEST_CASE("representation widths and composition") {
  Fixture none(EncoderKind::kNone, 16);
  auto m0 = none.model();
  CHECK(m0.rep_dim() == 16);
  const std::vector<std::size_t> ids{0, 1};
  const auto in0 = tagger::sentence_inputs(none.data(), ids);
  std::mt19937_64 rng(1);
  const auto r0 = m0.representations(in0, nd::Mode::kInfer, rng);
  CHECK(r0[0].value() == in0[0].context);

  Fixture strided(EncoderKind::kStrided, 16);
  auto m1 = strided.model();
  CHECK(m1.rep_dim() == 80);
  const auto r1 = m1.representations(tagger::sentence_inputs(strided.data(), ids), nd::Mode::kInfer, rng);
  CHECK(r1[0].shape() == nd::Shape{in0[0].chars.size(), 80});

  Fixture glynn(EncoderKind::kGlynn, 16);
  CHECK(glynn.model().rep_dim() == 16 + 256);
}

TEST_CASE("shared characters get identical glyph vectors in infer mode") {
  Fixture f;
  auto m = f.model();
  const auto a = corpus::parse_conll_text("\xE4\xB8\x80 O\n\xE4\xB8\x81 O\n\nx O\n\xE4\xB8\x80 O\n", corpus::Scheme::kIob);
  const tagger::Dataset d{&a, &f.context};
  const std::vector<std::size_t> ids{0, 1};
  std::mt19937_64 rng(2);
  const auto reps = m.representations(tagger::sentence_inputs(d, ids), nd::Mode::kInfer, rng);
  const auto D = m.rep_dim(), C = f.context.dim();
  for (std::size_t j = C; j < D; ++j) CHECK(reps[0].value()[j] == reps[1].value()[D + j]);
  // Separately computed batches agree too.
  const std::vector<std::size_t> first{0}, second{1};
  const auto r0 = m.representations(tagger::sentence_inputs(d, first), nd::Mode::kInfer, rng);
  const auto r1 = m.representations(tagger::sentence_inputs(d, second), nd::Mode::kInfer, rng);
  for (std::size_t j = C; j < D; ++j) CHECK(r0[0].value()[j] == r1[0].value()[D + j]);
}

TEST_CASE("a train batch with one distinct glyph still runs") {
  Fixture f;
  auto m = f.model();
  const auto a = corpus::parse_conll_text("\xE4\xB8\x80 B-PER\n\xE4\xB8\x80 I-PER\n", corpus::Scheme::kIob);
  const tagger::Dataset d{&a, &f.context};
  const std::vector<std::size_t> ids{0};
  std::mt19937_64 rng(2);
  const auto in = tagger::sentence_inputs(d, ids);
  const std::vector<std::vector<std::size_t>> gold{tagger::gold_indices(a.sentences[0], m.config().tags)};
  CHECK(std::isfinite(m.loss(in, gold, nd::Mode::kTrain, rng).value()[0]));
}

TEST_CASE("gradients reach the glyph encoder but not the context") {
  for (auto kind : {EncoderKind::kStrided, EncoderKind::kGlynn}) {
    Fixture f(kind);
    auto m = f.model();
    const std::vector<std::size_t> ids{0, 1, 2};
    std::mt19937_64 rng(4);
    const auto in = tagger::sentence_inputs(f.data(), ids);
    std::vector<std::vector<std::size_t>> gold;
    for (auto id : ids) gold.push_back(tagger::gold_indices(f.corpus.sentences[id], m.config().tags));
    nd::backward(m.loss(in, gold, nd::Mode::kTrain, rng));
    double glyph_norm = 0.0;
    for (const auto& p : m.params().items()) {
      const bool known = p.name.starts_with("glyph.") || p.name.starts_with("lstm.") || p.name.starts_with("emit.") ||
                         p.name.starts_with("crf.");
      CHECK(known);
      if (p.name.starts_with("glyph.") && p.var.has_grad())
        for (double g : p.var.grad().data()) glyph_norm += g * g;
    }
    CHECK(glyph_norm > 0.0);
  }
}

TEST_CASE("end-to-end tagger loss gradients match finite differences") {
  Fixture f(EncoderKind::kNone, 3);
  f.config.hidden_size_lstm = 3;
  f.config.dropout_lstm = 0.0;
  auto m = f.model();
  const std::vector<std::size_t> ids{0, 1};
  const auto in = tagger::sentence_inputs(f.data(), ids);
  std::vector<std::vector<std::size_t>> gold;
  for (auto id : ids) gold.push_back(tagger::gold_indices(f.corpus.sentences[id], m.config().tags));
  std::mt19937_64 rng(0);
  std::vector<Var> leaves;
  for (auto& p : m.params().items()) leaves.push_back(p.var);
  CHECK(nd::grad_check_leaves([&] { return m.loss(in, gold, nd::Mode::kTrain, rng); }, leaves) <= 1e-4);
}

// ---- Checkpoints ---------------------------------------------------------------

TEST_CASE("checkpoint container round trip is bit-exact") {
  ckpt::Checkpoint c;
  c.config = "a=1\nb=two\n";
  c.tensors.emplace_back("w", Tensor({2, 2}, {1.5, -0.0, std::numeric_limits<double>::quiet_NaN(), 1e-310}));
  c.tensors.emplace_back("b", Tensor({3}, {1, 2, 3}));
  const auto bytes = ckpt::encode(c);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GTCK");
  CHECK(bytes[4] == ckpt::kVersion);
  const auto back = ckpt::decode(bytes);
  CHECK(back.config == c.config);
  CHECK(ckpt::encode(back) == bytes);
  CHECK(std::signbit(back.at("w")[1]));
  CHECK(std::isnan(back.at("w")[2]));

  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(ckpt::decode(part), FormatError);
  }
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(ckpt::decode(version), FormatError);
  auto digest = bytes;
  digest[8] ^= 1;
  CHECK_THROWS_AS(ckpt::decode(digest), FormatError);
  CHECK_THROWS_AS(back.at("missing"), FormatError);
}

TEST_CASE("tagger checkpoints reproduce predictions") {
  Fixture f;
  auto m = f.model();
  f.config.training_epochs = 1;
  tagger::train(m, f.data(), std::nullopt, f.config);
  testing::TempDir dir("ckpt");
  ckpt::save(m.to_checkpoint(f.config.to_text()), dir / "m.gtck");
  const auto loaded = ckpt::load(dir / "m.gtck");
  auto m2 = tagger::tagger_from_checkpoint(loaded, &f.dict);
  CHECK(tagger::predict(m, f.data()) == tagger::predict(m2, f.data()));
  CHECK(ckpt::encode(m2.to_checkpoint(f.config.to_text())) == io::read_file(dir / "m.gtck"));

  // Gold tags outside the stored tag set are rejected.
  const auto other = corpus::parse_conll_text("\xE4\xB8\x80 B-ORG\n", corpus::Scheme::kIob);
  CHECK_THROWS_AS(tagger::evaluate(m2, {&other, &f.context}), ConfigError);

  // Missing tensors and wrong shapes are load errors.
  auto broken = loaded;
  broken.tensors.pop_back();
  CHECK_THROWS_AS(tagger::tagger_from_checkpoint(broken, &f.dict), FormatError);
  auto reshaped = loaded;
  reshaped.tensors.front().second = Tensor({1}, 0.0);
  CHECK_THROWS_AS(tagger::tagger_from_checkpoint(reshaped, &f.dict), FormatError);
}

TEST_CASE("autoencoder checkpoints round trip") {
  std::mt19937_64 rng(12);
  auto stack = enc::AutoencoderStack::glynn_mirror(rng);
  const auto c = tagger::autoencoder_checkpoint(stack, "kind=autoencoder\n");
  const auto back = tagger::autoencoder_from_checkpoint(ckpt::decode(ckpt::encode(c)));
  for (std::size_t i = 0; i < stack.params().size(); ++i)
    CHECK(back.params().items()[i].var.value() == stack.params().items()[i].var.value());
}

// ---- Configuration ---------------------------------------------------------------

TEST_CASE("run config text round trip and errors") {
  RunConfig c;
  c.set("encoder", "strided");
  c.set("learning-rate", "0.0005");
  c.set("tags", "O, B-PER,I-PER");
  c.set("dropout-lstm", "0.25");
  const auto again = parse_config_text(c.to_text());
  CHECK(again.to_text() == c.to_text());
  CHECK(again.tags == std::vector<std::string>{"O", "B-PER", "I-PER"});
  CHECK(*again.learning_rate == 0.0005);
  CHECK(RunConfig{}.hidden_size_lstm == 256);
  CHECK(RunConfig{}.training_epochs == 30);
  CHECK(RunConfig{}.mini_batch_size == 8);
  CHECK_THROWS_AS(parse_config_text("bogus=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("seed=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ConfigError);
  auto bad = parse_config_text("# comment\n\ndropout-lstm=1.0\n");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto pre = parse_config_text("encoder=none\npretrain=on\n");
  CHECK_THROWS_AS(pre.validate(), ConfigError);
}

// ---- Training --------------------------------------------------------------------

TEST_CASE("zero epochs leave the initialization untouched") {
  Fixture f;
  auto init = f.model();
  auto m = f.model();
  f.config.training_epochs = 0;
  const auto r = tagger::train(m, f.data(), f.data(), f.config);
  CHECK(r.epochs.empty());
  CHECK(r.best_epoch == 0);
  CHECK(ckpt::encode(m.to_checkpoint("")) == ckpt::encode(init.to_checkpoint("")));
}

TEST_CASE("training leaves context embeddings bitwise unchanged and is reproducible") {
  Fixture f;
  const auto before = ctx::serialize_context_embeddings(f.context);
  auto a = f.model();
  auto b = f.model();
  const auto ra = tagger::train(a, f.data(), f.data(), f.config);
  const auto rb = tagger::train(b, f.data(), f.data(), f.config);
  CHECK(ctx::serialize_context_embeddings(f.context) == before);
  REQUIRE(ra.epochs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
    CHECK(ra.epochs[i].dev_f1 == rb.epochs[i].dev_f1);
  }
  CHECK(ckpt::encode(a.to_checkpoint("")) == ckpt::encode(b.to_checkpoint("")));
  // The kept model is the best dev epoch.
  double best = 0.0;
  for (const auto& e : ra.epochs) best = std::max(best, *e.dev_f1);
  CHECK(tagger::evaluate(a, f.data()).report.micro.f1 == best);
}

TEST_CASE("a context-only tagger fits a tiny corpus") {
  Fixture f(EncoderKind::kNone, 8);
  f.corpus = synth::make_corpus({.sentences = 4, .min_length = 4, .max_length = 6, .seed = 9});
  f.config.hidden_size_lstm = 16;
  f.config.optimizer = optim::OptimizerKind::kAdam;
  f.config.learning_rate = 0.01;
  f.config.first_decay_steps = 100000;
  f.config.mini_batch_size = 2;
  f.config.training_epochs = 60;
  auto m = f.model();
  tagger::train(m, f.data(), std::nullopt, f.config);
  CHECK(tagger::evaluate(m, f.data()).report.micro.f1 == 1.0);
}

TEST_CASE("non-finite losses name the epoch and batch") {
  Fixture f(EncoderKind::kNone);
  auto m = f.model();
  m.params().at("emit.bias").mutable_value()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    tagger::train(m, f.data(), std::nullopt, f.config);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1, batch 1") != std::string::npos);
  }
}

TEST_CASE("early stopping can end a run before its epoch budget") {
  Fixture f(EncoderKind::kNone);
  f.config.training_epochs = 40;
  f.config.early_stop_patience = 1;
  f.config.optimizer = optim::OptimizerKind::kAdam;
  f.config.learning_rate = 5.0;  // large steps make the monitored loss bounce
  f.config.clip_grad_norm = 100.0;
  auto m = f.model();
  const auto r = tagger::train(m, f.data(), f.data(), f.config);
  CHECK(r.stopped_early);
  CHECK(r.epochs.size() < 40);
}
