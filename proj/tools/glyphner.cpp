// glyphner: command-line harness for dictionaries, pretraining, training,
// evaluation, prediction, corpus utilities and significance campaigns.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "glyphner/campaign.hpp"
#include "glyphner/errors.hpp"
#include "glyphner/synthetic.hpp"

using namespace glyphner;

namespace {

enum Exit { kOk = 0, kGeneric = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool blank(const std::string& text) { return text.find_first_not_of(" \t\r\n") == std::string::npos; }

// Every RunConfig key as an optional string flag; applied after --config.
class ConfigFlags {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", file_, "key=value config file");
    std::istringstream keys(RunConfig{}.to_text());
    for (std::string line; std::getline(keys, line);) {
      const auto key = line.substr(0, line.find('='));
      app.add_option("--" + key, values_[key], "config key " + key);
    }
  }
  RunConfig resolve() const {
    RunConfig c = file_.empty() ? RunConfig{} : load_config(file_);
    for (const auto& [key, value] : values_)
      if (value) c.set(key, *value);
    return c;
  }

 private:
  std::string file_;
  std::map<std::string, std::optional<std::string>> values_;
};

// Corpora, dictionary and context embeddings named by a run config.
struct Loaded {
  std::unique_ptr<GlyphDictionary> dict;
  corpus::Corpus train, dev, test;
  bool has_dev = false, has_test = false;
  ctx::ContextEmbeddings context, dev_context, test_context;

  tagger::Dataset train_set() const { return {&train, &context}; }
  std::optional<tagger::Dataset> dev_set() const {
    return has_dev ? std::optional(tagger::Dataset{&dev, &dev_context}) : std::nullopt;
  }
  tagger::Dataset test_set() const { return {&test, &test_context}; }
};

ctx::ContextEmbeddings split_context(const ctx::ContextEmbeddings& main, const std::string& path, const char* split) {
  if (!path.empty()) return ctx::load_context_embeddings(path);
  if (main.kind() == ctx::ContextKind::kContextual) {
    throw ConfigError(std::string("contextual embeddings need a separate file for the ") + split + " split");
  }
  return main;
}

Loaded load_inputs(const RunConfig& c, bool carve_dev, bool need_test) {
  Loaded l;
  if (c.train.empty()) throw ConfigError("--train is required");
  if (c.embeddings.empty()) throw ConfigError("--embeddings is required");
  if (c.encoder != EncoderKind::kNone || c.pretrain) {
    if (c.dict.empty()) throw ConfigError("--dict is required for a glyph encoder");
    l.dict = std::make_unique<GlyphDictionary>(load_dictionary(c.dict));
  }
  l.train = corpus::parse_conll(c.train, c.scheme, "train");
  l.context = ctx::load_context_embeddings(c.embeddings);
  l.context.check_alignment(l.train);
  if (!c.test.empty()) {
    l.test = corpus::parse_conll(c.test, c.scheme, "test");
    l.has_test = true;
    l.test_context = split_context(l.context, c.test_embeddings, "test");
    if (carve_dev) {
      if (l.test_context.kind() == ctx::ContextKind::kContextual) {
        throw ConfigError("--carve-dev works with static embeddings only");
      }
      std::tie(l.dev, l.test) = corpus::carve_dev(l.test);
      l.test.split = "test";
      l.has_dev = true;
      l.dev_context = l.test_context;
    }
    l.test_context.check_alignment(l.test);
  }
  if (!c.dev.empty()) {
    if (carve_dev) throw ConfigError("--dev and --carve-dev are mutually exclusive");
    l.dev = corpus::parse_conll(c.dev, c.scheme, "dev");
    l.has_dev = true;
    l.dev_context = split_context(l.context, c.dev_embeddings, "dev");
  }
  if (l.has_dev) l.dev_context.check_alignment(l.dev);
  if (need_test && !l.has_test) throw ConfigError("--test is required");
  return l;
}

// The synthetic corpus is fixed; --seed only varies the model.
Loaded synthetic_inputs() {
  auto w = synth::make_workspace();
  Loaded l;
  l.dict = std::make_unique<GlyphDictionary>(std::move(w.dict));
  l.train = std::move(w.train);
  l.dev = std::move(w.dev);
  l.test = std::move(w.test);
  l.has_dev = l.has_test = true;
  l.context = l.dev_context = l.test_context = std::move(w.context);
  return l;
}

std::string curve_tsv(const std::vector<tagger::EpochMetrics>& epochs) {
  std::string out = "epoch\ttrain_loss\tdev_loss\tdev_f1\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + '\t' + fmt("%.6f", e.train_loss) + '\t' +
           (e.dev_loss ? fmt("%.6f", *e.dev_loss) : "-") + '\t' + (e.dev_f1 ? fmt("%.6f", *e.dev_f1) : "-") + '\n';
  }
  return out;
}

std::string report_text(const eval::F1Report& r) {
  std::string out = "type\tprecision\trecall\tf1\ttp\tfp\tfn\n";
  auto row = [&](const std::string& name, const eval::Prf& p) {
    out += name + '\t' + fmt("%.4f", p.precision) + '\t' + fmt("%.4f", p.recall) + '\t' + fmt("%.4f", p.f1) + '\t' +
           std::to_string(p.tp) + '\t' + std::to_string(p.fp) + '\t' + std::to_string(p.fn) + '\n';
  };
  for (const auto& [type, p] : r.per_type) row(type, p);
  row("micro", r.micro);
  return out;
}

std::vector<double> parse_scores(const std::string& list) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(list);
  while (std::getline(in, item, ',')) {
    if (blank(item)) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (!blank(item.substr(used))) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<double> scores_from(const std::string& list, const std::string& file) {
  if (!file.empty()) {
    std::string text = read_text(file);
    for (auto& ch : text)
      if (ch == '\n' || ch == '\t' || ch == ' ') ch = ',';
    return parse_scores(text);
  }
  return parse_scores(list);
}

// ---- subcommands -------------------------------------------------------------

struct BuildDictArgs {
  std::string in, out, extend;
};

int cmd_build_dict(const BuildDictArgs& a) {
  const auto imported = import_pgm_directory(a.in);
  GlyphDictionary dict;
  if (!a.extend.empty()) {
    dict = extend_dictionary(load_dictionary(a.extend), imported);
  } else {
    const bool extended = std::ranges::any_of(imported, [](const auto& kv) { return !is_cjk(kv.first); });
    dict = GlyphDictionary(extended ? DictMode::kExtended : DictMode::kBase);
    for (const auto& [cp, bitmap] : imported) dict.insert(cp, bitmap);
  }
  save_dictionary(dict, a.out);
  std::cerr << "wrote " << dict.size() << " glyphs to " << a.out << '\n';
  return kOk;
}

struct PretrainArgs {
  std::string dict, out, curve;
  std::size_t epochs = 200;
  std::size_t batch = 16;
  std::uint64_t seed = 1;
};

int cmd_pretrain(const PretrainArgs& a) {
  const auto dict = load_dictionary(a.dict);
  std::mt19937_64 rng(a.seed);
  auto stack = enc::AutoencoderStack::glynn_mirror(rng);
  enc::PretrainConfig pc;
  pc.epochs = a.epochs;
  pc.batch_size = a.batch;
  pc.seed = a.seed;
  std::string curve;
  const auto r = enc::pretrain_autoencoder(dict, stack, pc, [&](std::size_t epoch, double loss) {
    curve += std::to_string(epoch) + '\t' + fmt("%.6f", loss) + '\n';
  });
  const std::string config = "kind=autoencoder\narch=glynn-mirror\nepochs=" + std::to_string(a.epochs) +
                             "\nbatch=" + std::to_string(a.batch) + "\nseed=" + std::to_string(a.seed) + '\n';
  ckpt::save(tagger::autoencoder_checkpoint(stack, config), a.out);
  if (!a.curve.empty()) write_text(a.curve, curve);
  std::cerr << "reconstruction loss " << fmt("%.4f", r.initial_loss) << " -> " << fmt("%.4f", r.final_loss) << '\n';
  return kOk;
}

struct TrainArgs {
  ConfigFlags flags;
  bool carve_dev = false;
  bool synthetic = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = a.flags.resolve();
  cfg.validate();
  if (cfg.output.empty()) throw ConfigError("--output directory is required");
  const Loaded in = a.synthetic ? synthetic_inputs() : load_inputs(cfg, a.carve_dev, false);
  const auto dir = std::filesystem::path(cfg.output);
  std::filesystem::create_directories(dir);
  if (a.synthetic) {
    // Materialize the inputs so eval and predict can run off the saved config.
    auto place = [&](const char* name) { return std::filesystem::absolute(dir / name).string(); };
    cfg.dict = place("synthetic.glyd");
    cfg.embeddings = place("synthetic.cemb");
    cfg.train = place("train.conll");
    cfg.dev = place("dev.conll");
    cfg.test = place("test.conll");
    save_dictionary(*in.dict, cfg.dict);
    ctx::save_context_embeddings(in.context, cfg.embeddings);
    corpus::write_conll(in.train, cfg.train);
    corpus::write_conll(in.dev, cfg.dev);
    corpus::write_conll(in.test, cfg.test);
  }
  std::vector<const corpus::Corpus*> corpora{&in.train};
  if (in.has_dev) corpora.push_back(&in.dev);
  if (in.has_test) corpora.push_back(&in.test);
  auto model = tagger::build_model(cfg, corpora, in.context.dim(), in.dict.get());

  const auto r = tagger::train(model, in.train_set(), in.dev_set(), cfg, [](const tagger::EpochMetrics& m) {
    std::cerr << "epoch " << m.epoch << " train " << fmt("%.4f", m.train_loss);
    if (m.dev_f1) std::cerr << " dev " << fmt("%.4f", *m.dev_loss) << " f1 " << fmt("%.4f", *m.dev_f1);
    std::cerr << '\n';
  });
  ckpt::save(model.to_checkpoint(cfg.to_text()), dir / "model.gtck");
  write_text((dir / "curve.tsv").string(), curve_tsv(r.epochs));
  write_text((dir / "config.txt").string(), cfg.to_text());
  std::cout << "best epoch " << r.best_epoch << (r.stopped_early ? " (stopped early)" : "") << '\n';
  if (in.has_test) {
    const auto ev = tagger::evaluate(model, in.test_set());
    std::cout << "test f1 " << fmt("%.4f", ev.report.micro.f1) << '\n';
  }
  return kOk;
}

struct ModelArgs {
  std::string model, data, embeddings, dict, scheme, output;
};

struct ModelInputs {
  RunConfig config;
  std::unique_ptr<GlyphDictionary> dict;
  ctx::ContextEmbeddings context;
};

ModelInputs model_inputs(const ModelArgs& a, const ckpt::Checkpoint& c) {
  ModelInputs m;
  m.config = parse_config_text(c.config, RunConfig{}, "checkpoint config");
  if (!a.scheme.empty() && corpus::parse_scheme(a.scheme) != m.config.scheme) {
    throw ConfigError("scheme " + a.scheme + " does not match the checkpoint's " + corpus::to_string(m.config.scheme));
  }
  const std::string emb = a.embeddings.empty() ? m.config.embeddings : a.embeddings;
  if (emb.empty()) throw ConfigError("--embeddings is required");
  m.context = ctx::load_context_embeddings(emb);
  if (m.context.dim() != m.config.context_dim) {
    throw ConfigError("embeddings have dim " + std::to_string(m.context.dim()) + ", the model expects " +
                      std::to_string(m.config.context_dim));
  }
  if (m.config.encoder != EncoderKind::kNone) {
    const std::string d = a.dict.empty() ? m.config.dict : a.dict;
    if (d.empty()) throw ConfigError("--dict is required for this model");
    m.dict = std::make_unique<GlyphDictionary>(load_dictionary(d));
  }
  return m;
}

int cmd_eval(const ModelArgs& a) {
  const auto c = ckpt::load(a.model);
  auto in = model_inputs(a, c);
  auto model = tagger::tagger_from_checkpoint(c, in.dict.get());
  const auto data = corpus::parse_conll(a.data, in.config.scheme, "eval");
  const auto ev = tagger::evaluate(model, {&data, &in.context});
  write_text(a.output, report_text(ev.report));
  return kOk;
}

int cmd_predict(const ModelArgs& a) {
  const auto c = ckpt::load(a.model);
  auto in = model_inputs(a, c);
  if (blank(read_text(a.data))) {
    write_text(a.output.empty() ? "-" : a.output, "");
    return kOk;
  }
  auto data = corpus::parse_conll(a.data, in.config.scheme, "predict");
  const corpus::TagVocab vocab(in.config.tags);
  for (const auto& s : data.sentences)
    for (const auto& t : s.tags)
      if (!vocab.find(t)) throw ConfigError("input tag '" + t + "' is not in the checkpoint's tag set");
  auto model = tagger::tagger_from_checkpoint(c, in.dict.get());
  const auto tags = tagger::predict(model, {&data, &in.context});
  for (std::size_t i = 0; i < data.sentences.size(); ++i) data.sentences[i].tags = tags[i];
  write_text(a.output, corpus::serialize_conll(data));
  return kOk;
}

struct StatsArgs {
  std::vector<std::string> data;
  std::string scheme = "iob";
};

int cmd_stats(const StatsArgs& a) {
  const auto scheme = corpus::parse_scheme(a.scheme);
  corpus::CorpusStats total;
  std::cout << "file\tsentences\ttokens\tentities\tviolations\n";
  for (const auto& path : a.data) {
    const auto c = corpus::parse_conll(path, scheme);
    const auto s = corpus::corpus_stats(c);
    total += s;
    std::cout << path << '\t' << s.sentences << '\t' << s.tokens << '\t' << s.entities << '\t' << c.violations.size()
              << '\n';
    for (const auto& v : c.violations) std::cerr << path << ':' << v.line << ": scheme violation " << v.tag << '\n';
  }
  if (a.data.size() > 1) std::cout << "total\t" << total.sentences << '\t' << total.tokens << '\t' << total.entities << "\t-\n";
  return kOk;
}

struct ConvertArgs {
  std::string data, from = "iob", to, output;
};

int cmd_convert(const ConvertArgs& a) {
  const auto c = corpus::parse_conll(a.data, corpus::parse_scheme(a.from));
  write_text(a.output, corpus::serialize_conll(corpus::convert_scheme(c, corpus::parse_scheme(a.to))));
  return kOk;
}

struct CampaignArgs {
  ConfigFlags flags;
  std::size_t trials = 10;
  std::string variants = "none,glynn";
  std::string baseline = "none";
  std::string ledger, trials_out, table_out;
  bool carve_dev = false, synthetic = false, pooled = false;
};

int cmd_campaign(const CampaignArgs& a) {
  tagger::CampaignSpec spec;
  spec.base = a.flags.resolve();
  spec.trials = a.trials;
  spec.pooled = a.pooled;
  spec.baseline = parse_encoder(a.baseline);
  spec.variants.clear();
  std::istringstream vs(a.variants);
  for (std::string v; std::getline(vs, v, ',');)
    if (!blank(v)) spec.variants.push_back(parse_encoder(v));
  const bool glyphs = std::ranges::any_of(spec.variants, [](EncoderKind k) { return k != EncoderKind::kNone; });
  RunConfig probe = spec.base;
  probe.encoder = glyphs ? EncoderKind::kGlynn : EncoderKind::kNone;
  const Loaded in = a.synthetic ? synthetic_inputs() : load_inputs(probe, a.carve_dev, true);

  std::mutex ledger_lock;
  // Append-only: earlier campaigns' rows stay, the header is written once.
  if (!a.ledger.empty() && (!std::filesystem::exists(a.ledger) || std::filesystem::file_size(a.ledger) == 0)) {
    write_text(a.ledger, tagger::kLedgerHeader);
  }
  const auto result = tagger::run_campaign(
      spec, {in.train_set(), in.dev_set(), in.test_set(), in.dict.get()}, [&](const tagger::TrialRecord& t) {
        std::cerr << to_string(t.variant) << " seed " << t.seed << " test f1 " << fmt("%.4f", t.test_f1) << '\n';
        if (a.ledger.empty()) return;
        const std::lock_guard lock(ledger_lock);
        std::ofstream out(a.ledger, std::ios::app | std::ios::binary);
        if (!out) throw IoError("cannot append to " + a.ledger);
        out << tagger::ledger_rows(t);
      });
  std::cout << result.table;
  if (!a.table_out.empty()) write_text(a.table_out, result.table);
  if (!a.trials_out.empty()) write_text(a.trials_out, tagger::trials_tsv(result));
  return kOk;
}

struct TTestArgs {
  std::string a, b, a_file, b_file;
  bool pooled = false;
};

int cmd_ttest(const TTestArgs& a) {
  const auto x = scores_from(a.a, a.a_file);
  const auto y = scores_from(a.b, a.b_file);
  const auto r = eval::two_sample_ttest(x, y, a.pooled);
  std::cout << "t\t" << fmt("%.6f", r.t) << "\ndf\t" << fmt("%.6f", r.df) << "\np\t" << fmt("%.6g", r.p) << '\n'
            << (r.p < eval::kSignificance ? "significant" : "not significant") << " at "
            << fmt("%.2f", eval::kSignificance) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glyph-augmented Chinese named entity recognition"};
  app.require_subcommand(1);

  BuildDictArgs bd;
  auto* s_bd = app.add_subcommand("build-dict", "Build a glyph dictionary from U+XXXX.pgm bitmaps");
  s_bd->add_option("--in", bd.in, "directory of 64x64 PGM files")->required();
  s_bd->add_option("--out", bd.out, "dictionary file to write")->required();
  s_bd->add_option("--extend", bd.extend, "base dictionary to extend");

  PretrainArgs pa;
  auto* s_pre = app.add_subcommand("pretrain", "Pretrain the GLYNN autoencoder on a dictionary");
  s_pre->add_option("--dict", pa.dict)->required();
  s_pre->add_option("--out", pa.out, "autoencoder checkpoint")->required();
  s_pre->add_option("--curve", pa.curve, "per-epoch loss TSV");
  s_pre->add_option("--epochs", pa.epochs);
  s_pre->add_option("--batch", pa.batch);
  s_pre->add_option("--seed", pa.seed);

  TrainArgs ta;
  auto* s_train = app.add_subcommand("train", "Train a tagger");
  ta.flags.attach(*s_train);
  s_train->add_flag("--carve-dev", ta.carve_dev, "use the first 10% of the test set as dev");
  s_train->add_flag("--synthetic", ta.synthetic, "train on the built-in synthetic corpus");

  ModelArgs ea;
  auto* s_eval = app.add_subcommand("eval", "Score a checkpoint on a labelled corpus");
  s_eval->add_option("--model", ea.model)->required();
  s_eval->add_option("--data", ea.data)->required();
  s_eval->add_option("--embeddings", ea.embeddings);
  s_eval->add_option("--dict", ea.dict);
  s_eval->add_option("--scheme", ea.scheme);
  s_eval->add_option("--out", ea.output);

  ModelArgs pr;
  auto* s_pred = app.add_subcommand("predict", "Tag a corpus with a checkpoint");
  s_pred->add_option("--model", pr.model)->required();
  s_pred->add_option("--input", pr.data)->required();
  s_pred->add_option("--embeddings", pr.embeddings);
  s_pred->add_option("--dict", pr.dict);
  s_pred->add_option("--scheme", pr.scheme);
  s_pred->add_option("--out", pr.output);

  StatsArgs st;
  auto* s_stats = app.add_subcommand("stats", "Sentence, token and entity counts");
  s_stats->add_option("--data", st.data)->required();
  s_stats->add_option("--scheme", st.scheme);

  ConvertArgs cv;
  auto* s_conv = app.add_subcommand("convert", "Convert between IOB and BIOES");
  s_conv->add_option("--data", cv.data)->required();
  s_conv->add_option("--from", cv.from);
  s_conv->add_option("--to", cv.to)->required();
  s_conv->add_option("--out", cv.output);

  CampaignArgs ca;
  auto* s_camp = app.add_subcommand("campaign", "Seeded trials per variant with a significance table");
  ca.flags.attach(*s_camp);
  s_camp->add_option("--trials", ca.trials);
  s_camp->add_option("--variants", ca.variants, "comma-separated encoders");
  s_camp->add_option("--baseline", ca.baseline);
  s_camp->add_option("--ledger", ca.ledger, "per-epoch TSV ledger");
  s_camp->add_option("--trials-out", ca.trials_out, "per-trial TSV");
  s_camp->add_option("--table-out", ca.table_out);
  s_camp->add_flag("--carve-dev", ca.carve_dev);
  s_camp->add_flag("--synthetic", ca.synthetic);
  s_camp->add_flag("--pooled", ca.pooled, "pooled-variance t-test instead of Welch");

  TTestArgs tt;
  auto* s_tt = app.add_subcommand("ttest", "Two-sample t-test on score lists");
  s_tt->add_option("--a", tt.a, "comma-separated scores");
  s_tt->add_option("--b", tt.b);
  s_tt->add_option("--a-file", tt.a_file, "one score per line");
  s_tt->add_option("--b-file", tt.b_file);
  s_tt->add_flag("--pooled", tt.pooled);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (s_bd->parsed()) return cmd_build_dict(bd);
    if (s_pre->parsed()) return cmd_pretrain(pa);
    if (s_train->parsed()) return cmd_train(ta);
    if (s_eval->parsed()) return cmd_eval(ea);
    if (s_pred->parsed()) return cmd_predict(pr);
    if (s_stats->parsed()) return cmd_stats(st);
    if (s_conv->parsed()) return cmd_convert(cv);
    if (s_camp->parsed()) return cmd_campaign(ca);
    if (s_tt->parsed()) return cmd_ttest(tt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kGeneric;
  }
  return kGeneric;
}
