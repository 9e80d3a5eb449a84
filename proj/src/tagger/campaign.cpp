#include "glyphner/campaign.hpp"

#include <algorithm>
#include <cstdio>

#include "glyphner/errors.hpp"

namespace glyphner::tagger {
namespace {

std::string real(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6f", v);
  return b;
}

}  // namespace

CampaignResult run_campaign(const CampaignSpec& spec, const CampaignData& data,
                            const std::function<void(const TrialRecord&)>& on_trial) {
  if (spec.trials < 2) throw ConfigError("a campaign needs at least two trials per variant");
  if (spec.variants.empty()) throw ConfigError("a campaign needs at least one variant");
  if (std::ranges::find(spec.variants, spec.baseline) == spec.variants.end()) {
    throw ConfigError("baseline variant '" + to_string(spec.baseline) + "' is not among the variants");
  }
  std::vector<const corpus::Corpus*> corpora{data.train.corpus, data.test.corpus};
  if (data.dev) corpora.push_back(data.dev->corpus);

  CampaignResult result;
  std::vector<std::vector<double>> scores(spec.variants.size());
  for (std::size_t v = 0; v < spec.variants.size(); ++v) {
    for (std::size_t k = 0; k < spec.trials; ++k) {
      RunConfig cfg = spec.base;
      cfg.encoder = spec.variants[v];
      cfg.pretrain = spec.base.pretrain && cfg.encoder == EncoderKind::kGlynn;
      cfg.seed = spec.base.seed + k;
      auto model = build_model(cfg, corpora, data.train.context->dim(), data.dict);
      const auto tr = train(model, data.train, data.dev, cfg);
      TrialRecord rec;
      rec.variant = cfg.encoder;
      rec.seed = cfg.seed;
      rec.epochs = tr.epochs;
      rec.best_epoch = tr.best_epoch;
      rec.test_f1 = evaluate(model, data.test).report.micro.f1;
      scores[v].push_back(rec.test_f1);
      if (on_trial) on_trial(rec);
      result.trials.push_back(std::move(rec));
    }
  }
  const auto base_index =
      static_cast<std::size_t>(std::ranges::find(spec.variants, spec.baseline) - spec.variants.begin());
  for (std::size_t v = 0; v < spec.variants.size(); ++v) {
    eval::TableRow row{to_string(spec.variants[v]), eval::summarize(scores[v]), std::nullopt};
    if (v != base_index) row.p_value = eval::two_sample_ttest(scores[v], scores[base_index], spec.pooled).p;
    result.rows.push_back(std::move(row));
  }
  result.table = eval::format_table(result.rows);
  return result;
}

std::string trials_tsv(const CampaignResult& result) {
  std::string out = "variant\tseed\tbest_epoch\ttest_f1\n";
  for (const auto& t : result.trials) {
    out += to_string(t.variant) + '\t' + std::to_string(t.seed) + '\t' + std::to_string(t.best_epoch) + '\t' +
           real(t.test_f1) + '\n';
  }
  return out;
}

std::string ledger_rows(const TrialRecord& trial) {
  std::string out;
  for (const auto& e : trial.epochs) {
    out += to_string(trial.variant) + '\t' + std::to_string(trial.seed) + '\t' + std::to_string(e.epoch) + '\t' +
           real(e.train_loss) + '\t' + (e.dev_loss ? real(*e.dev_loss) : "-") + '\t' +
           (e.dev_f1 ? real(*e.dev_f1) : "-") + '\t' + real(trial.test_f1) + '\n';
  }
  return out;
}

}  // namespace glyphner::tagger
