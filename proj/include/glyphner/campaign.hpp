#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glyphner/config.hpp"
#include "glyphner/eval.hpp"
#include "glyphner/trainer.hpp"

namespace glyphner::tagger {

struct CampaignSpec {
  RunConfig base;  // seeds run base.seed, base.seed + 1, ...
  std::vector<EncoderKind> variants{EncoderKind::kNone, EncoderKind::kGlynn};
  EncoderKind baseline = EncoderKind::kNone;
  std::size_t trials = 10;
  bool pooled = false;  // Student's pooled-variance test instead of Welch
};

struct TrialRecord {
  EncoderKind variant = EncoderKind::kNone;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double test_f1 = 0.0;
};

struct CampaignData {
  Dataset train;
  std::optional<Dataset> dev;
  Dataset test;
  const GlyphDictionary* dict = nullptr;
};

struct CampaignResult {
  std::vector<TrialRecord> trials;
  std::vector<eval::TableRow> rows;  // one per variant, in spec order
  std::string table;
};

// Trains every variant under otherwise identical configs, once per seed,
// and scores each best-dev model on the test set. Variants other than the
// baseline get a p-value against it. Throws ConfigError for fewer than two
// trials or a baseline missing from the variants.
CampaignResult run_campaign(const CampaignSpec& spec, const CampaignData& data,
                            const std::function<void(const TrialRecord&)>& on_trial = {});

// One row per trial: variant, seed, best epoch, test F1.
std::string trials_tsv(const CampaignResult& result);
// One row per trial and epoch: variant, seed, epoch, train loss, dev loss,
// dev F1 and the trial's final test F1.
std::string ledger_rows(const TrialRecord& trial);
inline constexpr const char* kLedgerHeader = "variant\tseed\tepoch\ttrain_loss\tdev_loss\tdev_f1\ttest_f1\n";

}  // namespace glyphner::tagger
