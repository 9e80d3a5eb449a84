#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "glyphner/corpus.hpp"
#include "glyphner/optim.hpp"

namespace glyphner {

enum class EncoderKind { kNone, kStrided, kGlynn };

std::string to_string(EncoderKind kind);
// Accepts "none", "strided", "glynn"; throws ConfigError otherwise.
EncoderKind parse_encoder(std::string_view name);

// Every knob of a run. Keys in text form are the field names with hyphens.
struct RunConfig {
  EncoderKind encoder = EncoderKind::kGlynn;
  std::size_t hidden_size_lstm = 256;
  double dropout_lstm = 0.5;
  double glynn_dropout1 = 0.3;
  double glynn_dropout2 = 0.5;

  optim::OptimizerKind optimizer = optim::OptimizerKind::kAdafactor;
  std::optional<double> learning_rate;  // unset: Adafactor relative step / optimizer default
  double clip_grad_norm = 1.0;
  double weight_decay = 0.005;
  std::uint64_t first_decay_steps = 1000;
  double period_multiplier = 2.0;
  double min_rate = 0.0;

  std::size_t training_epochs = 30;
  std::size_t mini_batch_size = 8;
  std::size_t early_stop_patience = 0;  // 0 disables
  std::uint64_t seed = 1;
  corpus::Scheme scheme = corpus::Scheme::kIob;

  bool pretrain = false;
  std::size_t pretrain_epochs = 200;

  // Filled from the data when empty / zero; stored in checkpoints.
  std::vector<std::string> tags;
  std::size_t context_dim = 0;

  std::string dict;
  std::string embeddings;
  std::string dev_embeddings;
  std::string test_embeddings;
  std::string train;
  std::string dev;
  std::string test;
  std::string pretrained;  // autoencoder checkpoint
  std::string output;

  // Applies one key=value pair; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  // Canonical text: every key once, in a fixed order.
  std::string to_text() const;
  // Throws ConfigError on an inconsistent combination (e.g. dropout outside [0,1)).
  void validate() const;

  optim::OptimizerConfig optimizer_config() const;
  optim::ScheduleConfig schedule_config() const;
};

// Applies "key=value" lines on top of `base`; blank lines and '#' comments
// are ignored. Errors name the source and line.
RunConfig parse_config_text(std::string_view text, RunConfig base = {}, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace glyphner
