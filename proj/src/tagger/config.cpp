#include "glyphner/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "glyphner/errors.hpp"

namespace glyphner {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string bad(std::string_view key, std::string_view value) {
  return "invalid value '" + std::string(value) + "' for " + std::string(key);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) throw ConfigError(bad(key, v));
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(bad(key, v));
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(bad(key, v));
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size() && !v.empty()) {
    const auto comma = v.find(',', pos);
    auto item = trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kNone:
      return "none";
    case EncoderKind::kStrided:
      return "strided";
    case EncoderKind::kGlynn:
      return "glynn";
  }
  return "none";
}

EncoderKind parse_encoder(std::string_view name) {
  if (name == "none") return EncoderKind::kNone;
  if (name == "strided") return EncoderKind::kStrided;
  if (name == "glynn") return EncoderKind::kGlynn;
  throw ConfigError("unknown encoder '" + std::string(name) + "' (expected none, strided or glynn)");
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string v = trim(raw);
  if (key == "encoder") encoder = parse_encoder(v);
  else if (key == "hidden-size-lstm") hidden_size_lstm = to_uint(key, v);
  else if (key == "dropout-lstm") dropout_lstm = to_double(key, v);
  else if (key == "glynn-dropout1") glynn_dropout1 = to_double(key, v);
  else if (key == "glynn-dropout2") glynn_dropout2 = to_double(key, v);
  else if (key == "optimizer") optimizer = optim::parse_optimizer(v);
  else if (key == "learning-rate") learning_rate = (v.empty() || v == "auto") ? std::nullopt : std::optional(to_double(key, v));
  else if (key == "clip-grad-norm") clip_grad_norm = to_double(key, v);
  else if (key == "weight-decay") weight_decay = to_double(key, v);
  else if (key == "first-decay-steps") first_decay_steps = to_uint(key, v);
  else if (key == "period-multiplier") period_multiplier = to_double(key, v);
  else if (key == "min-rate") min_rate = to_double(key, v);
  else if (key == "training-epochs") training_epochs = to_uint(key, v);
  else if (key == "mini-batch-size") mini_batch_size = to_uint(key, v);
  else if (key == "early-stop-patience") early_stop_patience = to_uint(key, v);
  else if (key == "seed") seed = to_uint(key, v);
  else if (key == "scheme") scheme = corpus::parse_scheme(v);
  else if (key == "pretrain") pretrain = to_bool(key, v);
  else if (key == "pretrain-epochs") pretrain_epochs = to_uint(key, v);
  else if (key == "tags") tags = split_list(v);
  else if (key == "context-dim") context_dim = to_uint(key, v);
  else if (key == "dict") dict = v;
  else if (key == "embeddings") embeddings = v;
  else if (key == "dev-embeddings") dev_embeddings = v;
  else if (key == "test-embeddings") test_embeddings = v;
  else if (key == "train") train = v;
  else if (key == "dev") dev = v;
  else if (key == "test") test = v;
  else if (key == "pretrained") pretrained = v;
  else if (key == "output") output = v;
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o << "encoder=" << to_string(encoder) << '\n'
    << "hidden-size-lstm=" << hidden_size_lstm << '\n'
    << "dropout-lstm=" << num(dropout_lstm) << '\n'
    << "glynn-dropout1=" << num(glynn_dropout1) << '\n'
    << "glynn-dropout2=" << num(glynn_dropout2) << '\n'
    << "optimizer=" << optim::to_string(optimizer) << '\n'
    << "learning-rate=" << (learning_rate ? num(*learning_rate) : std::string("auto")) << '\n'
    << "clip-grad-norm=" << num(clip_grad_norm) << '\n'
    << "weight-decay=" << num(weight_decay) << '\n'
    << "first-decay-steps=" << first_decay_steps << '\n'
    << "period-multiplier=" << num(period_multiplier) << '\n'
    << "min-rate=" << num(min_rate) << '\n'
    << "training-epochs=" << training_epochs << '\n'
    << "mini-batch-size=" << mini_batch_size << '\n'
    << "early-stop-patience=" << early_stop_patience << '\n'
    << "seed=" << seed << '\n'
    << "scheme=" << corpus::to_string(scheme) << '\n'
    << "pretrain=" << (pretrain ? "on" : "off") << '\n'
    << "pretrain-epochs=" << pretrain_epochs << '\n'
    << "tags=" << join(tags) << '\n'
    << "context-dim=" << context_dim << '\n'
    << "dict=" << dict << '\n'
    << "embeddings=" << embeddings << '\n'
    << "dev-embeddings=" << dev_embeddings << '\n'
    << "test-embeddings=" << test_embeddings << '\n'
    << "train=" << train << '\n'
    << "dev=" << dev << '\n'
    << "test=" << test << '\n'
    << "pretrained=" << pretrained << '\n'
    << "output=" << output << '\n';
  return o.str();
}

void RunConfig::validate() const {
  auto rate = [](const char* name, double r) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1), got " + num(r));
  };
  rate("dropout-lstm", dropout_lstm);
  rate("glynn-dropout1", glynn_dropout1);
  rate("glynn-dropout2", glynn_dropout2);
  if (hidden_size_lstm == 0) throw ConfigError("hidden-size-lstm must be positive");
  if (mini_batch_size == 0) throw ConfigError("mini-batch-size must be positive");
  if (!(clip_grad_norm > 0.0)) throw ConfigError("clip-grad-norm must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight-decay must be non-negative");
  if (learning_rate && !(*learning_rate > 0.0)) throw ConfigError("learning-rate must be positive");
  if (first_decay_steps == 0) throw ConfigError("first-decay-steps must be positive");
  if (!(period_multiplier >= 1.0)) throw ConfigError("period-multiplier must be >= 1");
  if (min_rate < 0.0) throw ConfigError("min-rate must be non-negative");
  if (pretrain && encoder != EncoderKind::kGlynn) throw ConfigError("pretrain=on needs encoder=glynn");
}

optim::OptimizerConfig RunConfig::optimizer_config() const {
  optim::OptimizerConfig c;
  c.kind = optimizer;
  c.lr = learning_rate;
  c.weight_decay = weight_decay;
  return c;
}

optim::ScheduleConfig RunConfig::schedule_config() const {
  optim::ScheduleConfig s;
  s.base_rate = learning_rate.value_or(optimizer == optim::OptimizerKind::kRmsprop ? optim::kRmspropDefaultLr
                                                                                    : optim::kAdamDefaultLr);
  s.first_decay_steps = first_decay_steps;
  s.period_multiplier = period_multiplier;
  s.min_rate = min_rate;
  return s;
}

RunConfig parse_config_text(std::string_view text, RunConfig base, const std::string& source) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++line_no;
    if (!line.empty() && line[0] != '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
      }
      try {
        base.set(trim(std::string_view(line).substr(0, eq)), std::string_view(line).substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base), path.string());
}

}  // namespace glyphner
