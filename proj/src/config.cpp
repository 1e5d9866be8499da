#include "fsner/config.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "fsner/corpus.hpp"
#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::map<std::string, std::string>& Config::schema_defaults() {
  static const std::map<std::string, std::string> defaults = {
      // shared
      {"seed", "42"},
      {"max_sentence_len", "128"},
      // model dimensions
      {"d_emb", "50"},
      {"window", "2"},
      {"l_prime", "64"},
      {"l", "128"},
      {"sigma_eps", "1e-14"},
      // optimization
      {"batch_size", "8"},
      {"epochs", "10"},
      {"lr_train", "1e-3"},
      {"lr_finetune", "1e-4"},
      {"train_mode", "kl"},
      {"finetune_mode", "auto"},
      {"target_seen", "false"},
      {"max_finetune_iters", "100"},
      // inference / episode evaluation
      {"tau", "0.05"},
      {"viterbi", "false"},
      {"finetune", "true"},
      {"rep", "pre"},
      {"n", "2"},
      {"k", "1"},
      {"episodes", "10"},
      // synthetic corpus generation
      {"synth_classes", "12"},
      {"synth_vocab_per_class", "40"},
      {"synth_o_vocab", "80"},
      {"synth_sentences", "200"},
      {"synth_dev_sentences", "0"},
      {"synth_min_len", "4"},
      {"synth_max_len", "12"},
      {"synth_entity_prob", "0.35"},
      {"synth_span_max", "2"},
      {"synth_mean_scale", "3.0"},
      {"synth_mean_rank", "0"},
      {"synth_std_min", "0.3"},
      {"synth_std_max", "1.2"},
      {"synth_o_std", "1.0"},
      {"synth_noise_dims", "0"},
      {"synth_pair_means", "false"},
      {"synth_noise_std", "3.0"},
  };
  return defaults;
}

Config::Config() : values_(schema_defaults()) {}

bool Config::known_key(const std::string& key) {
  return schema_defaults().count(key) > 0;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ParseError("unknown config key '" + key + "'");
  }
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ParseError("unknown config key '" + key + "'");
  }
  return it->second;
}

bool Config::is_default(const std::string& key) const {
  return get(key) == schema_defaults().at(key);
}

void Config::load_file(const std::string& path) {
  load_text(read_text_file(path), path);
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(ln) +
                       ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ParseError(origin + ":" + std::to_string(ln) +
                       ": expected 'key = value'");
    }
    if (!known_key(key)) {
      throw ParseError(origin + ":" + std::to_string(ln) +
                       ": unknown config key '" + key + "'");
    }
    set(key, value);
  }
}

std::int64_t Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': bad integer '" + v + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': bad integer '" + v + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': bad number '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("config key '" + key + "': bad boolean '" + get(key) + "'");
}

std::string Config::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

std::string Config::fingerprint() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_text())));
  return buf;
}

}  // namespace fsner
