#include "fsner/synth.hpp"

#include <cmath>
#include <cstdio>

#include "fsner/error.hpp"
#include "fsner/rng.hpp"

namespace fsner {

SynthConfig SynthConfig::from(const Config& cfg) {
  SynthConfig c;
  c.classes = static_cast<std::size_t>(cfg.get_int("synth_classes"));
  c.vocab_per_class =
      static_cast<std::size_t>(cfg.get_int("synth_vocab_per_class"));
  c.o_vocab = static_cast<std::size_t>(cfg.get_int("synth_o_vocab"));
  c.sentences = static_cast<std::size_t>(cfg.get_int("synth_sentences"));
  c.dev_sentences =
      static_cast<std::size_t>(cfg.get_int("synth_dev_sentences"));
  c.min_len = static_cast<std::size_t>(cfg.get_int("synth_min_len"));
  c.max_len = static_cast<std::size_t>(cfg.get_int("synth_max_len"));
  c.entity_prob = cfg.get_double("synth_entity_prob");
  c.span_max = static_cast<std::size_t>(cfg.get_int("synth_span_max"));
  c.d_emb = static_cast<std::size_t>(cfg.get_int("d_emb"));
  c.mean_scale = cfg.get_double("synth_mean_scale");
  c.mean_rank = static_cast<std::size_t>(cfg.get_int("synth_mean_rank"));
  c.std_min = cfg.get_double("synth_std_min");
  c.std_max = cfg.get_double("synth_std_max");
  c.o_std = cfg.get_double("synth_o_std");
  c.noise_dims = static_cast<std::size_t>(cfg.get_int("synth_noise_dims"));
  c.noise_std = cfg.get_double("synth_noise_std");
  c.pair_means = cfg.get_bool("synth_pair_means");
  c.seed = cfg.get_u64("seed");
  c.validate();
  return c;
}

void SynthConfig::validate() const {
  if (classes < 1) throw DomainError("synth: need at least 1 class");
  if (classes > 99) throw DomainError("synth: at most 99 classes");
  if (vocab_per_class < 1 || o_vocab < 1) {
    throw DomainError("synth: vocabulary sizes must be >= 1");
  }
  if (min_len < 1 || max_len < min_len) {
    throw DomainError("synth: need 1 <= min_len <= max_len");
  }
  if (entity_prob < 0.0 || entity_prob > 1.0) {
    throw DomainError("synth: entity_prob must be in [0, 1]");
  }
  if (span_max < 1) throw DomainError("synth: span_max must be >= 1");
  if (d_emb < 1) throw DomainError("synth: d_emb must be >= 1");
  if (!(std_min > 0.0) || std_max < std_min) {
    throw DomainError("synth: need 0 < std_min <= std_max");
  }
  if (!(o_std > 0.0)) throw DomainError("synth: o_std must be > 0");
  if (mean_rank > d_emb) {
    throw DomainError("synth: mean_rank cannot exceed d_emb");
  }
  if (noise_dims >= d_emb) {
    throw DomainError("synth: noise_dims must leave informative dimensions");
  }
  if (!(noise_std > 0.0)) throw DomainError("synth: noise_std must be > 0");
}

std::string synth_class_tag(std::size_t index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "C%02zu", index + 1);
  return buf;
}

namespace {

struct ClusterSpec {
  std::vector<double> mean;
  std::vector<double> stddev;
};

std::vector<double> draw_mean(const SynthConfig& cfg, Rng& rng,
                              const std::vector<std::vector<double>>& basis) {
  std::size_t info = cfg.d_emb - cfg.noise_dims;
  std::vector<double> mean(cfg.d_emb, 0.0);
  if (basis.empty()) {
    for (std::size_t i = 0; i < info; ++i) mean[i] = cfg.mean_scale * rng.normal();
    return mean;
  }
  // Low-rank means: random combination of the shared basis directions.
  for (const auto& dir : basis) {
    double coeff = cfg.mean_scale * rng.normal();
    for (std::size_t i = 0; i < info; ++i) mean[i] += coeff * dir[i];
  }
  return mean;
}

}  // namespace

SynthData generate_synth(const SynthConfig& cfg) {
  cfg.validate();
  SynthData data;

  Rng cluster_rng = Rng::child(cfg.seed, "synth-clusters");
  std::size_t info_dims = cfg.d_emb - cfg.noise_dims;
  std::vector<std::vector<double>> basis;
  if (cfg.mean_rank > 0 && cfg.mean_rank < info_dims) {
    for (std::size_t r = 0; r < cfg.mean_rank; ++r) {
      std::vector<double> dir(info_dims);
      double norm = 0.0;
      for (double& x : dir) {
        x = cluster_rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (double& x : dir) x /= norm;
      basis.push_back(std::move(dir));
    }
  }

  std::vector<ClusterSpec> clusters(cfg.classes + 1);  // index 0 is O
  clusters[0].mean.assign(cfg.d_emb, 0.0);
  clusters[0].stddev.assign(cfg.d_emb, cfg.o_std);
  for (std::size_t c = 1; c <= cfg.classes; ++c) {
    if (cfg.pair_means && c % 2 == 0) {
      clusters[c].mean = clusters[c - 1].mean;  // shares the pair's mean
    } else {
      clusters[c].mean = draw_mean(cfg, cluster_rng, basis);
    }
    clusters[c].stddev.resize(cfg.d_emb);
    for (std::size_t i = 0; i < info_dims; ++i) {
      if (cfg.pair_means) {
        double base = c % 2 == 1 ? cfg.std_min : cfg.std_max;
        clusters[c].stddev[i] = base * cluster_rng.uniform(0.9, 1.1);
      } else {
        clusters[c].stddev[i] = cluster_rng.uniform(cfg.std_min, cfg.std_max);
      }
    }
    for (std::size_t i = info_dims; i < cfg.d_emb; ++i) {
      clusters[c].stddev[i] = cfg.noise_std;
    }
  }
  for (std::size_t i = info_dims; i < cfg.d_emb; ++i) {
    clusters[0].stddev[i] = cfg.noise_std;
  }

  // Vocabulary: one fixed vector per token, drawn from its class cluster.
  Rng vocab_rng = Rng::child(cfg.seed, "synth-vocab");
  std::vector<std::vector<std::string>> class_vocab(cfg.classes + 1);
  std::vector<std::vector<double>> rows;
  auto add_token = [&](std::size_t cls, const std::string& text) {
    const ClusterSpec& spec = clusters[cls];
    std::vector<double> v(cfg.d_emb);
    for (std::size_t i = 0; i < cfg.d_emb; ++i) {
      v[i] = spec.mean[i] + spec.stddev[i] * vocab_rng.normal();
    }
    class_vocab[cls].push_back(text);
    data.vocab_order.push_back(text);
    rows.push_back(std::move(v));
  };
  char name[32];
  for (std::size_t i = 0; i < cfg.o_vocab; ++i) {
    std::snprintf(name, sizeof(name), "o_t%03zu", i);
    add_token(0, name);
  }
  for (std::size_t c = 1; c <= cfg.classes; ++c) {
    for (std::size_t i = 0; i < cfg.vocab_per_class; ++i) {
      std::snprintf(name, sizeof(name), "c%02zu_t%03zu", c, i);
      add_token(c, name);
    }
  }

  data.table.vectors = Tensor({rows.size(), cfg.d_emb});
  data.table.fallback.assign(cfg.d_emb, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    data.table.vocab.emplace(data.vocab_order[r], r);
    for (std::size_t i = 0; i < cfg.d_emb; ++i) {
      data.table.vectors.at(r, i) = rows[r][i];
      data.table.fallback[i] += rows[r][i];
    }
  }
  for (double& x : data.table.fallback) {
    x /= static_cast<double>(rows.size());
  }

  // Sentences: entity spans of 1..span_max tokens with probability
  // entity_prob per open position, O tokens otherwise.
  Rng text_rng = Rng::child(cfg.seed, "synth-text");
  auto make_sentence = [&]() {
    Sentence s;
    std::size_t len =
        cfg.min_len + text_rng.uniform_index(cfg.max_len - cfg.min_len + 1);
    while (s.tokens.size() < len) {
      if (text_rng.uniform() < cfg.entity_prob) {
        std::size_t cls = 1 + text_rng.uniform_index(cfg.classes);
        std::size_t span = 1 + text_rng.uniform_index(cfg.span_max);
        span = std::min(span, len - s.tokens.size());
        std::string tag = "I-" + synth_class_tag(cls - 1);
        for (std::size_t i = 0; i < span; ++i) {
          const auto& vocab = class_vocab[cls];
          s.tokens.push_back(
              {vocab[text_rng.uniform_index(vocab.size())], tag});
        }
      } else {
        const auto& vocab = class_vocab[0];
        s.tokens.push_back(
            {vocab[text_rng.uniform_index(vocab.size())], "O"});
      }
    }
    return s;
  };

  auto observe = [](LabeledCorpus& corpus) {
    for (const auto& s : corpus.sentences) {
      for (const auto& tok : s.tokens) {
        if (tok.tag != "O") corpus.tag_set.insert(tag_type(tok.tag));
      }
    }
  };
  for (std::size_t i = 0; i < cfg.sentences; ++i) {
    data.corpus.sentences.push_back(make_sentence());
  }
  for (std::size_t i = 0; i < cfg.dev_sentences; ++i) {
    data.dev_corpus.sentences.push_back(make_sentence());
  }
  observe(data.corpus);
  observe(data.dev_corpus);
  return data;
}

}  // namespace fsner
