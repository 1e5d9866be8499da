#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsner/config.hpp"
#include "fsner/corpus.hpp"
#include "fsner/encoder.hpp"

namespace fsner {

// Synthetic corpus whose token vectors are drawn from per-class Gaussian
// clusters. Class c gets a mean (optionally restricted to a low-rank
// subspace, which crowds the mean directions together) and per-dimension
// standard deviations drawn from [std_min, std_max]; every vocabulary entry
// of the class is one draw from that cluster. Sentences mix entity spans
// and O tokens.
struct SynthConfig {
  std::size_t classes = 12;
  std::size_t vocab_per_class = 40;
  std::size_t o_vocab = 80;
  std::size_t sentences = 200;
  std::size_t dev_sentences = 0;
  std::size_t min_len = 4;
  std::size_t max_len = 12;
  double entity_prob = 0.35;
  std::size_t span_max = 2;
  std::size_t d_emb = 16;
  double mean_scale = 3.0;
  std::size_t mean_rank = 0;  // 0 = full rank
  double std_min = 0.3;
  double std_max = 1.2;
  double o_std = 1.0;
  // Classes 2k and 2k+1 share one cluster mean and differ only in spread:
  // even classes are tight (std_min), odd classes wide (std_max). Mean
  // position alone cannot separate such a pair.
  bool pair_means = false;
  // Trailing dimensions carrying no class signal: every cluster (O included)
  // gets mean 0 and noise_std there. Large values drown the informative
  // dimensions at init, so nearest-neighbor inference only works after the
  // encoder learns to suppress them.
  std::size_t noise_dims = 0;
  double noise_std = 3.0;
  std::uint64_t seed = 42;

  static SynthConfig from(const Config& cfg);
  void validate() const;
};

struct SynthData {
  LabeledCorpus corpus;
  LabeledCorpus dev_corpus;  // empty unless dev_sentences > 0
  EmbeddingTable table;
  std::vector<std::string> vocab_order;  // table rows in generation order
};

// Class tags are "C01".."Cnn".
std::string synth_class_tag(std::size_t index);

SynthData generate_synth(const SynthConfig& config);

}  // namespace fsner
