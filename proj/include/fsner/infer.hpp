#pragma once

#include <set>
#include <string>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/encoder.hpp"
#include "fsner/train.hpp"

namespace fsner {

// Which representation space nearest-neighbor inference runs in. Encoder
// outputs (pre-projection) are the default; the projected means are kept as
// an ablation.
enum class RepSource { kPreProjection, kPostProjection };

std::string rep_source_name(RepSource r);
RepSource rep_source_from_name(const std::string& name);

// Flat list of support token representations with their labels.
// tag_order fixes the tag indexing used by emissions/Viterbi: O first, then
// the target tags sorted.
struct SupportIndex {
  std::vector<std::vector<double>> vectors;
  std::vector<std::string> labels;
  RepSource source = RepSource::kPreProjection;
  std::vector<std::string> tag_order;
};

SupportIndex build_support_index(Model& model, const SupportSet& support,
                                 const EmbeddingTable& table,
                                 RepSource source);

// Per-token nearest-neighbor labels plus, for each tag in tag_order, the
// minimum squared Euclidean distance to any support vector of that tag
// (infinity when the tag has no support vectors). Ties break toward the
// lowest support index.
struct NnResult {
  std::vector<std::string> tags;
  std::vector<std::vector<double>> tag_min_dist;  // [n x |tag_order|]
};

NnResult nn_classify(const SupportIndex& index, const Sentence& query,
                     Model& model, const EmbeddingTable& table);

// Counts START->{O,I}, O->{O,I} and I->{O, I-same, I-other} over adjacent
// tag pairs of the corpus.
AbstractTransitions estimate_transitions(const LabeledCorpus& corpus);

// Abstract probabilities distributed evenly over N concrete target tags.
// Rows sum to 1 within 1e-9.
struct TransitionTable {
  std::vector<std::string> tags;          // O first, then sorted targets
  std::vector<double> start;              // [T]
  std::vector<std::vector<double>> rows;  // [T x T]
};

TransitionTable expand_transitions(const AbstractTransitions& abstract,
                                   const std::set<std::string>& target_tags);

std::string format_transitions(const AbstractTransitions& abstract,
                               const TransitionTable& table);

// Per-token distribution over tags: softmax of -min_distance/tau.
struct EmissionMatrix {
  std::vector<std::string> tags;
  std::vector<std::vector<double>> probs;  // [n x T], rows sum to 1
  double tau = 0.05;
};

EmissionMatrix emissions(const std::vector<std::vector<double>>& tag_min_dist,
                         const std::vector<std::string>& tags, double tau);

// Max-probability tag path in log space; ties break toward the lower tag
// index. Zero probabilities become -inf without producing NaN.
std::vector<std::string> viterbi_decode(const EmissionMatrix& emissions,
                                        const TransitionTable& transitions);

// Full pipeline: support index -> NN -> optional Viterbi smoothing.
// Returns the query sentences retagged with predictions.
std::vector<Sentence> predict(Model& model, const SupportSet& support,
                              const std::vector<Sentence>& queries,
                              const EmbeddingTable& table, bool use_viterbi,
                              double tau,
                              RepSource source = RepSource::kPreProjection);

}  // namespace fsner
