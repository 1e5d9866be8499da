#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fsner/corpus.hpp"
#include "fsner/infer.hpp"
#include "fsner/train.hpp"

namespace fsner {

// Half-open token range [start, end) of one entity type.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  auto operator<=>(const Span&) const = default;
};

// Maximal runs of consecutive I-X with the same X.
std::set<Span> extract_spans(const std::vector<std::string>& tags);

struct SpanF1Report {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

SpanF1Report report_from_counts(std::uint64_t tp, std::uint64_t fp,
                                std::uint64_t fn);

// Exact-match span micro-F1 pooled over all sentences. Throws DimensionError
// on sentence or token count mismatch.
SpanF1Report micro_f1(const std::vector<Sentence>& gold,
                      const std::vector<Sentence>& pred);

struct EpisodeSettings {
  std::size_t n = 2;
  std::size_t k = 1;
  std::size_t episodes = 10;
  std::uint64_t seed = 42;
  bool use_viterbi = false;
  bool do_finetune = true;
  double tau = 0.05;
  RepSource rep = RepSource::kPreProjection;
  // When set, each sampled episode is written to
  // "<prefix><episode index, 4 digits>.txt".
  std::string dump_prefix;
};

struct RunReport {
  std::vector<double> episode_f1;
  double mean_f1 = 0.0;
  double stddev_f1 = 0.0;   // population standard deviation
  double pooled_f1 = 0.0;   // spans pooled across episodes
  std::string config_fingerprint;
};

// Episode loop: sample, clone the base model, optionally finetune the clone
// on the support, predict the queries, score. The base model is never
// mutated.
RunReport run_episodes(const Model& base, const LabeledCorpus& corpus,
                       const EmbeddingTable& table,
                       const EpisodeSettings& settings);

// Deterministic text rendering; byte-identical for identical runs.
std::string format_run_report(const RunReport& report,
                              const EpisodeSettings& settings);

// Per-token rows "sentence position gold_tag v1 ... vd" for external
// dimensionality-reduction tooling.
std::string export_embeddings(Model& model, const LabeledCorpus& corpus,
                              const EmbeddingTable& table, RepSource source);

// Prediction file: "text<TAB>gold<TAB>pred" CoNLL columns.
std::string write_predictions(const std::vector<Sentence>& gold,
                              const std::vector<Sentence>& pred);

}  // namespace fsner
