#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsner/config.hpp"
#include "fsner/corpus.hpp"
#include "fsner/encoder.hpp"
#include "fsner/gauss.hpp"

namespace fsner {

// Finetune objective selection. kAuto applies the K-based rule: symmetric KL
// when K >= 2 or the target classes were (indirectly) seen in training,
// squared Euclidean distance of means for 1-shot on unseen classes. Models
// trained with a point-embedding mode keep that mode.
enum class FinetunePolicy {
  kAuto,
  kKlSymmetric,
  kEuclideanMean,
  kPointEuclidean,
  kPointCosine,
};

std::string finetune_policy_name(FinetunePolicy p);
FinetunePolicy finetune_policy_from_name(const std::string& name);

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t max_sentence_len = kDefaultMaxSentenceLen;
  std::size_t d_emb = 50;
  int window = 2;
  std::size_t l_prime = 64;
  std::size_t l = 128;
  double sigma_eps = kDefaultSigmaEps;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  double lr_train = 1e-3;
  double lr_finetune = 1e-4;
  DistanceMode train_mode = DistanceMode::kKlSymmetric;
  FinetunePolicy finetune_mode = FinetunePolicy::kAuto;
  bool target_seen = false;
  std::size_t max_finetune_iters = 100;

  static TrainConfig from(const Config& cfg);
  void validate() const;
};

// Abstract transition counts over {START, O, I, I-other}, filled from the
// training corpus. Declared here so the model can own its slot; estimation
// and expansion live with inference.
struct AbstractTransitions {
  std::uint64_t start_o = 0;
  std::uint64_t start_i = 0;
  std::uint64_t o_o = 0;
  std::uint64_t o_i = 0;
  std::uint64_t i_o = 0;
  std::uint64_t i_same = 0;
  std::uint64_t i_other = 0;

  // Add-one smoothed probabilities per row.
  double p_start_o() const;
  double p_start_i() const;
  double p_o_o() const;
  double p_o_i() const;
  double p_i_o() const;
  double p_i_same() const;
  double p_i_other() const;
};

// Encoder + projection heads + config + the transition slot. Plain value
// type: copying clones the whole model, which is how per-episode finetuning
// isolates episodes.
struct Model {
  EncoderParams encoder;
  ProjectionHeads heads;
  TrainConfig config;
  AbstractTransitions transitions;

  std::vector<Parameter*> parameters();
};

// Fresh model with seeded parameter init (sub-stream "init" of config.seed).
Model make_model(const TrainConfig& config);

// All indices q != p in the batch with the same label, O included.
std::vector<std::size_t> positives(const std::vector<std::string>& labels,
                                   std::size_t p);

// Contrastive loss of token p against the batch, plain-value route:
// -log( mean over positives of exp(-d) / sum over all q != p of exp(-d) ).
// Returns nullopt when p has no positives. Throws DimensionError when the
// batch has fewer than 2 tokens.
std::optional<double> token_loss(const std::vector<GaussianParams>& embeddings,
                                 const std::vector<std::string>& labels,
                                 std::size_t p, DistanceMode mode);

struct BatchLoss {
  double value = 0.0;
  std::size_t contributing = 0;  // tokens with a non-empty positive set
  std::size_t skipped = 0;       // tokens without positives
};

// Differentiable batch loss: encodes every sentence, projects every token,
// averages per-token losses over contributing tokens. Throws TrainError when
// every token is skipped (degenerate batch; callers skip such batches).
BatchLoss batch_loss(Tape& tape, Model& model, const EmbeddingTable& table,
                     const std::vector<Sentence>& batch, DistanceMode mode,
                     NodeId* loss_node);

// Forward-only value.
BatchLoss batch_loss_value(Model& model, const EmbeddingTable& table,
                           const std::vector<Sentence>& batch,
                           DistanceMode mode);

struct TrainRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  std::size_t skipped_tokens = 0;
};

struct TrainResult {
  std::vector<TrainRecord> history;
  std::size_t degenerate_batches = 0;
};

// Source-domain training: per epoch, seeded shuffle, batches of batch_size
// sentences without replacement, Adam updates. Also fills
// model.transitions from the corpus. Degenerate batches are counted and
// skipped, not fatal.
TrainResult train(Model& model, const LabeledCorpus& corpus,
                  const EmbeddingTable& table);

// "epoch batch loss skipped" lines for external plotting.
std::string format_history(const TrainResult& result);

struct FinetuneResult {
  std::vector<double> losses;    // one entry per loss evaluation
  std::size_t updates = 0;       // parameter updates applied
  DistanceMode mode_used = DistanceMode::kKlSymmetric;
};

// Support-set finetuning on one batch with patience-1 early stopping: stop
// at the first loss evaluation that fails to improve on the previous one.
// Iteration count is capped by config.max_finetune_iters.
FinetuneResult finetune(Model& model, const SupportSet& support,
                        const EmbeddingTable& table);

// The mode kAuto resolves to for a given support set and model.
DistanceMode resolve_finetune_mode(const Model& model,
                                   const SupportSet& support);

}  // namespace fsner
