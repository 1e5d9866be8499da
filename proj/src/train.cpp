#include "fsner/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fsner/adam.hpp"
#include "fsner/error.hpp"
#include "fsner/infer.hpp"
#include "fsner/rng.hpp"

namespace fsner {

std::string finetune_policy_name(FinetunePolicy p) {
  switch (p) {
    case FinetunePolicy::kAuto: return "auto";
    case FinetunePolicy::kKlSymmetric: return "kl";
    case FinetunePolicy::kEuclideanMean: return "euclid_mean";
    case FinetunePolicy::kPointEuclidean: return "point_euclid";
    case FinetunePolicy::kPointCosine: return "point_cos";
  }
  return "auto";
}

FinetunePolicy finetune_policy_from_name(const std::string& name) {
  if (name == "auto") return FinetunePolicy::kAuto;
  if (name == "kl") return FinetunePolicy::kKlSymmetric;
  if (name == "euclid_mean") return FinetunePolicy::kEuclideanMean;
  if (name == "point_euclid") return FinetunePolicy::kPointEuclidean;
  if (name == "point_cos") return FinetunePolicy::kPointCosine;
  throw ParseError("unknown finetune mode '" + name + "'");
}

TrainConfig TrainConfig::from(const Config& cfg) {
  TrainConfig c;
  c.seed = cfg.get_u64("seed");
  c.max_sentence_len = static_cast<std::size_t>(cfg.get_int("max_sentence_len"));
  c.d_emb = static_cast<std::size_t>(cfg.get_int("d_emb"));
  c.window = static_cast<int>(cfg.get_int("window"));
  c.l_prime = static_cast<std::size_t>(cfg.get_int("l_prime"));
  c.l = static_cast<std::size_t>(cfg.get_int("l"));
  c.sigma_eps = cfg.get_double("sigma_eps");
  c.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size"));
  c.epochs = static_cast<std::size_t>(cfg.get_int("epochs"));
  c.lr_train = cfg.get_double("lr_train");
  c.lr_finetune = cfg.get_double("lr_finetune");
  c.train_mode = distance_mode_from_name(cfg.get("train_mode"));
  c.finetune_mode = finetune_policy_from_name(cfg.get("finetune_mode"));
  c.target_seen = cfg.get_bool("target_seen");
  c.max_finetune_iters =
      static_cast<std::size_t>(cfg.get_int("max_finetune_iters"));
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw DomainError("config: batch_size must be >= 1");
  if (!(lr_train > 0.0) || !(lr_finetune > 0.0)) {
    throw DomainError("config: learning rates must be positive");
  }
  if (l < 1 || l_prime < 1 || d_emb < 1) {
    throw DomainError("config: dimensions must be >= 1");
  }
  if (window < 0) throw DomainError("config: window must be >= 0");
  if (!(sigma_eps > 0.0)) throw DomainError("config: sigma_eps must be > 0");
  if (max_sentence_len < 1) {
    throw DomainError("config: max_sentence_len must be >= 1");
  }
}

double AbstractTransitions::p_start_o() const {
  return static_cast<double>(start_o + 1) /
         static_cast<double>(start_o + start_i + 2);
}
double AbstractTransitions::p_start_i() const {
  return static_cast<double>(start_i + 1) /
         static_cast<double>(start_o + start_i + 2);
}
double AbstractTransitions::p_o_o() const {
  return static_cast<double>(o_o + 1) / static_cast<double>(o_o + o_i + 2);
}
double AbstractTransitions::p_o_i() const {
  return static_cast<double>(o_i + 1) / static_cast<double>(o_o + o_i + 2);
}
double AbstractTransitions::p_i_o() const {
  return static_cast<double>(i_o + 1) /
         static_cast<double>(i_o + i_same + i_other + 3);
}
double AbstractTransitions::p_i_same() const {
  return static_cast<double>(i_same + 1) /
         static_cast<double>(i_o + i_same + i_other + 3);
}
double AbstractTransitions::p_i_other() const {
  return static_cast<double>(i_other + 1) /
         static_cast<double>(i_o + i_same + i_other + 3);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = encoder.parameters();
  for (Parameter* p : heads.parameters()) out.push_back(p);
  return out;
}

Model make_model(const TrainConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  Rng rng = Rng::child(config.seed, "init");
  m.encoder = make_encoder(config.d_emb, config.window, config.l_prime, rng);
  m.heads = make_heads(config.l_prime, config.l, rng, config.sigma_eps);
  return m;
}

std::vector<std::size_t> positives(const std::vector<std::string>& labels,
                                   std::size_t p) {
  if (p >= labels.size()) {
    throw DimensionError("positives: index out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < labels.size(); ++q) {
    if (q != p && labels[q] == labels[p]) out.push_back(q);
  }
  return out;
}

namespace {

double logsumexp_values(const std::vector<double>& xs) {
  double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

std::optional<double> token_loss(const std::vector<GaussianParams>& embeddings,
                                 const std::vector<std::string>& labels,
                                 std::size_t p, DistanceMode mode) {
  if (embeddings.size() != labels.size()) {
    throw DimensionError("token_loss: embeddings/labels length mismatch");
  }
  if (labels.size() < 2) {
    throw DimensionError("token_loss: batch must contain at least 2 tokens");
  }
  auto pos = positives(labels, p);
  if (pos.empty()) return std::nullopt;

  std::vector<double> neg_all;
  std::vector<double> neg_pos;
  neg_all.reserve(labels.size() - 1);
  neg_pos.reserve(pos.size());
  for (std::size_t q = 0; q < labels.size(); ++q) {
    if (q == p) continue;
    double d = distance(embeddings[p], embeddings[q], mode);
    neg_all.push_back(-d);
    if (labels[q] == labels[p]) neg_pos.push_back(-d);
  }
  // -log((sum_pos exp(-d) / |Xp|) / sum_all exp(-d)), via log-sum-exp.
  double lse_pos = logsumexp_values(neg_pos);
  double lse_all = logsumexp_values(neg_all);
  return lse_all - lse_pos + std::log(static_cast<double>(pos.size()));
}

BatchLoss batch_loss(Tape& tape, Model& model, const EmbeddingTable& table,
                     const std::vector<Sentence>& batch, DistanceMode mode,
                     NodeId* loss_node) {
  if (batch.empty()) throw DimensionError("batch_loss: empty batch");

  std::vector<std::string> labels;
  std::vector<TokenNodes> tokens;
  for (const auto& sentence : batch) {
    auto hs = encode(tape, model.encoder, table, sentence);
    for (std::size_t i = 0; i < hs.size(); ++i) {
      tokens.push_back(project(tape, model.heads, hs[i], mode));
      labels.push_back(sentence.tokens[i].tag);
    }
  }
  std::size_t n = tokens.size();
  if (n < 2) {
    throw DimensionError("batch_loss: batch must contain at least 2 tokens");
  }

  std::vector<TokenAux> aux(n);
  for (std::size_t i = 0; i < n; ++i) {
    aux[i] = make_token_aux(tape, tokens[i], mode);
  }

  // Pairwise distances, computed once per unordered pair (every mode is
  // symmetric by construction).
  std::vector<NodeId> neg_dist(n * n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      NodeId d = distance_node(tape, tokens[p], tokens[q], aux[p], aux[q], mode);
      NodeId nd = tape.neg(d);
      neg_dist[p * n + q] = nd;
      neg_dist[q * n + p] = nd;
    }
  }

  BatchLoss out;
  std::vector<NodeId> per_token;
  per_token.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<NodeId> all;
    std::vector<NodeId> pos;
    all.reserve(n - 1);
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      all.push_back(neg_dist[p * n + q]);
      if (labels[q] == labels[p]) pos.push_back(neg_dist[p * n + q]);
    }
    if (pos.empty()) {
      ++out.skipped;
      continue;
    }
    NodeId lse_all = tape.logsumexp(tape.concat(all));
    NodeId lse_pos = tape.logsumexp(tape.concat(pos));
    NodeId lp = tape.add_const(tape.sub(lse_all, lse_pos),
                               std::log(static_cast<double>(pos.size())));
    // Mean over a subset of the denominator's terms never exceeds the full
    // sum, so each per-token loss is nonnegative.
    if (tape.value(lp).item() < -1e-9) {
      throw TrainError("batch_loss: negative per-token loss " +
                       std::to_string(tape.value(lp).item()));
    }
    per_token.push_back(lp);
    ++out.contributing;
  }

  if (per_token.empty()) {
    throw TrainError("batch_loss: degenerate batch (no token has positives)");
  }
  NodeId loss = tape.mul_const(tape.sum(tape.concat(per_token)),
                               1.0 / static_cast<double>(per_token.size()));
  out.value = tape.value(loss).item();
  if (!std::isfinite(out.value)) {
    throw TrainError("batch_loss: non-finite loss");
  }
  if (loss_node) *loss_node = loss;
  return out;
}

BatchLoss batch_loss_value(Model& model, const EmbeddingTable& table,
                           const std::vector<Sentence>& batch,
                           DistanceMode mode) {
  Tape tape;
  return batch_loss(tape, model, table, batch, mode, nullptr);
}

namespace {

bool degenerate_batch_error(const TrainError& e) {
  return std::string(e.what()).find("degenerate batch") != std::string::npos;
}

}  // namespace

TrainResult train(Model& model, const LabeledCorpus& corpus,
                  const EmbeddingTable& table) {
  if (corpus.sentences.empty()) {
    throw DimensionError("train: empty corpus");
  }
  const TrainConfig& cfg = model.config;
  TrainResult result;
  AdamState adam;
  auto params = model.parameters();

  model.transitions = estimate_transitions(corpus);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(corpus.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::child(cfg.seed, "shuffle", epoch);
    shuffle_rng.shuffle(order);

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size, ++batch_index) {
      std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<Sentence> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(corpus.sentences[order[i]]);
      }

      Tape tape;
      NodeId loss_node = -1;
      BatchLoss bl;
      try {
        bl = batch_loss(tape, model, table, batch, cfg.train_mode, &loss_node);
      } catch (const TrainError& e) {
        if (degenerate_batch_error(e)) {
          ++result.degenerate_batches;
          continue;
        }
        throw;
      } catch (const DimensionError&) {
        // Single-token batch at the tail of an epoch: nothing to contrast.
        ++result.degenerate_batches;
        continue;
      }
      tape.backward(loss_node);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Parameter* p : params) grads.push_back(tape.grad_of(*p));
      adam_step(params, grads, adam, cfg.lr_train);
      result.history.push_back({epoch, batch_index, bl.value, bl.skipped});
    }
  }
  return result;
}

std::string format_history(const TrainResult& result) {
  std::string out = "# epoch batch loss skipped_tokens\n";
  char buf[128];
  for (const auto& r : result.history) {
    std::snprintf(buf, sizeof(buf), "%zu %zu %.17g %zu\n", r.epoch, r.batch,
                  r.loss, r.skipped_tokens);
    out += buf;
  }
  return out;
}

DistanceMode resolve_finetune_mode(const Model& model,
                                   const SupportSet& support) {
  switch (model.config.finetune_mode) {
    case FinetunePolicy::kKlSymmetric: return DistanceMode::kKlSymmetric;
    case FinetunePolicy::kEuclideanMean: return DistanceMode::kEuclideanMean;
    case FinetunePolicy::kPointEuclidean: return DistanceMode::kPointEuclidean;
    case FinetunePolicy::kPointCosine: return DistanceMode::kPointCosine;
    case FinetunePolicy::kAuto: break;
  }
  // Point-trained models keep their objective; Gaussian models use KL except
  // for 1-shot adaptation to unseen classes, where a single example cannot
  // pin down the class variance and the squared distance of means is used.
  if (model.config.train_mode == DistanceMode::kPointEuclidean ||
      model.config.train_mode == DistanceMode::kPointCosine) {
    return model.config.train_mode;
  }
  if (support.shots >= 2 || model.config.target_seen) {
    return DistanceMode::kKlSymmetric;
  }
  return DistanceMode::kEuclideanMean;
}

FinetuneResult finetune(Model& model, const SupportSet& support,
                        const EmbeddingTable& table) {
  if (support.sentences.empty()) {
    throw DimensionError("finetune: empty support set");
  }
  std::size_t total_tokens = 0;
  for (const auto& s : support.sentences) total_tokens += s.tokens.size();
  if (total_tokens < 2) {
    throw DimensionError("finetune: support must contain at least 2 tokens");
  }

  const TrainConfig& cfg = model.config;
  FinetuneResult result;
  result.mode_used = resolve_finetune_mode(model, support);

  AdamState adam;
  auto params = model.parameters();
  double prev = std::numeric_limits<double>::infinity();

  // The whole support set is one batch. Patience 1: the first evaluation
  // that fails to improve ends the loop without applying its update.
  for (std::size_t iter = 0; iter < cfg.max_finetune_iters; ++iter) {
    Tape tape;
    NodeId loss_node = -1;
    BatchLoss bl =
        batch_loss(tape, model, table, support.sentences, result.mode_used,
                   &loss_node);
    result.losses.push_back(bl.value);
    if (!(bl.value < prev)) break;
    prev = bl.value;

    tape.backward(loss_node);
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (Parameter* p : params) grads.push_back(tape.grad_of(*p));
    adam_step(params, grads, adam, cfg.lr_finetune);
    ++result.updates;
  }
  return result;
}

}  // namespace fsner
