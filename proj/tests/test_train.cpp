#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fsner/error.hpp"
#include "fsner/synth.hpp"
#include "fsner/train.hpp"
#include "test_util.hpp"

using namespace fsner;

namespace {

EmbeddingTable tiny_table() {
  return parse_embeddings(
      "4 3\nalpha 1 0 0\nbeta 0 1 0\ngamma 0 0 1\ndelta 0.5 -0.5 0.25\n");
}

Sentence sent(std::initializer_list<std::pair<const char*, const char*>> toks) {
  Sentence s;
  for (const auto& [text, tag] : toks) s.tokens.push_back({text, tag});
  return s;
}

TrainConfig small_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.seed = seed;
  c.d_emb = 3;
  c.window = 1;
  c.l_prime = 6;
  c.l = 3;
  c.batch_size = 2;
  c.epochs = 2;
  return c;
}

GaussianParams gp(std::vector<double> mu, std::vector<double> sigma) {
  return {std::move(mu), std::move(sigma)};
}

// Independent full-forward recomputation of the batch loss with plain
// loops over the raw parameter tensors (no Tape, no project/encode calls).
double oracle_batch_loss(const Model& model, const EmbeddingTable& table,
                         const std::vector<Sentence>& batch,
                         DistanceMode mode) {
  const EncoderParams& e = model.encoder;
  const ProjectionHeads& hd = model.heads;
  std::size_t lp = e.out_dim();
  std::size_t l = hd.out_dim();

  std::vector<std::vector<double>> mus, sigmas;
  std::vector<std::string> labels;
  for (const auto& s : batch) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      auto x = window_input(table, s, i, e.window);
      std::vector<double> a1(lp, 0.0), h(lp, 0.0);
      for (std::size_t j = 0; j < lp; ++j) {
        double v = e.b1.value[j];
        for (std::size_t k = 0; k < x.size(); ++k) {
          v += x[k] * e.w1.value.at(k, j);
        }
        a1[j] = v > 0.0 ? v : 0.0;
      }
      for (std::size_t j = 0; j < lp; ++j) {
        double v = e.b2.value[j];
        for (std::size_t k = 0; k < lp; ++k) {
          v += a1[k] * e.w2.value.at(k, j);
        }
        h[j] = v;
      }
      std::vector<double> rh(lp);
      for (std::size_t j = 0; j < lp; ++j) rh[j] = h[j] > 0.0 ? h[j] : 0.0;
      std::vector<double> mu_raw(l, 0.0), sig_raw(l, 0.0);
      for (std::size_t j = 0; j < l; ++j) {
        double m = hd.b_mu.value[j], g = hd.b_sigma.value[j];
        for (std::size_t k = 0; k < lp; ++k) {
          m += rh[k] * hd.w_mu.value.at(k, j);
          g += rh[k] * hd.w_sigma.value.at(k, j);
        }
        mu_raw[j] = m;
        sig_raw[j] = g;
      }
      if (mode == DistanceMode::kPointEuclidean ||
          mode == DistanceMode::kPointCosine) {
        std::vector<double> point = mu_raw;
        point.insert(point.end(), sig_raw.begin(), sig_raw.end());
        mus.push_back(point);
        sigmas.push_back({});
      } else {
        std::vector<double> sg(l);
        for (std::size_t j = 0; j < l; ++j) {
          double v = sig_raw[j];
          sg[j] = (v > 0.0 ? v : std::expm1(v)) + 1.0 + hd.sigma_eps;
        }
        mus.push_back(mu_raw);
        sigmas.push_back(sg);
      }
      labels.push_back(s.tokens[i].tag);
    }
  }

  auto dist = [&](std::size_t a, std::size_t b) {
    if (mode == DistanceMode::kKlSymmetric) {
      double kl_ab = 0.0, kl_ba = 0.0;
      for (std::size_t j = 0; j < mus[a].size(); ++j) {
        double d = mus[a][j] - mus[b][j];
        kl_ab += sigmas[a][j] / sigmas[b][j] + d * d / sigmas[b][j] - 1.0 +
                 std::log(sigmas[b][j] / sigmas[a][j]);
        kl_ba += sigmas[b][j] / sigmas[a][j] + d * d / sigmas[a][j] - 1.0 +
                 std::log(sigmas[a][j] / sigmas[b][j]);
      }
      return 0.25 * (kl_ab + kl_ba);
    }
    if (mode == DistanceMode::kPointCosine) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t j = 0; j < mus[a].size(); ++j) {
        dot += mus[a][j] * mus[b][j];
        na += mus[a][j] * mus[a][j];
        nb += mus[b][j] * mus[b][j];
      }
      return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < mus[a].size(); ++j) {
      double d = mus[a][j] - mus[b][j];
      s += d * d;
    }
    return s;
  };

  double total = 0.0;
  std::size_t contributing = 0;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    double num = 0.0, den = 0.0;
    std::size_t npos = 0;
    for (std::size_t q = 0; q < labels.size(); ++q) {
      if (q == p) continue;
      double w = std::exp(-dist(p, q));
      den += w;
      if (labels[q] == labels[p]) {
        num += w;
        ++npos;
      }
    }
    if (npos == 0) continue;
    total += -std::log((num / static_cast<double>(npos)) / den);
    ++contributing;
  }
  REQUIRE(contributing > 0);
  return total / static_cast<double>(contributing);
}

}  // namespace

TEST_CASE("positives: basic examples") {
  CHECK(positives({"I-PER", "O", "I-PER"}, 0) == std::vector<std::size_t>{2});
  CHECK(positives({"I-PER", "O"}, 0).empty());
}

TEST_CASE("positives: matches an exhaustive scan on a 3-sentence batch") {
  std::vector<std::string> labels = {"O",     "I-A", "O",   "I-B", "I-A",
                                     "I-B",   "O",   "I-A", "O"};
  for (std::size_t p = 0; p < labels.size(); ++p) {
    auto got = positives(labels, p);
    std::vector<std::size_t> expect;
    for (std::size_t q = 0; q < labels.size(); ++q) {
      if (q != p && labels[q] == labels[p]) expect.push_back(q);
    }
    CHECK(got == expect);
  }
}

TEST_CASE("token_loss: two tokens with one label give exactly zero") {
  auto e = gp({1.0, 2.0}, {0.5, 0.7});
  auto f = gp({-1.0, 0.0}, {1.5, 2.0});
  auto loss = token_loss({e, f}, {"I-X", "I-X"}, 0, DistanceMode::kKlSymmetric);
  REQUIRE(loss.has_value());
  CHECK(*loss == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("token_loss: one positive and one negative both at d=0 gives ln 2") {
  // identical embeddings make every pairwise distance zero
  auto e = gp({0.3, -0.2}, {1.0, 1.0});
  auto loss =
      token_loss({e, e, e}, {"I-X", "I-X", "O"}, 0, DistanceMode::kKlSymmetric);
  REQUIRE(loss.has_value());
  CHECK(*loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("token_loss: no positives is a skip, not an error") {
  auto e = gp({0.0}, {1.0});
  auto f = gp({1.0}, {1.0});
  CHECK(!token_loss({e, f}, {"I-X", "O"}, 0, DistanceMode::kKlSymmetric)
             .has_value());
}

TEST_CASE("token_loss: batch of one token violates the contract") {
  auto e = gp({0.0}, {1.0});
  CHECK_THROWS_AS(token_loss({e}, {"O"}, 0, DistanceMode::kKlSymmetric),
                  DimensionError);
}

TEST_CASE("batch_loss: uniform single-label batch follows the count ratio") {
  // With every embedding identical, all pairwise distances are 0 and each
  // token sees |Xp| = n-1 positives out of n-1 candidates, so the per-token
  // loss collapses to ln(n-1). The two-token case is exactly 0.
  auto table = tiny_table();
  Model model = make_model(small_config(5));
  model.encoder.w1.value.fill(0.0);
  model.encoder.b1.value.fill(0.0);
  model.encoder.w2.value.fill(0.0);
  model.encoder.b2.value.fill(0.3);  // every token identical
  auto pair_batch = std::vector<Sentence>{
      sent({{"alpha", "O"}, {"beta", "O"}}),
  };
  auto bl2 = batch_loss_value(model, table, pair_batch,
                              DistanceMode::kKlSymmetric);
  CHECK(bl2.value == doctest::Approx(0.0).epsilon(1e-12));

  auto batch = std::vector<Sentence>{
      sent({{"alpha", "O"}, {"beta", "O"}}),
      sent({{"gamma", "O"}, {"delta", "O"}}),
  };
  auto bl = batch_loss_value(model, table, batch, DistanceMode::kKlSymmetric);
  CHECK(bl.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(bl.contributing == 4);
  CHECK(bl.skipped == 0);
}

TEST_CASE("batch_loss: equals the independent forward oracle in every mode") {
  auto table = tiny_table();
  auto batch = std::vector<Sentence>{
      sent({{"alpha", "I-A"}, {"beta", "O"}}),
      sent({{"gamma", "I-A"}, {"delta", "I-B"}, {"alpha", "I-B"}}),
  };
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Model model = make_model(small_config(seed));
    for (auto mode : {DistanceMode::kKlSymmetric, DistanceMode::kEuclideanMean,
                      DistanceMode::kPointEuclidean,
                      DistanceMode::kPointCosine}) {
      auto bl = batch_loss_value(model, table, batch, mode);
      double expect = oracle_batch_loss(model, table, batch, mode);
      CHECK(bl.value == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("batch_loss: gradients match finite differences in every mode") {
  auto table = tiny_table();
  auto batch = std::vector<Sentence>{
      sent({{"alpha", "I-A"}, {"beta", "O"}, {"gamma", "I-A"}}),
      sent({{"delta", "O"}, {"alpha", "I-A"}, {"beta", "O"}}),
  };
  Model model = make_model(small_config(21));
  for (auto mode : {DistanceMode::kKlSymmetric, DistanceMode::kEuclideanMean,
                    DistanceMode::kPointEuclidean, DistanceMode::kPointCosine}) {
    Tape tape;
    NodeId loss = -1;
    batch_loss(tape, model, table, batch, mode, &loss);
    tape.backward(loss);
    auto params = model.parameters();
    std::vector<Tensor> analytic;
    for (auto* p : params) analytic.push_back(tape.grad_of(*p));
    auto fd = testutil::finite_diff(params, [&]() {
      return batch_loss_value(model, table, batch, mode).value;
    });
    for (std::size_t i = 0; i < params.size(); ++i) {
      CHECK(testutil::max_rel_err(analytic[i], fd[i]) < 1e-4);
    }
  }
}

TEST_CASE("batch_loss: degenerate batch (all tokens skipped) raises") {
  auto table = tiny_table();
  Model model = make_model(small_config(31));
  auto batch = std::vector<Sentence>{
      sent({{"alpha", "I-A"}, {"beta", "I-B"}}),
  };
  CHECK_THROWS_AS(
      batch_loss_value(model, table, batch, DistanceMode::kKlSymmetric),
      TrainError);
}

TEST_CASE("property: per-token loss is nonnegative on random batches") {
  for (std::uint64_t trial = 0; trial < 300; ++trial) {
    Rng rng = Rng::child(40, "lpos", trial);
    std::size_t n = 2 + rng.uniform_index(6);
    std::vector<GaussianParams> embs;
    std::vector<std::string> labels;
    const char* names[] = {"O", "I-A", "I-B"};
    for (std::size_t i = 0; i < n; ++i) {
      embs.push_back(testutil::random_gaussian(3, rng));
      labels.push_back(names[rng.uniform_index(3)]);
    }
    for (std::size_t p = 0; p < n; ++p) {
      auto loss = token_loss(embs, labels, p, DistanceMode::kKlSymmetric);
      if (loss) CHECK(*loss >= -1e-12);
    }
  }
}

TEST_CASE("property: consistent label renaming leaves the loss unchanged") {
  auto table = tiny_table();
  Model model = make_model(small_config(51));
  auto batch = std::vector<Sentence>{
      sent({{"alpha", "I-A"}, {"beta", "O"}, {"gamma", "I-A"}}),
      sent({{"delta", "O"}, {"alpha", "I-B"}}),
  };
  auto renamed = batch;
  for (auto& s : renamed) {
    for (auto& t : s.tokens) {
      if (t.tag == "I-A") t.tag = "I-Z";
      else if (t.tag == "O") t.tag = "I-Q";
      else if (t.tag == "I-B") t.tag = "O";
    }
  }
  auto a = batch_loss_value(model, table, batch, DistanceMode::kKlSymmetric);
  auto b = batch_loss_value(model, table, renamed, DistanceMode::kKlSymmetric);
  CHECK(a.value == b.value);
  CHECK(a.contributing == b.contributing);
}

TEST_CASE("property: batch order does not change the loss value") {
  auto table = tiny_table();
  Model model = make_model(small_config(52));
  auto batch = std::vector<Sentence>{
      sent({{"alpha", "I-A"}, {"beta", "O"}}),
      sent({{"gamma", "I-A"}, {"delta", "O"}}),
      sent({{"alpha", "O"}, {"gamma", "I-A"}}),
  };
  auto reordered = std::vector<Sentence>{batch[2], batch[0], batch[1]};
  auto a = batch_loss_value(model, table, batch, DistanceMode::kKlSymmetric);
  auto b = batch_loss_value(model, table, reordered, DistanceMode::kKlSymmetric);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
}

namespace {

SynthData three_class_data(std::uint64_t seed) {
  SynthConfig sc;
  sc.classes = 3;
  sc.vocab_per_class = 10;
  sc.o_vocab = 15;
  sc.sentences = 24;
  sc.min_len = 3;
  sc.max_len = 6;
  sc.d_emb = 6;
  sc.entity_prob = 0.5;
  sc.seed = seed;
  return generate_synth(sc);
}

TrainConfig synth_train_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.d_emb = 6;
  c.window = 1;
  c.l_prime = 12;
  c.l = 6;
  c.batch_size = 8;
  c.epochs = 50;
  return c;
}

}  // namespace

TEST_CASE("train: zero epochs leave the model untouched") {
  auto data = three_class_data(61);
  TrainConfig cfg = synth_train_config(61);
  cfg.epochs = 0;
  Model model = make_model(cfg);
  Model before = model;
  auto result = train(model, data.corpus, data.table);
  CHECK(result.history.empty());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const Tensor& a = model.parameters()[i]->value;
    const Tensor& b = before.parameters()[i]->value;
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
  }
}

TEST_CASE("train: mean epoch loss decreases on a 3-class synthetic corpus") {
  auto data = three_class_data(62);
  Model model = make_model(synth_train_config(62));
  auto result = train(model, data.corpus, data.table);
  REQUIRE(!result.history.empty());
  double first = 0.0, last = 0.0;
  std::size_t nf = 0, nl = 0;
  std::size_t last_epoch = result.history.back().epoch;
  for (const auto& r : result.history) {
    if (r.epoch == 0) {
      first += r.loss;
      ++nf;
    }
    if (r.epoch == last_epoch) {
      last += r.loss;
      ++nl;
    }
  }
  first /= static_cast<double>(nf);
  last /= static_cast<double>(nl);
  CHECK(last < first);
}

TEST_CASE("train: identical seeds give bit-identical loss histories") {
  auto data = three_class_data(63);
  TrainConfig cfg = synth_train_config(63);
  cfg.epochs = 4;
  Model m1 = make_model(cfg);
  Model m2 = make_model(cfg);
  auto r1 = train(m1, data.corpus, data.table);
  auto r2 = train(m2, data.corpus, data.table);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].loss == r2.history[i].loss);
  }
  CHECK(format_history(r1) == format_history(r2));
}

TEST_CASE("train: degenerate batches are skipped with a counter") {
  auto table = tiny_table();
  LabeledCorpus corpus;
  corpus.sentences = {sent({{"alpha", "I-A"}}), sent({{"beta", "I-B"}})};
  corpus.tag_set = {"A", "B"};
  TrainConfig cfg = small_config(64);
  cfg.epochs = 1;
  cfg.batch_size = 2;
  Model model = make_model(cfg);
  auto result = train(model, corpus, table);
  CHECK(result.degenerate_batches == 1);
  CHECK(result.history.empty());
}

TEST_CASE("train: fills the abstract transition slot") {
  auto data = three_class_data(65);
  TrainConfig cfg = synth_train_config(65);
  cfg.epochs = 1;
  Model model = make_model(cfg);
  train(model, data.corpus, data.table);
  const auto& t = model.transitions;
  CHECK(t.start_o + t.start_i == data.corpus.sentences.size());
}

TEST_CASE("finetune: patience 1 - a worsening step stops after 2 evals") {
  auto data = three_class_data(71);
  TrainConfig cfg = synth_train_config(71);
  cfg.lr_finetune = 50.0;  // huge step: the first update overshoots
  Model model = make_model(cfg);
  auto support = sample_support(data.corpus, data.corpus.tag_set, 1, 5);
  auto result = finetune(model, support, data.table);
  CHECK(result.losses.size() == 2);
  CHECK(result.updates == 1);
  CHECK(result.losses[1] >= result.losses[0]);
}

TEST_CASE("finetune: loop cap bounds the number of updates") {
  auto data = three_class_data(72);
  TrainConfig cfg = synth_train_config(72);
  cfg.lr_finetune = 1e-9;  // improvements never stop on their own
  cfg.max_finetune_iters = 3;
  Model model = make_model(cfg);
  auto support = sample_support(data.corpus, data.corpus.tag_set, 1, 5);
  auto result = finetune(model, support, data.table);
  CHECK(result.losses.size() == 3);
  CHECK(result.updates == 3);
}

TEST_CASE("finetune: same seed, same stop iteration") {
  auto data = three_class_data(73);
  TrainConfig cfg = synth_train_config(73);
  Model m1 = make_model(cfg);
  Model m2 = make_model(cfg);
  auto support = sample_support(data.corpus, data.corpus.tag_set, 2, 9);
  auto r1 = finetune(m1, support, data.table);
  auto r2 = finetune(m2, support, data.table);
  CHECK(r1.losses == r2.losses);
  CHECK(r1.updates == r2.updates);
}

TEST_CASE("finetune: losses improve strictly until the stop point") {
  auto data = three_class_data(74);
  Model model = make_model(synth_train_config(74));
  auto support = sample_support(data.corpus, data.corpus.tag_set, 2, 11);
  auto result = finetune(model, support, data.table);
  REQUIRE(!result.losses.empty());
  for (std::size_t i = 1; i + 1 < result.losses.size(); ++i) {
    CHECK(result.losses[i] < result.losses[i - 1]);
  }
  CHECK(result.updates >= 1);
}

TEST_CASE("finetune: single-token support violates the contract") {
  auto table = tiny_table();
  Model model = make_model(small_config(75));
  SupportSet support;
  support.sentences = {sent({{"alpha", "I-A"}})};
  support.target_tags = {"A"};
  support.shots = 1;
  CHECK_THROWS_AS(finetune(model, support, table), DimensionError);
}

TEST_CASE("finetune mode policy: K and target_seen routing") {
  TrainConfig cfg = small_config(80);
  Model model = make_model(cfg);
  SupportSet s1;
  s1.shots = 1;
  SupportSet s5;
  s5.shots = 5;
  CHECK(resolve_finetune_mode(model, s5) == DistanceMode::kKlSymmetric);
  CHECK(resolve_finetune_mode(model, s1) == DistanceMode::kEuclideanMean);
  model.config.target_seen = true;
  CHECK(resolve_finetune_mode(model, s1) == DistanceMode::kKlSymmetric);
  model.config.target_seen = false;
  model.config.finetune_mode = FinetunePolicy::kPointCosine;
  CHECK(resolve_finetune_mode(model, s5) == DistanceMode::kPointCosine);
  model.config.finetune_mode = FinetunePolicy::kAuto;
  model.config.train_mode = DistanceMode::kPointEuclidean;
  CHECK(resolve_finetune_mode(model, s5) == DistanceMode::kPointEuclidean);
}
