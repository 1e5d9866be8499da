#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "fsner/checkpoint.hpp"
#include "fsner/error.hpp"
#include "fsner/eval.hpp"
#include "fsner/synth.hpp"

using namespace fsner;

namespace {

Sentence sent(std::initializer_list<std::pair<const char*, const char*>> toks) {
  Sentence s;
  for (const auto& [text, tag] : toks) s.tokens.push_back({text, tag});
  return s;
}

SynthData small_synth(std::uint64_t seed) {
  SynthConfig sc;
  sc.classes = 4;
  sc.vocab_per_class = 10;
  sc.o_vocab = 12;
  sc.sentences = 40;
  sc.min_len = 3;
  sc.max_len = 6;
  sc.d_emb = 6;
  sc.entity_prob = 0.5;
  sc.seed = seed;
  return generate_synth(sc);
}

Model small_model(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.d_emb = 6;
  c.window = 1;
  c.l_prime = 10;
  c.l = 5;
  c.epochs = 2;
  c.batch_size = 8;
  return make_model(c);
}

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fsner_eval_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("extract_spans: basic runs") {
  auto spans = extract_spans({"O", "I-PER", "I-PER", "O"});
  REQUIRE(spans.size() == 1);
  CHECK(spans.count({1, 3, "PER"}) == 1);

  auto two = extract_spans({"I-A", "I-B"});
  CHECK(two.size() == 2);
  CHECK(two.count({0, 1, "A"}) == 1);
  CHECK(two.count({1, 2, "B"}) == 1);
}

TEST_CASE("extract_spans: 12-tag fixture against hand enumeration") {
  std::vector<std::string> tags = {"I-A", "I-A", "O",   "I-B", "I-B", "I-A",
                                   "O",   "O",   "I-C", "I-C", "I-C", "I-A"};
  auto spans = extract_spans(tags);
  std::set<Span> expect = {{0, 2, "A"}, {3, 5, "B"}, {5, 6, "A"},
                           {8, 11, "C"}, {11, 12, "A"}};
  CHECK(spans == expect);
}

TEST_CASE("extract_spans: retagging its own output is idempotent") {
  std::vector<std::string> tags = {"I-A", "O", "I-B", "I-B", "O", "I-A"};
  auto spans = extract_spans(tags);
  std::vector<std::string> rebuilt(tags.size(), "O");
  for (const auto& s : spans) {
    for (std::size_t i = s.start; i < s.end; ++i) rebuilt[i] = "I-" + s.type;
  }
  CHECK(rebuilt == tags);
  CHECK(extract_spans(rebuilt) == spans);
}

TEST_CASE("micro_f1: identical prediction scores 1.0") {
  auto gold = std::vector<Sentence>{
      sent({{"a", "I-A"}, {"b", "O"}, {"c", "I-B"}})};
  auto r = micro_f1(gold, gold);
  CHECK(r.f1 == 1.0);
  CHECK(r.tp == 2);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
}

TEST_CASE("micro_f1: all-O prediction scores 0 with zero-safe division") {
  auto gold = std::vector<Sentence>{
      sent({{"a", "I-A"}, {"b", "I-A"}, {"c", "O"}})};
  auto pred = std::vector<Sentence>{
      sent({{"a", "O"}, {"b", "O"}, {"c", "O"}})};
  auto r = micro_f1(gold, pred);
  CHECK(r.f1 == 0.0);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.fn == 1);
}

TEST_CASE("micro_f1: hand-computed 3-gold/2-pred/1-correct case") {
  auto gold = std::vector<Sentence>{
      sent({{"a", "I-A"}, {"b", "O"}, {"c", "I-B"}, {"d", "O"}, {"e", "I-C"}})};
  auto pred = std::vector<Sentence>{
      sent({{"a", "I-A"}, {"b", "O"}, {"c", "O"}, {"d", "I-B"}, {"e", "O"}})};
  auto r = micro_f1(gold, pred);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 2);
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == doctest::Approx(1.0 / 3.0));
  CHECK(r.f1 == doctest::Approx(0.4));
}

TEST_CASE("micro_f1: length mismatch violates the contract") {
  auto gold = std::vector<Sentence>{sent({{"a", "O"}})};
  auto pred = std::vector<Sentence>{sent({{"a", "O"}}), sent({{"b", "O"}})};
  CHECK_THROWS_AS(micro_f1(gold, pred), DimensionError);
  auto short_pred = std::vector<Sentence>{sent({{"a", "O"}, {"b", "O"}})};
  CHECK_THROWS_AS(micro_f1(gold, short_pred), DimensionError);
}

TEST_CASE("micro_f1: pooled counts are order-independent") {
  auto g1 = sent({{"a", "I-A"}, {"b", "O"}});
  auto g2 = sent({{"c", "I-B"}, {"d", "I-B"}});
  auto p1 = sent({{"a", "I-A"}, {"b", "I-A"}});
  auto p2 = sent({{"c", "I-B"}, {"d", "I-B"}});
  auto r12 = micro_f1({g1, g2}, {p1, p2});
  auto r21 = micro_f1({g2, g1}, {p2, p1});
  CHECK(r12.f1 == r21.f1);
  CHECK(r12.tp == r21.tp);
  CHECK(r12.fp == r21.fp);
}

TEST_CASE("checkpoint: save -> load preserves every tensor bit") {
  Model model = small_model(90);
  model.transitions = {3, 1, 40, 9, 7, 11, 2};
  std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(model, path);
  Model back = load_checkpoint(path);
  auto pa = model.parameters();
  auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    REQUIRE(pa[i]->value.size() == pb[i]->value.size());
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
    }
  }
  CHECK(back.transitions.o_o == 40);
  CHECK(back.config.seed == model.config.seed);
  CHECK(back.config.l == model.config.l);
}

TEST_CASE("checkpoint: save -> load -> save is byte identical") {
  Model model = small_model(91);
  std::string bytes = checkpoint_bytes(model);
  Model back = checkpoint_from_bytes(bytes);
  CHECK(checkpoint_bytes(back) == bytes);
}

TEST_CASE("checkpoint: truncation is a format error") {
  Model model = small_model(92);
  std::string bytes = checkpoint_bytes(model);
  for (std::size_t cut : {std::size_t(4), bytes.size() / 2, bytes.size() - 3}) {
    CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, cut)),
                    CheckpointError);
  }
}

TEST_CASE("checkpoint: future version is an explicit incompatibility") {
  Model model = small_model(93);
  std::string bytes = checkpoint_bytes(model);
  bytes[8] = 99;  // version field follows the 8-byte magic
  try {
    checkpoint_from_bytes(bytes);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("checkpoint: foreign file is rejected by magic") {
  CHECK_THROWS_AS(checkpoint_from_bytes("definitely not a checkpoint"),
                  CheckpointError);
}

TEST_CASE("export_embeddings: 1 sentence, 2 tokens, 3 meta + l' columns") {
  auto data = small_synth(94);
  Model model = small_model(94);
  LabeledCorpus two;
  two.sentences = {data.corpus.sentences[0]};
  two.sentences[0].tokens.resize(2);
  two.tag_set = data.corpus.tag_set;
  std::string pre = export_embeddings(model, two, data.table,
                                      RepSource::kPreProjection);
  std::vector<std::string> lines;
  std::string cur;
  for (char c : pre) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  REQUIRE(lines.size() == 2);
  for (const auto& line : lines) {
    std::size_t cols = 1;
    for (char c : line) cols += c == ' ';
    CHECK(cols == 3 + model.config.l_prime);
  }
  std::string post = export_embeddings(model, two, data.table,
                                       RepSource::kPostProjection);
  CHECK(pre != post);
}

TEST_CASE("export_embeddings: rows equal direct encode/project values") {
  auto data = small_synth(95);
  Model model = small_model(95);
  LabeledCorpus one;
  one.sentences = {data.corpus.sentences[1]};
  one.tag_set = data.corpus.tag_set;
  std::string text = export_embeddings(model, one, data.table,
                                       RepSource::kPreProjection);
  Tensor h = encode_values(model.encoder, data.table, one.sentences[0]);
  std::istringstream in(text);
  std::size_t si, pos;
  std::string tag;
  for (std::size_t i = 0; i < one.sentences[0].tokens.size(); ++i) {
    REQUIRE((in >> si >> pos >> tag));
    CHECK(si == 0);
    CHECK(pos == i);
    CHECK(tag == one.sentences[0].tokens[i].tag);
    for (std::size_t j = 0; j < model.config.l_prime; ++j) {
      double v;
      REQUIRE((in >> v));
      CHECK(v == doctest::Approx(h.at(i, j)).epsilon(1e-15));
    }
  }
}

TEST_CASE("run_episodes: a single episode has zero deviation") {
  auto data = small_synth(96);
  Model model = small_model(96);
  EpisodeSettings settings;
  settings.n = 2;
  settings.k = 1;
  settings.episodes = 1;
  settings.seed = 5;
  settings.do_finetune = false;
  auto report = run_episodes(model, data.corpus, data.table, settings);
  REQUIRE(report.episode_f1.size() == 1);
  CHECK(report.mean_f1 == report.episode_f1[0]);
  CHECK(report.stddev_f1 == 0.0);
}

TEST_CASE("run_episodes: identical settings give identical reports") {
  auto data = small_synth(97);
  Model model = small_model(97);
  EpisodeSettings settings;
  settings.n = 2;
  settings.k = 1;
  settings.episodes = 3;
  settings.seed = 6;
  settings.do_finetune = true;
  auto a = run_episodes(model, data.corpus, data.table, settings);
  auto b = run_episodes(model, data.corpus, data.table, settings);
  CHECK(a.episode_f1 == b.episode_f1);
  CHECK(format_run_report(a, settings) == format_run_report(b, settings));
}

TEST_CASE("run_episodes: finetuning off never mutates the base model") {
  auto data = small_synth(98);
  Model model = small_model(98);
  std::string before = checkpoint_bytes(model);
  EpisodeSettings settings;
  settings.n = 2;
  settings.k = 1;
  settings.episodes = 2;
  settings.seed = 7;
  settings.do_finetune = false;
  run_episodes(model, data.corpus, data.table, settings);
  CHECK(checkpoint_bytes(model) == before);

  settings.do_finetune = true;
  run_episodes(model, data.corpus, data.table, settings);
  CHECK(checkpoint_bytes(model) == before);
}

TEST_CASE("run_episodes: episode dump files round-trip") {
  auto data = small_synth(99);
  Model model = small_model(99);
  EpisodeSettings settings;
  settings.n = 2;
  settings.k = 1;
  settings.episodes = 2;
  settings.seed = 8;
  settings.do_finetune = false;
  settings.dump_prefix = temp_path("ep_");
  run_episodes(model, data.corpus, data.table, settings);
  for (const char* name : {"ep_0000.txt", "ep_0001.txt"}) {
    std::string path = temp_path(name);
    Episode ep = load_episode(path);
    CHECK(write_episode(ep) == read_text_file(path));
  }
}

TEST_CASE("checkpoint round trip preserves predictions exactly") {
  auto data = small_synth(100);
  Model model = small_model(100);
  model.transitions = estimate_transitions(data.corpus);
  auto support = sample_support(data.corpus, data.corpus.tag_set, 1, 9);
  std::vector<Sentence> queries = {data.corpus.sentences[2],
                                   data.corpus.sentences[3]};
  auto before = predict(model, support, queries, data.table, true, 0.05,
                        RepSource::kPreProjection);
  std::string path = temp_path("predict.ckpt");
  save_checkpoint(model, path);
  Model back = load_checkpoint(path);
  auto after = predict(back, support, queries, data.table, true, 0.05,
                       RepSource::kPreProjection);
  CHECK(write_predictions(queries, before) == write_predictions(queries, after));
}
