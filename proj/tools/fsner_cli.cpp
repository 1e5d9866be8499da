// Command-line front end. Talks to the library exclusively through the C
// API in fsner.h; all domain logic lives behind that boundary.

#include <cstdio>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsner.h"

namespace {

// RAII wrappers around the C handles.
struct ConfigDeleter {
  void operator()(fsner_config* p) const { fsner_config_free(p); }
};
struct CorpusDeleter {
  void operator()(fsner_corpus* p) const { fsner_corpus_free(p); }
};
struct TableDeleter {
  void operator()(fsner_table* p) const { fsner_table_free(p); }
};
struct ModelDeleter {
  void operator()(fsner_model* p) const { fsner_model_free(p); }
};
struct ReportDeleter {
  void operator()(fsner_report* p) const { fsner_report_free(p); }
};
using ConfigPtr = std::unique_ptr<fsner_config, ConfigDeleter>;
using CorpusPtr = std::unique_ptr<fsner_corpus, CorpusDeleter>;
using TablePtr = std::unique_ptr<fsner_table, TableDeleter>;
using ModelPtr = std::unique_ptr<fsner_model, ModelDeleter>;
using ReportPtr = std::unique_ptr<fsner_report, ReportDeleter>;

struct CliString {
  char* s = nullptr;
  ~CliString() { fsner_string_free(s); }
};

struct Failure {
  int code;
};

void check(fsner_status st) {
  if (st != FSNER_OK) {
    std::fprintf(stderr, "error: %s\n", fsner_last_error());
    throw Failure{static_cast<int>(st)};
  }
}

// Flags and config files both feed one fsner_config; flags win. Keys the
// user touched explicitly are remembered so that model-level options can be
// forwarded onto loaded checkpoints without clobbering their stored values.
struct ConfigCli {
  ConfigPtr cfg{fsner_config_new()};
  std::string config_file;
  std::vector<std::string> sets;
  std::set<std::string> explicit_keys;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file,
                    "config file with 'key = value' lines");
    cmd->add_option("--set", sets,
                    "override a config key, e.g. --set epochs=20")
        ->take_all();
  }

  void resolve() {
    if (!config_file.empty()) {
      check(fsner_config_load_file(cfg.get(), config_file.c_str()));
      // The file's keys count as explicit; parse them back out of the file.
      // Flags applied below still override.
      std::FILE* f = std::fopen(config_file.c_str(), "rb");
      if (f) {
        char line[512];
        while (std::fgets(line, sizeof(line), f)) {
          std::string s(line);
          auto hash = s.find('#');
          if (hash != std::string::npos) s = s.substr(0, hash);
          auto eq = s.find('=');
          if (eq == std::string::npos) continue;
          auto key = s.substr(0, eq);
          key.erase(0, key.find_first_not_of(" \t"));
          auto end = key.find_last_not_of(" \t");
          if (end == std::string::npos) continue;
          key = key.substr(0, end + 1);
          if (!key.empty()) explicit_keys.insert(key);
        }
        std::fclose(f);
      }
    }
    for (const auto& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                     kv.c_str());
        throw Failure{2};
      }
      std::string key = kv.substr(0, eq);
      check(fsner_config_set(cfg.get(), key.c_str(), kv.substr(eq + 1).c_str()));
      explicit_keys.insert(key);
    }
  }

  void set(const std::string& key, const std::string& value) {
    check(fsner_config_set(cfg.get(), key.c_str(), value.c_str()));
    explicit_keys.insert(key);
  }

  std::string get(const std::string& key) const {
    CliString v;
    check(fsner_config_get(cfg.get(), key.c_str(), &v.s));
    return v.s;
  }

  void print_resolved() const {
    CliString text;
    check(fsner_config_resolved_text(cfg.get(), &text.s));
    CliString fp;
    check(fsner_config_fingerprint(cfg.get(), &fp.s));
    std::printf("resolved config (fingerprint %s):\n", fp.s);
    for (const char* p = text.s; *p;) {
      const char* nl = p;
      while (*nl && *nl != '\n') ++nl;
      std::printf("  %.*s\n", static_cast<int>(nl - p), p);
      p = *nl ? nl + 1 : nl;
    }
    std::printf("seed: %s\n", get("seed").c_str());
  }

  // Forwards explicitly-set model options onto a loaded checkpoint.
  void apply_model_overrides(fsner_model* model) const {
    static const char* overridable[] = {
        "batch_size",  "epochs",          "lr_train",
        "lr_finetune", "finetune_mode",   "target_seen",
        "max_finetune_iters", "max_sentence_len", "seed"};
    for (const char* key : overridable) {
      if (explicit_keys.count(key)) {
        check(fsner_model_set(model, key, get(key).c_str()));
      }
    }
  }
};

// Dedicated flags for frequently used config keys. Stored as strings and
// pushed into the config after parsing so that flag > file precedence holds.
struct KeyFlag {
  std::string key;
  std::string value;
  CLI::Option* opt = nullptr;
};

void add_key_flags(CLI::App* cmd, std::vector<KeyFlag>& flags,
                   const std::vector<std::string>& keys) {
  flags.reserve(flags.size() + keys.size());
  for (const auto& key : keys) {
    flags.push_back({key, "", nullptr});
    KeyFlag& kf = flags.back();
    std::string flag = "--" + key;
    for (auto& c : flag) {
      if (c == '_') c = '-';
    }
    kf.opt = cmd->add_option(flag, kf.value, "config key " + key);
  }
}

void apply_key_flags(ConfigCli& cc, const std::vector<KeyFlag>& flags) {
  for (const auto& kf : flags) {
    if (kf.opt->count() > 0) cc.set(kf.key, kf.value);
  }
}

CorpusPtr load_corpus(const ConfigCli& cc, const std::string& path,
                      const std::string& keep_tags) {
  fsner_corpus* raw = nullptr;
  size_t truncated = 0;
  check(fsner_corpus_load_conll(cc.cfg.get(), path.c_str(), &raw, &truncated));
  CorpusPtr corpus(raw);
  if (truncated > 0) {
    std::fprintf(stderr,
                 "warning: %zu sentence(s) in %s truncated to max_sentence_len "
                 "%s\n",
                 truncated, path.c_str(), cc.get("max_sentence_len").c_str());
  }
  if (!keep_tags.empty()) {
    fsner_corpus* masked = nullptr;
    check(fsner_corpus_mask_tags(corpus.get(), keep_tags.c_str(), &masked));
    corpus.reset(masked);
  }
  return corpus;
}

void describe_corpus(const char* label, const fsner_corpus* corpus) {
  size_t sentences = 0, tokens = 0;
  check(fsner_corpus_sentence_count(corpus, &sentences));
  check(fsner_corpus_token_count(corpus, &tokens));
  CliString tags;
  check(fsner_corpus_tag_set_text(corpus, &tags.s));
  std::printf("%s: %zu sentences, %zu tokens, tags: %s\n", label, sentences,
              tokens, tags.s[0] ? tags.s : "(none)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot token classification via Gaussian-embedding "
               "contrastive learning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  // gen-synth
  auto* gen = app.add_subcommand(
      "gen-synth", "generate a synthetic Gaussian-cluster corpus");
  ConfigCli gen_cc;
  gen_cc.attach(gen);
  std::vector<KeyFlag> gen_flags;
  add_key_flags(gen, gen_flags,
                {"seed", "d_emb", "synth_classes", "synth_vocab_per_class",
                 "synth_o_vocab", "synth_sentences", "synth_dev_sentences",
                 "synth_min_len", "synth_max_len", "synth_entity_prob",
                 "synth_span_max", "synth_mean_scale", "synth_mean_rank",
                 "synth_std_min", "synth_std_max", "synth_o_std",
                 "synth_noise_dims", "synth_noise_std", "synth_pair_means"});
  std::string gen_out_conll, gen_out_dev, gen_out_emb;
  gen->add_option("--out-conll", gen_out_conll, "corpus output path")
      ->required();
  gen->add_option("--out-dev", gen_out_dev, "dev-split output path");
  gen->add_option("--out-embeddings", gen_out_emb, "embedding output path")
      ->required();

  // train
  auto* tr = app.add_subcommand("train", "contrastive training on a corpus");
  ConfigCli tr_cc;
  tr_cc.attach(tr);
  std::vector<KeyFlag> tr_flags;
  add_key_flags(tr, tr_flags,
                {"seed", "d_emb", "window", "l_prime", "l", "sigma_eps",
                 "batch_size", "epochs", "lr_train", "lr_finetune",
                 "train_mode", "finetune_mode", "target_seen",
                 "max_sentence_len", "max_finetune_iters"});
  std::string tr_corpus, tr_emb, tr_out, tr_history, tr_keep;
  tr->add_option("--corpus", tr_corpus, "training corpus (CoNLL)")->required();
  tr->add_option("--embeddings", tr_emb, "word2vec-format embeddings")
      ->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--loss-history", tr_history, "per-batch loss record path");
  tr->add_option("--keep-tags", tr_keep,
                 "train only on these entity types (others masked to O)");

  // finetune
  auto* ft = app.add_subcommand("finetune", "adapt a model to a support set");
  ConfigCli ft_cc;
  ft_cc.attach(ft);
  std::vector<KeyFlag> ft_flags;
  add_key_flags(ft, ft_flags,
                {"lr_finetune", "finetune_mode", "target_seen",
                 "max_finetune_iters", "max_sentence_len"});
  std::string ft_model, ft_support, ft_emb, ft_out;
  ft->add_option("--model", ft_model, "input checkpoint")->required();
  ft->add_option("--support", ft_support, "support set (CoNLL)")->required();
  ft->add_option("--embeddings", ft_emb, "word2vec-format embeddings")
      ->required();
  ft->add_option("--out", ft_out, "checkpoint output path")->required();

  // predict
  auto* pr = app.add_subcommand("predict",
                                "label query sentences from a support set");
  ConfigCli pr_cc;
  pr_cc.attach(pr);
  std::vector<KeyFlag> pr_flags;
  add_key_flags(pr, pr_flags,
                {"viterbi", "tau", "rep", "max_sentence_len"});
  std::string pr_model, pr_support, pr_input, pr_emb, pr_out, pr_dump;
  pr->add_option("--model", pr_model, "input checkpoint")->required();
  pr->add_option("--support", pr_support, "support set (CoNLL)")->required();
  pr->add_option("--input", pr_input, "query sentences (CoNLL)")->required();
  pr->add_option("--embeddings", pr_emb, "word2vec-format embeddings")
      ->required();
  pr->add_option("--out", pr_out, "prediction output path")->required();
  pr->add_option("--dump-transitions", pr_dump,
                 "write the transition tables to this path");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "span-level micro-F1 of two files");
  ConfigCli ev_cc;
  ev_cc.attach(ev);
  std::string ev_gold, ev_pred;
  ev->add_option("--gold", ev_gold, "gold CoNLL file (last column = tag)")
      ->required();
  ev->add_option("--pred", ev_pred, "prediction file (last column = tag)")
      ->required();

  // episodes
  auto* epi = app.add_subcommand("episodes", "N-way K-shot episode evaluation");
  ConfigCli epi_cc;
  epi_cc.attach(epi);
  std::vector<KeyFlag> epi_flags;
  add_key_flags(epi, epi_flags,
                {"n", "k", "episodes", "seed", "viterbi", "finetune", "tau",
                 "rep", "lr_finetune", "finetune_mode", "target_seen",
                 "max_finetune_iters", "max_sentence_len"});
  std::string epi_model, epi_corpus, epi_emb, epi_report, epi_dump, epi_keep;
  epi->add_option("--model", epi_model, "input checkpoint")->required();
  epi->add_option("--corpus", epi_corpus, "episode-sampling corpus (CoNLL)")
      ->required();
  epi->add_option("--embeddings", epi_emb, "word2vec-format embeddings")
      ->required();
  epi->add_option("--report", epi_report, "run report output path");
  epi->add_option("--dump-episodes", epi_dump,
                  "write each sampled episode to <prefix><nnnn>.txt");
  epi->add_option("--target-tags", epi_keep,
                  "restrict episode sampling to these entity types");

  // export-embeddings
  auto* ex = app.add_subcommand("export-embeddings",
                                "dump per-token representations as text");
  ConfigCli ex_cc;
  ex_cc.attach(ex);
  std::vector<KeyFlag> ex_flags;
  add_key_flags(ex, ex_flags, {"rep", "max_sentence_len"});
  std::string ex_model, ex_corpus, ex_emb, ex_out;
  ex->add_option("--model", ex_model, "input checkpoint")->required();
  ex->add_option("--corpus", ex_corpus, "corpus to encode (CoNLL)")->required();
  ex->add_option("--embeddings", ex_emb, "word2vec-format embeddings")
      ->required();
  ex->add_option("--out", ex_out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fprintf(stderr, "%s\n", app.help().c_str());
    return 2;
  }

  try {
    if (gen->parsed()) {
      gen_cc.resolve();
      apply_key_flags(gen_cc, gen_flags);
      gen_cc.print_resolved();
      check(fsner_synth_generate(
          gen_cc.cfg.get(), gen_out_conll.c_str(),
          gen_out_dev.empty() ? nullptr : gen_out_dev.c_str(),
          gen_out_emb.c_str()));
      std::printf("wrote %s%s%s and %s\n", gen_out_conll.c_str(),
                  gen_out_dev.empty() ? "" : ", ",
                  gen_out_dev.empty() ? "" : gen_out_dev.c_str(),
                  gen_out_emb.c_str());
    } else if (tr->parsed()) {
      tr_cc.resolve();
      apply_key_flags(tr_cc, tr_flags);
      tr_cc.print_resolved();
      auto corpus = load_corpus(tr_cc, tr_corpus, tr_keep);
      describe_corpus("corpus", corpus.get());
      fsner_table* table_raw = nullptr;
      check(fsner_table_load(tr_emb.c_str(), &table_raw));
      TablePtr table(table_raw);
      fsner_model* model_raw = nullptr;
      check(fsner_model_new(tr_cc.cfg.get(), &model_raw));
      ModelPtr model(model_raw);
      check(fsner_model_train(model.get(), corpus.get(), table.get(),
                              tr_history.empty() ? nullptr
                                                 : tr_history.c_str()));
      check(fsner_model_save(model.get(), tr_out.c_str()));
      std::printf("trained model written to %s\n", tr_out.c_str());
    } else if (ft->parsed()) {
      ft_cc.resolve();
      apply_key_flags(ft_cc, ft_flags);
      ft_cc.print_resolved();
      fsner_model* model_raw = nullptr;
      check(fsner_model_load(ft_model.c_str(), &model_raw));
      ModelPtr model(model_raw);
      ft_cc.apply_model_overrides(model.get());
      auto support = load_corpus(ft_cc, ft_support, "");
      describe_corpus("support", support.get());
      fsner_table* table_raw = nullptr;
      check(fsner_table_load(ft_emb.c_str(), &table_raw));
      TablePtr table(table_raw);
      size_t evals = 0, updates = 0;
      check(fsner_model_finetune(model.get(), support.get(), table.get(),
                                 &evals, &updates));
      std::printf("finetune: %zu loss evaluations, %zu updates\n", evals,
                  updates);
      check(fsner_model_save(model.get(), ft_out.c_str()));
      std::printf("finetuned model written to %s\n", ft_out.c_str());
    } else if (pr->parsed()) {
      pr_cc.resolve();
      apply_key_flags(pr_cc, pr_flags);
      pr_cc.print_resolved();
      fsner_model* model_raw = nullptr;
      check(fsner_model_load(pr_model.c_str(), &model_raw));
      ModelPtr model(model_raw);
      auto support = load_corpus(pr_cc, pr_support, "");
      auto queries = load_corpus(pr_cc, pr_input, "");
      fsner_table* table_raw = nullptr;
      check(fsner_table_load(pr_emb.c_str(), &table_raw));
      TablePtr table(table_raw);
      check(fsner_predict_to_file(
          model.get(), support.get(), queries.get(), table.get(),
          pr_cc.get("viterbi") == "true" || pr_cc.get("viterbi") == "1",
          std::stod(pr_cc.get("tau")), pr_cc.get("rep").c_str(),
          pr_out.c_str(), pr_dump.empty() ? nullptr : pr_dump.c_str()));
      std::printf("predictions written to %s\n", pr_out.c_str());
    } else if (ev->parsed()) {
      ev_cc.resolve();
      ev_cc.print_resolved();
      uint64_t tp = 0, fp = 0, fn = 0;
      double precision = 0.0, recall = 0.0, f1 = 0.0;
      check(fsner_evaluate_files(ev_gold.c_str(), ev_pred.c_str(), &tp, &fp,
                                 &fn, &precision, &recall, &f1));
      std::printf("tp %llu fp %llu fn %llu\n", (unsigned long long)tp,
                  (unsigned long long)fp, (unsigned long long)fn);
      std::printf("precision %.6f recall %.6f f1 %.6f\n", precision, recall,
                  f1);
    } else if (epi->parsed()) {
      epi_cc.resolve();
      apply_key_flags(epi_cc, epi_flags);
      epi_cc.print_resolved();
      fsner_model* model_raw = nullptr;
      check(fsner_model_load(epi_model.c_str(), &model_raw));
      ModelPtr model(model_raw);
      epi_cc.apply_model_overrides(model.get());
      auto corpus = load_corpus(epi_cc, epi_corpus, epi_keep);
      describe_corpus("corpus", corpus.get());
      fsner_table* table_raw = nullptr;
      check(fsner_table_load(epi_emb.c_str(), &table_raw));
      TablePtr table(table_raw);
      fsner_report* report_raw = nullptr;
      check(fsner_run_episodes(model.get(), corpus.get(), table.get(),
                               epi_cc.cfg.get(),
                               epi_dump.empty() ? nullptr : epi_dump.c_str(),
                               &report_raw));
      ReportPtr report(report_raw);
      CliString text;
      check(fsner_report_text(report.get(), &text.s));
      std::fputs(text.s, stdout);
      if (!epi_report.empty()) {
        std::FILE* f = std::fopen(epi_report.c_str(), "wb");
        if (!f) {
          std::fprintf(stderr, "error: cannot write %s\n", epi_report.c_str());
          return 1;
        }
        std::fputs(text.s, f);
        std::fclose(f);
        std::printf("report written to %s\n", epi_report.c_str());
      }
    } else if (ex->parsed()) {
      ex_cc.resolve();
      apply_key_flags(ex_cc, ex_flags);
      ex_cc.print_resolved();
      fsner_model* model_raw = nullptr;
      check(fsner_model_load(ex_model.c_str(), &model_raw));
      ModelPtr model(model_raw);
      auto corpus = load_corpus(ex_cc, ex_corpus, "");
      fsner_table* table_raw = nullptr;
      check(fsner_table_load(ex_emb.c_str(), &table_raw));
      TablePtr table(table_raw);
      check(fsner_export_embeddings(model.get(), corpus.get(), table.get(),
                                    ex_cc.get("rep").c_str(), ex_out.c_str()));
      std::printf("embeddings written to %s\n", ex_out.c_str());
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
