#include "fsner.h"

#include <cstring>
#include <new>
#include <string>

#include "fsner/checkpoint.hpp"
#include "fsner/config.hpp"
#include "fsner/corpus.hpp"
#include "fsner/encoder.hpp"
#include "fsner/error.hpp"
#include "fsner/eval.hpp"
#include "fsner/infer.hpp"
#include "fsner/synth.hpp"
#include "fsner/train.hpp"

struct fsner_config {
  fsner::Config impl;
};
struct fsner_corpus {
  fsner::LabeledCorpus impl;
};
struct fsner_table {
  fsner::EmbeddingTable impl;
};
struct fsner_model {
  fsner::Model impl;
};
struct fsner_report {
  fsner::RunReport impl;
  fsner::EpisodeSettings settings;
};

namespace {

thread_local std::string g_last_error = "";

void set_error(const std::string& msg) { g_last_error = msg; }

fsner_status status_of(const std::exception& e) {
  using namespace fsner;
  if (dynamic_cast<const ParseError*>(&e)) return FSNER_ERR_PARSE;
  if (dynamic_cast<const SamplingError*>(&e)) return FSNER_ERR_SAMPLING;
  if (dynamic_cast<const DimensionError*>(&e)) return FSNER_ERR_DIMENSION;
  if (dynamic_cast<const CheckpointError*>(&e)) return FSNER_ERR_CHECKPOINT;
  if (dynamic_cast<const TrainError*>(&e)) return FSNER_ERR_TRAIN;
  if (dynamic_cast<const DomainError*>(&e)) return FSNER_ERR_DOMAIN;
  return FSNER_ERR_IO;
}

// Runs fn, translating exceptions into status codes + last_error.
template <typename Fn>
fsner_status guarded(Fn&& fn) {
  try {
    fn();
    return FSNER_OK;
  } catch (const std::exception& e) {
    set_error(e.what());
    return status_of(e);
  } catch (...) {
    set_error("unknown error");
    return FSNER_ERR_IO;
  }
}

fsner_status usage_error(const char* msg) {
  set_error(msg);
  return FSNER_ERR_USAGE;
}

char* dup_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

fsner_status return_string(const std::string& s, char** out) {
  *out = dup_string(s);
  if (!*out) {
    set_error("out of memory");
    return FSNER_ERR_IO;
  }
  return FSNER_OK;
}

std::set<std::string> parse_tag_list(const char* tags) {
  std::set<std::string> out;
  std::string cur;
  for (const char* p = tags; *p; ++p) {
    if (*p == ',' || *p == ' ' || *p == '\t') {
      if (!cur.empty()) out.insert(cur);
      cur.clear();
    } else {
      cur.push_back(*p);
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

// Target tags from the corpus tag set; K = minimum per-tag mention count.
fsner::SupportSet support_from_corpus(const fsner::LabeledCorpus& corpus) {
  if (corpus.tag_set.empty()) {
    throw fsner::SamplingError(
        "support corpus contains no entity tags");
  }
  fsner::SupportSet support;
  support.sentences = corpus.sentences;
  support.target_tags = corpus.tag_set;
  std::size_t k = SIZE_MAX;
  for (const auto& tag : corpus.tag_set) {
    k = std::min(k, fsner::count_mentions(corpus.sentences, tag));
  }
  support.shots = k == 0 ? 1 : k;
  return support;
}

}  // namespace

extern "C" {

const char* fsner_last_error(void) { return g_last_error.c_str(); }

const char* fsner_version(void) { return "0.1.0"; }

void fsner_string_free(char* s) { delete[] s; }

/* ---- configuration ---------------------------------------------------- */

fsner_config* fsner_config_new(void) {
  return new (std::nothrow) fsner_config{};
}

void fsner_config_free(fsner_config* cfg) { delete cfg; }

fsner_status fsner_config_set(fsner_config* cfg, const char* key,
                              const char* value) {
  if (!cfg || !key || !value) return usage_error("config_set: NULL argument");
  return guarded([&] { cfg->impl.set(key, value); });
}

fsner_status fsner_config_get(const fsner_config* cfg, const char* key,
                              char** out) {
  if (!cfg || !key || !out) return usage_error("config_get: NULL argument");
  std::string value;
  fsner_status st = guarded([&] { value = cfg->impl.get(key); });
  if (st != FSNER_OK) return st;
  return return_string(value, out);
}

fsner_status fsner_config_load_file(fsner_config* cfg, const char* path) {
  if (!cfg || !path) return usage_error("config_load_file: NULL argument");
  return guarded([&] { cfg->impl.load_file(path); });
}

fsner_status fsner_config_resolved_text(const fsner_config* cfg, char** out) {
  if (!cfg || !out) return usage_error("config_resolved_text: NULL argument");
  return return_string(cfg->impl.resolved_text(), out);
}

fsner_status fsner_config_fingerprint(const fsner_config* cfg, char** out) {
  if (!cfg || !out) return usage_error("config_fingerprint: NULL argument");
  return return_string(cfg->impl.fingerprint(), out);
}

/* ---- corpus ----------------------------------------------------------- */

fsner_status fsner_corpus_load_conll(const fsner_config* cfg, const char* path,
                                     fsner_corpus** out,
                                     size_t* truncated_out) {
  if (!cfg || !path || !out) {
    return usage_error("corpus_load_conll: NULL argument");
  }
  return guarded([&] {
    std::size_t truncated = 0;
    auto max_len =
        static_cast<std::size_t>(cfg->impl.get_int("max_sentence_len"));
    auto corpus = fsner::load_conll(path, max_len, &truncated);
    if (truncated_out) *truncated_out = truncated;
    *out = new fsner_corpus{std::move(corpus)};
  });
}

fsner_status fsner_corpus_save_conll(const fsner_corpus* corpus,
                                     const char* path) {
  if (!corpus || !path) return usage_error("corpus_save_conll: NULL argument");
  return guarded([&] { fsner::save_conll(corpus->impl, path); });
}

void fsner_corpus_free(fsner_corpus* corpus) { delete corpus; }

fsner_status fsner_corpus_sentence_count(const fsner_corpus* corpus,
                                         size_t* out) {
  if (!corpus || !out) return usage_error("corpus_sentence_count: NULL");
  *out = corpus->impl.sentences.size();
  return FSNER_OK;
}

fsner_status fsner_corpus_token_count(const fsner_corpus* corpus,
                                      size_t* out) {
  if (!corpus || !out) return usage_error("corpus_token_count: NULL");
  *out = corpus->impl.token_count();
  return FSNER_OK;
}

fsner_status fsner_corpus_tag_set_text(const fsner_corpus* corpus,
                                       char** out) {
  if (!corpus || !out) return usage_error("corpus_tag_set_text: NULL");
  std::string text;
  for (const auto& tag : corpus->impl.tag_set) {
    if (!text.empty()) text += " ";
    text += tag;
  }
  return return_string(text, out);
}

fsner_status fsner_corpus_mask_tags(const fsner_corpus* corpus,
                                    const char* keep_tags,
                                    fsner_corpus** out) {
  if (!corpus || !keep_tags || !out) {
    return usage_error("corpus_mask_tags: NULL argument");
  }
  return guarded([&] {
    *out = new fsner_corpus{
        fsner::mask_tags(corpus->impl, parse_tag_list(keep_tags))};
  });
}

fsner_status fsner_synth_generate(const fsner_config* cfg,
                                  const char* conll_path,
                                  const char* dev_conll_path_or_null,
                                  const char* embeddings_path) {
  if (!cfg || !conll_path || !embeddings_path) {
    return usage_error("synth_generate: NULL argument");
  }
  return guarded([&] {
    auto synth_cfg = fsner::SynthConfig::from(cfg->impl);
    auto data = fsner::generate_synth(synth_cfg);
    fsner::save_conll(data.corpus, conll_path);
    if (dev_conll_path_or_null) {
      fsner::save_conll(data.dev_corpus, dev_conll_path_or_null);
    }
    fsner::write_text_file(
        embeddings_path,
        fsner::write_embeddings(data.table, data.vocab_order));
  });
}

/* ---- embeddings ------------------------------------------------------- */

fsner_status fsner_table_load(const char* path, fsner_table** out) {
  if (!path || !out) return usage_error("table_load: NULL argument");
  return guarded(
      [&] { *out = new fsner_table{fsner::load_embeddings(path)}; });
}

void fsner_table_free(fsner_table* table) { delete table; }

/* ---- model lifecycle -------------------------------------------------- */

fsner_status fsner_model_new(const fsner_config* cfg, fsner_model** out) {
  if (!cfg || !out) return usage_error("model_new: NULL argument");
  return guarded([&] {
    auto config = fsner::TrainConfig::from(cfg->impl);
    *out = new fsner_model{fsner::make_model(config)};
  });
}

fsner_status fsner_model_clone(const fsner_model* model, fsner_model** out) {
  if (!model || !out) return usage_error("model_clone: NULL argument");
  return guarded([&] { *out = new fsner_model{model->impl}; });
}

void fsner_model_free(fsner_model* model) { delete model; }

fsner_status fsner_model_save(const fsner_model* model, const char* path) {
  if (!model || !path) return usage_error("model_save: NULL argument");
  return guarded([&] { fsner::save_checkpoint(model->impl, path); });
}

fsner_status fsner_model_load(const char* path, fsner_model** out) {
  if (!path || !out) return usage_error("model_load: NULL argument");
  return guarded(
      [&] { *out = new fsner_model{fsner::load_checkpoint(path)}; });
}

fsner_status fsner_model_set(fsner_model* model, const char* key,
                             const char* value) {
  if (!model || !key || !value) {
    return usage_error("model_set: NULL argument");
  }
  return guarded([&] {
    fsner::TrainConfig& c = model->impl.config;
    std::string k = key;
    std::string v = value;
    // Reuse Config's parsing for the value types.
    fsner::Config probe;
    if (!fsner::Config::known_key(k)) {
      throw fsner::ParseError("unknown config key '" + k + "'");
    }
    probe.set(k, v);
    if (k == "batch_size") {
      c.batch_size = static_cast<std::size_t>(probe.get_int(k));
    } else if (k == "epochs") {
      c.epochs = static_cast<std::size_t>(probe.get_int(k));
    } else if (k == "lr_train") {
      c.lr_train = probe.get_double(k);
    } else if (k == "lr_finetune") {
      c.lr_finetune = probe.get_double(k);
    } else if (k == "finetune_mode") {
      c.finetune_mode = fsner::finetune_policy_from_name(v);
    } else if (k == "target_seen") {
      c.target_seen = probe.get_bool(k);
    } else if (k == "max_finetune_iters") {
      c.max_finetune_iters = static_cast<std::size_t>(probe.get_int(k));
    } else if (k == "max_sentence_len") {
      c.max_sentence_len = static_cast<std::size_t>(probe.get_int(k));
    } else if (k == "seed") {
      c.seed = probe.get_u64(k);
    } else {
      throw fsner::DomainError("config key '" + k +
                               "' is structural and cannot be changed on an "
                               "existing model");
    }
    c.validate();
  });
}

fsner_status fsner_model_train(fsner_model* model, const fsner_corpus* corpus,
                               const fsner_table* table,
                               const char* history_path) {
  if (!model || !corpus || !table) {
    return usage_error("model_train: NULL argument");
  }
  return guarded([&] {
    auto result = fsner::train(model->impl, corpus->impl, table->impl);
    if (history_path) {
      fsner::write_text_file(history_path, fsner::format_history(result));
    }
  });
}

fsner_status fsner_model_finetune(fsner_model* model,
                                  const fsner_corpus* support,
                                  const fsner_table* table, size_t* evals_out,
                                  size_t* updates_out) {
  if (!model || !support || !table) {
    return usage_error("model_finetune: NULL argument");
  }
  return guarded([&] {
    auto sup = support_from_corpus(support->impl);
    auto result = fsner::finetune(model->impl, sup, table->impl);
    if (evals_out) *evals_out = result.losses.size();
    if (updates_out) *updates_out = result.updates;
  });
}

/* ---- inference and evaluation ----------------------------------------- */

fsner_status fsner_predict_to_file(fsner_model* model,
                                   const fsner_corpus* support,
                                   const fsner_corpus* queries,
                                   const fsner_table* table, int use_viterbi,
                                   double tau, const char* rep,
                                   const char* out_path,
                                   const char* transitions_dump_path) {
  if (!model || !support || !queries || !table || !rep || !out_path) {
    return usage_error("predict_to_file: NULL argument");
  }
  return guarded([&] {
    auto sup = support_from_corpus(support->impl);
    auto source = fsner::rep_source_from_name(rep);
    auto pred = fsner::predict(model->impl, sup, queries->impl.sentences,
                               table->impl, use_viterbi != 0, tau, source);
    fsner::write_text_file(
        out_path, fsner::write_predictions(queries->impl.sentences, pred));
    if (transitions_dump_path) {
      auto expanded = fsner::expand_transitions(model->impl.transitions,
                                                sup.target_tags);
      fsner::write_text_file(
          transitions_dump_path,
          fsner::format_transitions(model->impl.transitions, expanded));
    }
  });
}

fsner_status fsner_evaluate_files(const char* gold_path, const char* pred_path,
                                  uint64_t* tp, uint64_t* fp, uint64_t* fn,
                                  double* precision, double* recall,
                                  double* f1) {
  if (!gold_path || !pred_path) {
    return usage_error("evaluate_files: NULL argument");
  }
  return guarded([&] {
    auto gold = fsner::load_conll(gold_path, SIZE_MAX);
    auto pred = fsner::load_conll(pred_path, SIZE_MAX);
    auto report = fsner::micro_f1(gold.sentences, pred.sentences);
    if (tp) *tp = report.tp;
    if (fp) *fp = report.fp;
    if (fn) *fn = report.fn;
    if (precision) *precision = report.precision;
    if (recall) *recall = report.recall;
    if (f1) *f1 = report.f1;
  });
}

fsner_status fsner_run_episodes(const fsner_model* model,
                                const fsner_corpus* corpus,
                                const fsner_table* table,
                                const fsner_config* cfg,
                                const char* episode_dump_prefix,
                                fsner_report** out) {
  if (!model || !corpus || !table || !cfg || !out) {
    return usage_error("run_episodes: NULL argument");
  }
  return guarded([&] {
    fsner::EpisodeSettings settings;
    settings.n = static_cast<std::size_t>(cfg->impl.get_int("n"));
    settings.k = static_cast<std::size_t>(cfg->impl.get_int("k"));
    settings.episodes =
        static_cast<std::size_t>(cfg->impl.get_int("episodes"));
    settings.seed = cfg->impl.get_u64("seed");
    settings.use_viterbi = cfg->impl.get_bool("viterbi");
    settings.do_finetune = cfg->impl.get_bool("finetune");
    settings.tau = cfg->impl.get_double("tau");
    settings.rep = fsner::rep_source_from_name(cfg->impl.get("rep"));
    if (episode_dump_prefix) settings.dump_prefix = episode_dump_prefix;
    auto report = fsner::run_episodes(model->impl, corpus->impl, table->impl,
                                      settings);
    report.config_fingerprint = cfg->impl.fingerprint();
    *out = new fsner_report{std::move(report), settings};
  });
}

void fsner_report_free(fsner_report* report) { delete report; }

fsner_status fsner_report_episode_count(const fsner_report* report,
                                        size_t* out) {
  if (!report || !out) return usage_error("report_episode_count: NULL");
  *out = report->impl.episode_f1.size();
  return FSNER_OK;
}

fsner_status fsner_report_episode_f1(const fsner_report* report, size_t index,
                                     double* out) {
  if (!report || !out) return usage_error("report_episode_f1: NULL");
  if (index >= report->impl.episode_f1.size()) {
    return usage_error("report_episode_f1: index out of range");
  }
  *out = report->impl.episode_f1[index];
  return FSNER_OK;
}

fsner_status fsner_report_mean_f1(const fsner_report* report, double* out) {
  if (!report || !out) return usage_error("report_mean_f1: NULL");
  *out = report->impl.mean_f1;
  return FSNER_OK;
}

fsner_status fsner_report_stddev_f1(const fsner_report* report, double* out) {
  if (!report || !out) return usage_error("report_stddev_f1: NULL");
  *out = report->impl.stddev_f1;
  return FSNER_OK;
}

fsner_status fsner_report_pooled_f1(const fsner_report* report, double* out) {
  if (!report || !out) return usage_error("report_pooled_f1: NULL");
  *out = report->impl.pooled_f1;
  return FSNER_OK;
}

fsner_status fsner_report_text(const fsner_report* report, char** out) {
  if (!report || !out) return usage_error("report_text: NULL");
  return return_string(fsner::format_run_report(report->impl, report->settings),
                       out);
}

fsner_status fsner_export_embeddings(fsner_model* model,
                                     const fsner_corpus* corpus,
                                     const fsner_table* table, const char* rep,
                                     const char* out_path) {
  if (!model || !corpus || !table || !rep || !out_path) {
    return usage_error("export_embeddings: NULL argument");
  }
  return guarded([&] {
    auto source = fsner::rep_source_from_name(rep);
    fsner::write_text_file(
        out_path, fsner::export_embeddings(model->impl, corpus->impl,
                                           table->impl, source));
  });
}

} /* extern "C" */
