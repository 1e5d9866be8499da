/* C API for the fsner library: few-shot token classification with
 * Gaussian-embedding contrastive training and nearest-neighbor inference.
 *
 * All functions return fsner_status; FSNER_OK is 0. On failure,
 * fsner_last_error() returns a human-readable message for the calling
 * thread. Out-parameters are written only on success. Every handle obtained
 * from a *_new/*_load/*_clone function must be released with the matching
 * *_free function; *_free accepts NULL.
 */
#ifndef FSNER_H
#define FSNER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fsner_status {
  FSNER_OK = 0,
  FSNER_ERR_IO = 1,         /* file access and other generic failures */
  FSNER_ERR_USAGE = 2,      /* invalid arguments to an API call */
  FSNER_ERR_PARSE = 3,      /* malformed corpus/embeddings/config text */
  FSNER_ERR_SAMPLING = 4,   /* K-shot constraint cannot be satisfied */
  FSNER_ERR_DIMENSION = 5,  /* shape mismatch or violated call contract */
  FSNER_ERR_CHECKPOINT = 6, /* bad magic, version or truncated checkpoint */
  FSNER_ERR_TRAIN = 7,      /* numeric failure during optimization */
  FSNER_ERR_DOMAIN = 8      /* math domain violation (tau <= 0, ...) */
} fsner_status;

typedef struct fsner_config fsner_config;   /* key=value configuration */
typedef struct fsner_corpus fsner_corpus;   /* labeled sentences */
typedef struct fsner_table fsner_table;     /* frozen token embeddings */
typedef struct fsner_model fsner_model;     /* encoder + heads + transitions */
typedef struct fsner_report fsner_report;   /* episode evaluation report */

/* Message describing the last failure on this thread; never NULL. */
const char* fsner_last_error(void);

/* Library version string, e.g. "0.1.0". */
const char* fsner_version(void);

/* Frees a string returned by fsner_*_text functions. */
void fsner_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

fsner_config* fsner_config_new(void);
void fsner_config_free(fsner_config* cfg);
fsner_status fsner_config_set(fsner_config* cfg, const char* key,
                              const char* value);
/* Value for key as a malloc'd string (caller frees with fsner_string_free). */
fsner_status fsner_config_get(const fsner_config* cfg, const char* key,
                              char** out);
fsner_status fsner_config_load_file(fsner_config* cfg, const char* path);
/* Sorted "key = value" lines. */
fsner_status fsner_config_resolved_text(const fsner_config* cfg, char** out);
fsner_status fsner_config_fingerprint(const fsner_config* cfg, char** out);

/* ---- corpus ----------------------------------------------------------- */

/* Parses a CoNLL file (BIO or IO tags; converted to IO). max_sentence_len
 * and similar limits come from cfg. truncated_out may be NULL. */
fsner_status fsner_corpus_load_conll(const fsner_config* cfg, const char* path,
                                     fsner_corpus** out,
                                     size_t* truncated_out);
fsner_status fsner_corpus_save_conll(const fsner_corpus* corpus,
                                     const char* path);
void fsner_corpus_free(fsner_corpus* corpus);

fsner_status fsner_corpus_sentence_count(const fsner_corpus* corpus,
                                         size_t* out);
fsner_status fsner_corpus_token_count(const fsner_corpus* corpus, size_t* out);
/* Space-separated sorted tag types. */
fsner_status fsner_corpus_tag_set_text(const fsner_corpus* corpus, char** out);

/* Keeps only the listed entity types (space- or comma-separated); every
 * other entity token becomes O. */
fsner_status fsner_corpus_mask_tags(const fsner_corpus* corpus,
                                    const char* keep_tags,
                                    fsner_corpus** out);

/* Synthetic corpus generation: writes a CoNLL corpus (plus an optional
 * dev split) and a word2vec-format embedding file per the synth_* keys. */
fsner_status fsner_synth_generate(const fsner_config* cfg,
                                  const char* conll_path,
                                  const char* dev_conll_path_or_null,
                                  const char* embeddings_path);

/* ---- embeddings ------------------------------------------------------- */

fsner_status fsner_table_load(const char* path, fsner_table** out);
void fsner_table_free(fsner_table* table);

/* ---- model lifecycle -------------------------------------------------- */

/* Fresh model with seeded parameter init, dimensions and modes from cfg. */
fsner_status fsner_model_new(const fsner_config* cfg, fsner_model** out);
fsner_status fsner_model_clone(const fsner_model* model, fsner_model** out);
void fsner_model_free(fsner_model* model);

fsner_status fsner_model_save(const fsner_model* model, const char* path);
fsner_status fsner_model_load(const char* path, fsner_model** out);

/* Overrides a non-structural option of an existing model (batch_size,
 * epochs, lr_train, lr_finetune, finetune_mode, target_seen,
 * max_finetune_iters, max_sentence_len, seed). Structural keys (dimensions,
 * train_mode) are rejected. */
fsner_status fsner_model_set(fsner_model* model, const char* key,
                             const char* value);

/* Source-domain contrastive training. history_path may be NULL; when given,
 * per-batch "epoch batch loss skipped_tokens" lines are written there. */
fsner_status fsner_model_train(fsner_model* model, const fsner_corpus* corpus,
                               const fsner_table* table,
                               const char* history_path);

/* Support-set finetuning with patience-1 early stopping. The support corpus
 * provides the target tags; K is its minimum per-tag mention count.
 * evals_out/updates_out may be NULL. */
fsner_status fsner_model_finetune(fsner_model* model,
                                  const fsner_corpus* support,
                                  const fsner_table* table, size_t* evals_out,
                                  size_t* updates_out);

/* ---- inference and evaluation ----------------------------------------- */

/* Labels the query sentences from the support set and writes
 * "text<TAB>gold<TAB>pred" CoNLL columns to out_path. use_viterbi != 0
 * enables transition smoothing with temperature tau. rep is "pre" or
 * "post". transitions_dump_path may be NULL. */
fsner_status fsner_predict_to_file(fsner_model* model,
                                   const fsner_corpus* support,
                                   const fsner_corpus* queries,
                                   const fsner_table* table, int use_viterbi,
                                   double tau, const char* rep,
                                   const char* out_path,
                                   const char* transitions_dump_path);

/* Span-level micro-F1 between the last tag columns of two CoNLL files. */
fsner_status fsner_evaluate_files(const char* gold_path, const char* pred_path,
                                  uint64_t* tp, uint64_t* fp, uint64_t* fn,
                                  double* precision, double* recall,
                                  double* f1);

/* Episode evaluation; settings (n, k, episodes, seed, viterbi, finetune,
 * tau, rep) come from cfg. episode_dump_prefix may be NULL. */
fsner_status fsner_run_episodes(const fsner_model* model,
                                const fsner_corpus* corpus,
                                const fsner_table* table,
                                const fsner_config* cfg,
                                const char* episode_dump_prefix,
                                fsner_report** out);
void fsner_report_free(fsner_report* report);

fsner_status fsner_report_episode_count(const fsner_report* report,
                                        size_t* out);
fsner_status fsner_report_episode_f1(const fsner_report* report, size_t index,
                                     double* out);
fsner_status fsner_report_mean_f1(const fsner_report* report, double* out);
fsner_status fsner_report_stddev_f1(const fsner_report* report, double* out);
fsner_status fsner_report_pooled_f1(const fsner_report* report, double* out);
fsner_status fsner_report_text(const fsner_report* report, char** out);

/* Per-token representation rows ("sentence position gold_tag v1 ... vd"),
 * rep is "pre" or "post". */
fsner_status fsner_export_embeddings(fsner_model* model,
                                     const fsner_corpus* corpus,
                                     const fsner_table* table, const char* rep,
                                     const char* out_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FSNER_H */
