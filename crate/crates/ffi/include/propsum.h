/* C interface for the propsum summarization engine. */

#ifndef PROPSUM_H
#define PROPSUM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible entry point.
 */
typedef enum PsStatus {
  PS_OK = 0,
  PS_NULL_ARGUMENT = 1,
  PS_INVALID_UTF8 = 2,
  PS_CONFIG_ERROR = 3,
  PS_DATA_ERROR = 4,
  PS_BACKEND_ERROR = 5,
  PS_INTERNAL_ERROR = 6,
} PsStatus;

/**
 * Opaque pipeline engine: a validated configuration plus instantiated
 * backends.
 */
typedef struct PsEngine PsEngine;

/**
 * Plain-data mirror of the scoring configuration.
 */
typedef struct PsRougeConfig {
  /**
   * Candidate truncation limit in words.
   */
  size_t max_words;
  bool stem;
  bool remove_stopwords;
  /**
   * 0 = average over references, 1 = best reference.
   */
  bool multi_ref_max;
  size_t skip_distance;
  bool include_unigrams_in_su;
} PsRougeConfig;

/**
 * Precision / recall / F1 triple.
 */
typedef struct PsRougeScore {
  double precision;
  double recall;
  double f1;
} PsRougeScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a heap string; free with `ps_string_free`.
 */
char *ps_version(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned by a propsum function and not
 * yet freed; NULL is a no-op.
 */
void ps_string_free(char *s);

/**
 * Message describing the most recent error on this thread; free with
 * `ps_string_free`. NULL when no error has occurred.
 */
char *ps_last_error_message(void);

/**
 * The default scoring configuration (100 words, stemming on, stopwords
 * kept, reference averaging, SU4 with unigrams).
 */
struct PsRougeConfig ps_rouge_config_default(void);

/**
 * ROUGE-N F1 of `candidate` against `references`.
 *
 * # Safety
 * `candidate` must be a NUL-terminated string, `references` an array of
 * `n_refs` NUL-terminated strings, and `out` a valid pointer.
 */
enum PsStatus ps_rouge_n(const char *candidate,
                         const char *const *references,
                         size_t n_refs,
                         unsigned int n,
                         struct PsRougeConfig cfg,
                         struct PsRougeScore *out);

/**
 * ROUGE-SU F1 (skip-bigrams plus unigrams) of `candidate` against
 * `references`.
 *
 * # Safety
 * Same contract as `ps_rouge_n`.
 */
enum PsStatus ps_rouge_su4(const char *candidate,
                           const char *const *references,
                           size_t n_refs,
                           struct PsRougeConfig cfg,
                           struct PsRougeScore *out);

/**
 * Create an engine from a TOML configuration; pass NULL or an empty
 * string for the defaults. On success writes the handle to `out`.
 *
 * # Safety
 * `config_toml` must be NULL or a NUL-terminated string; `out` must be a
 * valid pointer. Free the handle with `ps_engine_free`.
 */
enum PsStatus ps_engine_new(const char *config_toml, struct PsEngine **out);

/**
 * Destroy an engine handle. NULL is a no-op.
 *
 * # Safety
 * `engine` must come from `ps_engine_new` and not be used afterwards.
 */
void ps_engine_free(struct PsEngine *engine);

/**
 * The configuration hash naming this engine's run directories.
 *
 * # Safety
 * `engine` must be a live handle; `out` a valid pointer. Free the string
 * with `ps_string_free`.
 */
enum PsStatus ps_engine_config_hash(const struct PsEngine *engine, char **out);

/**
 * Summarize a single topic given as one topics.jsonl object. Writes the
 * bullet summary ("- " lines) to `out_summary`.
 *
 * # Safety
 * `engine` must be a live handle, `topic_json` a NUL-terminated string,
 * `out_summary` a valid pointer. Free the result with `ps_string_free`.
 */
enum PsStatus ps_engine_summarize_topic_json(struct PsEngine *engine,
                                             const char *topic_json,
                                             char **out_summary);

/**
 * Run the pipeline over a topics.jsonl corpus, persisting artifacts under
 * `out_dir/<config_hash>/<topic_id>/`, and return a JSON report mapping
 * each topic to its ROUGE scores.
 *
 * # Safety
 * `engine` must be a live handle; `topics_path`, `out_dir` NUL-terminated
 * paths; `out_report_json` a valid pointer. Free the result with
 * `ps_string_free`.
 */
enum PsStatus ps_engine_run_corpus(struct PsEngine *engine,
                                   const char *topics_path,
                                   const char *out_dir,
                                   char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROPSUM_H */
