#ifndef QLEAK_H
#define QLEAK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C interface.
 */
typedef enum QleakStatus {
  QLEAK_STATUS_OK = 0,
  QLEAK_STATUS_NULL_ARGUMENT = 1,
  QLEAK_STATUS_INVALID_UTF8 = 2,
  QLEAK_STATUS_PARSE_ERROR = 3,
  QLEAK_STATUS_INVALID_MODEL = 4,
  QLEAK_STATUS_WRONG_MODEL_KIND = 5,
  QLEAK_STATUS_ANALYSIS_ERROR = 6,
  QLEAK_STATUS_IO = 7,
} QleakStatus;

/**
 * Opaque model handle.
 */
typedef struct QleakModel QleakModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * owned by the library.
 */
const char *qleak_last_error(void);

/**
 * Parses and validates a model from its text. On success `*out` holds a
 * handle to release with `qleak_model_free`.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum QleakStatus qleak_model_parse(const char *text, struct QleakModel **out);

/**
 * Reads, parses and validates a model file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum QleakStatus qleak_model_load(const char *path, struct QleakModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void qleak_model_free(struct QleakModel *m);

/**
 * 0 for a Markov chain, 1 for a decision process, 2 for an
 * information-hiding system, -1 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
int qleak_model_kind(const struct QleakModel *m);

/**
 * Checks a state formula at the initial state. `*holds` receives the
 * verdict; `*value`, when not null, receives the compared probability as
 * `num/den` (or null when the formula has no top-level operator).
 *
 * # Safety
 * `m` must be a live handle, `formula` nul-terminated, `holds` valid and
 * `value` null or valid.
 */
enum QleakStatus qleak_check(const struct QleakModel *m,
                             const char *formula,
                             bool *holds,
                             char **value);

/**
 * Leakage report of an information-hiding system as JSON.
 *
 * # Safety
 * `m` must be a live handle and `out` valid.
 */
enum QleakStatus qleak_leakage_json(const struct QleakModel *m, char **out);

/**
 * Channel matrix as CSV, one row per secret.
 *
 * # Safety
 * `m` must be a live handle and `out` valid.
 */
enum QleakStatus qleak_channel_csv(const struct QleakModel *m, char **out);

/**
 * Torrent counterexample to `P<=bound [F target]` (`P<bound` when
 * `strict`). `*violated` tells whether one exists; `*json` receives the
 * report either way.
 *
 * # Safety
 * `m` must be a live handle, strings nul-terminated, pointers valid.
 */
enum QleakStatus qleak_counterexample_json(const struct QleakModel *m,
                                           const char *target,
                                           const char *bound,
                                           bool strict,
                                           bool *violated,
                                           char **json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void qleak_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QLEAK_H */
