#ifndef FEDRA_H
#define FEDRA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FedraStatus {
  FEDRA_STATUS_OK = 0,
  FEDRA_STATUS_NULL_ARGUMENT = 1,
  FEDRA_STATUS_INVALID_UTF8 = 2,
  FEDRA_STATUS_PARSE = 3,
  FEDRA_STATUS_CATALOG = 4,
  FEDRA_STATUS_SELECTION = 5,
  FEDRA_STATUS_EXECUTION = 6,
  FEDRA_STATUS_IO = 7,
  FEDRA_STATUS_PANIC = 8,
} FedraStatus;

typedef enum FedraStrategy {
  FEDRA_STRATEGY_FEDRA = 0,
  FEDRA_STRATEGY_ASK = 1,
} FedraStrategy;

typedef enum FedraFallback {
  FEDRA_FALLBACK_PUBLIC_ASK = 0,
  FEDRA_FALLBACK_FAIL = 1,
} FedraFallback;

typedef enum FedraMode {
  FEDRA_MODE_DELEGATED = 0,
  FEDRA_MODE_PER_TRIPLE = 1,
} FedraMode;

/**
 * A loaded catalog with its materialized endpoints. Opaque to C.
 */
typedef struct FedraFederation FedraFederation;

/**
 * Loads a catalog file and the datasets it names.
 *
 * # Safety
 * `catalog_path` is a NUL-terminated string; `out` points to writable
 * storage for one pointer.
 */
enum FedraStatus fedra_federation_open(const char *catalog_path, struct FedraFederation **out);

/**
 * Builds a federation from catalog JSON and in-memory N-Triples datasets,
 * `count` of them, keyed by public endpoint IRI.
 *
 * # Safety
 * `catalog_json` is a NUL-terminated string; `iris` and `datasets` each
 * point to `count` NUL-terminated strings (or may be null when `count`
 * is 0); `out` points to writable storage for one pointer.
 */
enum FedraStatus fedra_federation_new(const char *catalog_json,
                                      const char *const *iris,
                                      const char *const *datasets,
                                      size_t count,
                                      struct FedraFederation **out);

/**
 * # Safety
 * `federation` is null or came from this library and was not freed.
 */
void fedra_federation_free(struct FedraFederation *federation);

/**
 * Runs source selection and writes the diagnostics text to `out_text`.
 *
 * # Safety
 * `federation` came from this library; `query` is a NUL-terminated
 * string; `out_text` points to writable storage for one pointer.
 */
enum FedraStatus fedra_select(const struct FedraFederation *federation,
                              const char *query,
                              enum FedraStrategy strategy,
                              enum FedraFallback fallback,
                              double visibility_fraction,
                              uint64_t seed,
                              char **out_text);

/**
 * Selects, executes and scores a query; writes a CSV header and one
 * report row to `out_csv`.
 *
 * # Safety
 * `federation` came from this library; `query_id` and `query` are
 * NUL-terminated strings; `out_csv` points to writable storage for one
 * pointer.
 */
enum FedraStatus fedra_run(const struct FedraFederation *federation,
                           const char *query_id,
                           const char *query,
                           enum FedraStrategy strategy,
                           enum FedraMode mode,
                           enum FedraFallback fallback,
                           double visibility_fraction,
                           uint64_t seed,
                           char **out_csv);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library on the same thread.
 */
const char *fedra_last_error(void);

/**
 * # Safety
 * `s` is null or a string returned by this library and not yet freed.
 */
void fedra_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fedra_version(void);

#endif  /* FEDRA_H */
