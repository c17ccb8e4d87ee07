#ifndef ABSTRACT_MINING_H
#define ABSTRACT_MINING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum {
  AM_STATUS_OK = 0,
  AM_STATUS_NULL_ARGUMENT = 1,
  AM_STATUS_INVALID_UTF8 = 2,
  AM_STATUS_EMPTY_INPUT = 3,
  AM_STATUS_NO_VALID_RECORDS = 4,
  AM_STATUS_CORPUS_TOO_SMALL = 5,
  AM_STATUS_K_OUT_OF_RANGE = 6,
  AM_STATUS_ALL_DOCUMENTS_EXCLUDED = 7,
  AM_STATUS_SINGLETON_CLUSTER = 8,
  AM_STATUS_AT_ROOT = 9,
  AM_STATUS_CLUSTER_OUT_OF_RANGE = 10,
  AM_STATUS_DATA_ERROR = 11,
  AM_STATUS_PANIC = 12,
} AmStatus;

// Opaque session handle.
typedef struct AmSession AmSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a MEDLINE buffer and opens a session on it.
//
// `k == 0` selects the default cluster count. `source_name` may be null.
// On success `*out` receives a handle to release with `am_session_free`.
//
// # Safety
// `data` must point to `len` readable bytes; `source_name` must be null or
// a NUL-terminated string; `out` must be writable.
AmStatus am_session_open(const uint8_t *data,
                         size_t len,
                         const char *source_name,
                         size_t k,
                         uint64_t seed,
                         AmSession **out);

// Releases a session. Null is ignored.
//
// # Safety
// `session` must be null or a handle from `am_session_open` not yet freed.
void am_session_free(AmSession *session);

// Re-clusters into `k` groups after excluding documents containing any
// of the whitespace-separated `exclude_words` (null for none).
//
// # Safety
// `session` must be a live handle; `exclude_words` must be null or a
// NUL-terminated string.
AmStatus am_session_update(AmSession *session, size_t k, const char *exclude_words);

// Replaces the document set with the selected cluster and re-clusters.
//
// # Safety
// `session` must be a live handle.
AmStatus am_session_use_cluster(AmSession *session);

// Returns to the previous document set.
//
// # Safety
// `session` must be a live handle.
AmStatus am_session_back(AmSession *session);

// Selects 1-based cluster `cluster`.
//
// # Safety
// `session` must be a live handle.
AmStatus am_session_select(AmSession *session, size_t cluster);

// Current cluster count; 0 for a null handle.
//
// # Safety
// `session` must be null or a live handle.
size_t am_session_k(const AmSession *session);

// Largest k the current document set allows; 0 for a null handle.
//
// # Safety
// `session` must be null or a live handle.
size_t am_session_max_k(const AmSession *session);

// # Safety
// `session` must be null or a live handle.
size_t am_session_document_count(const AmSession *session);

// 1-based selection; 0 for a null handle.
//
// # Safety
// `session` must be null or a live handle.
size_t am_session_selected_cluster(const AmSession *session);

// # Safety
// `session` must be null or a live handle.
size_t am_session_history_depth(const AmSession *session);

// Size of 1-based cluster `cluster`.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
AmStatus am_session_cluster_size(const AmSession *session, size_t cluster, size_t *out);

// The cluster panel, one `cluster N (size): words` line per cluster.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
AmStatus am_session_panel_text(const AmSession *session, char **out);

// The panel and control state as JSON, in the HTTP API's shape.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
AmStatus am_session_view_json(const AmSession *session, char **out);

// Tab-separated PMID, date and title rows for 1-based `cluster`.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
AmStatus am_session_titles_tsv(const AmSession *session, size_t cluster, char **out);

// HTML report for 1-based `cluster`, stamped with `generated_at` (Unix
// seconds).
//
// # Safety
// `session` must be a live handle; `out` must be writable.
AmStatus am_session_report_html(const AmSession *session,
                                size_t cluster,
                                int64_t generated_at,
                                char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void am_string_free(char *s);

// Message for the last failed call on this thread, or "" after a
// success. Valid until the next call on the same thread.
const char *am_last_error_message(void);

// Static snake_case name of a status code.
const char *am_status_name(AmStatus status);

// Library version, static.
const char *am_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABSTRACT_MINING_H */
