#ifndef TAILOR_H
#define TAILOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TailorStatus {
  TAILOR_STATUS_OK = 0,
  TAILOR_STATUS_NULL_ARGUMENT = 1,
  TAILOR_STATUS_INVALID_UTF8 = 2,
  TAILOR_STATUS_INVALID_INPUT = 3,
  TAILOR_STATUS_UNKNOWN_RUN = 4,
  TAILOR_STATUS_PIPELINE = 5,
  TAILOR_STATUS_STORE = 6,
  TAILOR_STATUS_PANIC = 7,
} TailorStatus;

/**
 * Opaque engine handle.
 */
typedef struct TailorEngine TailorEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens (or creates) an engine rooted at `data_dir`. `profile` names a
 * built-in gateway profile; null selects the default mock profile.
 *
 * # Safety
 * Pointers must be null or valid; `out` must be writable.
 */
enum TailorStatus tailor_engine_open(const char *data_dir,
                                     const char *profile,
                                     struct TailorEngine **out);

/**
 * Releases an engine handle. Null is ignored.
 *
 * # Safety
 * `engine` must come from [`tailor_engine_open`] and not be used afterwards.
 */
void tailor_engine_close(struct TailorEngine *engine);

/**
 * Indexes a file into the vault. Kind and format follow the extension.
 *
 * # Safety
 * `engine` and `path` must be valid; `out_chunks` may be null.
 */
enum TailorStatus tailor_index_file(const struct TailorEngine *engine,
                                    const char *path,
                                    size_t *out_chunks);

/**
 * Tailors a markdown resume to a JD and writes a JSON run summary to `out_json`.
 * `config_json` holds optional run overrides (null for defaults).
 *
 * # Safety
 * String pointers must be valid; `config_json` may be null; `out_json` must be writable.
 */
enum TailorStatus tailor_run(const struct TailorEngine *engine,
                             const char *jd_text,
                             const char *resume_markdown,
                             const char *config_json,
                             char **out_json);

/**
 * Writes a stored rendering (`txt`, `md` or `html`) of a finished run to `out`.
 *
 * # Safety
 * String pointers must be valid; `out` must be writable.
 */
enum TailorStatus tailor_render(const struct TailorEngine *engine,
                                const char *run_id,
                                const char *format,
                                char **out);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *tailor_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void tailor_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILOR_H */
