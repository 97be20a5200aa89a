#ifndef ORDCBPV_H
#define ORDCBPV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * `Ordered` and `Linear` read core source, `NoMove` and `WithMove` affine.
 */
typedef enum OrdMode {
  ORD_MODE_ORDERED = 0,
  ORD_MODE_LINEAR = 1,
  ORD_MODE_NO_MOVE = 2,
  ORD_MODE_WITH_MOVE = 3,
} OrdMode;

typedef enum OrdStatus {
  ORD_STATUS_OK = 0,
  ORD_STATUS_NULL_ARGUMENT = 1,
  ORD_STATUS_INVALID_UTF8 = 2,
  ORD_STATUS_PARSE_ERROR = 3,
  ORD_STATUS_TYPE_ERROR = 4,
  ORD_STATUS_STUCK = 5,
  ORD_STATUS_FUEL_EXHAUSTED = 6,
  ORD_STATUS_INVALID_ARGUMENT = 7,
  ORD_STATUS_PANIC = 8,
} OrdStatus;

/**
 * A checked program: its closed target term and type.
 */
typedef struct OrdProgram OrdProgram;

/**
 * Result of running a program to a final state.
 */
typedef struct OrdRun OrdRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses and typechecks `source` in `mode`. `ty` may be null, in which case
 * a `-- type:` header or `1` is used. On success `*out` owns a new program.
 *
 * # Safety
 * `source` and a non-null `ty` must be NUL-terminated strings; `out` must
 * be writable.
 */
enum OrdStatus ord_program_new(const char *source,
                               enum OrdMode mode,
                               const char *ty,
                               struct OrdProgram **out);

/**
 * # Safety
 * `p` must be null or come from [`ord_program_new`] and not be freed yet.
 */
void ord_program_free(struct OrdProgram *p);

/**
 * Writes the program's target term as a newly allocated string; release it
 * with [`ord_string_free`].
 *
 * # Safety
 * `p` must be a live program and `out` writable.
 */
enum OrdStatus ord_program_target(const struct OrdProgram *p, char **out);

/**
 * Runs the program from the `len` resources at `freelist` for at most
 * `fuel` steps. On success `*out` owns a new run.
 *
 * # Safety
 * `p` must be a live program, `freelist` valid for `len` reads (or null
 * with `len == 0`), and `out` writable.
 */
enum OrdStatus ord_program_run(const struct OrdProgram *p,
                               const uint32_t *freelist,
                               size_t len,
                               size_t fuel,
                               struct OrdRun **out);

/**
 * # Safety
 * `r` must be null or come from [`ord_program_run`] and not be freed yet.
 */
void ord_run_free(struct OrdRun *r);

/**
 * The final value, valid until the run is freed.
 *
 * # Safety
 * `r` must be a live run.
 */
const char *ord_run_value(const struct OrdRun *r);

/**
 * # Safety
 * `r` must be a live run.
 */
size_t ord_run_steps(const struct OrdRun *r);

/**
 * Final freelist length; the entries are at [`ord_run_freelist`].
 *
 * # Safety
 * `r` must be a live run.
 */
size_t ord_run_freelist_len(const struct OrdRun *r);

/**
 * # Safety
 * `r` must be a live run.
 */
const uint32_t *ord_run_freelist(const struct OrdRun *r);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void ord_string_free(char *s);

/**
 * Message for the last failed call on this thread; empty if none. Valid
 * until the next failing call on the same thread.
 */
const char *ord_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORDCBPV_H */
