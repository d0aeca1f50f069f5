#ifndef TRACEFIX_H
#define TRACEFIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_ARGUMENT = 1,
  TF_STATUS_INVALID_UTF8 = 2,
  TF_STATUS_PARSE = 3,
  TF_STATUS_IO = 4,
  TF_STATUS_INVALID_ARGUMENT = 5,
  TF_STATUS_RUNTIME = 6,
  TF_STATUS_EXTRACTION = 7,
  TF_STATUS_REPAIR = 8,
  TF_STATUS_PANIC = 9,
} TfStatus;

/**
 * Loaded bug case.
 */
typedef struct TfBug TfBug;

/**
 * Parsed program.
 */
typedef struct TfProgram TfProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Free with
 * [`tf_string_free`].
 */
char *tf_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void tf_string_free(char *s);

/**
 * Library version as a static string; do not free.
 */
const char *tf_version(void);

/**
 * Parses and resolves `source`.
 *
 * # Safety
 * `source` must be a valid C string and `out` a valid pointer.
 */
enum TfStatus tf_program_parse(const char *source, struct TfProgram **out);

/**
 * # Safety
 * `program` must come from [`tf_program_parse`] and not have been freed.
 */
void tf_program_free(struct TfProgram *program);

/**
 * Canonical source text of the program.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TfStatus tf_program_print(const struct TfProgram *program, char **out);

/**
 * Calls `entry` with `args_json`, a JSON array of tagged values such as
 * `[{"type":"Int","value":3}]`. The outcome is written as JSON. A runtime
 * error inside the program is a normal outcome, not a failed call.
 *
 * # Safety
 * Pointers must be valid; `args_json` may be NULL for no arguments.
 */
enum TfStatus tf_program_interpret(const struct TfProgram *program,
                                   const char *entry,
                                   const char *args_json,
                                   uint64_t max_steps,
                                   char **out_json);

/**
 * Loads a bug directory (`bug.json`, `program.mini`, `tests.mini`, ...).
 *
 * # Safety
 * Pointers must be valid.
 */
enum TfStatus tf_bug_load(const char *dir, struct TfBug **out);

/**
 * # Safety
 * `bug` must come from [`tf_bug_load`] and not have been freed.
 */
void tf_bug_free(struct TfBug *bug);

/**
 * Renders the failing-test traces of the bug's target function. `mode` is an
 * ablation mode name such as `full`; NULL means `full`.
 *
 * # Safety
 * Pointers must be valid; `mode` may be NULL.
 */
enum TfStatus tf_bug_trace(const struct TfBug *bug, const char *mode, char **out_text);

/**
 * Splices `function_source` into the bug and runs its tests. Writes the
 * validation result as JSON.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TfStatus tf_bug_validate(const struct TfBug *bug,
                              const char *function_source,
                              char **out_json);

/**
 * Extracts the fixed `target` function from raw model output.
 *
 * # Safety
 * Pointers must be valid.
 */
enum TfStatus tf_extract_patch(const char *model_output, const char *target, char **out_source);

/**
 * Runs the repair loop. With `endpoint` set the HTTP generator is used (API
 * key from the environment); otherwise `script_path` names a scripted plan.
 * `session_log` may be NULL. Writes the outcome as JSON.
 *
 * # Safety
 * Pointers must be valid; `script_path`, `endpoint` and `session_log` may be NULL.
 */
enum TfStatus tf_bug_repair(const struct TfBug *bug,
                            uint32_t breadth,
                            uint32_t depth,
                            const char *script_path,
                            const char *endpoint,
                            const char *session_log,
                            char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRACEFIX_H */
