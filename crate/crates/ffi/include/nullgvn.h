#ifndef NULLGVN_H
#define NULLGVN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NgLevel {
  NG_LEVEL_NONE = 0,
  NG_LEVEL_SSA = 1,
  NG_LEVEL_GVN = 2,
} NgLevel;

typedef enum NgSolver {
  NG_SOLVER_WORKLIST = 0,
  NG_SOLVER_NAIVE = 1,
} NgSolver;

typedef enum NgStatus {
  NG_STATUS_OK = 0,
  NG_STATUS_NULL_ARGUMENT = 1,
  NG_STATUS_INVALID_UTF8 = 2,
  /**
   * The program text is malformed or fails validation.
   */
  NG_STATUS_PARSE_ERROR = 3,
  /**
   * A pass rejected the program.
   */
  NG_STATUS_TRANSFORM_ERROR = 4,
  /**
   * The index is out of range.
   */
  NG_STATUS_OUT_OF_RANGE = 5,
  /**
   * A bug inside the library; the message has details.
   */
  NG_STATUS_INTERNAL = 6,
} NgStatus;

typedef enum NgVerdict {
  NG_VERDICT_SAFE = 0,
  NG_VERDICT_UNPROVED = 1,
} NgVerdict;

/**
 * A parsed, validated program.
 */
typedef struct NgProgram NgProgram;

/**
 * Verdicts for every assertion of an analysed program.
 */
typedef struct NgReport NgReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next library call on the thread.
 */
const char *ng_last_error(void);

/**
 * Parse program text. With `transformed` set, names in the reserved `__`
 * namespace are accepted so that the output of a transformation can be
 * read back.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NgStatus ng_program_parse(const char *source, bool transformed, struct NgProgram **out);

/**
 * Generate a random program with the default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NgStatus ng_program_generate(uint64_t seed, struct NgProgram **out);

/**
 * # Safety
 * `program` must be null or a handle from this library, not yet freed.
 */
void ng_program_free(struct NgProgram *program);

/**
 * Render a program as text. Free the result with [`ng_string_free`].
 *
 * # Safety
 * `program` must be a live handle and `out` a valid pointer.
 */
enum NgStatus ng_program_print(const struct NgProgram *program, char **out);

/**
 * Apply loop lifting, SSA and GVN up to `level`, producing a new program.
 *
 * # Safety
 * `program` must be a live handle and `out` a valid pointer.
 */
enum NgStatus ng_program_transform(const struct NgProgram *program,
                                   enum NgLevel level,
                                   struct NgProgram **out);

/**
 * Transform to `level`, solve points-to constraints and classify every
 * non-null assertion.
 *
 * # Safety
 * `program` must be a live handle and `out` a valid pointer.
 */
enum NgStatus ng_analyze(const struct NgProgram *program,
                         enum NgLevel level,
                         enum NgSolver solver,
                         struct NgReport **out);

/**
 * # Safety
 * `report` must be null or a handle from this library, not yet freed.
 */
void ng_report_free(struct NgReport *report);

/**
 * Number of assertions, or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t ng_report_asserts_total(const struct NgReport *report);

/**
 * Number of assertions not proved safe, or 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t ng_report_asserts_unproved(const struct NgReport *report);

/**
 * Verdict of the `index`-th assertion in program order.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum NgStatus ng_report_verdict(const struct NgReport *report, size_t index, enum NgVerdict *out);

/**
 * The full report as JSON. Free the result with [`ng_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum NgStatus ng_report_json(const struct NgReport *report, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ng_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NULLGVN_H */
