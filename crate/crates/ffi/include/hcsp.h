#ifndef HCSP_H
#define HCSP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  HCSP_STATUS_OK = 0,
  HCSP_STATUS_NULL_ARGUMENT = 1,
  HCSP_STATUS_INVALID_UTF8 = 2,
  HCSP_STATUS_PARSE = 3,
  HCSP_STATUS_SPEC = 4,
  HCSP_STATUS_JOB = 5,
  HCSP_STATUS_IO = 6,
  HCSP_STATUS_OUT_OF_RANGE = 7,
  HCSP_STATUS_PANIC = 8,
} HcspStatus;

/**
 * A parsed HCSP process.
 */
typedef struct HcspProcess HcspProcess;

/**
 * The report of a verification job.
 */
typedef struct HcspReport HcspReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread; empty after a
 * successful call. Valid until the next call on this thread.
 */
const char *hcsp_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void hcsp_string_free(char *s);

/**
 * Parses `text` into a process handle.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
HcspStatus hcsp_parse(const char *text, HcspProcess **out);

/**
 * The process in concrete syntax.
 *
 * # Safety
 * `p` must be a live process handle and `out` a valid pointer.
 */
HcspStatus hcsp_process_pretty(const HcspProcess *p, char **out);

/**
 * The generated specification of a sequential process, pretty-printed.
 *
 * # Safety
 * `p` must be a live process handle and `out` a valid pointer.
 */
HcspStatus hcsp_process_spec(const HcspProcess *p, char **out);

/**
 * # Safety
 * `p` must be null or a process handle not yet freed.
 */
void hcsp_process_free(HcspProcess *p);

/**
 * Runs the verification job given as JSON text.
 *
 * # Safety
 * `job_json` must be a nul-terminated string and `out` a valid pointer.
 */
HcspStatus hcsp_job_run(const char *job_json, HcspReport **out);

/**
 * The report as text.
 *
 * # Safety
 * `r` must be a live report handle and `out` a valid pointer.
 */
HcspStatus hcsp_report_text(const HcspReport *r, char **out);

/**
 * The synchronized assertion, pretty-printed.
 *
 * # Safety
 * `r` must be a live report handle and `out` a valid pointer.
 */
HcspStatus hcsp_report_assertion(const HcspReport *r, char **out);

/**
 * The CLI exit code for the report (0 pass, 2 failed obligation,
 * 3 oracle counterexample), or -1 for a null handle.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
int32_t hcsp_report_exit_code(const HcspReport *r);

/**
 * Number of synchronized loops in the report, 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
uintptr_t hcsp_report_loop_count(const HcspReport *r);

/**
 * Branches generated and kept after pruning for loop `index`.
 *
 * # Safety
 * `r` must be a live report handle; `generated` and `kept` valid pointers.
 */
HcspStatus hcsp_report_loop_stats(const HcspReport *r,
                                  uintptr_t index,
                                  uintptr_t *generated,
                                  uintptr_t *kept);

/**
 * Number of obligations in the report, 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
uintptr_t hcsp_report_obligation_count(const HcspReport *r);

/**
 * Writes the report files into directory `dir`.
 *
 * # Safety
 * `r` must be a live report handle and `dir` a nul-terminated string.
 */
HcspStatus hcsp_report_write(const HcspReport *r, const char *dir);

/**
 * # Safety
 * `r` must be null or a report handle not yet freed.
 */
void hcsp_report_free(HcspReport *r);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HCSP_H */
