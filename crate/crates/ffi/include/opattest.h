/* C interface to the opattest attestation toolkit. */

#ifndef OPATTEST_H
#define OPATTEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum OpatStatus {
  /**
   * Success.
   */
  OPAT_OK = 0,
  /**
   * A required pointer argument was null or a length was invalid.
   */
  OPAT_ERR_INVALID_ARG = 1,
  /**
   * The program text failed to parse or validate.
   */
  OPAT_ERR_PARSE = 2,
  /**
   * Static analysis rejected the program.
   */
  OPAT_ERR_ANALYSIS = 3,
  /**
   * The modeled run hit a runtime error (bad transfer, step limit...).
   */
  OPAT_ERR_RUNTIME = 4,
  /**
   * The requested operation id never executed.
   */
  OPAT_ERR_NO_OPERATION = 5,
  /**
   * The evidence buffer failed to decode.
   */
  OPAT_ERR_DECODE = 6,
  /**
   * Evidence decoded but verification rejected it; the report JSON
   * lists the failure classes.
   */
  OPAT_VERIFY_FAILED = 7,
  /**
   * An internal panic was caught at the boundary.
   */
  OPAT_ERR_INTERNAL = 8,
} OpatStatus;

/**
 * A parsed, analyzed, instrumented program ready to attest or verify.
 */
typedef struct OpatProgram OpatProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last non-OK status on this thread. The pointer stays
 * valid until the thread's next call into this library.
 */
const char *opat_last_error(void);

/**
 * Parses, validates, analyzes and instruments `source` (a
 * NUL-terminated program text). On success `*out` owns the handle.
 */
enum OpatStatus opat_program_load(const char *source, struct OpatProgram **out);

/**
 * Releases a program handle. Passing null is a no-op.
 */
void opat_program_free(struct OpatProgram *p);

/**
 * Derives the 32-byte verifying (public) key from a 32-byte signing
 * seed.
 */
enum OpatStatus opat_public_key(const uint8_t *seed, uint8_t *out_public);

/**
 * Runs the program on `inputs` and returns the signed evidence for
 * `op_id` as a freshly allocated buffer in `*out_buf` / `*out_len`
 * (release with `opat_buffer_free`). `seed` is the 32-byte signing
 * seed, `nonce` the 16-byte challenge nonce.
 */
enum OpatStatus opat_attest(const struct OpatProgram *p,
                            const int64_t *inputs,
                            uintptr_t n_inputs,
                            const uint8_t *seed,
                            const uint8_t *nonce,
                            uint32_t op_id,
                            uint8_t **out_buf,
                            uintptr_t *out_len);

/**
 * Verifies an evidence buffer against the program's analysis, a 32-byte
 * verifying key and the 16-byte nonce issued for this challenge.
 * Returns `OPAT_OK` when the evidence passes, `OPAT_VERIFY_FAILED` when
 * it is rejected. When `report_json` is non-null it receives the full
 * verification report as a JSON string in either case (release with
 * `opat_string_free`).
 */
enum OpatStatus opat_verify(const struct OpatProgram *p,
                            const uint8_t *blob,
                            uintptr_t blob_len,
                            const uint8_t *public_key,
                            const uint8_t *nonce,
                            char **report_json);

/**
 * Releases a buffer returned by `opat_attest`.
 */
void opat_buffer_free(uint8_t *buf, uintptr_t len);

/**
 * Releases a string returned by `opat_verify`.
 */
void opat_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPATTEST_H */
