#ifndef EXPAND_EMBED_H
#define EXPAND_EMBED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define EE_OK 0

#define EE_VIOLATIONS 1

#define EE_ERR_NULL -1

#define EE_ERR_INVALID -2

#define EE_ERR_DOMAIN -3

/**
 * Opaque handle for a constructed box family and its distance model.
 */
typedef struct EeFamily EeFamily;

/**
 * Opaque modulus handle.
 */
typedef struct EeModulus EeModulus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len`). Returns the full message length in bytes, or 0 if no error is
 * pending.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be NULL with `len` 0.
 */
uintptr_t ee_last_error_message(char *buf, uintptr_t len);

/**
 * omega(r) = r^p in dimension d.
 */
struct EeModulus *ee_modulus_power(double p, uint32_t d);

/**
 * omega(r) = r^p (log e/r)^a in dimension d.
 */
struct EeModulus *ee_modulus_power_log(double p, double a, uint32_t d);

/**
 * Modulus from CSV text with an `r,omega` header.
 *
 * # Safety
 * `csv` must be a valid NUL-terminated UTF-8 string.
 */
struct EeModulus *ee_modulus_table(const char *csv, uint32_t d);

/**
 * # Safety
 * `m` must come from an ee_modulus_* constructor and not be freed twice.
 */
void ee_modulus_free(struct EeModulus *m);

/**
 * Series verdict: writes 0 (convergent), 1 (divergent), or 2
 * (undecided) to `out_verdict`.
 *
 * # Safety
 * `m` must be a live modulus handle; `out_verdict` must be writable.
 */
int32_t ee_classify(const struct EeModulus *m, uintptr_t n_terms, int32_t *out_verdict);

/**
 * Critical scales: fills `out_r` and `out_r_star` (each `depth` doubles)
 * with the solutions of omega(r_n) = 2^-(n+1) and omega(r*_n) =
 * 2^-(n-1), n = 1..depth.
 *
 * # Safety
 * Output arrays must hold at least `depth` doubles each.
 */
int32_t ee_critical_sequence(const struct EeModulus *m,
                             uintptr_t depth,
                             double *out_r,
                             double *out_r_star);

/**
 * Builds the depth-`depth` box family from the modulus's upper critical
 * scales in dimension `d`.
 *
 * # Safety
 * `m` must be a live modulus handle.
 */
struct EeFamily *ee_family_build(const struct EeModulus *m, uintptr_t d, uintptr_t depth);

/**
 * Builds a family from an explicit positive nonincreasing gap sequence
 * of length `depth`, to be verified against the required
 * first-difference separation scales in `targets` (also `depth`
 * doubles; pass the same array as `gaps` for a self-consistency check).
 *
 * # Safety
 * `gaps` and `targets` must each point to `depth` doubles.
 */
struct EeFamily *ee_family_build_gaps(const double *gaps,
                                      const double *targets,
                                      uintptr_t d,
                                      uintptr_t depth);

/**
 * # Safety
 * `f` must come from an ee_family_build* constructor and not be freed
 * twice.
 */
void ee_family_free(struct EeFamily *f);

/**
 * Verifies the non-contraction inequality. `mode` is 0 for exhaustive,
 * 1 for structural. Writes the number of violations and returns EE_OK or
 * EE_VIOLATIONS.
 *
 * # Safety
 * `f` must be a live family handle; `out_violations` writable or NULL.
 */
int32_t ee_verify_embedding(const struct EeFamily *f, int32_t mode, uint64_t *out_violations);

/**
 * Verifies the pointwise witness against its modulus (families built by
 * ee_family_build only).
 *
 * # Safety
 * Same contract as `ee_verify_embedding`.
 */
int32_t ee_verify_witness(const struct EeFamily *f, int32_t mode, uint64_t *out_violations);

/**
 * Full verification report as a JSON string; free with ee_string_free.
 *
 * # Safety
 * `f` must be a live family handle.
 */
char *ee_verify_report_json(const struct EeFamily *f, int32_t mode);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void ee_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EXPAND_EMBED_H */
