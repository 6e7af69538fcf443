#ifndef RBVAR_H
#define RBVAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which variance bound to evaluate or plan with.
 */
typedef enum RbvarBound {
  RBVAR_BOUND_SPAMFREE = 0,
  RBVAR_BOUND_SMALL_M = 1,
  /**
   * Small-m bound with `u = 1`.
   */
  RBVAR_BOUND_SMALL_MU_ONE = 2,
  RBVAR_BOUND_SPAM = 3,
  RBVAR_BOUND_SPAM_DERIVED = 4,
  RBVAR_BOUND_TRIVIAL = 5,
  /**
   * Use `RbvarPlanRequest::variance`.
   */
  RBVAR_BOUND_EXPLICIT = 6,
} RbvarBound;

/**
 * Status codes returned by every fallible function.
 */
typedef enum RbvarStatus {
  RBVAR_STATUS_OK = 0,
  RBVAR_STATUS_NULL_POINTER = 1,
  RBVAR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The request cannot be met (e.g. no finite sequence count).
   */
  RBVAR_STATUS_INFEASIBLE = 3,
  /**
   * Outside the supported size or model range.
   */
  RBVAR_STATUS_UNSUPPORTED = 4,
  /**
   * Malformed JSON or UTF-8.
   */
  RBVAR_STATUS_PARSE = 5,
  RBVAR_STATUS_INTERNAL = 6,
  RBVAR_STATUS_PANIC = 7,
} RbvarStatus;

/**
 * Opaque channel handle.
 */
typedef struct RbvarChannel RbvarChannel;

/**
 * Opaque dataset handle.
 */
typedef struct RbvarDataset RbvarDataset;

/**
 * Opaque irreducible decomposition handle.
 */
typedef struct RbvarIrreps RbvarIrreps;

/**
 * Input of [`rbvar_plan`].  A negative `u` means "use `u_mix`"; a negative
 * `eta` means "not given".
 */
typedef struct RbvarPlanRequest {
  double delta;
  double epsilon;
  uint64_t m;
  double r;
  double u;
  double u_mix;
  uint32_t qubits;
  double eta;
  enum RbvarBound bound;
  double variance;
  /**
   * Non-zero selects the `f^{m−1}` form of the bounds.
   */
  uint8_t printed_form;
} RbvarPlanRequest;

typedef struct RbvarPlanResult {
  uint64_t n;
  double n_raw;
  uint64_t n_trivial;
  double variance_used;
  double h;
  double achieved_delta;
  double f;
  double u;
} RbvarPlanResult;

/**
 * Unitary part of channel metrics.
 */
typedef struct RbvarChannelMetrics {
  double f;
  double r;
  double u;
  double nonunitality;
} RbvarChannelMetrics;

typedef struct RbvarDecayPoint {
  uint64_t m;
  double mean;
  double sample_variance;
  uint64_t n;
  /**
   * NaN when not computed.
   */
  double exact_variance;
  /**
   * NaN when not computed.
   */
  double exact_mean;
} RbvarDecayPoint;

typedef struct RbvarFit {
  double a;
  double f_hat;
  double r_hat;
  double residual_rms;
  /**
   * 0 log-linear, 1 Gauss–Newton.
   */
  uint32_t method;
} RbvarFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rbvar_version(void);

/**
 * Message of the last failure on this thread (empty if none).  The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rbvar_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library.
 */
void rbvar_string_free(char *s);

/**
 * `N = ⌈log(2/δ)/(−log H(V², ε))⌉`.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum RbvarStatus rbvar_sequences_needed(double delta,
                                        double epsilon,
                                        double variance,
                                        uint64_t *out);

/**
 * Evaluates one variance bound at `(r, u, d, m, η)`.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum RbvarStatus rbvar_variance_bound(enum RbvarBound bound,
                                      double r,
                                      double u,
                                      uint64_t d,
                                      uint64_t m,
                                      double eta,
                                      uint8_t printed_form,
                                      double *out);

/**
 * Plans the number of sequences.
 *
 * # Safety
 * `req` must be NULL or valid for reads, `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_plan(const struct RbvarPlanRequest *req, struct RbvarPlanResult *out);

/**
 * Depolarizing channel with parameter `f` on `qubits` qubits.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum RbvarStatus rbvar_channel_depolarizing(uint32_t qubits, double f, struct RbvarChannel **out);

/**
 * Channel from its JSON description (the same format the CLI accepts).
 *
 * # Safety
 * `json` must be NULL or a NUL-terminated string; `out` NULL or valid for
 * writes.
 */
enum RbvarStatus rbvar_channel_from_json(uint32_t qubits,
                                         const char *json,
                                         struct RbvarChannel **out);

/**
 * Channel from a row-major `4^q × 4^q` Pauli transfer matrix in the
 * normalized Pauli basis.
 *
 * # Safety
 * `data` must be NULL or point to `len` doubles; `out` NULL or valid for
 * writes.
 */
enum RbvarStatus rbvar_channel_from_ptm(uint32_t qubits,
                                        const double *data,
                                        size_t len,
                                        struct RbvarChannel **out);

/**
 * Releases a channel.
 *
 * # Safety
 * `ch` must be NULL or a handle from this library not yet freed.
 */
void rbvar_channel_free(struct RbvarChannel *ch);

/**
 * Fidelity parameter, infidelity, unitarity and non-unitality.
 *
 * # Safety
 * `ch` must be NULL or a live handle; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_channel_metrics(const struct RbvarChannel *ch,
                                       struct RbvarChannelMetrics *out);

/**
 * Copies the row-major transfer matrix into `out` (`len` must be `16^q`).
 *
 * # Safety
 * `ch` must be NULL or a live handle; `out` NULL or valid for `len` writes.
 */
enum RbvarStatus rbvar_channel_ptm(const struct RbvarChannel *ch, double *out, size_t len);

/**
 * Irreducible decomposition of the two-copy Clifford action (q ≤ 2).
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum RbvarStatus rbvar_irreps_new(uint32_t qubits, struct RbvarIrreps **out);

/**
 * Releases a decomposition.
 *
 * # Safety
 * `h` must be NULL or a handle from this library not yet freed.
 */
void rbvar_irreps_free(struct RbvarIrreps *h);

/**
 * Number of irreducible blocks.
 *
 * # Safety
 * `h` must be NULL or a live handle; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_irreps_count(const struct RbvarIrreps *h, size_t *out);

/**
 * Exact variance of `K_m` for gate-independent noise `ch` with ideal state
 * preparation and measurement for the Pauli `target` (a base-4 index
 * `1..4^q` in the I, X, Y, Z ordering, qubit 0 most significant).
 *
 * # Safety
 * Handles must be NULL or live; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_exact_variance(const struct RbvarIrreps *h,
                                      const struct RbvarChannel *ch,
                                      size_t target,
                                      uint64_t m,
                                      double *out);

/**
 * Exact variance with explicit effect `Q` and traceless state difference
 * `ν`, both given by their `4^q` coordinates in the normalized Pauli basis.
 *
 * # Safety
 * Handles must be NULL or live; `q_coeffs`/`nu_coeffs` NULL or valid for
 * `len` reads; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_exact_variance_spam(const struct RbvarIrreps *h,
                                           const struct RbvarChannel *ch,
                                           const double *q_coeffs,
                                           const double *nu_coeffs,
                                           size_t len,
                                           uint64_t m,
                                           double *out);

/**
 * Runs a simulation described by a JSON configuration.
 *
 * # Safety
 * `config_json` must be NULL or NUL-terminated; `out` NULL or valid for
 * writes.
 */
enum RbvarStatus rbvar_simulate_json(const char *config_json, struct RbvarDataset **out);

/**
 * Releases a dataset.
 *
 * # Safety
 * `ds` must be NULL or a handle from this library not yet freed.
 */
void rbvar_dataset_free(struct RbvarDataset *ds);

/**
 * Number of sequence lengths in the dataset.
 *
 * # Safety
 * `ds` must be NULL or live; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_dataset_len(const struct RbvarDataset *ds, size_t *out);

/**
 * The `i`-th per-length summary.
 *
 * # Safety
 * `ds` must be NULL or live; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_dataset_point(const struct RbvarDataset *ds,
                                     size_t i,
                                     struct RbvarDecayPoint *out);

/**
 * Serializes the dataset to JSON; free the result with
 * [`rbvar_string_free`].
 *
 * # Safety
 * `ds` must be NULL or live; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_dataset_to_json(const struct RbvarDataset *ds, char **out);

/**
 * Fits `A f^m` to the dataset.
 *
 * # Safety
 * `ds` must be NULL or live; `out` NULL or valid for writes.
 */
enum RbvarStatus rbvar_fit(const struct RbvarDataset *ds, struct RbvarFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBVAR_H */
