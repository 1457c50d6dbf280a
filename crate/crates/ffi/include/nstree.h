#ifndef NSTREE_H
#define NSTREE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum NstreeStatus {
  NSTREE_STATUS_OK = 0,
  NSTREE_STATUS_NULL_POINTER = 1,
  NSTREE_STATUS_INVALID_ARGUMENT = 2,
  NSTREE_STATUS_CAP_EXCEEDED = 3,
  NSTREE_STATUS_IO = 4,
  NSTREE_STATUS_NUMERICAL = 5,
  NSTREE_STATUS_BUFFER_SIZE = 6,
  NSTREE_STATUS_PANIC = 7,
} NstreeStatus;

/**
 * Opaque spectral velocity field.
 */
typedef struct NstreeField NstreeField;

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *nstree_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nstree_version(void);

/**
 * Taylor–Green field of the given amplitude on an N³ grid.
 */
enum NstreeStatus nstree_field_taylor_green(uint32_t n,
                                            bool dealias,
                                            double amplitude,
                                            struct NstreeField **out);

/**
 * Seeded random divergence-free field with spectrum ∝ |k|^−decay and the
 * given L² norm.
 */
enum NstreeStatus nstree_field_random_divfree(uint32_t n,
                                              bool dealias,
                                              uint64_t seed,
                                              double decay,
                                              double norm,
                                              struct NstreeField **out);

enum NstreeStatus nstree_field_clone(const struct NstreeField *f, struct NstreeField **out);

/**
 * Releases a handle. Null is ignored.
 */
void nstree_field_free(struct NstreeField *f);

enum NstreeStatus nstree_field_grid_n(const struct NstreeField *f, uint32_t *out);

/**
 * Sobolev norm ‖(1+|k|²)^{α/2} û‖; α = 0 gives the L² norm.
 */
enum NstreeStatus nstree_field_norm(const struct NstreeField *f, double alpha, double *out);

/**
 * max |k·û(k)| / max |k||û(k)|.
 */
enum NstreeStatus nstree_field_divergence_defect(const struct NstreeField *f, double *out);

/**
 * ‖a − b‖ / ‖b‖ in L².
 */
enum NstreeStatus nstree_field_rel_l2_diff(const struct NstreeField *a,
                                           const struct NstreeField *b,
                                           double *out);

/**
 * e^{tΔ} applied to the field.
 */
enum NstreeStatus nstree_field_heat(const struct NstreeField *f,
                                    double t,
                                    struct NstreeField **out);

/**
 * Leray projection onto divergence-free fields.
 */
enum NstreeStatus nstree_field_leray(const struct NstreeField *f, struct NstreeField **out);

/**
 * Number of doubles in the coefficient buffer: 6·N³.
 */
enum NstreeStatus nstree_field_coefficient_len(const struct NstreeField *f, size_t *out);

/**
 * Copies the coefficients as interleaved (re, im) doubles, component by
 * component, each in FFT order: index (i₁·N + i₂)·N + i₃ with
 * i = k mod N. `len` must equal [`nstree_field_coefficient_len`].
 */
enum NstreeStatus nstree_field_copy_coefficients(const struct NstreeField *f,
                                                 double *buf,
                                                 size_t len);

/**
 * Builds a field from a buffer in the layout of
 * [`nstree_field_copy_coefficients`].
 */
enum NstreeStatus nstree_field_from_coefficients(uint32_t n,
                                                 bool dealias,
                                                 const double *buf,
                                                 size_t len,
                                                 struct NstreeField **out);

/**
 * Writes the binary snapshot and its JSON sidecar (`<path>.json`).
 */
enum NstreeStatus nstree_field_write_snapshot(const struct NstreeField *f, const char *path);

enum NstreeStatus nstree_field_read_snapshot(const char *path, struct NstreeField **out);

/**
 * The n-th Catalan number, the count of marked binary trees with n
 * vertices.
 */
enum NstreeStatus nstree_catalan(uint32_t n, uint64_t *out);

/**
 * Number of ordered k-tuples of marked binary trees with n vertices in total.
 */
enum NstreeStatus nstree_forest_count(uint32_t n, uint32_t k, uint64_t *out);

/**
 * Navier–Stokes solution at time t by second-order exponential time
 * differencing with step dt. Requires a dealiased grid.
 */
enum NstreeStatus nstree_solve_etd(const struct NstreeField *f,
                                   double t,
                                   double dt,
                                   struct NstreeField **out);

/**
 * Navier–Stokes solution at time t by Picard iteration of the mild form.
 */
enum NstreeStatus nstree_solve_picard(const struct NstreeField *f,
                                      double t,
                                      struct NstreeField **out);

/**
 * Partial sum of the tree series through `max_order` at time t, with
 * `nodes` Gauss–Legendre points per time integral. When `term_norms` is
 * not null it receives the L² norm of each order, `max_order + 1` values.
 */
enum NstreeStatus nstree_solution_series(const struct NstreeField *f,
                                         double t,
                                         uint32_t max_order,
                                         uint32_t nodes,
                                         double *term_norms,
                                         struct NstreeField **out);

#endif  /* NSTREE_H */
