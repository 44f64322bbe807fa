/* C interface to the ellreg regularized-integral engine. */

#ifndef ELLREG_H
#define ELLREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every API call.
 */
typedef enum ErStatus {
  ErStatus_Ok = 0,
  ErStatus_InvalidArgument = 1,
  ErStatus_ParseError = 2,
  ErStatus_PoleError = 3,
  ErStatus_NonConvergence = 4,
  ErStatus_CapExceeded = 5,
  ErStatus_InternalError = 6,
} ErStatus;

/**
 * Opaque handle around a modular context.
 */
typedef struct ErContext ErContext;

/**
 * A complex number crossing the C boundary.
 */
typedef struct ErComplex {
  double re;
  double im;
} ErComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent error on this thread (valid until the next
 * failing call on the same thread).
 */
const char *ellreg_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ellreg_version(void);

/**
 * Creates a modular context. `series_cutoff = 0` picks the automatic
 * cutoff; `jet_cap = 0` uses the default cap.
 *
 * # Safety
 * `out` must be a valid pointer; on `Ok` it receives a handle that must be
 * released with [`ellreg_context_free`].
 */
enum ErStatus ellreg_context_new(struct ErComplex tau,
                                 uintptr_t series_cutoff,
                                 uint32_t jet_cap,
                                 struct ErContext **out);

/**
 * Releases a context handle. A null pointer is a no-op.
 *
 * # Safety
 * `ctx` must be a handle from [`ellreg_context_new`] not yet freed.
 */
void ellreg_context_free(struct ErContext *ctx);

/**
 * Looks up a named constant (`g2`, `g3`, `eta1`, `eta1hat`, `E2`, ...).
 *
 * # Safety
 * `ctx`, `name` and `out` must be valid pointers.
 */
enum ErStatus ellreg_constant(const struct ErContext *ctx, const char *name, struct ErComplex *out);

/**
 * Iterated regularized integral of a DSL integrand. `order`/`order_len`
 * give the integration order; pass `order_len = 0` for the default
 * ascending order.
 *
 * # Safety
 * `ctx`, `expr` and `out` must be valid; `order` must point to `order_len`
 * entries when `order_len > 0`.
 */
enum ErStatus ellreg_integrate(const struct ErContext *ctx,
                               const char *expr,
                               const uint32_t *order,
                               uintptr_t order_len,
                               struct ErComplex *out);

/**
 * One integration step in `z_active`; the symbolic result is returned as a
 * DSL string (release it with [`ellreg_string_free`]).
 *
 * # Safety
 * `ctx`, `expr` and `out` must be valid pointers.
 */
enum ErStatus ellreg_integrate_once(const struct ErContext *ctx,
                                    const char *expr,
                                    uint32_t active,
                                    char **out);

/**
 * Principal-value quadrature of one step. `fixed_points[i]` is assigned the
 * value `fixed_values[i]`.
 *
 * # Safety
 * Array pointers must cover `n_fixed` entries; `out_value` and `out_error`
 * must be valid pointers.
 */
enum ErStatus ellreg_pv_single_step(const struct ErContext *ctx,
                                    const char *expr,
                                    uint32_t active,
                                    const uint32_t *fixed_points,
                                    const struct ErComplex *fixed_values,
                                    uintptr_t n_fixed,
                                    struct ErComplex *out_value,
                                    double *out_error);

/**
 * Releases a string allocated by this library. A null pointer is a no-op.
 *
 * # Safety
 * `s` must come from an ellreg call and not have been freed already.
 */
void ellreg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELLREG_H */
