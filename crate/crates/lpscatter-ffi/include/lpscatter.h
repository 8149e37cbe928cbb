#ifndef LPSCATTER_H
#define LPSCATTER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpsStatus {
  LPS_STATUS_OK = 0,
  LPS_STATUS_NULL_POINTER = 1,
  LPS_STATUS_INVALID_PARAMETER = 2,
  LPS_STATUS_PRECONDITION = 3,
  LPS_STATUS_LINEAR_ALGEBRA = 4,
  LPS_STATUS_IO = 5,
  LPS_STATUS_PANIC = 6,
} LpsStatus;

typedef enum LpsModel {
  LPS_MODEL_PURE = 0,
  LPS_MODEL_PERTURBED = 1,
} LpsModel;

// Resonance states built on an [`LpsSystem`].
typedef struct LpsResonance LpsResonance;

// Hardy projectors on a rational full-line grid and the Lyapunov pair on its half line.
typedef struct LpsSystem LpsSystem;

typedef struct LpsNorms {
  double norm_app_sqr;
  double norm_res_sqr;
  double ratio;
  double closed_form_app_sqr;
  double closed_form_res_sqr;
} LpsNorms;

typedef struct LpsBound {
  double lhs;
  double term1;
  double term2;
  double rhs;
  bool pass;
} LpsBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length of the last error message in bytes, excluding the terminator; 0 when none.
size_t lps_last_error_length(void);

// Copies the last error message into `buf`, truncating to `len - 1` bytes.
// Returns the number of bytes written, excluding the terminator.
//
// # Safety
// `buf` must be valid for `len` bytes or null.
size_t lps_last_error_message(char *buf, size_t len);

// Builds a system on a rational grid with `n` full-line nodes. A
// nonpositive `scale` selects the default scale for `e_max`.
//
// # Safety
// `out` must be a valid pointer.
enum LpsStatus lps_system_new(size_t n,
                              double e_max,
                              double center,
                              double scale,
                              struct LpsSystem **out);

// # Safety
// `system` must come from [`lps_system_new`] or be null.
void lps_system_free(struct LpsSystem *system);

// Number of nodes on the half-line grid.
//
// # Safety
// `system` must be a valid handle or null.
size_t lps_system_half_len(const struct LpsSystem *system);

// Copies the half-line nodes into `out`, which must hold `len` values.
//
// # Safety
// `system` must be a valid handle and `out` valid for `len` writes.
enum LpsStatus lps_system_half_nodes(const struct LpsSystem *system, double *out, size_t len);

// Largest relative residual of the rational Hardy oracle suite.
//
// # Safety
// `system` must be a valid handle and `out` a valid pointer.
enum LpsStatus lps_hardy_oracle(const struct LpsSystem *system, double *out);

// `tau(t)` for the reference packet at `len` equally spaced times from `t0`
// to `t1`, using `M_F` when `forward` is true and `M_B` otherwise.
//
// # Safety
// `system` must be a valid handle and `out` valid for `len` writes.
enum LpsStatus lps_reference_trace(const struct LpsSystem *system,
                                   bool forward,
                                   double t0,
                                   double t1,
                                   double *out,
                                   size_t len);

// Builds the resonance states for the pole `e0 - i gamma`. A negative
// `floor` selects the default inverse floor.
//
// # Safety
// `system` must be a valid handle and `out` a valid pointer.
enum LpsStatus lps_resonance_new(const struct LpsSystem *system,
                                 double e0,
                                 double gamma,
                                 double floor,
                                 struct LpsResonance **out);

// # Safety
// `res` must come from [`lps_resonance_new`] or be null.
void lps_resonance_free(struct LpsResonance *res);

// Numeric norms next to their closed forms.
//
// # Safety
// `res` must be a valid handle and `out` a valid pointer.
enum LpsStatus lps_resonance_norms(const struct LpsResonance *res, struct LpsNorms *out);

// Evaluates the eigenvector projection bound for the chosen S-matrix model.
//
// # Safety
// All pointers must be valid handles or outputs.
enum LpsStatus lps_resonance_bound(const struct LpsSystem *system,
                                   const struct LpsResonance *res,
                                   enum LpsModel model,
                                   double tol,
                                   struct LpsBound *out);

// `S(E)` for the chosen model with resonance pole `e0 - i gamma`.
//
// # Safety
// `re` and `im` must be valid pointers.
enum LpsStatus lps_smatrix_eval(double e0,
                                double gamma,
                                enum LpsModel model,
                                double energy,
                                double *re,
                                double *im);

// Closed-form bound on the background term for the pole `e0 - i gamma`.
double lps_background_bound(double e0, double gamma);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPSCATTER_H */
