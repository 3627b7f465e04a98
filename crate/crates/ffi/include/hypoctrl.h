#ifndef HYPOCTRL_H
#define HYPOCTRL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HcModel {
  // Heat equation in `d` dimensions.
  HC_MODEL_HEAT = 0,
  // Kolmogorov `∂_t + v∂_x − ∂_v²` in two dimensions.
  HC_MODEL_KOLMOGOROV = 1,
} HcModel;

typedef enum HcStatus {
  HC_STATUS_OK = 0,
  HC_STATUS_NULL_POINTER = 1,
  HC_STATUS_INVALID_ARGUMENT = 2,
  HC_STATUS_DIMENSION_MISMATCH = 3,
  HC_STATUS_NON_FINITE = 4,
  HC_STATUS_NUMERICAL = 5,
  HC_STATUS_UNKNOWN_SCENARIO = 6,
  HC_STATUS_CONFIG = 7,
  HC_STATUS_IO = 8,
  HC_STATUS_BUFFER_TOO_SMALL = 9,
  HC_STATUS_PANIC = 10,
} HcStatus;

// Opaque HUM null-control problem.
typedef struct HcControlProblem HcControlProblem;

// Opaque sampled Fourier-side field.
typedef struct HcField HcField;

// Opaque finite union of time intervals.
typedef struct HcTimeSet HcTimeSet;

typedef struct HcCostConstant {
  double gamma;
  double beta;
  double alpha_exp;
  double c_min;
  double mu_star;
} HcCostConstant;

typedef struct HcControlReport {
  double cost;
  double dual_cost;
  double residual;
  size_t iterations;
  int32_t success;
} HcControlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap`). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or valid for `cap` bytes.
size_t hc_last_error(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *hc_version(void);

// Runs a named scenario, writing `result.json` and CSV files into `out_dir`.
// `config_path` may be null for defaults.
//
// # Safety
// String arguments must be null or NUL-terminated.
enum HcStatus hc_run_scenario(const char *name,
                              const char *config_path,
                              const char *out_dir,
                              uint64_t seed);

// Optimal cost constant for `c1' = c2' = 1`, `m2 = 0`.
//
// # Safety
// `out` must be null or point to writable memory.
enum HcStatus hc_cost_constant(double a,
                               double b,
                               double m1,
                               double c1,
                               double c2,
                               struct HcCostConstant *out);

// Builds a time set from `n` pairs laid out as `lo0, hi0, lo1, hi1, …`.
//
// # Safety
// `bounds` must be valid for `2n` doubles; `out` must be writable.
enum HcStatus hc_time_set_new(const double *bounds, size_t n, struct HcTimeSet **out);

// # Safety
// `ts` must be null or a handle from [`hc_time_set_new`], freed at most once.
void hc_time_set_free(struct HcTimeSet *ts);

// # Safety
// `ts` must be a live handle; `out` must be writable.
enum HcStatus hc_time_set_measure(const struct HcTimeSet *ts, double *out);

// Density sequence `t_0 > … > t_{j_max}` accumulating at `t_star`. Writes up to
// `cap` points into `out_t` and the point count into `out_len`; returns
// `BufferTooSmall` (with `out_len` set) when `cap` is short. `out_valid` receives
// 1 when the sequence passes the exact property check.
//
// # Safety
// `ts` must be a live handle; `out_t` valid for `cap` doubles; `out_len` and
// `out_valid` writable.
enum HcStatus hc_density_sequence(const struct HcTimeSet *ts,
                                  double t_star,
                                  double r,
                                  size_t j_max,
                                  double *out_t,
                                  size_t cap,
                                  size_t *out_len,
                                  int32_t *out_valid);

// Reads a field in the binary layout written by the library.
//
// # Safety
// `path` must be NUL-terminated; `out` writable.
enum HcStatus hc_field_read(const char *path, struct HcField **out);

// Writes a field in the library's binary layout.
//
// # Safety
// `field` must be a live handle; `path` NUL-terminated.
enum HcStatus hc_field_write(const struct HcField *field, const char *path);

// # Safety
// `field` must be null or a handle from this library, freed at most once.
void hc_field_free(struct HcField *field);

// Dimension and total sample count.
//
// # Safety
// `field` must be a live handle; outputs writable.
enum HcStatus hc_field_shape(const struct HcField *field, size_t *out_dim, size_t *out_len);

// Discrete `L²` norm of the samples.
//
// # Safety
// `field` must be a live handle; `out` writable.
enum HcStatus hc_field_norm(const struct HcField *field, double *out);

// Copies samples as interleaved `re, im` pairs; `cap` counts doubles.
//
// # Safety
// `field` must be a live handle; `out` valid for `cap` doubles.
enum HcStatus hc_field_samples(const struct HcField *field, double *out, size_t cap);

// Evolves the Fourier transform of `exp(−|x−z|²/(2α))` from `t0` to `t1` on the
// default grid. `center` holds `dim` entries; `dim` must be 2 for Kolmogorov.
//
// # Safety
// `center` valid for `dim` doubles; `out` writable.
enum HcStatus hc_propagate_gaussian(enum HcModel model,
                                    size_t dim,
                                    double horizon,
                                    const double *center,
                                    double alpha,
                                    double t0,
                                    double t1,
                                    struct HcField **out);

// Heat equation on a torus of length `length` with `modes` grid points, controlled
// from the periodic set `∪_k [k·period, k·period + duty·period]`, horizon `T`
// split into `n_t` slices.
//
// # Safety
// `out` must be writable.
enum HcStatus hc_control_heat_new(double length,
                                  size_t modes,
                                  double period,
                                  double duty,
                                  double horizon,
                                  size_t n_t,
                                  struct HcControlProblem **out);

// # Safety
// `p` must be null or a handle from [`hc_control_heat_new`], freed at most once.
void hc_control_free(struct HcControlProblem *p);

// Number of grid points of the state.
//
// # Safety
// `p` must be a live handle; `out` writable.
enum HcStatus hc_control_state_len(const struct HcControlProblem *p, size_t *out);

// Solves for the minimal-norm control steering the real initial state `f0`
// (length = state length) to zero.
//
// # Safety
// `p` must be a live handle; `f0` valid for `len` doubles; `out` writable.
enum HcStatus hc_control_solve(const struct HcControlProblem *p,
                               const double *f0,
                               size_t len,
                               double tol,
                               struct HcControlReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPOCTRL_H */
