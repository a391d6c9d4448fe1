#ifndef TELEGRAPH_H
#define TELEGRAPH_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TG_STATUS_OK = 0,
  TG_STATUS_INVALID_RATES = 1,
  TG_STATUS_DEGENERATE = 2,
  TG_STATUS_INVALID_ARGUMENT = 3,
  TG_STATUS_RECURSION_CAP = 4,
  TG_STATUS_OUT_OF_DOMAIN = 5,
  TG_STATUS_NON_FINITE = 6,
  TG_STATUS_NULL_POINTER = 7,
  TG_STATUS_INTERNAL = 8,
} TgStatus;

typedef enum {
  TG_PROCESS_REFLECTED = 0,
  TG_PROCESS_UNREFLECTED = 1,
} TgProcess;

typedef enum {
  /**
   * `1{v = +1}`; the parameter is ignored.
   */
  TG_INTEGRAND_VELOCITY_UP = 0,
  /**
   * `e^{param·x}`.
   */
  TG_INTEGRAND_EXP_POSITION = 1,
  /**
   * `x^param`, param a nonnegative integer.
   */
  TG_INTEGRAND_MOMENT = 2,
  /**
   * `1{x <= param}`.
   */
  TG_INTEGRAND_POSITION_AT_MOST = 3,
} TgIntegrand;

/**
 * Two coupled trajectories.
 */
typedef struct TgCoupling TgCoupling;

/**
 * Model parameters `(a, b)`.
 */
typedef struct TgModel TgModel;

/**
 * One simulated trajectory.
 */
typedef struct TgPath TgPath;

typedef struct {
  double c;
  double r;
  double c_reflected;
} TgBoundConstants;

typedef struct {
  double time;
  double position;
  int8_t velocity;
} TgEvent;

typedef struct {
  double position;
  /**
   * `+1` or `-1`.
   */
  int8_t velocity;
} TgState;

typedef struct {
  double mean;
  double std_error;
  uint64_t n;
} TgEstimate;

/**
 * Random times of a coupling; `NAN` when the time lies beyond the horizon.
 */
typedef struct {
  double crossing_time;
  double coalescence_time;
  double crossing_position;
  double horizon;
} TgCouplingTimes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *tg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tg_version(void);

/**
 * Creates a model with rates `0 < a <= b`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
TgStatus tg_model_new(double a, double b, TgModel **out);

/**
 * # Safety
 * `model` must come from [`tg_model_new`] and not be used afterwards.
 */
void tg_model_free(TgModel *model);

/**
 * `λ_c = (√b − √a)²/2`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_lambda_c(const TgModel *model, double *out);

/**
 * Excursion-length transform `ψ(λ)`; `INFINITY` beyond `λ_c`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_psi(const TgModel *model, double lambda, double *out);

/**
 * Hitting exponent `c(λ)`; `INFINITY` beyond `λ_c`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_c_lambda(const TgModel *model, double lambda, double *out);

/**
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_bound_constants(const TgModel *model, TgBoundConstants *out);

/**
 * Total-variation bound at time `t` between starts at `x` and `x_tilde`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_tv_bound(const TgModel *model,
                     double t,
                     double x,
                     double x_tilde,
                     TgProcess kind,
                     double *out);

/**
 * `E[e^{λ T̄(x, x̃)}]` for `x >= x_tilde >= 0`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_tbar_laplace(const TgModel *model,
                         double lambda,
                         double x,
                         double x_tilde,
                         double *out);

/**
 * Simulates one path on `[0, horizon]` from `(x0, v0)` on stream
 * `(seed, stream)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing one pointer.
 */
TgStatus tg_simulate(const TgModel *model,
                     TgProcess kind,
                     double x0,
                     int8_t v0,
                     double horizon,
                     uint64_t seed,
                     uint64_t stream,
                     TgPath **out);

/**
 * # Safety
 * `path` must come from [`tg_simulate`] and not be used afterwards.
 */
void tg_path_free(TgPath *path);

/**
 * Number of events of the path, or 0 for a null handle.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
size_t tg_path_event_count(const TgPath *path);

/**
 * # Safety
 * `path` must be a live handle and `out` valid for writing.
 */
TgStatus tg_path_event(const TgPath *path, size_t index, TgEvent *out);

/**
 * # Safety
 * `path` must be a live handle and `out` valid for writing.
 */
TgStatus tg_path_horizon(const TgPath *path, double *out);

/**
 * State of the path at time `t`.
 *
 * # Safety
 * `path` must be a live handle and `out` valid for writing.
 */
TgStatus tg_path_eval(const TgPath *path, double t, TgState *out);

/**
 * Fills `out[0..n]` with excursion lengths from the recursive sampler.
 * Results do not depend on the number of threads.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing `n` values.
 */
TgStatus tg_excursion_lengths(const TgModel *model, uint64_t seed, size_t n, double *out);

/**
 * Regenerative estimate of the invariant mean of an integrand over `n`
 * excursions.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
TgStatus tg_invariant_estimate(const TgModel *model,
                               TgIntegrand integrand,
                               double param,
                               size_t n,
                               uint64_t seed,
                               TgEstimate *out);

/**
 * Coalescent coupling of two processes on `[0, horizon]`, on stream
 * `(seed, stream)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing one pointer.
 */
TgStatus tg_couple(const TgModel *model,
                   TgProcess kind,
                   double x1,
                   int8_t v1,
                   double x2,
                   int8_t v2,
                   double horizon,
                   uint64_t seed,
                   uint64_t stream,
                   TgCoupling **out);

/**
 * # Safety
 * `coupling` must come from [`tg_couple`] and not be used afterwards.
 */
void tg_coupling_free(TgCoupling *coupling);

/**
 * # Safety
 * `coupling` must be a live handle and `out` valid for writing.
 */
TgStatus tg_coupling_times(const TgCoupling *coupling, TgCouplingTimes *out);

/**
 * State of leg 1 or 2 of the coupling at time `t`.
 *
 * # Safety
 * `coupling` must be a live handle and `out` valid for writing.
 */
TgStatus tg_coupling_eval(const TgCoupling *coupling, uint32_t leg, double t, TgState *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TELEGRAPH_H */
