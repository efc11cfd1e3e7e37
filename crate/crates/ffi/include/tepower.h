#ifndef TEPOWER_H
#define TEPOWER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TpStatus {
  TP_STATUS_OK = 0,
  TP_STATUS_NULL_POINTER = 1,
  TP_STATUS_INVALID_PARAMETER = 2,
  TP_STATUS_INSTANCE_TOO_LARGE = 3,
  TP_STATUS_MODEL_MISMATCH = 4,
  TP_STATUS_UNREACHABLE = 5,
  TP_STATUS_INTERNAL = 6,
} TpStatus;

typedef enum TpTarget {
  TP_TARGET_NASH = 0,
  TP_TARGET_SATISFACTION = 1,
} TpTarget;

/**
 * Opaque reduced Markov chain.
 */
typedef struct TpDtmc TpDtmc;

/**
 * Opaque network instance.
 */
typedef struct TpInstance TpInstance;

typedef struct TpInstanceParams {
  uint32_t num_players;
  uint32_t num_channels;
  uint32_t num_power_levels;
  double max_power;
  double noise_power;
  double sinr_threshold;
  double beta;
} TpInstanceParams;

typedef struct TpAction {
  uint32_t channel;
  uint32_t power_index;
} TpAction;

typedef struct TpGlobalSummary {
  uint32_t max_satisfiable;
  uint64_t num_solutions;
  double min_total_power;
} TpGlobalSummary;

/**
 * First-visit iterations are -1 when the trial never got there.
 */
typedef struct TpTrialSummary {
  uint64_t iterations;
  int64_t first_ne_iteration;
  int64_t first_se_iteration;
  uint64_t ne_iterations;
  uint64_t se_iterations;
} TpTrialSummary;

typedef struct TpDtmcParams {
  uint32_t num_players;
  uint32_t num_channels;
  uint32_t num_power_levels;
  uint32_t satisfying_levels;
  double epsilon;
  double delta_u;
} TpDtmcParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next failing call.
 */
const char *tp_last_error_message(void);

/**
 * Fills `out` with the experiment defaults: P_MAX = 10, noise 1, threshold 3, beta = K + 1.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum TpStatus tp_instance_params_default(uint32_t num_players,
                                         uint32_t num_channels,
                                         uint32_t num_power_levels,
                                         struct TpInstanceParams *out);

/**
 * Unit direct gains, 1/2 cross gains on every channel.
 *
 * # Safety
 * `params` must be null or point to a valid struct; `out` must be null or valid for writes.
 */
enum TpStatus tp_instance_new_simplified(const struct TpInstanceParams *params,
                                         struct TpInstance **out);

/**
 * Independent Rayleigh block-fading gains drawn from `seed`.
 *
 * # Safety
 * Same as [`tp_instance_new_simplified`].
 */
enum TpStatus tp_instance_new_rayleigh(const struct TpInstanceParams *params,
                                       uint64_t seed,
                                       struct TpInstance **out);

/**
 * # Safety
 * `inst` must be null or a handle from `tp_instance_new_*` not yet freed.
 */
void tp_instance_free(struct TpInstance *inst);

/**
 * Gain from transmitter `tx` to receiver `rx` on `channel`; NaN when out of range.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
double tp_instance_gain(const struct TpInstance *inst, uint32_t rx, uint32_t tx, uint32_t channel);

/**
 * SINR of `player` under the joint profile `actions[0..len]`.
 *
 * # Safety
 * `inst` a live handle, `actions` valid for `len` reads, `out` valid for writes.
 */
enum TpStatus tp_instance_sinr(const struct TpInstance *inst,
                               const struct TpAction *actions,
                               size_t len,
                               uint32_t player,
                               double *out);

/**
 * Utility of `player` under the joint profile, in [0, 1].
 *
 * # Safety
 * As for [`tp_instance_sinr`].
 */
enum TpStatus tp_instance_utility(const struct TpInstance *inst,
                                  const struct TpAction *actions,
                                  size_t len,
                                  uint32_t player,
                                  double *out);

/**
 * Exhaustive global optimum: most satisfiable players, then least total power.
 *
 * # Safety
 * `inst` a live handle, `out` valid for writes.
 */
enum TpStatus tp_solve_global(const struct TpInstance *inst, struct TpGlobalSummary *out);

/**
 * Number of pure Nash equilibria.
 *
 * # Safety
 * `inst` a live handle, `out` valid for writes.
 */
enum TpStatus tp_count_nash(const struct TpInstance *inst, uint64_t *out);

/**
 * One trial of trial-and-error learning from the all-discontent start.
 *
 * # Safety
 * `inst` a live handle, `out` valid for writes.
 */
enum TpStatus tp_run_trial(const struct TpInstance *inst,
                           uint64_t iterations,
                           double epsilon,
                           uint64_t seed,
                           struct TpTrialSummary *out);

/**
 * # Safety
 * `params` valid for reads, `out` valid for writes.
 */
enum TpStatus tp_dtmc_new(const struct TpDtmcParams *params,
                          enum TpTarget target,
                          struct TpDtmc **out);

/**
 * # Safety
 * `dtmc` must be null or a handle from [`tp_dtmc_new`] not yet freed.
 */
void tp_dtmc_free(struct TpDtmc *dtmc);

/**
 * Number of chain states, `K + 2`; 0 for a null handle.
 *
 * # Safety
 * `dtmc` null or live.
 */
size_t tp_dtmc_num_states(const struct TpDtmc *dtmc);

/**
 * Row-major copy of the transition matrix into `out[0..n*n]`, `n` from
 * [`tp_dtmc_num_states`]. Order: equilibrium, `C_1..C_K`, discontent.
 *
 * # Safety
 * `dtmc` live, `out` valid for `len` writes.
 */
enum TpStatus tp_dtmc_transition_matrix(const struct TpDtmc *dtmc, double *out, size_t len);

/**
 * Expected iterations to reach the equilibrium from the all-wrong stage.
 *
 * # Safety
 * `dtmc` live, `out` valid for writes.
 */
enum TpStatus tp_dtmc_first_passage(const struct TpDtmc *dtmc, double *out);

/**
 * Closed-form lower and upper bounds on the first-passage time.
 *
 * # Safety
 * `params` valid for reads, `lower`/`upper` valid for writes.
 */
enum TpStatus tp_dtmc_bounds(const struct TpDtmcParams *params,
                             enum TpTarget target,
                             double *lower,
                             double *upper);

/**
 * Long-run fraction of time at the equilibrium.
 *
 * # Safety
 * `params` valid for reads, `out` valid for writes.
 */
enum TpStatus tp_dtmc_occupancy(const struct TpDtmcParams *params,
                                enum TpTarget target,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEPOWER_H */
