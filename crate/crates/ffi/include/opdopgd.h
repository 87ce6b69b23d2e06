#ifndef OPDOPGD_H
#define OPDOPGD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpdStatus {
  OPD_STATUS_OK = 0,
  OPD_STATUS_NULL_POINTER = 1,
  OPD_STATUS_INVALID_ARGUMENT = 2,
  OPD_STATUS_DIMENSION_MISMATCH = 3,
  OPD_STATUS_OUT_OF_RANGE = 4,
  OPD_STATUS_CAPABILITY = 5,
  OPD_STATUS_CONFIG = 6,
  OPD_STATUS_DIVERGED = 7,
  OPD_STATUS_IO = 8,
  OPD_STATUS_PANIC = 9,
} OpdStatus;

typedef enum OpdWeighting {
  OPD_WEIGHTING_METROPOLIS = 0,
  OPD_WEIGHTING_LAZY_UNIFORM = 1,
  OPD_WEIGHTING_IN_NEIGHBOR = 2,
} OpdWeighting;

typedef enum OpdEstimator {
  OPD_ESTIMATOR_FULL_GRADIENT = 0,
  OPD_ESTIMATOR_ONE_POINT = 1,
  OPD_ESTIMATOR_TWO_POINT = 2,
  OPD_ESTIMATOR_ONE_POINT_RESIDUAL = 3,
} OpdEstimator;

typedef enum OpdMetric {
  OPD_METRIC_CONVEX = 0,
  OPD_METRIC_NONCONVEX = 1,
} OpdMetric;

typedef struct OpdExperiment OpdExperiment;

typedef struct OpdGraph OpdGraph;

typedef struct OpdLedger OpdLedger;

typedef struct OpdLoss OpdLoss;

typedef struct OpdSet OpdSet;

/**
 * `scale / (k + offset)^exponent`; an exponent of 0 gives a constant.
 */
typedef struct OpdSchedule {
  double scale;
  double exponent;
  double offset;
} OpdSchedule;

typedef struct OpdRunConfig {
  enum OpdEstimator estimator;
  struct OpdSchedule alpha;
  struct OpdSchedule mu;
  size_t horizon;
  enum OpdMetric metric;
  size_t tracked_agent;
  /**
   * Common starting point of length `dim`, projected onto the set.
   */
  const double *initial_point;
  size_t dim;
} OpdRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len - 1` bytes) and returns the full length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t opd_last_error_message(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *opd_version(void);

/**
 * # Safety
 * `lower` and `upper` must point to `dim` doubles; `out` must be writable.
 */
enum OpdStatus opd_set_box_new(size_t dim,
                               const double *lower,
                               const double *upper,
                               struct OpdSet **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum OpdStatus opd_set_l1_new(size_t dim, double radius, struct OpdSet **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum OpdStatus opd_set_l2_new(size_t dim, double radius, struct OpdSet **out);

/**
 * # Safety
 * `set` must be null or a handle from `opd_set_*_new` not yet freed.
 */
void opd_set_free(struct OpdSet *set);

/**
 * Dimension of the set, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t opd_set_dim(const struct OpdSet *set);

/**
 * Euclidean projection of `point` onto the set, written to `out`.
 *
 * # Safety
 * `point` and `out` must hold `len` doubles; `set` must be a live handle.
 */
enum OpdStatus opd_set_project(const struct OpdSet *set,
                               const double *point,
                               size_t len,
                               double *out);

/**
 * A minimizer of `<direction, x>` over the set, written to `out`.
 *
 * # Safety
 * `direction` and `out` must hold `len` doubles; `set` must be a live handle.
 */
enum OpdStatus opd_set_linear_minimize(const struct OpdSet *set,
                                       const double *direction,
                                       size_t len,
                                       double *out);

/**
 * The builtin ten-agent, period-four topology.
 *
 * # Safety
 * `out` must be writable.
 */
enum OpdStatus opd_graph_builtin_new(enum OpdWeighting weighting, struct OpdGraph **out);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
void opd_graph_free(struct OpdGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t opd_graph_agents(const struct OpdGraph *graph);

/**
 * `gamma` and `Gamma` of the sequence's mixing bound `Gamma gamma^(k-s)`.
 *
 * # Safety
 * `graph` must be a live handle; `gamma` and `big_gamma` must be writable.
 */
enum OpdStatus opd_graph_mixing_constants(const struct OpdGraph *graph,
                                          double *gamma,
                                          double *big_gamma);

/**
 * Target tracking losses valid for rounds `1..=horizon`.
 *
 * # Safety
 * `out` must be writable.
 */
enum OpdStatus opd_loss_target_tracking_new(size_t horizon, uint64_t seed, struct OpdLoss **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum OpdStatus opd_loss_cubic_cosine_new(size_t agents,
                                         double noise_std,
                                         uint64_t seed,
                                         struct OpdLoss **out);

/**
 * # Safety
 * `loss` must be null or a live handle.
 */
void opd_loss_free(struct OpdLoss *loss);

/**
 * `f_{agent,round}(x)` with 0-based agents and 1-based rounds.
 *
 * # Safety
 * `x` must hold `len` doubles; `loss` must be live; `value` writable.
 */
enum OpdStatus opd_loss_evaluate(const struct OpdLoss *loss,
                                 size_t agent,
                                 size_t round,
                                 const double *x,
                                 size_t len,
                                 double *value);

/**
 * Runs the algorithm once and returns the per-round ledger.
 *
 * # Safety
 * All handles must be live; `config` must be valid with `initial_point`
 * holding `config.dim` doubles; `out` must be writable.
 */
enum OpdStatus opd_run(const struct OpdGraph *graph,
                       const struct OpdLoss *loss,
                       const struct OpdSet *set,
                       const struct OpdRunConfig *config,
                       uint64_t seed,
                       struct OpdLedger **out);

/**
 * Parses a TOML experiment config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum OpdStatus opd_experiment_from_toml(const char *toml, struct OpdExperiment **out);

/**
 * Loads a bundled preset by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum OpdStatus opd_experiment_preset(const char *name, struct OpdExperiment **out);

/**
 * # Safety
 * `experiment` must be null or a live handle.
 */
void opd_experiment_free(struct OpdExperiment *experiment);

/**
 * Overrides the horizon of an experiment.
 *
 * # Safety
 * `experiment` must be a live handle.
 */
enum OpdStatus opd_experiment_set_horizon(struct OpdExperiment *experiment, size_t horizon);

/**
 * Runs replicate `replicate` of `estimator` (seed = base seed + replicate).
 *
 * # Safety
 * `experiment` must be live; `out` must be writable.
 */
enum OpdStatus opd_experiment_run_replicate(const struct OpdExperiment *experiment,
                                            enum OpdEstimator estimator,
                                            size_t replicate,
                                            struct OpdLedger **out);

/**
 * # Safety
 * `ledger` must be null or a live handle.
 */
void opd_ledger_free(struct OpdLedger *ledger);

/**
 * Number of recorded rounds, or 0 for a null handle.
 *
 * # Safety
 * `ledger` must be null or a live handle.
 */
size_t opd_ledger_len(const struct OpdLedger *ledger);

/**
 * Cumulative regret after the last round, NaN for a null handle.
 *
 * # Safety
 * `ledger` must be null or a live handle.
 */
double opd_ledger_final_regret(const struct OpdLedger *ledger);

/**
 * Copies the cumulative regret curve; `len` must equal the ledger length.
 *
 * # Safety
 * `out` must hold `len` doubles; `ledger` must be live.
 */
enum OpdStatus opd_ledger_cumulative(const struct OpdLedger *ledger, double *out, size_t len);

/**
 * Copies the per-round consensus error; `len` must equal the ledger length.
 *
 * # Safety
 * `out` must hold `len` doubles; `ledger` must be live.
 */
enum OpdStatus opd_ledger_consensus(const struct OpdLedger *ledger, double *out, size_t len);

/**
 * Writes the ledger as CSV to `path`.
 *
 * # Safety
 * `ledger` must be live; `path` must be a NUL-terminated string.
 */
enum OpdStatus opd_ledger_write_csv(const struct OpdLedger *ledger, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPDOPGD_H */
