#ifndef FOCKRBM_H
#define FOCKRBM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FockrbmStatus {
  FOCKRBM_STATUS_OK = 0,
  FOCKRBM_STATUS_NULL_POINTER = 1,
  /*
   Bad argument or configuration.
   */
  FOCKRBM_STATUS_INVALID_ARGUMENT = 2,
  /*
   Convergence failure or non-finite numerics.
   */
  FOCKRBM_STATUS_NUMERICAL = 3,
  /*
   File or checkpoint problem.
   */
  FOCKRBM_STATUS_IO = 4,
  /*
   Output buffer too small.
   */
  FOCKRBM_STATUS_BUFFER_TOO_SMALL = 5,
  /*
   Caught panic.
   */
  FOCKRBM_STATUS_INTERNAL = 6,
} FockrbmStatus;

/*
 Network parameters.
 */
typedef struct FockrbmParams FockrbmParams;

/*
 Exact steady state of the truncated model.
 */
typedef struct FockrbmSteadyState FockrbmSteadyState;

/*
 Training state: parameters, chains and iteration count.
 */
typedef struct FockrbmTrainer FockrbmTrainer;

typedef struct FockrbmModel {
  double g0;
  double gamma;
  double kappa;
  double detuning;
} FockrbmModel;

typedef struct FockrbmTrainConfig {
  struct FockrbmModel model;
  size_t n_spins;
  size_t n_bits;
  size_t n_hidden;
  size_t n_mixing;
  double learning_rate;
  size_t n_samples;
  size_t max_iters;
  size_t n_chains;
  uint64_t seed;
  /*
   Nonzero selects exhaustive enumeration (n_bits <= 3).
   */
  uint8_t enumerate;
} FockrbmTrainConfig;

typedef struct FockrbmIterationRecord {
  size_t iteration;
  double cost;
  double n_mean;
  double spin_up;
  double spin_down;
  double acc_unrestricted;
  double acc_diagonal;
  double seconds;
} FockrbmIterationRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (NUL-terminated,
 truncated to `len`). Returns the length the full message needs, NUL included.
 */
size_t fockrbm_last_error(char *buf, size_t len);

/*
 Static NUL-terminated version string.
 */
const char *fockrbm_version(void);

/*
 Direct sector solve with `n_fock` Fock levels.
 */
enum FockrbmStatus fockrbm_steady_state_solve(const struct FockrbmModel *model,
                                              size_t n_fock,
                                              struct FockrbmSteadyState **out);

/*
 ⟨c†c⟩, spin-up and spin-down populations; any output pointer may be null.
 */
enum FockrbmStatus fockrbm_steady_state_observables(const struct FockrbmSteadyState *ss,
                                                    double *n_mean,
                                                    double *spin_up,
                                                    double *spin_down);

/*
 Writes `P_0..P_{n_fock-1}` into `buf`; `*needed` receives `n_fock`.
 */
enum FockrbmStatus fockrbm_steady_state_populations(const struct FockrbmSteadyState *ss,
                                                    double *buf,
                                                    size_t len,
                                                    size_t *needed);

void fockrbm_steady_state_free(struct FockrbmSteadyState *ss);

/*
 Small random parameters for the given layer sizes.
 */
enum FockrbmStatus fockrbm_params_new(size_t n_spins,
                                      size_t n_bits,
                                      size_t n_hidden,
                                      size_t n_mixing,
                                      uint64_t seed,
                                      struct FockrbmParams **out);

enum FockrbmStatus fockrbm_params_load(const char *path, struct FockrbmParams **out);

enum FockrbmStatus fockrbm_params_save(const struct FockrbmParams *params,
                                       const char *path,
                                       uint64_t seed,
                                       size_t iteration);

/*
 Number of real parameters; 0 for a null handle.
 */
size_t fockrbm_params_count(const struct FockrbmParams *params);

/*
 Copies the flat real parameter vector into `buf`.
 */
enum FockrbmStatus fockrbm_params_get(const struct FockrbmParams *params, double *buf, size_t len);

/*
 Replaces all parameters from a flat vector of exactly `fockrbm_params_count` values.
 */
enum FockrbmStatus fockrbm_params_set(struct FockrbmParams *params,
                                      const double *values,
                                      size_t len);

/*
 `ln ρ(σ, η)` for spins given as ±1 arrays of length `N` and occupations.
 */
enum FockrbmStatus fockrbm_params_log_rho(const struct FockrbmParams *params,
                                          const int8_t *left_spins,
                                          uint64_t left_n,
                                          const int8_t *right_spins,
                                          uint64_t right_n,
                                          double *re,
                                          double *im);

void fockrbm_params_free(struct FockrbmParams *params);

enum FockrbmStatus fockrbm_trainer_new(const struct FockrbmTrainConfig *cfg,
                                       struct FockrbmTrainer **out);

/*
 One training iteration; `record` may be null.
 */
enum FockrbmStatus fockrbm_trainer_step(struct FockrbmTrainer *trainer,
                                        struct FockrbmIterationRecord *record);

/*
 Completed iterations; 0 for a null handle.
 */
size_t fockrbm_trainer_iteration(const struct FockrbmTrainer *trainer);

/*
 Copy of the current parameters as a new handle owned by the caller.
 */
enum FockrbmStatus fockrbm_trainer_params(const struct FockrbmTrainer *trainer,
                                          struct FockrbmParams **out);

void fockrbm_trainer_free(struct FockrbmTrainer *trainer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOCKRBM_H */
