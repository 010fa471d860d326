/*
 * capmin - asymptotic communication complexity of finite
 * prepare-and-measure processes P(s|a,b).
 *
 * The solver minimizes channel capacity over the set of sequence channels
 * whose single-measurement marginals reproduce P, by alternating
 * minimization with certified lower/upper bounds. All reported values are
 * in bits.
 *
 * The API uses opaque handles and status codes; every function that can
 * fail returns a capmin_status, and capmin_last_error() describes the most
 * recent failure on the calling thread.
 */

#ifndef CAPMIN_H
#define CAPMIN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CAPMIN_API __declspec(dllexport)
#elif defined(__GNUC__)
#define CAPMIN_API __attribute__((visibility("default")))
#else
#define CAPMIN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum capmin_status {
    CAPMIN_OK = 0,
    CAPMIN_ERROR_INVALID_ARGUMENT = 1, /* null handle or malformed argument */
    CAPMIN_ERROR_VALIDATION = 2,       /* input data violates an invariant */
    CAPMIN_ERROR_BUDGET = 3,           /* sequence space over the memory budget */
    CAPMIN_ERROR_NUMERICAL = 4,        /* an iteration failed to converge or overflowed */
    CAPMIN_ERROR_IO = 5                /* file could not be read or written */
} capmin_status;

/* Prior handling of the outer solve. */
#define CAPMIN_PRIOR_OPTIMIZE 0 /* maximize over the input distribution */
#define CAPMIN_PRIOR_FIXED 1    /* keep the supplied (or uniform) prior */

/* Prior-update implementation in optimize mode. */
#define CAPMIN_CAPACITY_QUADRATIC 0 /* second-order model (default) */
#define CAPMIN_CAPACITY_EXACT 1     /* alternating capacity iteration; sweeps the
                                       full sequence space per inner step */

/* Termination reasons reported by capmin_result_termination(). */
#define CAPMIN_TERMINATED_CONVERGED 0
#define CAPMIN_TERMINATED_ITERATION_CAP 1
#define CAPMIN_TERMINATED_STAGNATION 2
#define CAPMIN_TERMINATED_NUMERICAL_FAILURE 3

/* Phase identifiers for capmin_result_phase_seconds(). */
#define CAPMIN_PHASE_DUAL 0     /* multiplier (Newton) solves */
#define CAPMIN_PHASE_CAPACITY 1 /* prior updates */
#define CAPMIN_PHASE_SWEEP 2    /* potential statistics and reference updates */
#define CAPMIN_PHASE_TOTAL 3

typedef struct capmin_process capmin_process;
typedef struct capmin_result capmin_result;

typedef struct capmin_solve_options {
    double xi_bits;        /* certificate-gap stopping accuracy (default 1e-6) */
    int64_t max_iterations;
    double newton_tol;     /* marginal residual tolerance of the dual solves */
    int prior_mode;        /* CAPMIN_PRIOR_* */
    const double* fixed_prior; /* length |A|; NULL = uniform (fixed mode only) */
    int capacity_mode;     /* CAPMIN_CAPACITY_* */
    double alpha;          /* over-relaxation exponent, >= 1 */
    int threads;           /* 0 = hardware concurrency */
    int override_memory_budget; /* nonzero skips the sequence-space budget check */
} capmin_solve_options;

/* Fills the defaults documented above. */
CAPMIN_API void capmin_solve_options_init(capmin_solve_options* options);

CAPMIN_API const char* capmin_version(void);
CAPMIN_API const char* capmin_status_name(capmin_status status);

/* Message of the most recent failure on this thread; empty string if none. */
CAPMIN_API const char* capmin_last_error(void);

/* Frees strings returned through char** out-parameters. */
CAPMIN_API void capmin_string_free(char* text);

/* ---- process tables ---------------------------------------------------- */

/* Dense table P(s|a,b), layout ((a*|B|)+b)*|S|+s. The table is copied. */
CAPMIN_API capmin_status capmin_process_create(int32_t num_inputs, int32_t num_measurements,
                                               int32_t num_outcomes, const double* prob,
                                               capmin_process** out);

/* Qubit states/measurements equidistributed on a Bloch-sphere circle:
 * num_states state vectors, num_measurements measurement directions on the
 * half circle; two outcomes (index 0 is the +1 outcome). */
CAPMIN_API capmin_status capmin_process_planar(int32_t num_states, int32_t num_measurements,
                                               capmin_process** out);

/* Same construction replicated in three orthogonal planes with shared axis
 * vectors merged; half_plane_count measurements per plane (even, >= 2),
 * giving |B| = 3*(half_plane_count-1) and |A| = 6*half_plane_count-6. */
CAPMIN_API capmin_status capmin_process_nonplanar(int32_t half_plane_count,
                                                  capmin_process** out);

/* JSON files: {"schema":1,"num_inputs":..,"num_measurements":..,
 * "num_outcomes":..,"prob":[...]} with the flat layout above. Readers reject
 * dimension mismatches. */
CAPMIN_API capmin_status capmin_process_read_json(const char* path, capmin_process** out);
CAPMIN_API capmin_status capmin_process_write_json(const capmin_process* process,
                                                   const char* path);

CAPMIN_API void capmin_process_dimensions(const capmin_process* process, int32_t* num_inputs,
                                          int32_t* num_measurements, int32_t* num_outcomes);

/* Copies the probability table into buffer (length = |A|*|B|*|S|). */
CAPMIN_API capmin_status capmin_process_probabilities(const capmin_process* process,
                                                      double* buffer, size_t length);

/* CAPMIN_OK and *message = NULL when the table is valid; otherwise
 * CAPMIN_ERROR_VALIDATION with *message describing the first violation. */
CAPMIN_API capmin_status capmin_process_validate(const capmin_process* process,
                                                 char** message);

CAPMIN_API void capmin_process_free(capmin_process* process);

/* ---- solving ----------------------------------------------------------- */

/* Runs the alternating minimization until the certificate gap is at most
 * xi_bits (or a cap/stagnation/numerical stop). A result is returned even on
 * iteration cap or on a numerical failure after the first completed round;
 * inspect capmin_result_termination(). */
CAPMIN_API capmin_status capmin_solve(const capmin_process* process,
                                      const capmin_solve_options* options,
                                      capmin_result** out);

/* Upper certificate bound at termination (the reported value), in bits. */
CAPMIN_API double capmin_result_value_bits(const capmin_result* result);
CAPMIN_API int capmin_result_termination(const capmin_result* result);
CAPMIN_API const char* capmin_result_termination_name(const capmin_result* result);
CAPMIN_API int64_t capmin_result_iterations(const capmin_result* result);

/* Certificate history, one entry per outer round. seconds is the elapsed
 * wall-clock time when the entry was recorded. */
CAPMIN_API int64_t capmin_result_history_length(const capmin_result* result);
CAPMIN_API capmin_status capmin_result_history_entry(const capmin_result* result,
                                                     int64_t index, int64_t* iteration,
                                                     double* lower_bits, double* upper_bits,
                                                     double* gap_bits, double* seconds);

CAPMIN_API int32_t capmin_result_num_inputs(const capmin_result* result);
CAPMIN_API capmin_status capmin_result_prior(const capmin_result* result, double* buffer,
                                             size_t length);

CAPMIN_API double capmin_result_phase_seconds(const capmin_result* result, int phase);
CAPMIN_API int64_t capmin_result_sequence_space_size(const capmin_result* result);

/* Residuals of the optimality conditions at the returned state: potential
 * excess max F - 1, complementary slackness max rho|ln F|, worst marginal
 * violation, and the prior-optimality residual. */
CAPMIN_API capmin_status capmin_result_optimality(const capmin_result* result,
                                                  double* max_potential_excess,
                                                  double* complementary_slackness,
                                                  double* marginal_residual,
                                                  double* prior_residual);

/* Empty string unless termination is CAPMIN_TERMINATED_NUMERICAL_FAILURE. */
CAPMIN_API const char* capmin_result_failure_message(const capmin_result* result);

CAPMIN_API void capmin_result_free(capmin_result* result);

/* ---- standalone utilities ---------------------------------------------- */

/* Capacity (bits) of a dense channel rho(out|in), rows normalized, row-major
 * num_inputs x num_outputs. maximizer may be NULL; otherwise it receives the
 * maximizing input distribution (length num_inputs). */
CAPMIN_API capmin_status capmin_channel_capacity(const double* channel, int32_t num_inputs,
                                                 int32_t num_outputs, double tol_bits,
                                                 double* capacity_bits, double* maximizer);

/* Independent brute-force value of the minimal capacity for small instances
 * (|A| <= 4, |B| <= 4, |S| = 2); used to validate the solver. */
CAPMIN_API capmin_status capmin_oracle_complexity(const capmin_process* process,
                                                  double tol_bits, double* value_bits);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CAPMIN_H */
