#include "capmin/capmin.h"

#include "errors.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "solver.hpp"

#include <cstring>
#include <new>
#include <string>

struct capmin_process {
    capmin::ProcessSpec spec;
};

struct capmin_result {
    capmin::solver::SolveResult result;
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& message) { t_last_error = message; }

template <class Fn>
capmin_status guarded(Fn&& fn) {
    try {
        fn();
        return CAPMIN_OK;
    } catch (const capmin::ValidationError& e) {
        set_error(e.what());
        return CAPMIN_ERROR_VALIDATION;
    } catch (const capmin::BudgetError& e) {
        set_error(e.what());
        return CAPMIN_ERROR_BUDGET;
    } catch (const capmin::NumericalError& e) {
        set_error(e.what());
        return CAPMIN_ERROR_NUMERICAL;
    } catch (const capmin::IoError& e) {
        set_error(e.what());
        return CAPMIN_ERROR_IO;
    } catch (const std::bad_alloc&) {
        set_error("out of memory");
        return CAPMIN_ERROR_BUDGET;
    } catch (const std::exception& e) {
        set_error(e.what());
        return CAPMIN_ERROR_NUMERICAL;
    }
}

capmin_status invalid(const char* message) {
    set_error(message);
    return CAPMIN_ERROR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& text) {
    char* out = new char[text.size() + 1];
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

capmin::solver::SolverConfig to_config(const capmin_solve_options* options,
                                       const capmin::ProcessSpec& spec) {
    capmin::solver::SolverConfig config;
    if (!options) return config;
    config.xi_bits = options->xi_bits;
    config.max_iterations = options->max_iterations;
    config.newton_tol = options->newton_tol;
    config.prior_mode = options->prior_mode == CAPMIN_PRIOR_FIXED
                            ? capmin::solver::PriorMode::fixed
                            : capmin::solver::PriorMode::optimize;
    if (options->fixed_prior)
        config.fixed_prior.assign(options->fixed_prior, options->fixed_prior + spec.num_inputs);
    config.capacity_mode = options->capacity_mode == CAPMIN_CAPACITY_EXACT
                               ? capmin::solver::CapacityMode::exact
                               : capmin::solver::CapacityMode::quadratic;
    config.alpha = options->alpha;
    config.threads = options->threads;
    config.override_memory_budget = options->override_memory_budget != 0;
    return config;
}

} // namespace

extern "C" {

void capmin_solve_options_init(capmin_solve_options* options) {
    if (!options) return;
    options->xi_bits = 1e-6;
    options->max_iterations = 200000;
    options->newton_tol = 1e-10;
    options->prior_mode = CAPMIN_PRIOR_OPTIMIZE;
    options->fixed_prior = nullptr;
    options->capacity_mode = CAPMIN_CAPACITY_QUADRATIC;
    options->alpha = 1.0;
    options->threads = 0;
    options->override_memory_budget = 0;
}

const char* capmin_version(void) { return "1.0.0"; }

const char* capmin_status_name(capmin_status status) {
    switch (status) {
        case CAPMIN_OK: return "ok";
        case CAPMIN_ERROR_INVALID_ARGUMENT: return "invalid_argument";
        case CAPMIN_ERROR_VALIDATION: return "validation_error";
        case CAPMIN_ERROR_BUDGET: return "budget_error";
        case CAPMIN_ERROR_NUMERICAL: return "numerical_error";
        case CAPMIN_ERROR_IO: return "io_error";
    }
    return "unknown";
}

const char* capmin_last_error(void) { return t_last_error.c_str(); }

void capmin_string_free(char* text) { delete[] text; }

capmin_status capmin_process_create(int32_t num_inputs, int32_t num_measurements,
                                    int32_t num_outcomes, const double* prob,
                                    capmin_process** out) {
    if (!out) return invalid("output handle is null");
    if (!prob) return invalid("probability table is null");
    *out = nullptr;
    return guarded([&] {
        capmin::ProcessSpec spec;
        spec.num_inputs = num_inputs;
        spec.num_measurements = num_measurements;
        spec.num_outcomes = num_outcomes;
        if (num_inputs <= 0 || num_measurements <= 0 || num_outcomes <= 0)
            throw capmin::ValidationError("process dimensions must be positive");
        spec.prob.assign(prob, prob + static_cast<std::size_t>(num_inputs) * num_measurements *
                                         num_outcomes);
        capmin::require_valid(spec);
        *out = new capmin_process{std::move(spec)};
    });
}

capmin_status capmin_process_planar(int32_t num_states, int32_t num_measurements,
                                    capmin_process** out) {
    if (!out) return invalid("output handle is null");
    *out = nullptr;
    return guarded([&] {
        *out = new capmin_process{capmin::planar_problem(num_states, num_measurements)};
    });
}

capmin_status capmin_process_nonplanar(int32_t half_plane_count, capmin_process** out) {
    if (!out) return invalid("output handle is null");
    *out = nullptr;
    return guarded([&] {
        *out = new capmin_process{capmin::nonplanar_problem(half_plane_count)};
    });
}

capmin_status capmin_process_read_json(const char* path, capmin_process** out) {
    if (!out) return invalid("output handle is null");
    if (!path) return invalid("path is null");
    *out = nullptr;
    return guarded([&] {
        capmin::ProcessSpec spec = capmin::read_process_json(path);
        capmin::require_valid(spec);
        *out = new capmin_process{std::move(spec)};
    });
}

capmin_status capmin_process_write_json(const capmin_process* process, const char* path) {
    if (!process) return invalid("process handle is null");
    if (!path) return invalid("path is null");
    return guarded([&] { capmin::write_process_json(process->spec, path); });
}

void capmin_process_dimensions(const capmin_process* process, int32_t* num_inputs,
                               int32_t* num_measurements, int32_t* num_outcomes) {
    if (!process) return;
    if (num_inputs) *num_inputs = process->spec.num_inputs;
    if (num_measurements) *num_measurements = process->spec.num_measurements;
    if (num_outcomes) *num_outcomes = process->spec.num_outcomes;
}

capmin_status capmin_process_probabilities(const capmin_process* process, double* buffer,
                                           size_t length) {
    if (!process) return invalid("process handle is null");
    if (!buffer) return invalid("buffer is null");
    if (length < process->spec.prob.size()) return invalid("buffer is too small");
    std::memcpy(buffer, process->spec.prob.data(), process->spec.prob.size() * sizeof(double));
    return CAPMIN_OK;
}

capmin_status capmin_process_validate(const capmin_process* process, char** message) {
    if (!process) return invalid("process handle is null");
    if (message) *message = nullptr;
    const capmin::ValidationReport report = capmin::validate_process(process->spec);
    if (report.ok()) return CAPMIN_OK;
    set_error(report.first_message());
    if (message) *message = copy_string(report.first_message());
    return CAPMIN_ERROR_VALIDATION;
}

void capmin_process_free(capmin_process* process) { delete process; }

capmin_status capmin_solve(const capmin_process* process, const capmin_solve_options* options,
                           capmin_result** out) {
    if (!out) return invalid("output handle is null");
    if (!process) return invalid("process handle is null");
    *out = nullptr;
    return guarded([&] {
        capmin::solver::SolverConfig config = to_config(options, process->spec);
        capmin::solver::SolveResult result = capmin::solver::solve(process->spec, config);
        *out = new capmin_result{std::move(result)};
    });
}

double capmin_result_value_bits(const capmin_result* result) {
    return result ? result->result.value_bits : 0.0;
}

int capmin_result_termination(const capmin_result* result) {
    if (!result) return CAPMIN_TERMINATED_NUMERICAL_FAILURE;
    switch (result->result.termination) {
        case capmin::solver::Termination::converged: return CAPMIN_TERMINATED_CONVERGED;
        case capmin::solver::Termination::iteration_cap: return CAPMIN_TERMINATED_ITERATION_CAP;
        case capmin::solver::Termination::stagnation: return CAPMIN_TERMINATED_STAGNATION;
        case capmin::solver::Termination::numerical_failure:
            return CAPMIN_TERMINATED_NUMERICAL_FAILURE;
    }
    return CAPMIN_TERMINATED_NUMERICAL_FAILURE;
}

const char* capmin_result_termination_name(const capmin_result* result) {
    return result ? capmin::solver::termination_name(result->result.termination) : "unknown";
}

int64_t capmin_result_iterations(const capmin_result* result) {
    return result ? result->result.iterations : 0;
}

int64_t capmin_result_history_length(const capmin_result* result) {
    return result ? static_cast<int64_t>(result->result.history.size()) : 0;
}

capmin_status capmin_result_history_entry(const capmin_result* result, int64_t index,
                                          int64_t* iteration, double* lower_bits,
                                          double* upper_bits, double* gap_bits,
                                          double* seconds) {
    if (!result) return invalid("result handle is null");
    if (index < 0 || index >= static_cast<int64_t>(result->result.history.size()))
        return invalid("history index out of range");
    const capmin::solver::Certificate& cert = result->result.history[index];
    if (iteration) *iteration = cert.iteration;
    if (lower_bits) *lower_bits = cert.lower_bits;
    if (upper_bits) *upper_bits = cert.upper_bits;
    if (gap_bits) *gap_bits = cert.gap_bits;
    if (seconds) *seconds = result->result.history_seconds[index];
    return CAPMIN_OK;
}

int32_t capmin_result_num_inputs(const capmin_result* result) {
    return result ? static_cast<int32_t>(result->result.final_prior.size()) : 0;
}

capmin_status capmin_result_prior(const capmin_result* result, double* buffer, size_t length) {
    if (!result) return invalid("result handle is null");
    if (!buffer) return invalid("buffer is null");
    if (length < result->result.final_prior.size()) return invalid("buffer is too small");
    std::memcpy(buffer, result->result.final_prior.data(),
                result->result.final_prior.size() * sizeof(double));
    return CAPMIN_OK;
}

double capmin_result_phase_seconds(const capmin_result* result, int phase) {
    if (!result) return 0.0;
    switch (phase) {
        case CAPMIN_PHASE_DUAL: return result->result.timings.dual_seconds;
        case CAPMIN_PHASE_CAPACITY: return result->result.timings.capacity_seconds;
        case CAPMIN_PHASE_SWEEP: return result->result.timings.sweep_seconds;
        case CAPMIN_PHASE_TOTAL: return result->result.timings.total_seconds;
    }
    return 0.0;
}

int64_t capmin_result_sequence_space_size(const capmin_result* result) {
    return result ? result->result.sequence_space_size : 0;
}

capmin_status capmin_result_optimality(const capmin_result* result,
                                       double* max_potential_excess,
                                       double* complementary_slackness,
                                       double* marginal_residual, double* prior_residual) {
    if (!result) return invalid("result handle is null");
    const capmin::solver::OptimalityReport& report = result->result.final_optimality;
    if (max_potential_excess) *max_potential_excess = report.max_potential_excess;
    if (complementary_slackness) *complementary_slackness = report.complementary_slackness;
    if (marginal_residual) *marginal_residual = report.marginal_residual;
    if (prior_residual) *prior_residual = report.prior_residual;
    return CAPMIN_OK;
}

const char* capmin_result_failure_message(const capmin_result* result) {
    return result ? result->result.failure_message.c_str() : "";
}

void capmin_result_free(capmin_result* result) { delete result; }

capmin_status capmin_channel_capacity(const double* channel, int32_t num_inputs,
                                      int32_t num_outputs, double tol_bits,
                                      double* capacity_bits, double* maximizer) {
    if (!channel) return invalid("channel table is null");
    if (!capacity_bits) return invalid("capacity output is null");
    if (num_inputs <= 0 || num_outputs <= 0) return invalid("channel dimensions must be positive");
    return guarded([&] {
        capmin::capacity::CapacityResult res =
            capmin::capacity::blahut_arimoto(channel, num_inputs, num_outputs, tol_bits);
        *capacity_bits = res.capacity_bits;
        if (maximizer)
            std::memcpy(maximizer, res.maximizer.data(), res.maximizer.size() * sizeof(double));
    });
}

capmin_status capmin_oracle_complexity(const capmin_process* process, double tol_bits,
                                       double* value_bits) {
    if (!process) return invalid("process handle is null");
    if (!value_bits) return invalid("value output is null");
    return guarded([&] {
        *value_bits = capmin::oracle::brute_force_complexity(process->spec, tol_bits);
    });
}

} // extern "C"
