#include "solver.hpp"

#include "errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace capmin::solver {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// sum_{s,b} P(s|a,b) * lambda(s,a,b) per input, skipping zero-probability
// coordinates (their multipliers are -inf with zero weight).
std::vector<double> linear_terms(const ProcessSpec& spec, const Multipliers& m) {
    std::vector<double> d1(spec.num_inputs, 0.0);
    for (int a = 0; a < spec.num_inputs; ++a)
        for (int b = 0; b < spec.num_measurements; ++b)
            for (int s = 0; s < spec.num_outcomes; ++s) {
                const double p = spec.at(a, b, s);
                if (p > 0.0) d1[a] += p * m.at(a, b, s);
            }
    return d1;
}

double prior_weighted(const std::vector<double>& d1, const InputPrior& prior) {
    double acc = 0.0;
    for (std::size_t a = 0; a < d1.size(); ++a) acc += prior[a] * d1[a];
    return acc;
}

Certificate certificate_from(double linear_nats, const sequence::PotentialStats& stats) {
    Certificate cert;
    cert.lower_bits = nats_to_bits(linear_nats - std::log(stats.max_f));
    cert.upper_bits = nats_to_bits(linear_nats - stats.sum_rf_lnf);
    cert.gap_bits = cert.upper_bits - cert.lower_bits;
    return cert;
}

void shift_finite(Multipliers& m, double delta) {
    for (double& v : m.value)
        if (std::isfinite(v)) v += delta;
}

void validate_config(const ProcessSpec& spec, const SolverConfig& config) {
    if (!(config.xi_bits > 0.0)) throw ValidationError("accuracy xi must be positive");
    if (!(config.alpha >= 1.0)) throw ValidationError("over-relaxation alpha must be >= 1");
    if (config.max_iterations < 1) throw ValidationError("iteration cap must be positive");
    if (config.prior_mode == PriorMode::fixed && !config.fixed_prior.empty()) {
        if (static_cast<int>(config.fixed_prior.size()) != spec.num_inputs)
            throw ValidationError("fixed prior length does not match the input count");
        if (!prior_on_simplex(config.fixed_prior))
            throw ValidationError("fixed prior is not a probability distribution");
    }
}

RoundResult run_round(IterateState& state, const ProcessSpec& spec, const SolverConfig& config,
                      PhaseTimings* timings) {
    dual::NewtonOptions newton_options;
    newton_options.tolerance = config.newton_tol;

    RoundResult round;
    const auto dual_start = Clock::now();
    state.multipliers = dual::solve_multipliers(
        state.space, state.reference.data(), spec,
        state.multipliers.empty() ? nullptr : &state.multipliers, newton_options,
        config.threads, &round.newton);
    if (timings) timings->dual_seconds += seconds_since(dual_start);

    const auto capacity_start = Clock::now();
    if (config.prior_mode == PriorMode::optimize) {
        if (config.capacity_mode == CapacityMode::quadratic) {
            const capacity::QuadraticModel model = capacity::quadratic_coefficients(
                state.space, state.reference, state.multipliers, spec, config.threads,
                state.scratch);
            state.prior = capacity::maximize_quadratic(model);
        } else {
            const double inner_tol = std::max(config.xi_bits / 10.0, 1e-12);
            state.prior = capacity::implicit_channel_capacity(
                              state.space, state.reference, state.multipliers, state.prior,
                              inner_tol, config.threads, state.scratch)
                              .maximizer;
        }
    }
    if (timings) timings->capacity_seconds += seconds_since(capacity_start);

    const auto sweep_start = Clock::now();
    const double linear = prior_weighted(linear_terms(spec, state.multipliers), state.prior);
    round.potential = sequence::potential_sweep(state.space, state.reference.data(),
                                                state.multipliers, state.prior, config.alpha,
                                                /*apply_update=*/true, config.threads,
                                                state.scratch);
    round.certificate = certificate_from(linear, round.potential);

    const double z = round.potential.sum_rf_alpha;
    if (!(z > 0.0))
        throw NumericalError("reference update removed all mass (potential vanished on the "
                             "support)");
    const double inv_z = 1.0 / z;
    for (double& v : state.reference) v *= inv_z;
    // Compensating uniform shift: R/Z together with lambda + ln(Z)/|B|
    // leaves the implied channel unchanged and keeps the warm start for the
    // next round consistent with the rescaled reference.
    shift_finite(state.multipliers, std::log(z) / spec.num_measurements);
    if (timings) timings->sweep_seconds += seconds_since(sweep_start);
    return round;
}

} // namespace

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::iteration_cap: return "iteration_cap";
        case Termination::stagnation: return "stagnation";
        case Termination::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

IterateState init_state(const ProcessSpec& spec, const SolverConfig& config) {
    require_valid(spec);
    validate_config(spec, config);
    IterateState state;
    state.space = sequence::make_space(spec.num_measurements, spec.num_outcomes,
                                       config.override_memory_budget);
    state.reference = sequence::uniform_reference(state.space);
    if (config.prior_mode == PriorMode::fixed && !config.fixed_prior.empty())
        state.prior = config.fixed_prior;
    else
        state.prior = InputPrior(spec.num_inputs, 1.0 / spec.num_inputs);
    return state;
}

RoundResult iterate(IterateState& state, const ProcessSpec& spec, const SolverConfig& config) {
    return run_round(state, spec, config, nullptr);
}

Certificate bounds(IterateState& state, const ProcessSpec& spec, int threads) {
    if (state.multipliers.empty())
        throw ValidationError("bounds need multipliers solved for the current reference");
    const double linear = prior_weighted(linear_terms(spec, state.multipliers), state.prior);
    const sequence::PotentialStats stats = sequence::potential_sweep(
        state.space, state.reference.data(), state.multipliers, state.prior, 1.0,
        /*apply_update=*/false, threads, state.scratch);
    return certificate_from(linear, stats);
}

OptimalityReport optimality_check(IterateState& state, const ProcessSpec& spec, double tol,
                                  int threads) {
    if (state.multipliers.empty())
        throw ValidationError("optimality check needs solved multipliers");
    OptimalityReport report;
    report.tolerance = tol;
    const sequence::PotentialStats stats = sequence::potential_sweep(
        state.space, state.reference.data(), state.multipliers, state.prior, 1.0,
        /*apply_update=*/false, threads, state.scratch);
    report.max_potential_excess = stats.max_f - 1.0;
    report.complementary_slackness = stats.max_rf_abs_lnf;

    const int coords = spec.num_measurements * spec.num_outcomes;
    sequence::DualSums sums;
    double residual = 0.0;
    for (int a = 0; a < spec.num_inputs; ++a) {
        const std::vector<double> efac = exp_factors_for_input(state.multipliers, a);
        sequence::accumulate_dual_sums(state.space, state.reference.data(), efac.data(),
                                       /*with_pairs=*/false, threads, sums, state.scratch);
        const double* p = spec.input_slice(a);
        for (int c = 0; c < coords; ++c)
            residual = std::max(residual, std::abs(sums.marginals[c] - p[c]));
    }
    report.marginal_residual = residual;

    const std::vector<double> d1 = linear_terms(spec, state.multipliers);
    const double mean = prior_weighted(d1, state.prior);
    double prior_res = 0.0;
    for (double v : d1) prior_res = std::max(prior_res, v - mean);
    report.prior_residual = prior_res;
    return report;
}

SolveResult solve(const ProcessSpec& spec, const SolverConfig& config) {
    const auto start = Clock::now();
    IterateState state = init_state(spec, config);

    SolveResult result;
    result.sequence_space_size = state.space.size;
    result.termination = Termination::iteration_cap;

    double best_gap = std::numeric_limits<double>::infinity();
    int stalled_rounds = 0;

    for (long iter = 1; iter <= config.max_iterations; ++iter) {
        RoundResult round;
        try {
            round = run_round(state, spec, config, &result.timings);
        } catch (const NumericalError& e) {
            if (result.history.empty()) throw;
            result.termination = Termination::numerical_failure;
            result.failure_message = e.what();
            break;
        }
        round.certificate.iteration = iter;
        result.history.push_back(round.certificate);
        result.history_seconds.push_back(seconds_since(start));
        result.iterations = iter;

        if (round.certificate.gap_bits <= config.xi_bits) {
            result.termination = Termination::converged;
            break;
        }
        // Stagnation guard: near floating-point limits the gap stops
        // improving; bail out instead of spinning to the iteration cap.
        if (round.certificate.gap_bits < best_gap - 1e-14) {
            best_gap = round.certificate.gap_bits;
            stalled_rounds = 0;
        } else if (++stalled_rounds >= 20) {
            result.termination = Termination::stagnation;
            break;
        }
    }

    if (!result.history.empty()) {
        result.value_bits = result.history.back().upper_bits;
        result.final_prior = state.prior;
    }
    if (result.termination != Termination::numerical_failure) {
        // Re-solve the multipliers against the final reference so the
        // reported channel and residuals describe the returned state.
        try {
            dual::NewtonOptions newton_options;
            newton_options.tolerance = config.newton_tol;
            const auto dual_start = Clock::now();
            state.multipliers = dual::solve_multipliers(
                state.space, state.reference.data(), spec,
                state.multipliers.empty() ? nullptr : &state.multipliers, newton_options,
                config.threads, nullptr);
            result.timings.dual_seconds += seconds_since(dual_start);
            result.final_optimality =
                optimality_check(state, spec, config.xi_bits, config.threads);
        } catch (const NumericalError& e) {
            result.termination = Termination::numerical_failure;
            result.failure_message = e.what();
        }
    }
    result.channel.reference = std::move(state.reference);
    result.channel.multipliers = std::move(state.multipliers);
    result.timings.total_seconds = seconds_since(start);
    return result;
}

} // namespace capmin::solver
