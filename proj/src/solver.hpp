#pragma once

#include "capacity.hpp"
#include "dual.hpp"
#include "model.hpp"
#include "sequence.hpp"
#include "types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace capmin::solver {

enum class PriorMode { optimize, fixed };
enum class CapacityMode { quadratic, exact };
enum class Termination { converged, iteration_cap, stagnation, numerical_failure };

const char* termination_name(Termination t);

struct SolverConfig {
    double xi_bits = 1e-6;        // stop when the certificate gap falls below this
    long max_iterations = 200000;
    double newton_tol = 1e-10;    // marginal residual tolerance of the dual solves
    PriorMode prior_mode = PriorMode::optimize;
    InputPrior fixed_prior;       // empty = uniform (only read in fixed mode)
    CapacityMode capacity_mode = CapacityMode::quadratic;
    double alpha = 1.0;           // over-relaxation exponent in R <- R * F^alpha
    bool override_memory_budget = false;
    int threads = 0;              // 0 = hardware concurrency
};

/// Lower/upper bound pair on the complexity, in bits. The lower bound comes
/// from shifting the multipliers into dual feasibility; the upper bound is
/// the mutual information of the feasible channel at this iteration.
struct Certificate {
    double lower_bits = 0.0;
    double upper_bits = 0.0;
    double gap_bits = 0.0;
    long iteration = 0;
};

struct PhaseTimings {
    double dual_seconds = 0.0;     // multiplier solves
    double capacity_seconds = 0.0; // prior updates (quadratic coefficients or exact mode)
    double sweep_seconds = 0.0;    // potential statistics and reference updates
    double total_seconds = 0.0;
};

/// Residuals of the optimality conditions at the current state.
struct OptimalityReport {
    double max_potential_excess = 0.0;    // max_seq F - 1
    double complementary_slackness = 0.0; // max_seq rho(seq) * |ln F|
    double marginal_residual = 0.0;       // max |marginal - P| over (a,b,s)
    double prior_residual = 0.0;          // max_a [d1(a) - sum_a' rho(a') d1(a')]
    double tolerance = 0.0;
    bool within_tolerance() const {
        return max_potential_excess <= tolerance && complementary_slackness <= tolerance &&
               marginal_residual <= tolerance && prior_residual <= tolerance;
    }
};

/// Mutable state threaded through the outer iteration. `scratch` is reused
/// workspace, not logical state.
struct IterateState {
    sequence::SequenceSpace space;
    sequence::ReferenceDistribution reference;
    Multipliers multipliers; // empty before the first round
    InputPrior prior;
    sequence::SweepScratch scratch;
};

struct RoundResult {
    Certificate certificate;
    dual::NewtonStats newton;
    sequence::PotentialStats potential;
};

struct SolveResult {
    double value_bits = 0.0; // upper bound at termination
    std::vector<Certificate> history;
    std::vector<double> history_seconds; // elapsed wall time at each record
    InputPrior final_prior;
    dual::FactorizedChannel channel;
    long iterations = 0;
    PhaseTimings timings;
    Termination termination = Termination::numerical_failure;
    std::string failure_message; // set when termination is numerical_failure
    OptimalityReport final_optimality;
    std::int64_t sequence_space_size = 0;
};

/// Fresh state for a validated spec: uniform strictly positive reference,
/// uniform (or supplied fixed) prior, no multipliers yet.
IterateState init_state(const ProcessSpec& spec, const SolverConfig& config);

/// One outer round: warm-started dual solve, prior update (skipped in fixed
/// mode), then the reference update R <- R * F^alpha with renormalization.
/// The renormalization is compensated by the uniform multiplier shift
/// ln(Z)/|B| so the implied channel is unchanged. Returns the certificate
/// evaluated at this round's reference.
RoundResult iterate(IterateState& state, const ProcessSpec& spec, const SolverConfig& config);

/// Certificate for the current state (multipliers must be solved for the
/// current reference). Does not modify the reference.
Certificate bounds(IterateState& state, const ProcessSpec& spec, int threads = 0);

/// Full solve: iterates until the certificate gap is at most xi_bits, the
/// iteration cap is reached, or the gap stagnates near floating-point
/// limits. On numerical failure after at least one completed round the
/// partial result is returned with the failure recorded.
SolveResult solve(const ProcessSpec& spec, const SolverConfig& config);

/// Residuals of the necessary-and-sufficient optimality conditions, for a
/// state whose multipliers are solved against the current reference.
OptimalityReport optimality_check(IterateState& state, const ProcessSpec& spec, double tol,
                                  int threads = 0);

} // namespace capmin::solver
