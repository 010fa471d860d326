#pragma once

#include "model.hpp"
#include "sequence.hpp"
#include "types.hpp"

namespace capmin::dual {

/// Implicit representation of the channel rho(seq|a) = R(seq) *
/// exp(sum_b lambda(s_b,a,b)); the dense |A| x |S|^|B| table is never
/// materialized here.
struct FactorizedChannel {
    sequence::ReferenceDistribution reference;
    Multipliers multipliers;
};

struct NewtonOptions {
    double tolerance = 1e-10; // max absolute marginal residual
    int max_iterations = 100;
};

struct NewtonStats {
    int iterations = 0;      // Newton steps summed over inputs
    double max_residual = 0; // worst final residual over inputs
};

/// Concave per-input dual value (nats):
///   sum_{s,b: P(s|a,b) > 0} P(s|a,b) * lambda(s,a,b) + 1 - T,
/// where T = sum_seq R(seq) * prod_b e^(lambda(s_b,a,b)). Coordinates with
/// P = 0 contribute nothing (their weight e^lambda is 0).
double dual_objective(const sequence::SequenceSpace& space, const double* r,
                      const double* lambda_input, const double* p_input, int threads,
                      sequence::SweepScratch& scratch);

/// Solves the marginal-matching equations
///   sum_{seq: s_b = s} R(seq) * exp(sum_b' lambda(s_b',a,b')) = P(s|a,b)
/// for every input independently, by damped Newton ascent on the concave
/// per-input dual. Coordinates with P(s|a,b) = 0 are removed from the system
/// and their weight pinned to an exact zero (lambda = -inf).
///
/// The Hessian has a (|B|-1)-dimensional null space of per-measurement
/// constant shifts summing to zero (a pure gauge); it is Tikhonov-damped and
/// the step projected onto the gauge-orthogonal complement.
///
/// Throws NumericalError when a subproblem fails to reach the residual
/// tolerance within the iteration budget, or when the damped Hessian cannot
/// be factorized.
Multipliers solve_multipliers(const sequence::SequenceSpace& space, const double* r,
                              const ProcessSpec& spec, const Multipliers* warm_start,
                              const NewtonOptions& options, int threads,
                              NewtonStats* stats = nullptr);

} // namespace capmin::dual
