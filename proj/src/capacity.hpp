#pragma once

#include "model.hpp"
#include "sequence.hpp"
#include "types.hpp"

namespace capmin::capacity {

/// Mutual information I(A; S-sequence) of the implied channel under `prior`,
/// in bits:
///   sum_{s,a,b} P(s|a,b) rho(a) lambda(s,a,b) - sum_seq R * F * ln F,
/// with F the dual potential table from sequence::f_table.
double exact_capacity_objective(const InputPrior& prior, const Multipliers& multipliers,
                                const sequence::ReferenceDistribution& r,
                                const std::vector<double>& f, const ProcessSpec& spec);

/// Second-order model of the mutual information around a converged
/// multiplier solve, quadratic in the prior:
///   I(rho) ~ sum_a d1(a) rho(a) + 1 - sum_{a,a'} d2(a,a') rho(a) rho(a').
/// d1 is in nats; d2 is the Gram matrix of the weights sqrt(R) * g_a and is
/// positive semidefinite by construction.
struct QuadraticModel {
    std::vector<double> d1;  // |A|
    std::vector<double> d2;  // |A|*|A| row-major, symmetric
    int num_inputs = 0;
};

QuadraticModel quadratic_coefficients(const sequence::SequenceSpace& space,
                                      const sequence::ReferenceDistribution& r,
                                      const Multipliers& multipliers, const ProcessSpec& spec,
                                      int threads, sequence::SweepScratch& scratch);

/// Global maximizer of the concave quadratic model over the probability
/// simplex, by projected gradient ascent with a Barzilai-Borwein step and a
/// fixed-step fallback. Starts from the uniform prior (the tie-break on flat
/// objectives). Terminates when the KKT residual is at most 1e-10: there is
/// mu with d1(a) - 2 sum_a' d2(a,a') rho(a') <= mu, equal where rho(a) > 0.
InputPrior maximize_quadratic(const QuadraticModel& model);

/// Value of the quadratic model at a prior, in nats.
double quadratic_value(const QuadraticModel& model, const InputPrior& prior);

struct CapacityResult {
    double capacity_bits = 0.0;
    InputPrior maximizer;
    int iterations = 0;
};

/// Channel capacity of a dense conditional table rho(out|in) (row-major,
/// rows normalized) by the standard alternating update, stopped with the
/// textbook upper/lower capacity bounds at gap <= tol_bits.
CapacityResult blahut_arimoto(const double* channel, int num_inputs, int num_outputs,
                              double tol_bits);

/// Capacity of the implicit channel rho(seq|a) = R(seq) * g_a(seq) without
/// materializing it. Each alternating step sweeps the sequence space, so
/// this is expensive; it backs the exact prior-update mode.
CapacityResult implicit_channel_capacity(const sequence::SequenceSpace& space,
                                         const sequence::ReferenceDistribution& r,
                                         const Multipliers& multipliers,
                                         const InputPrior& start, double tol_bits,
                                         int threads, sequence::SweepScratch& scratch);

} // namespace capmin::capacity
