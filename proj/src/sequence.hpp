#pragma once

#include "types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace capmin::sequence {

/// Outcome-sequence space S^|B|. Construction checks the memory budget:
/// by default at most 2^31 table entries, overridable via the
/// CAPMIN_MEMORY_BUDGET environment variable (entry count) or the
/// override flag.
struct SequenceSpace {
    int num_measurements = 0; // |B|
    int num_outcomes = 0;     // |S|
    std::int64_t size = 0;    // |S|^|B|
};

std::int64_t default_entry_budget();
SequenceSpace make_space(int num_measurements, int num_outcomes,
                         bool override_budget = false);

/// Positional encoding, b-minor little-endian: rank = sum_b s_b * |S|^b.
std::int64_t rank(const SequenceSpace& space, std::span<const int> outcomes);
void unrank(const SequenceSpace& space, std::int64_t index, std::span<int> outcomes);

/// Dense distribution R over the sequence space.
using ReferenceDistribution = std::vector<double>;

ReferenceDistribution uniform_reference(const SequenceSpace& space);
/// Scales R to unit sum; returns the previous total mass.
double normalize_reference(ReferenceDistribution& r);

/// Scratch buffers reused across sweeps so that steady-state iterations do
/// not allocate. Not thread-safe; each concurrent caller owns one.
struct SweepScratch {
    std::vector<double> partials;
    std::vector<std::vector<double>> worker_lanes;
    std::vector<double> lane_table; // exp factors transposed, ((b*|S|)+s)*|A|+a
};

/// Number of worker threads a sweep over n sequences should use.
int effective_threads(int threads, std::int64_t n);

/// Sums over the sequence space weighted by R(seq) * prod_b e(s_b, b) for a
/// single input: total mass T, per-coordinate marginals
/// m(s,b) = sum_{seq: seq_b = s} w(seq), and (optionally) the pairwise mass
/// table M((s,b),(s',b')) = sum_{seq: seq_b = s, seq_b' = s'} w(seq).
/// The marginals are the left-hand side of the multiplier equations; the
/// pairwise table is the Newton Hessian of the per-input dual.
struct DualSums {
    std::vector<double> marginals;  // |B|*|S|, index b*|S|+s
    std::vector<double> pair_mass;  // (|B|*|S|)^2 row-major, symmetric; empty unless requested
    double total = 0.0;
};

/// One deterministic pass; chunked with a fixed-order pairwise reduction, so
/// results are bitwise identical for any thread count. exp_factors has
/// layout b*|S|+s. Throws NumericalError if the sums overflow.
void accumulate_dual_sums(const SequenceSpace& space, const double* r,
                          const double* exp_factors, bool with_pairs, int threads,
                          DualSums& out, SweepScratch& scratch);

/// Total mass sum_seq R(seq) * prod_b e(s_b, b) only (used by line searches).
double total_mass(const SequenceSpace& space, const double* r,
                  const double* exp_factors, int threads, SweepScratch& scratch);

/// Dual potential F(seq) = sum_a rho(a) * exp(sum_b lambda(s_b,a,b)) as a
/// dense table.
std::vector<double> f_table(const SequenceSpace& space, const Multipliers& multipliers,
                            const InputPrior& prior, int threads, SweepScratch& scratch);

/// Per-input total masses T_a and the Gram table
/// d2(a,a') = sum_seq R(seq) * g_a(seq) * g_a'(seq) with
/// g_a(seq) = exp(sum_b lambda(s_b,a,b)); the quadratic prior model.
struct PairProductSums {
    std::vector<double> input_total;  // |A|
    std::vector<double> gram;         // |A|*|A| row-major, symmetric
};
void accumulate_pair_products(const SequenceSpace& space, const double* r,
                              const Multipliers& multipliers, int threads,
                              PairProductSums& out, SweepScratch& scratch);

/// Streamed statistics of the potential F over the space, optionally also
/// applying the update R <- R * F^alpha in place (unnormalized; the caller
/// rescales by sum_rf_alpha).
struct PotentialStats {
    double max_f = 0.0;
    double max_rf_abs_lnf = 0.0; // max_seq R*F*|ln F| (complementary slackness)
    double sum_rf = 0.0;         // sum_seq R*F        (mass of the implied joint)
    double sum_rf_lnf = 0.0;     // sum_seq R*F*ln F   (upper-bound entropy term)
    double sum_rf_alpha = 0.0;   // sum_seq R*F^alpha  (new mass before rescaling)
    std::int64_t zero_support = 0; // sequences with R > 0 but F == 0
};
PotentialStats potential_sweep(const SequenceSpace& space, double* r,
                               const Multipliers& multipliers, const InputPrior& prior,
                               double alpha, bool apply_update, int threads,
                               SweepScratch& scratch);

/// Accumulators for one Blahut-Arimoto step on the implicit channel
/// rho(seq|a) = R(seq) * g_a(seq): the per-input marginals m_a(s,b) and
/// t1(a) = sum_seq R * g_a * ln F.
struct ExactCapacitySums {
    std::vector<double> marginals; // |A|*|B|*|S|, index ((b*|S|)+s)*|A|+a
    std::vector<double> rg_lnf;    // |A|
};
void accumulate_exact_capacity(const SequenceSpace& space, const double* r,
                               const Multipliers& multipliers, const InputPrior& prior,
                               int threads, ExactCapacitySums& out, SweepScratch& scratch);

} // namespace capmin::sequence
