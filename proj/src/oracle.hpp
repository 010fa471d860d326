#pragma once

#include "dual.hpp"
#include "model.hpp"

#include <cstdint>
#include <vector>

namespace capmin::oracle {

/// Dense conditional table rho(seq|a) over the full outcome-sequence space,
/// row-major per input. Deliberately independent of the solver's factorized
/// representation and of the sequence-sweep machinery: this module does its
/// own indexing with plain nested loops.
struct DenseChannel {
    int num_inputs = 0;
    int num_measurements = 0;
    int num_outcomes = 0;
    std::int64_t space_size = 0;
    std::vector<double> rows; // num_inputs * space_size

    double& at(int a, std::int64_t seq) { return rows[a * space_size + seq]; }
    double at(int a, std::int64_t seq) const { return rows[a * space_size + seq]; }
};

/// The product channel rho(seq|a) = prod_b P(s_b|a,b); always a member of
/// the constraint set.
DenseChannel product_channel(const ProcessSpec& spec);

/// Materializes the solver's factorized channel R * exp(sum_b lambda).
DenseChannel materialize(const dual::FactorizedChannel& channel, const ProcessSpec& spec);

struct MembershipReport {
    double max_violation = 0.0;
    int worst_input = -1, worst_measurement = -1, worst_outcome = -1;
    bool within(double tol) const { return max_violation <= tol; }
};

/// Largest deviation of the channel's single-measurement marginals from
/// P(s|a,b).
MembershipReport check_membership(const DenseChannel& channel, const ProcessSpec& spec);

/// Channel capacity (bits) of a dense channel via the capacity module.
double dense_capacity_bits(const DenseChannel& channel, double tol_bits);

/// Brute-force value of the minimal capacity over the constraint set, for
/// small instances (|A| <= 4, |B| <= 4, |S| = 2). Projected-gradient descent
/// of the capacity functional over the affine slice of the constraints from
/// 16 seeded interior starts; the best point is certified by a
/// linearization (Frank-Wolfe) gap <= tol. Throws NumericalError if the
/// starts disagree by more than 10*tol or certification fails.
double brute_force_complexity(const ProcessSpec& spec, double tol_bits);

} // namespace capmin::oracle
