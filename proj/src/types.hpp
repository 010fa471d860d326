#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace capmin {

constexpr double kLn2 = 0.6931471805599453094172321214581766;

inline double nats_to_bits(double x) { return x / kLn2; }
inline double bits_to_nats(double x) { return x * kLn2; }

/// Distribution rho(a) over Alice's inputs. Entries >= 0, sum 1 within 1e-12.
using InputPrior = std::vector<double>;

inline bool prior_on_simplex(const InputPrior& p, double tol = 1e-12) {
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

/// Lagrange multipliers lambda(s,a,b) in nats. Entries are exactly -inf
/// where P(s|a,b) = 0 (the exponential weight is pinned to zero there).
struct Multipliers {
    int num_inputs = 0;
    int num_measurements = 0;
    int num_outcomes = 0;
    std::vector<double> value; // layout ((a*|B|)+b)*|S|+s

    static Multipliers zeros(int na, int nb, int ns) {
        Multipliers m;
        m.num_inputs = na;
        m.num_measurements = nb;
        m.num_outcomes = ns;
        m.value.assign(static_cast<std::size_t>(na) * nb * ns, 0.0);
        return m;
    }
    double& at(int a, int b, int s) {
        return value[(static_cast<std::size_t>(a) * num_measurements + b) * num_outcomes + s];
    }
    double at(int a, int b, int s) const {
        return value[(static_cast<std::size_t>(a) * num_measurements + b) * num_outcomes + s];
    }
    double* input_slice(int a) {
        return value.data() + static_cast<std::size_t>(a) * num_measurements * num_outcomes;
    }
    const double* input_slice(int a) const {
        return value.data() + static_cast<std::size_t>(a) * num_measurements * num_outcomes;
    }
    bool empty() const { return value.empty(); }
};

/// exp applied elementwise to one input's multiplier block; -inf maps to an
/// exact 0 weight.
inline std::vector<double> exp_factors_for_input(const Multipliers& m, int a) {
    const std::size_t n = static_cast<std::size_t>(m.num_measurements) * m.num_outcomes;
    std::vector<double> e(n);
    const double* lam = m.input_slice(a);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(lam[i]);
    return e;
}

} // namespace capmin
