#include "oracle.hpp"

#include "capacity.hpp"
#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace capmin::oracle {

namespace {

// Digits of a sequence index, little-endian in the measurement position.
int digit_of(std::int64_t seq, int b, int ns) {
    for (int j = 0; j < b; ++j) seq /= ns;
    return static_cast<int>(seq % ns);
}

std::int64_t pow_int(int base, int exp) {
    std::int64_t v = 1;
    for (int i = 0; i < exp; ++i) v *= base;
    return v;
}

struct ConstraintSystem {
    // Rows of the marginal constraint system restricted to the free
    // (not identically zero) coordinates, after Gaussian elimination to an
    // independent set. Shared by every input; only the right-hand side
    // differs.
    std::vector<std::int64_t> free_seqs;       // free coordinates, in rank order
    std::vector<int> free_index;               // seq -> position in free_seqs or -1
    Eigen::MatrixXd rows;                      // reduced independent rows
    Eigen::MatrixXd basis;                     // orthonormal null-space basis (tangent)
    std::vector<std::vector<double>> rhs;      // per input, matching `rows`
};

// Builds the per-input constraint slice. Coordinates forced to zero by a
// zero marginal are removed up front; the remaining equality system is row
// reduced, and its null space orthonormalized.
ConstraintSystem build_constraints(const ProcessSpec& spec) {
    const int na = spec.num_inputs, nb = spec.num_measurements, ns = spec.num_outcomes;
    const std::int64_t size = pow_int(ns, nb);

    ConstraintSystem sys;
    sys.free_index.assign(static_cast<std::size_t>(size), -1);
    for (std::int64_t seq = 0; seq < size; ++seq) {
        bool pinned = false;
        for (int b = 0; b < nb && !pinned; ++b) {
            bool all_zero = true;
            for (int a = 0; a < na; ++a)
                if (spec.at(a, b, digit_of(seq, b, ns)) > 0.0) all_zero = false;
            pinned = all_zero;
        }
        if (!pinned) {
            sys.free_index[seq] = static_cast<int>(sys.free_seqs.size());
            sys.free_seqs.push_back(seq);
        }
    }
    const int n = static_cast<int>(sys.free_seqs.size());

    // Full marginal rows over the free coordinates.
    Eigen::MatrixXd full(nb * ns, n);
    full.setZero();
    for (int b = 0; b < nb; ++b)
        for (int i = 0; i < n; ++i)
            full(b * ns + digit_of(sys.free_seqs[i], b, ns), i) = 1.0;

    // Keep a maximal independent subset of the rows (rank-revealing QR of
    // the transpose selects them).
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(full.transpose());
    const int rank = static_cast<int>(qr.rank());
    sys.rows.resize(rank, n);
    std::vector<int> kept(rank);
    for (int k = 0; k < rank; ++k) {
        kept[k] = qr.colsPermutation().indices()[k];
        sys.rows.row(k) = full.row(kept[k]);
    }

    sys.rhs.assign(na, std::vector<double>(rank, 0.0));
    for (int a = 0; a < na; ++a)
        for (int k = 0; k < rank; ++k) {
            const int b = kept[k] / ns, s = kept[k] % ns;
            sys.rhs[a][k] = spec.at(a, b, s);
        }

    // Orthonormal basis of the tangent (null) space.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.rows);
    Eigen::MatrixXd kernel = lu.kernel();
    if (kernel.cols() > 0 && kernel.norm() > 0) {
        Eigen::HouseholderQR<Eigen::MatrixXd> kqr(kernel);
        sys.basis = kqr.householderQ() * Eigen::MatrixXd::Identity(n, kernel.cols());
    } else {
        sys.basis.resize(n, 0);
    }
    return sys;
}

// Linear minimum of g over one input's slice {y >= 0, rows * y = rhs} by
// enumerating basic feasible solutions; the slice is tiny at oracle scale.
double linear_minimum(const ConstraintSystem& sys, const std::vector<double>& rhs,
                      const Eigen::VectorXd& g) {
    const int n = static_cast<int>(sys.free_seqs.size());
    const int r = static_cast<int>(sys.rows.rows());
    if (r == 0) return 0.0;
    if (r >= n) {
        // Fully determined slice: the single feasible point.
        Eigen::VectorXd y =
            sys.rows.colPivHouseholderQr().solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), r));
        return g.dot(y);
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> comb(r);
    for (int i = 0; i < r; ++i) comb[i] = i;
    Eigen::MatrixXd bm(r, r);
    Eigen::VectorXd rv = Eigen::Map<const Eigen::VectorXd>(rhs.data(), r);
    for (;;) {
        for (int i = 0; i < r; ++i) bm.col(i) = sys.rows.col(comb[i]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(bm);
        if (lu.isInvertible()) {
            Eigen::VectorXd yb = lu.solve(rv);
            bool feasible = true;
            for (int i = 0; i < r; ++i)
                if (yb[i] < -1e-10) feasible = false;
            if (feasible) {
                double val = 0.0;
                for (int i = 0; i < r; ++i) val += g[comb[i]] * std::max(yb[i], 0.0);
                best = std::min(best, val);
            }
        }
        // next combination
        int i = r - 1;
        while (i >= 0 && comb[i] == n - r + i) --i;
        if (i < 0) break;
        ++comb[i];
        for (int j = i + 1; j < r; ++j) comb[j] = comb[j - 1] + 1;
    }
    if (!std::isfinite(best))
        throw NumericalError("oracle linear subproblem found no feasible basis");
    return best;
}

struct Candidate {
    std::vector<Eigen::VectorXd> x; // per input, over free coordinates
    double value_nats = 0.0;
    double fw_gap_nats = 0.0;
};

// Capacity (nats) of the stacked point and the maximizing prior.
double point_capacity(const ConstraintSystem& sys, const ProcessSpec& spec,
                      const std::vector<Eigen::VectorXd>& x, double tol_bits,
                      InputPrior* prior_out) {
    const int na = spec.num_inputs;
    const int n = static_cast<int>(sys.free_seqs.size());
    std::vector<double> table(static_cast<std::size_t>(na) * n);
    for (int a = 0; a < na; ++a)
        for (int i = 0; i < n; ++i)
            table[static_cast<std::size_t>(a) * n + i] = std::max(x[a][i], 0.0);
    capacity::CapacityResult res = capacity::blahut_arimoto(table.data(), na, n, tol_bits);
    if (prior_out) *prior_out = res.maximizer;
    return bits_to_nats(res.capacity_bits);
}

// Danskin subgradient of the capacity at x: q(a) * ln(x(seq|a)/mix(seq)).
void capacity_subgradient(const ConstraintSystem& sys, const std::vector<Eigen::VectorXd>& x,
                          const InputPrior& prior, std::vector<Eigen::VectorXd>& grad) {
    const int na = static_cast<int>(x.size());
    const int n = static_cast<int>(sys.free_seqs.size());
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < na; ++a) mix += prior[a] * x[a];
    grad.assign(na, Eigen::VectorXd::Zero(n));
    for (int a = 0; a < na; ++a)
        for (int i = 0; i < n; ++i) {
            const double xi = x[a][i];
            if (prior[a] <= 0.0 || mix[i] <= 0.0) continue;
            double ratio = xi > 0.0 ? xi / mix[i] : 1e-300;
            grad[a][i] = prior[a] * std::max(std::log(ratio), -700.0);
        }
}

} // namespace

DenseChannel product_channel(const ProcessSpec& spec) {
    DenseChannel ch;
    ch.num_inputs = spec.num_inputs;
    ch.num_measurements = spec.num_measurements;
    ch.num_outcomes = spec.num_outcomes;
    ch.space_size = pow_int(spec.num_outcomes, spec.num_measurements);
    ch.rows.assign(static_cast<std::size_t>(ch.num_inputs) * ch.space_size, 0.0);
    for (int a = 0; a < ch.num_inputs; ++a)
        for (std::int64_t seq = 0; seq < ch.space_size; ++seq) {
            double p = 1.0;
            for (int b = 0; b < ch.num_measurements; ++b)
                p *= spec.at(a, b, digit_of(seq, b, ch.num_outcomes));
            ch.at(a, seq) = p;
        }
    return ch;
}

DenseChannel materialize(const dual::FactorizedChannel& channel, const ProcessSpec& spec) {
    DenseChannel ch;
    ch.num_inputs = spec.num_inputs;
    ch.num_measurements = spec.num_measurements;
    ch.num_outcomes = spec.num_outcomes;
    ch.space_size = static_cast<std::int64_t>(channel.reference.size());
    ch.rows.assign(static_cast<std::size_t>(ch.num_inputs) * ch.space_size, 0.0);
    for (int a = 0; a < ch.num_inputs; ++a)
        for (std::int64_t seq = 0; seq < ch.space_size; ++seq) {
            double w = channel.reference[seq];
            for (int b = 0; b < ch.num_measurements; ++b) {
                const int s = digit_of(seq, b, ch.num_outcomes);
                w *= std::exp(channel.multipliers.at(a, b, s));
            }
            ch.at(a, seq) = w;
        }
    return ch;
}

MembershipReport check_membership(const DenseChannel& channel, const ProcessSpec& spec) {
    if (channel.num_inputs != spec.num_inputs ||
        channel.num_measurements != spec.num_measurements ||
        channel.num_outcomes != spec.num_outcomes)
        throw ValidationError("channel dimensions do not match the process");
    MembershipReport report;
    for (int a = 0; a < spec.num_inputs; ++a)
        for (int b = 0; b < spec.num_measurements; ++b)
            for (int s = 0; s < spec.num_outcomes; ++s) {
                double marginal = 0.0;
                for (std::int64_t seq = 0; seq < channel.space_size; ++seq)
                    if (digit_of(seq, b, spec.num_outcomes) == s) marginal += channel.at(a, seq);
                const double violation = std::abs(marginal - spec.at(a, b, s));
                if (violation > report.max_violation) {
                    report.max_violation = violation;
                    report.worst_input = a;
                    report.worst_measurement = b;
                    report.worst_outcome = s;
                }
            }
    return report;
}

double dense_capacity_bits(const DenseChannel& channel, double tol_bits) {
    return capacity::blahut_arimoto(channel.rows.data(), channel.num_inputs,
                                    static_cast<int>(channel.space_size), tol_bits)
        .capacity_bits;
}

double brute_force_complexity(const ProcessSpec& spec, double tol_bits) {
    require_valid(spec);
    if (spec.num_inputs > 4 || spec.num_measurements > 4 || spec.num_outcomes != 2)
        throw ValidationError("brute-force reference is limited to |A| <= 4, |B| <= 4, |S| = 2");
    const int na = spec.num_inputs;
    const double tol_nats = bits_to_nats(tol_bits);
    const double ba_tol_bits = std::max(tol_bits / 20.0, 1e-13);

    const ConstraintSystem sys = build_constraints(spec);
    const int n = static_cast<int>(sys.free_seqs.size());
    const int dim = static_cast<int>(sys.basis.cols());

    // Feasible interior base point: the product channel restricted to the
    // free coordinates.
    const DenseChannel product = product_channel(spec);
    std::vector<Eigen::VectorXd> base(na, Eigen::VectorXd(n));
    for (int a = 0; a < na; ++a)
        for (int i = 0; i < n; ++i) base[a][i] = product.at(a, sys.free_seqs[i]);

    std::mt19937 rng(20240401u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr int kRestarts = 16;
    constexpr int kMaxPgIters = 2000;

    std::vector<Candidate> finished;
    for (int restart = 0; restart < kRestarts; ++restart) {
        Candidate cand;
        cand.x = base;
        if (restart > 0 && dim > 0) {
            for (int a = 0; a < na; ++a) {
                Eigen::VectorXd dir(dim);
                for (int k = 0; k < dim; ++k) dir[k] = gauss(rng);
                Eigen::VectorXd move = sys.basis * dir;
                double tmax = std::numeric_limits<double>::infinity();
                for (int i = 0; i < n; ++i)
                    if (move[i] < 0.0) tmax = std::min(tmax, base[a][i] / -move[i]);
                if (std::isfinite(tmax) && tmax > 0.0)
                    cand.x[a] = base[a] + 0.5 * tmax * move;
            }
        }

        InputPrior prior;
        double value = point_capacity(sys, spec, cand.x, ba_tol_bits, &prior);
        std::vector<Eigen::VectorXd> grad, direction(na);
        double step_hint = 0.25;
        for (int iter = 0; iter < kMaxPgIters && dim > 0; ++iter) {
            capacity_subgradient(sys, cand.x, prior, grad);
            // Tangent projection and Frank-Wolfe certificate.
            double gap = 0.0;
            double grad_norm2 = 0.0;
            for (int a = 0; a < na; ++a) {
                direction[a] = sys.basis * (sys.basis.transpose() * grad[a]);
                grad_norm2 += direction[a].squaredNorm();
                gap += grad[a].dot(cand.x[a]) - linear_minimum(sys, sys.rhs[a], grad[a]);
            }
            cand.fw_gap_nats = gap;
            if (gap <= 0.8 * tol_nats) break;

            // Fraction-to-boundary step limit, then backtracking descent.
            double tmax = std::numeric_limits<double>::infinity();
            for (int a = 0; a < na; ++a)
                for (int i = 0; i < n; ++i)
                    if (direction[a][i] > 0.0)
                        tmax = std::min(tmax, cand.x[a][i] / direction[a][i]);
            double t = std::min(2.0 * step_hint, 0.995 * tmax);
            bool moved = false;
            for (int bt = 0; bt < 40 && t > 1e-18; ++bt) {
                std::vector<Eigen::VectorXd> trial(na);
                for (int a = 0; a < na; ++a) trial[a] = cand.x[a] - t * direction[a];
                InputPrior trial_prior;
                const double trial_value =
                    point_capacity(sys, spec, trial, ba_tol_bits, &trial_prior);
                if (trial_value <= value - 1e-4 * t * grad_norm2) {
                    cand.x = std::move(trial);
                    value = trial_value;
                    prior = std::move(trial_prior);
                    step_hint = t;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if (!moved) break; // line search exhausted; certificate decides below
        }
        if (dim == 0) cand.fw_gap_nats = 0.0; // constraints fully determine the point
        cand.value_nats = value;
        finished.push_back(std::move(cand));
    }

    double best = std::numeric_limits<double>::infinity();
    double best_certified = std::numeric_limits<double>::infinity();
    double worst = -std::numeric_limits<double>::infinity();
    for (const Candidate& cand : finished) {
        best = std::min(best, cand.value_nats);
        worst = std::max(worst, cand.value_nats);
        if (cand.fw_gap_nats <= tol_nats)
            best_certified = std::min(best_certified, cand.value_nats);
    }
    if (!std::isfinite(best_certified))
        throw NumericalError("brute-force reference failed to certify any start within the "
                             "requested gap");
    if (worst - best > 10.0 * tol_nats) {
        std::ostringstream os;
        os << "brute-force starts disagree: spread " << nats_to_bits(worst - best)
           << " bits exceeds 10x the tolerance";
        throw NumericalError(os.str());
    }
    return nats_to_bits(best_certified);
}

} // namespace capmin::oracle
