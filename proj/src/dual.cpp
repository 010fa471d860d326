#include "dual.hpp"

#include "errors.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace capmin::dual {

namespace {

constexpr double kGaugeDamping = 1e-10;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

struct InputWorkspace {
    sequence::SweepScratch scratch;
    std::vector<double> efac;      // current exp(lambda), |B|*|S|
    std::vector<double> efac_try;  // line-search candidate
    std::vector<double> lam_try;
    std::vector<int> free_coords;  // coordinates with P > 0
    std::vector<int> meas_count;   // free coordinates per measurement
    std::vector<double> meas_mean; // per-measurement mean of the step
    sequence::DualSums sums;
};

double free_dot(const double* p, const double* lam, const std::vector<int>& free_coords) {
    double acc = 0.0;
    for (int c : free_coords) acc += p[c] * lam[c];
    return acc;
}

// Newton ascent for one input. lam is the |B|*|S| multiplier block, modified
// in place; returns the number of Newton steps taken.
int solve_input(const sequence::SequenceSpace& space, const double* r, const double* p,
                double* lam, const NewtonOptions& options, int threads, InputWorkspace& ws,
                double* final_residual) {
    const int nb = space.num_measurements, ns = space.num_outcomes;
    const int coords = nb * ns;

    ws.free_coords.clear();
    ws.meas_count.assign(nb, 0);
    for (int c = 0; c < coords; ++c) {
        if (p[c] > 0.0) {
            ws.free_coords.push_back(c);
            ++ws.meas_count[c / ns];
            if (!std::isfinite(lam[c])) lam[c] = 0.0;
        } else {
            lam[c] = -std::numeric_limits<double>::infinity();
        }
    }
    const int nf = static_cast<int>(ws.free_coords.size());
    ws.efac.resize(coords);
    for (int c = 0; c < coords; ++c) ws.efac[c] = std::exp(lam[c]);

    Eigen::VectorXd grad(nf), step(nf);
    Eigen::MatrixXd hess(nf, nf);

    for (int iter = 0;; ++iter) {
        sequence::accumulate_dual_sums(space, r, ws.efac.data(), /*with_pairs=*/false, threads,
                                       ws.sums, ws.scratch);
        double residual = 0.0;
        for (int c = 0; c < coords; ++c)
            residual = std::max(residual, std::abs(ws.sums.marginals[c] - p[c]));
        if (residual <= options.tolerance) {
            *final_residual = residual;
            return iter;
        }
        if (iter >= options.max_iterations) {
            std::ostringstream os;
            os << "multiplier solve did not converge in " << options.max_iterations
               << " Newton steps (worst marginal residual " << residual << ")";
            throw NumericalError(os.str());
        }

        sequence::accumulate_dual_sums(space, r, ws.efac.data(), /*with_pairs=*/true, threads,
                                       ws.sums, ws.scratch);
        const double damping = kGaugeDamping * std::max(ws.sums.total, 1e-12);
        for (int i = 0; i < nf; ++i) {
            const int ci = ws.free_coords[i];
            grad[i] = p[ci] - ws.sums.marginals[ci];
            for (int j = 0; j < nf; ++j)
                hess(i, j) = ws.sums.pair_mass[static_cast<std::size_t>(ci) * coords +
                                               ws.free_coords[j]];
            hess(i, i) += damping;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("dual Hessian lost positive definiteness beyond the gauge "
                                 "null space (factorization failed)");
        step = ldlt.solve(grad);
        if (!step.allFinite())
            throw NumericalError("dual Newton step is not finite (ill-conditioned Hessian)");

        // Remove the gauge component: per-measurement constant shifts with
        // zero total leave the objective unchanged, so the step is projected
        // onto their orthogonal complement.
        ws.meas_mean.assign(nb, 0.0);
        for (int i = 0; i < nf; ++i) ws.meas_mean[ws.free_coords[i] / ns] += step[i];
        double mean_sum = 0.0, inv_count_sum = 0.0;
        for (int b = 0; b < nb; ++b) {
            ws.meas_mean[b] /= ws.meas_count[b];
            mean_sum += ws.meas_mean[b];
            inv_count_sum += 1.0 / ws.meas_count[b];
        }
        const double nu = mean_sum / inv_count_sum;
        for (int i = 0; i < nf; ++i) {
            const int b = ws.free_coords[i] / ns;
            step[i] -= ws.meas_mean[b] - nu / ws.meas_count[b];
        }

        double gd = grad.dot(step);
        if (!(gd > 0.0)) { // fall back to plain gradient ascent
            step = grad;
            gd = grad.squaredNorm();
        }

        const double phi0 = free_dot(p, lam, ws.free_coords) + 1.0 - ws.sums.total;
        // Below this decrement the objective change is under the resolution
        // of phi; backtracking cannot measure progress, but the pure Newton
        // step is safely inside the quadratic convergence basin.
        const bool pure_newton = gd <= 1e-13 * std::max(1.0, std::abs(phi0));
        ws.lam_try.assign(lam, lam + coords);
        ws.efac_try.assign(coords, 0.0);
        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            for (int i = 0; i < nf; ++i) {
                const int c = ws.free_coords[i];
                ws.lam_try[c] = lam[c] + t * step[i];
                ws.efac_try[c] = std::exp(ws.lam_try[c]);
            }
            const double total =
                sequence::total_mass(space, r, ws.efac_try.data(), threads, ws.scratch);
            const double phi = free_dot(p, ws.lam_try.data(), ws.free_coords) + 1.0 - total;
            if (std::isfinite(phi) && (pure_newton || phi >= phi0 + kArmijo * t * gd)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted)
            throw NumericalError("dual line search stalled: no ascent step found");
        std::copy(ws.lam_try.begin(), ws.lam_try.end(), lam);
        ws.efac.swap(ws.efac_try);
    }
}

} // namespace

double dual_objective(const sequence::SequenceSpace& space, const double* r,
                      const double* lambda_input, const double* p_input, int threads,
                      sequence::SweepScratch& scratch) {
    const int coords = space.num_measurements * space.num_outcomes;
    std::vector<double> efac(coords);
    double linear = 0.0;
    for (int c = 0; c < coords; ++c) {
        efac[c] = p_input[c] > 0.0 ? std::exp(lambda_input[c]) : 0.0;
        if (p_input[c] > 0.0) linear += p_input[c] * lambda_input[c];
    }
    const double total = sequence::total_mass(space, r, efac.data(), threads, scratch);
    return linear + 1.0 - total;
}

Multipliers solve_multipliers(const sequence::SequenceSpace& space, const double* r,
                              const ProcessSpec& spec, const Multipliers* warm_start,
                              const NewtonOptions& options, int threads, NewtonStats* stats) {
    const int na = spec.num_inputs, nb = spec.num_measurements, ns = spec.num_outcomes;
    if (nb != space.num_measurements || ns != space.num_outcomes)
        throw ValidationError("process dimensions do not match the sequence space");

    Multipliers result;
    if (warm_start && !warm_start->empty()) {
        if (warm_start->num_inputs != na || warm_start->num_measurements != nb ||
            warm_start->num_outcomes != ns)
            throw ValidationError("warm-start multipliers have mismatched dimensions");
        result = *warm_start;
    } else {
        result = Multipliers::zeros(na, nb, ns);
    }

    const int total_threads = resolve_threads(threads);
    const bool parallel_inputs =
        total_threads > 1 && na > 1 && space.size * nb >= (std::int64_t(1) << 16);
    const int input_workers = parallel_inputs ? std::min(total_threads, na) : 1;
    const int sweep_threads = parallel_inputs ? 1 : total_threads;

    std::vector<InputWorkspace> workspaces(input_workers);
    std::vector<int> iterations(na, 0);
    std::vector<double> residuals(na, 0.0);
    std::vector<std::string> failures(na);

    parallel_for_indexed(na, input_workers, [&](int a, int worker) {
        try {
            iterations[a] = solve_input(space, r, spec.input_slice(a), result.input_slice(a),
                                        options, sweep_threads, workspaces[worker],
                                        &residuals[a]);
        } catch (const std::exception& e) {
            failures[a] = e.what();
        }
    });

    for (int a = 0; a < na; ++a)
        if (!failures[a].empty()) {
            std::ostringstream os;
            os << "input " << a << ": " << failures[a];
            throw NumericalError(os.str());
        }
    if (stats) {
        stats->iterations = 0;
        stats->max_residual = 0.0;
        for (int a = 0; a < na; ++a) {
            stats->iterations += iterations[a];
            stats->max_residual = std::max(stats->max_residual, residuals[a]);
        }
    }
    return result;
}

} // namespace capmin::dual
