#include "capacity.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace capmin::capacity {

namespace {

constexpr double kKktTolerance = 1e-10;
constexpr int kMaxProjectedGradientIters = 50000;
constexpr int kMaxBlahutArimotoIters = 1000000;

// Euclidean projection onto the probability simplex (sort-based).
void project_simplex(std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    int rho = -1;
    for (int j = 0; j < n; ++j) {
        css += u[j];
        const double t = (css - 1.0) / (j + 1);
        if (u[j] - t > 0.0) {
            rho = j;
            tau = t;
        }
    }
    (void)rho;
    for (double& x : v) x = std::max(x - tau, 0.0);
}

} // namespace

double exact_capacity_objective(const InputPrior& prior, const Multipliers& multipliers,
                                const sequence::ReferenceDistribution& r,
                                const std::vector<double>& f, const ProcessSpec& spec) {
    const int na = spec.num_inputs, nb = spec.num_measurements, ns = spec.num_outcomes;
    double linear = 0.0;
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int s = 0; s < ns; ++s) {
                const double p = spec.at(a, b, s);
                if (p > 0.0) linear += p * prior[a] * multipliers.at(a, b, s);
            }
    double entropy_term = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double rf = r[i] * f[i];
        if (rf > 0.0) entropy_term += rf * std::log(f[i]);
    }
    return nats_to_bits(linear - entropy_term);
}

QuadraticModel quadratic_coefficients(const sequence::SequenceSpace& space,
                                      const sequence::ReferenceDistribution& r,
                                      const Multipliers& multipliers, const ProcessSpec& spec,
                                      int threads, sequence::SweepScratch& scratch) {
    const int na = spec.num_inputs, nb = spec.num_measurements, ns = spec.num_outcomes;
    QuadraticModel model;
    model.num_inputs = na;
    model.d1.assign(na, 0.0);
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int s = 0; s < ns; ++s) {
                const double p = spec.at(a, b, s);
                if (p > 0.0) model.d1[a] += p * multipliers.at(a, b, s);
            }
    sequence::PairProductSums sums;
    sequence::accumulate_pair_products(space, r.data(), multipliers, threads, sums, scratch);
    model.d2 = std::move(sums.gram);
    return model;
}

double quadratic_value(const QuadraticModel& model, const InputPrior& prior) {
    const int n = model.num_inputs;
    double lin = 0.0, quad = 0.0;
    for (int a = 0; a < n; ++a) {
        lin += model.d1[a] * prior[a];
        double row = 0.0;
        for (int a2 = 0; a2 < n; ++a2)
            row += model.d2[static_cast<std::size_t>(a) * n + a2] * prior[a2];
        quad += prior[a] * row;
    }
    return lin + 1.0 - quad;
}

InputPrior maximize_quadratic(const QuadraticModel& model) {
    const int n = model.num_inputs;
    InputPrior x(n, 1.0 / n);
    if (n == 1) return x;

    auto gradient = [&](const InputPrior& p, std::vector<double>& g) {
        for (int a = 0; a < n; ++a) {
            double row = 0.0;
            for (int a2 = 0; a2 < n; ++a2)
                row += model.d2[static_cast<std::size_t>(a) * n + a2] * p[a2];
            g[a] = model.d1[a] - 2.0 * row;
        }
    };
    auto kkt_residual = [&](const InputPrior& p, const std::vector<double>& g) {
        double mu = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < n; ++a) mu = std::max(mu, g[a]);
        double res = 0.0;
        for (int a = 0; a < n; ++a)
            if (p[a] > 1e-14) res = std::max(res, mu - g[a]);
        return res;
    };

    // Gershgorin bound on the gradient Lipschitz constant 2*lambda_max(d2).
    double lipschitz = 0.0;
    for (int a = 0; a < n; ++a) {
        double row = 0.0;
        for (int a2 = 0; a2 < n; ++a2)
            row += std::abs(model.d2[static_cast<std::size_t>(a) * n + a2]);
        lipschitz = std::max(lipschitz, 2.0 * row);
    }
    const double fallback_step = 1.0 / std::max(2.0 * lipschitz, 1e-30);

    std::vector<double> g(n), g_prev(n);
    InputPrior x_prev;
    double value = quadratic_value(model, x);
    for (int iter = 0; iter < kMaxProjectedGradientIters; ++iter) {
        gradient(x, g);
        if (kkt_residual(x, g) <= kKktTolerance) return x;

        double step = fallback_step;
        if (!x_prev.empty()) { // Barzilai-Borwein spectral step
            double dxdx = 0.0, dxdg = 0.0;
            for (int a = 0; a < n; ++a) {
                const double dx = x[a] - x_prev[a];
                dxdx += dx * dx;
                dxdg += dx * (g[a] - g_prev[a]);
            }
            if (dxdx > 0.0 && -dxdg > 1e-30)
                step = std::clamp(dxdx / -dxdg, 1e-12, 1e12);
        }

        InputPrior y(n);
        for (int a = 0; a < n; ++a) y[a] = x[a] + step * g[a];
        project_simplex(y);
        double y_value = quadratic_value(model, y);
        if (y_value < value - 1e-12) { // non-monotone BB step; retreat to the safe step
            for (int a = 0; a < n; ++a) y[a] = x[a] + fallback_step * g[a];
            project_simplex(y);
            y_value = quadratic_value(model, y);
        }
        x_prev = x;
        g_prev = g;
        x = std::move(y);
        value = y_value;
    }
    throw NumericalError("prior update did not reach the KKT tolerance within the "
                         "iteration budget");
}

CapacityResult blahut_arimoto(const double* channel, int num_inputs, int num_outputs,
                              double tol_bits) {
    for (int x = 0; x < num_inputs; ++x) {
        double sum = 0.0;
        for (int y = 0; y < num_outputs; ++y) {
            const double w = channel[static_cast<std::size_t>(x) * num_outputs + y];
            if (!(w >= 0.0)) throw ValidationError("channel entries must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("channel rows must be normalized");
    }
    const double tol_nats = bits_to_nats(tol_bits);
    InputPrior rho(num_inputs, 1.0 / num_inputs);
    std::vector<double> out_dist(num_outputs), divergence(num_inputs);
    for (int iter = 1; iter <= kMaxBlahutArimotoIters; ++iter) {
        std::fill(out_dist.begin(), out_dist.end(), 0.0);
        for (int x = 0; x < num_inputs; ++x)
            for (int y = 0; y < num_outputs; ++y)
                out_dist[y] += rho[x] * channel[static_cast<std::size_t>(x) * num_outputs + y];
        for (int x = 0; x < num_inputs; ++x) {
            double d = 0.0;
            for (int y = 0; y < num_outputs; ++y) {
                const double w = channel[static_cast<std::size_t>(x) * num_outputs + y];
                if (w > 0.0) d += w * std::log(w / out_dist[y]);
            }
            divergence[x] = d;
        }
        double upper = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < num_inputs; ++x) upper = std::max(upper, divergence[x]);
        double z = 0.0;
        for (int x = 0; x < num_inputs; ++x) z += rho[x] * std::exp(divergence[x] - upper);
        const double lower = upper + std::log(z);
        if (upper - lower <= tol_nats) {
            CapacityResult res;
            res.capacity_bits = nats_to_bits(0.5 * (upper + lower));
            res.maximizer = rho;
            res.iterations = iter;
            return res;
        }
        double mass = 0.0;
        for (int x = 0; x < num_inputs; ++x) {
            rho[x] *= std::exp(divergence[x] - upper);
            mass += rho[x];
        }
        for (int x = 0; x < num_inputs; ++x) rho[x] /= mass;
    }
    throw NumericalError("capacity iteration did not reach the requested accuracy");
}

CapacityResult implicit_channel_capacity(const sequence::SequenceSpace& space,
                                         const sequence::ReferenceDistribution& r,
                                         const Multipliers& multipliers,
                                         const InputPrior& start, double tol_bits,
                                         int threads, sequence::SweepScratch& scratch) {
    const int na = multipliers.num_inputs;
    const int coords = space.num_measurements * space.num_outcomes;
    const double tol_nats = bits_to_nats(tol_bits);
    InputPrior rho = start.empty() ? InputPrior(na, 1.0 / na) : start;
    std::vector<double> divergence(na);
    sequence::ExactCapacitySums sums;
    for (int iter = 1; iter <= kMaxBlahutArimotoIters; ++iter) {
        sequence::accumulate_exact_capacity(space, r.data(), multipliers, rho, threads, sums,
                                            scratch);
        for (int a = 0; a < na; ++a) {
            double d = 0.0;
            const double* lam = multipliers.input_slice(a);
            for (int c = 0; c < coords; ++c) {
                const double m = sums.marginals[static_cast<std::size_t>(c) * na + a];
                if (m > 0.0) d += m * lam[c];
            }
            divergence[a] = d - sums.rg_lnf[a];
        }
        double upper = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < na; ++a) upper = std::max(upper, divergence[a]);
        double z = 0.0;
        for (int a = 0; a < na; ++a) z += rho[a] * std::exp(divergence[a] - upper);
        const double lower = upper + std::log(z);
        if (upper - lower <= tol_nats) {
            CapacityResult res;
            res.capacity_bits = nats_to_bits(0.5 * (upper + lower));
            res.maximizer = rho;
            res.iterations = iter;
            return res;
        }
        double mass = 0.0;
        for (int a = 0; a < na; ++a) {
            rho[a] *= std::exp(divergence[a] - upper);
            mass += rho[a];
        }
        for (int a = 0; a < na; ++a) rho[a] /= mass;
    }
    throw NumericalError("exact capacity mode did not reach the requested accuracy");
}

} // namespace capmin::capacity
