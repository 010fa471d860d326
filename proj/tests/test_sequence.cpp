#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "errors.hpp"
#include "reference.hpp"
#include "sequence.hpp"

#include <cstdlib>
#include <random>

using namespace capmin;
using namespace capmin::sequence;

namespace {

ReferenceDistribution random_reference(const SequenceSpace& space, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    ReferenceDistribution r(space.size);
    for (double& x : r) x = uni(rng);
    normalize_reference(r);
    return r;
}

std::vector<double> random_factors(int nb, int ns, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.2, 2.5);
    std::vector<double> e(static_cast<std::size_t>(nb) * ns);
    for (double& x : e) x = uni(rng);
    return e;
}

Multipliers random_multipliers(int na, int nb, int ns, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Multipliers m = Multipliers::zeros(na, nb, ns);
    for (double& v : m.value) v = uni(rng);
    return m;
}

} // namespace

TEST_CASE("rank is the little-endian positional encoding") {
    SequenceSpace space = make_space(3, 2);
    CHECK(space.size == 8);
    CHECK(rank(space, std::array{1, 0, 1}) == 5);
    CHECK(rank(space, std::array{0, 0, 0}) == 0);
    CHECK(rank(space, std::array{1, 1, 1}) == 7);
    CHECK_THROWS_AS(rank(space, std::array{2, 0, 0}), ValidationError);
    CHECK_THROWS_AS(rank(space, std::array{0, 0}), ValidationError);
}

TEST_CASE("rank and unrank are inverse bijections") {
    for (auto [nb, ns] : {std::pair{3, 2}, {2, 3}, {4, 2}, {1, 5}}) {
        SequenceSpace space = make_space(nb, ns);
        std::vector<int> digits(nb);
        for (std::int64_t k = 0; k < space.size; ++k) {
            unrank(space, k, digits);
            CHECK(rank(space, digits) == k);
        }
    }
}

TEST_CASE("memory budget refuses oversized spaces") {
    CHECK_THROWS_AS(make_space(40, 2), BudgetError);
    CHECK_NOTHROW(make_space(40, 2, /*override_budget=*/true));
    // The environment variable overrides the default budget.
    setenv("CAPMIN_MEMORY_BUDGET", "100", 1);
    CHECK_THROWS_AS(make_space(10, 2), BudgetError);
    CHECK_NOTHROW(make_space(6, 2));
    unsetenv("CAPMIN_MEMORY_BUDGET");
    CHECK_NOTHROW(make_space(10, 2));
}

TEST_CASE("dual sums with unit factors reduce to marginals of R") {
    SequenceSpace space = make_space(3, 2);
    ReferenceDistribution r = random_reference(space, 11);
    std::vector<double> ones(6, 1.0);
    DualSums sums;
    SweepScratch scratch;
    accumulate_dual_sums(space, r.data(), ones.data(), false, 1, sums, scratch);
    CHECK(sums.total == doctest::Approx(1.0).epsilon(1e-13));
    std::vector<int> digits(3);
    for (int b = 0; b < 3; ++b)
        for (int s = 0; s < 2; ++s) {
            double expect = 0.0;
            for (std::int64_t k = 0; k < space.size; ++k) {
                unrank(space, k, digits);
                if (digits[b] == s) expect += r[k];
            }
            CHECK(sums.marginals[b * 2 + s] == doctest::Approx(expect).epsilon(1e-13));
        }
}

TEST_CASE("single-measurement space collapses to elementwise products") {
    SequenceSpace space = make_space(1, 3);
    ReferenceDistribution r = random_reference(space, 12);
    std::vector<double> e = random_factors(1, 3, 13);
    DualSums sums;
    SweepScratch scratch;
    accumulate_dual_sums(space, r.data(), e.data(), true, 1, sums, scratch);
    for (int s = 0; s < 3; ++s)
        CHECK(sums.marginals[s] == doctest::Approx(r[s] * e[s]).epsilon(1e-14));
}

TEST_CASE("dual sums match the nested-loop reference") {
    for (auto [nb, ns] : {std::pair{2, 2}, {3, 2}, {2, 3}, {4, 2}, {3, 3}}) {
        SequenceSpace space = make_space(nb, ns);
        ReferenceDistribution r = random_reference(space, 100 + nb * 10 + ns);
        std::vector<double> e = random_factors(nb, ns, 200 + nb * 10 + ns);
        DualSums sums;
        SweepScratch scratch;
        accumulate_dual_sums(space, r.data(), e.data(), true, 1, sums, scratch);
        testref::LoopSums expect = testref::loop_dual_sums(r, e, nb, ns);
        CHECK(sums.total == doctest::Approx(expect.total).epsilon(1e-12));
        const int coords = nb * ns;
        for (int c = 0; c < coords; ++c) {
            CHECK(sums.marginals[c] == doctest::Approx(expect.marginals[c]).epsilon(1e-12));
            for (int c2 = 0; c2 < coords; ++c2) {
                const double got = sums.pair_mass[static_cast<std::size_t>(c) * coords + c2];
                const double want = expect.pairs[static_cast<std::size_t>(c) * coords + c2];
                // Same-measurement cross terms are impossible events.
                CHECK(got == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("marginal totals are consistent with the total mass") {
    SequenceSpace space = make_space(4, 2);
    ReferenceDistribution r = random_reference(space, 3);
    std::vector<double> e = random_factors(4, 2, 4);
    DualSums sums;
    SweepScratch scratch;
    accumulate_dual_sums(space, r.data(), e.data(), false, 1, sums, scratch);
    for (int b = 0; b < 4; ++b) {
        double tot = 0.0;
        for (int s = 0; s < 2; ++s) tot += sums.marginals[b * 2 + s];
        CHECK(tot == doctest::Approx(sums.total).epsilon(1e-13));
    }
}

TEST_CASE("overflowing factors are reported as a scaling failure") {
    SequenceSpace space = make_space(2, 2);
    ReferenceDistribution r = uniform_reference(space);
    std::vector<double> e(4, 1e308);
    DualSums sums;
    SweepScratch scratch;
    CHECK_THROWS_AS(accumulate_dual_sums(space, r.data(), e.data(), false, 1, sums, scratch),
                    NumericalError);
}

TEST_CASE("potential table: zero multipliers give F == 1") {
    SequenceSpace space = make_space(3, 2);
    Multipliers lam = Multipliers::zeros(4, 3, 2);
    InputPrior prior(4, 0.25);
    SweepScratch scratch;
    std::vector<double> f = f_table(space, lam, prior, 1, scratch);
    for (double v : f) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("potential table matches the nested-loop reference") {
    for (auto [na, nb, ns] : {std::tuple{1, 2, 2}, {2, 3, 2}, {3, 4, 2}, {2, 2, 3}}) {
        SequenceSpace space = make_space(nb, ns);
        Multipliers lam = random_multipliers(na, nb, ns, 31 + na);
        std::mt19937 rng(77);
        InputPrior prior(na);
        double mass = 0.0;
        for (double& x : prior) {
            x = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
            mass += x;
        }
        for (double& x : prior) x /= mass;
        SweepScratch scratch;
        std::vector<double> f = f_table(space, lam, prior, 1, scratch);
        std::vector<double> want = testref::loop_f_table(lam, prior, nb, ns);
        for (std::int64_t k = 0; k < space.size; ++k)
            CHECK(f[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
}

TEST_CASE("pair products match nested loops") {
    const int na = 3, nb = 3, ns = 2;
    SequenceSpace space = make_space(nb, ns);
    ReferenceDistribution r = random_reference(space, 5);
    Multipliers lam = random_multipliers(na, nb, ns, 6);
    PairProductSums sums;
    SweepScratch scratch;
    accumulate_pair_products(space, r.data(), lam, 1, sums, scratch);
    for (int a = 0; a < na; ++a)
        for (int a2 = 0; a2 < na; ++a2) {
            double want = 0.0;
            std::vector<int> digits(nb);
            for (std::int64_t k = 0; k < space.size; ++k) {
                unrank(space, k, digits);
                double e = 0.0;
                for (int b = 0; b < nb; ++b)
                    e += lam.at(a, b, digits[b]) + lam.at(a2, b, digits[b]);
                want += r[k] * std::exp(e);
            }
            CHECK(sums.gram[static_cast<std::size_t>(a) * na + a2] ==
                  doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("potential sweep statistics and update") {
    const int na = 2, nb = 3, ns = 2;
    SequenceSpace space = make_space(nb, ns);
    ReferenceDistribution r = random_reference(space, 21);
    ReferenceDistribution r_before = r;
    Multipliers lam = random_multipliers(na, nb, ns, 22);
    InputPrior prior{0.3, 0.7};
    SweepScratch scratch;
    PotentialStats stats =
        potential_sweep(space, r.data(), lam, prior, 1.0, /*apply_update=*/true, 1, scratch);
    std::vector<double> f = testref::loop_f_table(lam, prior, nb, ns);
    double max_f = 0.0, sum_rf = 0.0, sum_rf_lnf = 0.0;
    for (std::int64_t k = 0; k < space.size; ++k) {
        max_f = std::max(max_f, f[k]);
        sum_rf += r_before[k] * f[k];
        sum_rf_lnf += r_before[k] * f[k] * std::log(f[k]);
        CHECK(r[k] == doctest::Approx(r_before[k] * f[k]).epsilon(1e-12));
    }
    CHECK(stats.max_f == doctest::Approx(max_f).epsilon(1e-13));
    CHECK(stats.sum_rf == doctest::Approx(sum_rf).epsilon(1e-12));
    CHECK(stats.sum_rf_lnf == doctest::Approx(sum_rf_lnf).epsilon(1e-12));
    CHECK(stats.sum_rf_alpha == doctest::Approx(sum_rf).epsilon(1e-12));
    CHECK(stats.zero_support == 0);
}

TEST_CASE("sweeps are bitwise reproducible across thread counts") {
    const int na = 3, nb = 12, ns = 2; // large enough to engage the parallel path
    SequenceSpace space = make_space(nb, ns);
    ReferenceDistribution r = random_reference(space, 41);
    Multipliers lam = random_multipliers(na, nb, ns, 42);
    std::vector<double> e = random_factors(nb, ns, 43);
    InputPrior prior{0.2, 0.5, 0.3};

    SweepScratch s1, s4;
    DualSums d1, d4;
    accumulate_dual_sums(space, r.data(), e.data(), true, 1, d1, s1);
    accumulate_dual_sums(space, r.data(), e.data(), true, 4, d4, s4);
    CHECK(d1.total == d4.total);
    CHECK(d1.marginals == d4.marginals);
    CHECK(d1.pair_mass == d4.pair_mass);

    PairProductSums p1, p4;
    accumulate_pair_products(space, r.data(), lam, 1, p1, s1);
    accumulate_pair_products(space, r.data(), lam, 4, p4, s4);
    CHECK(p1.gram == p4.gram);

    ReferenceDistribution ra = r, rb = r;
    PotentialStats st1 = potential_sweep(space, ra.data(), lam, prior, 1.5, true, 1, s1);
    PotentialStats st4 = potential_sweep(space, rb.data(), lam, prior, 1.5, true, 4, s4);
    CHECK(st1.sum_rf == st4.sum_rf);
    CHECK(st1.sum_rf_lnf == st4.sum_rf_lnf);
    CHECK(st1.sum_rf_alpha == st4.sum_rf_alpha);
    CHECK(st1.max_f == st4.max_f);
    CHECK(ra == rb);
}

TEST_CASE("uniform reference and normalization") {
    SequenceSpace space = make_space(5, 2);
    ReferenceDistribution r = uniform_reference(space);
    double sum = 0.0;
    for (double x : r) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    r[3] = 9.0;
    const double mass = normalize_reference(r);
    CHECK(mass > 1.0);
    sum = 0.0;
    for (double x : r) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}
