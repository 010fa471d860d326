#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capacity.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "reference.hpp"
#include "solver.hpp"

#include <cmath>

using namespace capmin;

TEST_CASE("the product channel is always a member of the constraint set") {
    for (unsigned seed : {1u, 2u, 3u}) {
        ProcessSpec spec = testref::random_process(3, 3, 2, 1000 + seed);
        oracle::DenseChannel channel = oracle::product_channel(spec);
        CHECK(oracle::check_membership(channel, spec).max_violation <= 1e-12);
    }
    ProcessSpec planar = planar_problem(4, 2);
    CHECK(oracle::check_membership(oracle::product_channel(planar), planar).max_violation <=
          1e-12);
}

TEST_CASE("a perturbed member is reported with the size of its violation") {
    ProcessSpec spec = testref::random_process(2, 2, 2, 55);
    oracle::DenseChannel channel = oracle::product_channel(spec);
    channel.at(1, 2) += 1e-3; // breaks the marginals of input 1 by about 1e-3
    oracle::MembershipReport report = oracle::check_membership(channel, spec);
    CHECK(report.max_violation == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(report.worst_input == 1);
}

TEST_CASE("the solver's converged channel is a member within the newton tolerance") {
    ProcessSpec spec = testref::random_process(2, 3, 2, 77);
    solver::SolverConfig config;
    config.xi_bits = 1e-7;
    config.threads = 1;
    solver::SolveResult res = solver::solve(spec, config);
    oracle::DenseChannel channel = oracle::materialize(res.channel, spec);
    CHECK(oracle::check_membership(channel, spec).max_violation <= config.newton_tol * 10);
}

TEST_CASE("single measurement: the value is the capacity of P itself") {
    ProcessSpec spec = testref::random_process(3, 1, 2, 91);
    const double value = oracle::brute_force_complexity(spec, 1e-7);
    capacity::CapacityResult direct = capacity::blahut_arimoto(spec.prob.data(), 3, 2, 1e-12);
    CHECK(value == doctest::Approx(direct.capacity_bits).epsilon(1e-6));
}

TEST_CASE("single input: complexity is zero") {
    ProcessSpec spec = testref::random_process(1, 3, 2, 92);
    CHECK(oracle::brute_force_complexity(spec, 1e-7) == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("product channel capacity upper-bounds the brute-force value") {
    for (unsigned seed : {5u, 6u, 7u, 8u}) {
        ProcessSpec spec = testref::random_process(2, 2, 2, 2000 + seed);
        const double value = oracle::brute_force_complexity(spec, 1e-5);
        const double product =
            oracle::dense_capacity_bits(oracle::product_channel(spec), 1e-9);
        CHECK(value <= product + 1e-5);
    }
}

TEST_CASE("brute force is invariant under input relabeling") {
    ProcessSpec spec = testref::random_process(3, 2, 2, 71);
    ProcessSpec permuted = spec;
    const int perm[3] = {2, 0, 1};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 2; ++b)
            for (int s = 0; s < 2; ++s) permuted.at(a, b, s) = spec.at(perm[a], b, s);
    const double v1 = oracle::brute_force_complexity(spec, 1e-6);
    const double v2 = oracle::brute_force_complexity(permuted, 1e-6);
    CHECK(v1 == doctest::Approx(v2).epsilon(2e-6));
}

TEST_CASE("brute force is invariant under flipping all outcomes") {
    // s -> -s together with w -> -w leaves a generated process equivalent.
    ProcessSpec spec = planar_problem(4, 2);
    ProcessSpec flipped = spec;
    for (int a = 0; a < spec.num_inputs; ++a)
        for (int b = 0; b < spec.num_measurements; ++b) {
            flipped.at(a, b, 0) = spec.at(a, b, 1);
            flipped.at(a, b, 1) = spec.at(a, b, 0);
        }
    const double v1 = oracle::brute_force_complexity(spec, 1e-6);
    const double v2 = oracle::brute_force_complexity(flipped, 1e-6);
    CHECK(v1 == doctest::Approx(v2).epsilon(2e-6));
}

TEST_CASE("oracle matches the solver on seeded random instances") {
    // A small sample here; the full 20-instance comparison runs in the
    // acceptance suite.
    for (unsigned seed : {3001u, 3002u, 3003u, 3004u, 3005u}) {
        ProcessSpec spec = testref::random_process(2, 2, 2, seed);
        const double reference = oracle::brute_force_complexity(spec, 2e-5);
        solver::SolverConfig config;
        config.xi_bits = 2e-5;
        config.threads = 1;
        solver::SolveResult res = solver::solve(spec, config);
        CHECK(std::abs(res.value_bits - reference) <= 1e-4);
    }
}

TEST_CASE("instance limits are enforced") {
    ProcessSpec big = testref::random_process(5, 2, 2, 1);
    CHECK_THROWS_AS(oracle::brute_force_complexity(big, 1e-5), ValidationError);
    ProcessSpec wide = testref::random_process(2, 5, 2, 2);
    CHECK_THROWS_AS(oracle::brute_force_complexity(wide, 1e-5), ValidationError);
    ProcessSpec ternary = testref::random_process(2, 2, 3, 3);
    CHECK_THROWS_AS(oracle::brute_force_complexity(ternary, 1e-5), ValidationError);
}
