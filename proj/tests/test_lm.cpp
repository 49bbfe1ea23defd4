#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "sigfd/lm.hpp"

using namespace sigfd;
using Catch::Matchers::WithinAbs;

namespace {

// Linear residual r(x) = A x - b with its exact Jacobian.
struct LinearProblem {
    std::vector<std::vector<double>> a;
    std::vector<double> b;

    ResidualFn residual() const {
        return [this](const std::vector<double>& x) {
            std::vector<double> r(a.size(), 0.0);
            for (std::size_t i = 0; i < a.size(); ++i) {
                for (std::size_t j = 0; j < x.size(); ++j) r[i] += a[i][j] * x[j];
                r[i] -= b[i];
            }
            return r;
        };
    }
    JacobianFn jacobian() const {
        return [this](const std::vector<double>&) { return a; };
    }
};

LinearProblem random_linear(std::mt19937_64& rng, std::size_t m, std::size_t n) {
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    LinearProblem p;
    p.a.assign(m, std::vector<double>(n));
    p.b.assign(m, 0.0);
    for (auto& row : p.a)
        for (auto& v : row) v = d(rng);
    for (auto& v : p.b) v = d(rng);
    return p;
}

}  // namespace

TEST_CASE("linear residuals reach the normal-equations solution", "[lm]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const LinearProblem p = random_linear(rng, 20, 3);
        const std::vector<double> expected = testutil::normal_equations_solve(p.a, p.b);
        const LmResult res = lm_minimize(p.residual(), p.jacobian(), {0.0, 0.0, 0.0});
        REQUIRE(res.converged);
        for (std::size_t j = 0; j < 3; ++j) CHECK_THAT(res.solution[j], WithinAbs(expected[j], 1e-8));
    }
}

TEST_CASE("an already-optimal start converges immediately", "[lm]") {
    std::mt19937_64 rng(12);
    const LinearProblem p = random_linear(rng, 15, 2);
    const std::vector<double> opt = testutil::normal_equations_solve(p.a, p.b);
    const LmResult res = lm_minimize(p.residual(), p.jacobian(), opt);
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
    CHECK_THAT(res.solution[0], WithinAbs(opt[0], 1e-10));
    CHECK_THAT(res.solution[1], WithinAbs(opt[1], 1e-10));
}

TEST_CASE("Rosenbrock valley from the classic start", "[lm]") {
    ResidualFn residual = [](const std::vector<double>& x) {
        return std::vector<double>{1.0 - x[0], 10.0 * (x[1] - x[0] * x[0])};
    };
    JacobianFn jacobian = [](const std::vector<double>& x) {
        return std::vector<std::vector<double>>{{-1.0, 0.0}, {-20.0 * x[0], 10.0}};
    };
    const LmResult res = lm_minimize(residual, jacobian, {-1.2, 1.0});
    REQUIRE(res.converged);
    CHECK_THAT(res.solution[0], WithinAbs(1.0, 1e-6));
    CHECK_THAT(res.solution[1], WithinAbs(1.0, 1e-6));
    CHECK(res.objective < 1e-12);
}

TEST_CASE("objective never increases from the start", "[lm]") {
    ResidualFn residual = [](const std::vector<double>& x) {
        return std::vector<double>{std::sin(x[0]) + 0.5, x[1] * x[1] - 2.0, x[0] - x[1]};
    };
    JacobianFn jacobian = [](const std::vector<double>& x) {
        return std::vector<std::vector<double>>{
            {std::cos(x[0]), 0.0}, {0.0, 2.0 * x[1]}, {1.0, -1.0}};
    };
    const std::vector<double> init{2.0, -3.0};
    double f0 = 0.0;
    for (double r : residual(init)) f0 += r * r;
    const LmResult res = lm_minimize(residual, jacobian, init);
    CHECK(res.objective <= f0);
}

TEST_CASE("non-finite trial points are rejected, not fatal", "[lm]") {
    // The Gauss-Newton step from anywhere left of 2 jumps to 10, into the
    // NaN region, so every full step must be rejected and damped.
    ResidualFn residual = [](const std::vector<double>& x) {
        if (x[0] > 2.0)
            return std::vector<double>{std::numeric_limits<double>::quiet_NaN()};
        return std::vector<double>{x[0] - 10.0};
    };
    JacobianFn jacobian = [](const std::vector<double>&) {
        return std::vector<std::vector<double>>{{1.0}};
    };
    const LmResult res = lm_minimize(residual, jacobian, {0.0});
    CHECK(res.solution[0] <= 2.0);
    CHECK(res.objective <= 100.0);
}

TEST_CASE("non-finite values at the start are an error", "[lm]") {
    ResidualFn nan_residual = [](const std::vector<double>&) {
        return std::vector<double>{std::numeric_limits<double>::quiet_NaN()};
    };
    JacobianFn jacobian = [](const std::vector<double>&) {
        return std::vector<std::vector<double>>{{1.0}};
    };
    CHECK_THROWS_AS(lm_minimize(nan_residual, jacobian, {0.0}), NumericalError);

    ResidualFn ok_residual = [](const std::vector<double>& x) {
        return std::vector<double>{x[0] - 1.0};
    };
    JacobianFn nan_jacobian = [](const std::vector<double>&) {
        return std::vector<std::vector<double>>{{std::numeric_limits<double>::infinity()}};
    };
    CHECK_THROWS_AS(lm_minimize(ok_residual, nan_jacobian, {0.0}), NumericalError);
}

TEST_CASE("dimension mismatches are rejected", "[lm]") {
    ResidualFn residual = [](const std::vector<double>& x) {
        return std::vector<double>{x[0], x[0] + 1.0};
    };
    JacobianFn bad_cols = [](const std::vector<double>&) {
        return std::vector<std::vector<double>>{{1.0, 2.0}, {1.0, 2.0}};
    };
    CHECK_THROWS_AS(lm_minimize(residual, bad_cols, {0.5}), NumericalError);

    ResidualFn underdetermined = [](const std::vector<double>& x) {
        return std::vector<double>{x[0] + x[1]};
    };
    JacobianFn jac1 = [](const std::vector<double>&) {
        return std::vector<std::vector<double>>{{1.0, 1.0}};
    };
    CHECK_THROWS_AS(lm_minimize(underdetermined, jac1, {0.0, 0.0}), NumericalError);
}

TEST_CASE("invalid options are rejected", "[lm]") {
    FitOptions opts;
    opts.grad_tol = 0.0;
    ResidualFn residual = [](const std::vector<double>& x) { return std::vector<double>{x[0]}; };
    JacobianFn jacobian = [](const std::vector<double>&) {
        return std::vector<std::vector<double>>{{1.0}};
    };
    CHECK_THROWS_AS(lm_minimize(residual, jacobian, {1.0}, opts), DomainError);
}
