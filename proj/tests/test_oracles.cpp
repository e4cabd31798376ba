#include <doctest.h>

#include <cmath>

#include "cdc/errors.hpp"
#include "cdc/oracles.hpp"

using namespace cdc;
using namespace cdc::oracles;

TEST_SUITE_BEGIN("oracles");

TEST_CASE("enumeration at T=1 is the product of proposal rows") {
    const auto vocab = Vocabulary::with_mask({"a", "b"});
    UniformDenoiser den(vocab);
    const auto sched = make_schedule(1, ScheduleKind::Linear);
    const auto result = exact_posterior(den, sched, 2, empty_context());
    REQUIRE(result.prob.size() == 4);
    for (const auto& [seq, p] : result.prob) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("enumeration mass sums to 1 across T and L") {
    const auto vocab = Vocabulary::with_mask({"a", "b", "c"});
    UniformDenoiser den(vocab);
    for (int T : {1, 2, 3}) {
        const auto sched = make_schedule(T, ScheduleKind::Linear);
        const auto result = exact_posterior(den, sched, 3, empty_context());
        CHECK(std::abs(result.total_mass() - 1.0) <= 1e-9);
    }
}

TEST_CASE("enumeration refuses instances beyond its guard") {
    const auto vocab = Vocabulary::with_mask({"a", "b"});
    UniformDenoiser den(vocab);
    const auto good = make_schedule(2, ScheduleKind::Linear);
    CHECK_THROWS_AS(exact_posterior(den, good, 5, empty_context()), InvalidArgument);
    const auto deep = make_schedule(5, ScheduleKind::Linear);
    CHECK_THROWS_AS(exact_posterior(den, deep, 2, empty_context()), InvalidArgument);
}

TEST_CASE("fd_gradient recovers the derivative of x^2") {
    const auto f = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
    Eigen::VectorXd at(1);
    at << 3.0;
    const auto g = fd_gradient(f, at, 1e-5);
    CHECK(std::abs(g[0] - 6.0) <= 1e-6);
}

TEST_CASE("fd_gradient of a constant is zero") {
    const auto f = [](const Eigen::VectorXd&) { return 4.2; };
    Eigen::VectorXd at(3);
    at << 1.0, -2.0, 0.5;
    const auto g = fd_gradient(f, at, 1e-5);
    CHECK(g.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("central differences improve quadratically when h halves") {
    // f(x) = exp(x): error of the central difference is O(h^2)
    const auto f = [](const Eigen::VectorXd& x) { return std::exp(x[0]); };
    Eigen::VectorXd at(1);
    at << 0.7;
    const double exact = std::exp(0.7);
    const double e1 = std::abs(fd_gradient(f, at, 1e-2)[0] - exact);
    const double e2 = std::abs(fd_gradient(f, at, 5e-3)[0] - exact);
    CHECK(e2 < e1 / 3.0);  // quartering up to noise
}

TEST_CASE("fd_gradient rejects nonpositive h") {
    const auto f = [](const Eigen::VectorXd& x) { return x[0]; };
    Eigen::VectorXd at(1);
    at << 0.0;
    CHECK_THROWS_AS(fd_gradient(f, at, 0.0), InvalidArgument);
}

TEST_CASE("tilt with lambda = 0 returns the base row") {
    Eigen::VectorXd base(3);
    base << 0.2, 0.5, 0.3;
    Eigen::VectorXd cost(3);
    cost << 1.0, 2.0, 3.0;
    const auto y = tilt_closed_form(base, cost, 0.0);
    CHECK((y - base).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("large lambda drives mass off the costly token") {
    Eigen::VectorXd base(2);
    base << 0.5, 0.5;
    Eigen::VectorXd cost(2);
    cost << 0.0, 1.0;
    const auto y = tilt_closed_form(base, cost, 50.0);
    CHECK(y[1] <= 1e-9);
    CHECK(y[0] == doctest::Approx(1.0));
}

TEST_CASE("tilt normalizes") {
    Eigen::VectorXd base(4);
    base << 0.1, 0.2, 0.3, 0.4;
    Eigen::VectorXd cost(4);
    cost << 0.5, -0.2, 1.0, 0.0;
    const auto y = tilt_closed_form(base, cost, 1.7);
    CHECK(y.sum() == doctest::Approx(1.0));
    CHECK(y.minCoeff() > 0.0);
}

TEST_SUITE_END();
