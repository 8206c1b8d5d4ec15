#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "delaysim/dde.hpp"

using namespace delaysim;

namespace {

double pk_closed_form(double t) { return 100 * t * std::exp(-t); }

double max_pk_error(double step)
{
    const auto sol = solve(build_dde(preset_pk(1, 1, 0, 100)), 10.0, step);
    double worst = 0.0;
    for (std::size_t j = 0; j < sol.nodes(); ++j)
        worst = std::max(worst, std::abs(sol.values()(1, static_cast<Eigen::Index>(j)) - pk_closed_form(sol.time(j))));
    return worst;
}

} // namespace

TEST_CASE("pk system structure")
{
    const auto sys = build_dde(preset_pk(1, 1, 0.2, 100));
    CHECK(sys.dimension() == 2);
    REQUIRE(sys.delayed_terms().size() == 1);
    const auto& term = sys.delayed_terms()[0];
    CHECK(term.source == 1);
    CHECK_FALSE(term.target.has_value());
    CHECK(term.tau == 0.2);
    CHECK(term.coefficient == 1.0);
    CHECK(sys.initial()(0) == 100.0);
    CHECK(sys.initial()(1) == 0.0);

    // dx/dt = -k x, dA/dt = k x - mu A(t - tau)
    Eigen::VectorXd y(2);
    y << 30, 7;
    Eigen::VectorXd lag(1);
    lag << 4;
    const auto f = sys.derivative(y, lag);
    CHECK(f(0) == doctest::Approx(-30));
    CHECK(f(1) == doctest::Approx(30 - 4));
}

TEST_CASE("sis system carries the survival factor in both equations")
{
    const double d = 0.1;
    const double tau = 0.35;
    const auto sys = build_dde(preset_sis(0.1, d, 0.001, 1.0, tau, 1900, 100));
    REQUIRE(sys.delayed_terms().size() == 1);
    const auto& term = sys.delayed_terms()[0];
    CHECK(term.omega == doctest::Approx(d));
    CHECK(term.coefficient == doctest::Approx(std::exp(-d * tau)).epsilon(1e-15));
    CHECK(term.target == 0u);

    Eigen::VectorXd y(2);
    y << 1000, 500;
    Eigen::VectorXd lag(1);
    lag << 400;
    const auto with = sys.derivative(y, lag);
    lag << 0;
    const auto without = sys.derivative(y, lag);
    const double delayed = term.coefficient * 400;
    CHECK(with(0) - without(0) == doctest::Approx(delayed));
    CHECK(with(1) - without(1) == doctest::Approx(-delayed));
    // Eq. for I: lambda S I - d I
    CHECK(without(1) == doctest::Approx(0.001 * 1000 * 500 - d * 500));
    // Eq. for S: b (S + I) - lambda S I - d S
    CHECK(without(0) == doctest::Approx(0.1 * 1500 - 0.001 * 1000 * 500 - d * 1000));
}

TEST_CASE("state-dependent removal from a delay compartment is rejected")
{
    auto spec = preset_sis(0.1, 0.1, 0.02, 1.0, 0.2, 95, 5);
    spec.markov.push_back({"culling", 1, std::nullopt, {RateKind::mass_action, 0.01, {0, 1}}});
    CHECK_THROWS_AS(build_dde(spec), std::invalid_argument);
}

TEST_CASE("pk without delay matches the closed form")
{
    const auto sol = solve(build_dde(preset_pk(1, 1, 0, 100)), 10.0, 1e-3);
    CHECK(sol(1.0)(1) == doctest::Approx(100 / std::exp(1.0)).epsilon(1e-9));
    double worst = 0.0;
    for (double t = 0; t <= 10.0; t += 0.01)
        worst = std::max(worst, std::abs(sol(t)(1) - pk_closed_form(t)));
    CHECK(worst <= 1e-6);
}

TEST_CASE("step halving cuts the error at least eightfold")
{
    const double coarse = max_pk_error(0.02);
    const double fine = max_pk_error(0.01);
    CHECK(coarse / fine >= 8.0);
}

TEST_CASE("observed order with a delay")
{
    const auto sys = build_dde(preset_pk(1, 1, 0.2, 100));
    const auto reference = solve(sys, 10.0, 0.2 / 512);
    double errors[3];
    const double steps[3] = {0.05, 0.025, 0.0125};
    for (int k = 0; k < 3; ++k) {
        const auto sol = solve(sys, 10.0, steps[k]);
        double worst = 0.0;
        for (std::size_t j = 0; j < sol.nodes(); ++j)
            worst = std::max(worst, std::abs(sol.values()(1, static_cast<Eigen::Index>(j)) - reference(sol.time(j))(1)));
        errors[k] = worst;
    }
    CHECK(std::log2(errors[0] / errors[1]) >= 3.0);
    CHECK(std::log2(errors[1] / errors[2]) >= 3.0);
}

TEST_CASE("delay term is inactive before tau")
{
    const auto sol = solve(build_dde(preset_pk(1, 1, 0.2, 100)), 10.0, 1e-3);
    CHECK(sol(0.2)(1) == doctest::Approx(100 * (1 - std::exp(-0.2))).epsilon(1e-10));
    CHECK(sol(0.1)(1) == doctest::Approx(100 * (1 - std::exp(-0.1))).epsilon(1e-10));
}

TEST_CASE("derivative jump sits at tau")
{
    // A pure delay compartment: X' = -mu X(t - tau) jumps from 0 to -mu X0.
    ModelSpec spec;
    spec.compartments = {{0, "X"}};
    spec.delays.push_back({"exit", 0, std::nullopt, DexpParamsd(1, 0.3)});
    spec.initial_counts = {1000};
    spec.horizon = 2;
    spec.record_grid = uniform_grid(2, 3);
    const auto sol = solve(build_dde(spec), 2.0, 1e-3);
    const double h = 1e-4;
    const auto left = [&](double t) { return (sol(t)(0) - sol(t - h)(0)) / h; };
    const auto right = [&](double t) { return (sol(t + h)(0) - sol(t)(0)) / h; };
    CHECK(std::abs(left(0.3)) < 1e-6);
    CHECK(right(0.3) == doctest::Approx(-1000).epsilon(1e-3));
    // smooth elsewhere
    for (const double t : {0.15, 0.45, 0.75, 1.2})
        CHECK(std::abs(left(t) - right(t)) < 0.5);
    // continuity
    CHECK(std::abs(sol(0.3 + 1e-9)(0) - sol(0.3 - 1e-9)(0)) < 1e-5);

    // PK: A(0) = 0, so A' is continuous at tau and the jump moves to A''.
    const auto pk = solve(build_dde(preset_pk(1, 1, 0.2, 100)), 2.0, 1e-3);
    const double e = 1e-3;
    const auto second_left = [&](double t) { return (pk(t)(1) - 2 * pk(t - e)(1) + pk(t - 2 * e)(1)) / (e * e); };
    const auto second_right = [&](double t) { return (pk(t + 2 * e)(1) - 2 * pk(t + e)(1) + pk(t)(1)) / (e * e); };
    CHECK(second_left(0.2) - second_right(0.2) == doctest::Approx(100.0).epsilon(0.02));
    const double slope_left = (pk(0.2)(1) - pk(0.2 - 1e-5)(1)) / 1e-5;
    const double slope_right = (pk(0.2 + 1e-5)(1) - pk(0.2)(1)) / 1e-5;
    CHECK(std::abs(slope_left - slope_right) < 1e-2);
}

TEST_CASE("disease-free manifold")
{
    const double b = 0.2;
    const double d = 0.1;
    const auto sol = solve(build_dde(preset_sis(b, d, 0.02, 1.0, 0.2, 100, 0)), 30.0, 1e-3);
    for (double t = 0; t <= 30.0; t += 0.5) {
        const auto y = sol(t);
        CHECK(y(1) == 0.0);
        CHECK(y(0) == doctest::Approx(100 * std::exp((b - d) * t)).epsilon(1e-9));
    }
}

TEST_CASE("total population is conserved when births balance deaths")
{
    for (const double tau : {0.0, 0.2, 0.35}) {
        const auto sol = solve(build_dde(preset_sis(0.1, 0.1, 2.0 / 2000, 1.0, tau, 1900, 100)), 30.0, 1e-3);
        double drift = 0.0;
        for (std::size_t j = 0; j < sol.nodes(); ++j)
            drift = std::max(drift, std::abs(sol.values().col(static_cast<Eigen::Index>(j)).sum() - 2000));
        CHECK(drift <= 1e-6 * 2000);
    }
}

TEST_CASE("preset solutions stay non-negative")
{
    for (const auto& spec : {preset_pk(1, 1, 0.2, 100), preset_pk(1, 1, 0.35, 100),
                             preset_sis(0.1, 0.1, 0.02, 1.0, 0.2, 95, 5),
                             preset_sis(0.1, 0.1, 0.001, 1.0, 0.35, 1900, 100)}) {
        const auto sol = solve(build_dde(spec), spec.horizon, 1e-3);
        CHECK(sol.values().minCoeff() >= -1e-9);
    }
}

TEST_CASE("dense output agrees with mesh values")
{
    const auto sol = solve(build_dde(preset_pk(1, 1, 0.2, 100)), 10.0, 1e-2);
    for (std::size_t j = 0; j < sol.nodes(); j += 37)
        CHECK((sol(sol.time(j)) - sol.values().col(static_cast<Eigen::Index>(j))).norm() <= 1e-12);
    CHECK(sol(-1.0).isZero(0));
    CHECK_THROWS_AS(sol(10.5), std::out_of_range);
    const std::vector<double> grid{0, 2.5, 10};
    const auto table = sol.sample(grid);
    CHECK(table.rows() == 3);
    CHECK(table.cols() == 2);
}

TEST_CASE("step must resolve the delay")
{
    const auto sys = build_dde(preset_pk(1, 1, 0.2, 100));
    CHECK_THROWS_AS(solve(sys, 10.0, 0.06), std::invalid_argument);
    CHECK_NOTHROW(solve(sys, 10.0, 0.05));
    CHECK_THROWS_AS(solve(sys, -1.0, 0.01), std::invalid_argument);
}

TEST_CASE("endemic steady states")
{
    const double p0 = 2000;
    for (const auto& [tau, expect] : {std::pair{0.0, 1 - (1.0 + 0.1) / 2}, std::pair{0.35, 1 - (std::exp(-0.035) + 0.1) / 2}}) {
        const auto sys = build_dde(preset_sis(0.1, 0.1, 2 / p0, 1.0, tau, 1900, 100));
        Eigen::VectorXd start(2);
        start << 1000, 1000;
        const std::vector<Eigen::VectorXd> starts{start};
        const std::vector<LinearConstraint> total{{Eigen::Vector2d(1, 1), p0}};
        const auto roots = steady_states(sys, starts, total);
        REQUIRE(roots.size() == 1);
        CHECK(roots[0].converged);
        CHECK(roots[0].residual <= 1e-10);
        CHECK(roots[0].state(1) / p0 == doctest::Approx(expect).epsilon(1e-9));
        // deterministic path settles onto it
        const auto sol = solve(sys, 30.0, 1e-3);
        CHECK(std::abs(sol(30.0)(1) / p0 - expect) <= 0.005);
    }
    CHECK(1 - (std::exp(-0.035) + 0.1) / 2 == doctest::Approx(0.4672).epsilon(1e-4));
}

TEST_CASE("pk equilibrium")
{
    const auto sys = build_dde(preset_pk(1, 1, 0.2, 100));
    Eigen::VectorXd start(2);
    start << 50, 20;
    const std::vector<Eigen::VectorXd> starts{start, Eigen::VectorXd::Zero(2)};
    const auto roots = steady_states(sys, starts);
    for (const auto& r : roots) {
        CHECK(r.converged);
        CHECK(r.state.norm() <= 1e-10);
    }
}
