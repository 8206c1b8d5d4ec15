#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "delaysim/lambert_w.hpp"

using delaysim::LambertBranch;
using delaysim::lambert_w;

namespace {

double residual(double w, double x) { return std::abs(w * std::exp(w) - x); }

} // namespace

TEST_CASE("principal branch at the origin and the branch point")
{
    CHECK(lambert_w(LambertBranch::principal, 0.0) == 0.0);
    CHECK(lambert_w(LambertBranch::principal, -1.0 / std::numbers::e) == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(lambert_w(LambertBranch::lower, -1.0 / std::numbers::e) == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("principal branch at -0.3")
{
    const double w = lambert_w(LambertBranch::principal, -0.3);
    CHECK(residual(w, -0.3) <= 1e-12);
    CHECK(w > -1.0);
    CHECK(w < 0.0);
}

TEST_CASE("known values")
{
    // omega constant
    CHECK(lambert_w(LambertBranch::principal, 1.0) == doctest::Approx(0.5671432904097838).epsilon(1e-15));
    CHECK(lambert_w(LambertBranch::principal, std::numbers::e) == doctest::Approx(1.0).epsilon(1e-15));
    // W_{-1}(-ln2/2) = -ln 4 since -2 ln2 e^{-2 ln 2} = -ln2/2
    CHECK(lambert_w(LambertBranch::lower, -std::numbers::ln2 / 2) ==
          doctest::Approx(-2 * std::numbers::ln2).epsilon(1e-14));
    CHECK(lambert_w(LambertBranch::principal, -std::numbers::ln2 / 2) ==
          doctest::Approx(-std::numbers::ln2).epsilon(1e-14));
}

TEST_CASE("defining residual over random arguments")
{
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> neg(-1.0 / std::numbers::e, 0.0);
    std::uniform_real_distribution<double> pos(0.0, 50.0);
    for (int i = 0; i < 200; ++i) {
        double x = neg(gen);
        if (x == 0.0)
            continue;
        const double w0 = lambert_w(LambertBranch::principal, x);
        const double wm1 = lambert_w(LambertBranch::lower, x);
        CHECK(residual(w0, x) <= 1e-12);
        CHECK(residual(wm1, x) <= 1e-12);
        CHECK(w0 >= -1.0);
        CHECK(wm1 <= -1.0);
        x = pos(gen);
        CHECK(residual(lambert_w(LambertBranch::principal, x), x) <= 1e-12 * std::max(1.0, x));
    }
}

TEST_CASE("lower branch far from the branch point")
{
    for (const double x : {-1e-3, -1e-8, -1e-30, -1e-300}) {
        const double w = lambert_w(LambertBranch::lower, x);
        CHECK(residual(w, x) <= 1e-12);
        CHECK(std::abs(w * std::exp(w) / x - 1.0) < 1e-12);
    }
}

TEST_CASE("domain errors")
{
    CHECK_THROWS_AS(lambert_w(LambertBranch::principal, -0.4), std::domain_error);
    CHECK_THROWS_AS(lambert_w(LambertBranch::lower, 0.0), std::domain_error);
    CHECK_THROWS_AS(lambert_w(LambertBranch::lower, 0.1), std::domain_error);
    CHECK_THROWS_AS(lambert_w(LambertBranch::lower, -0.5), std::domain_error);
    CHECK_THROWS_AS(lambert_w(LambertBranch::principal, std::nan("")), std::domain_error);
}
