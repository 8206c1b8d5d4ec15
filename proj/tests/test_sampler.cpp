#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "delaysim/sampler.hpp"

using namespace delaysim;

TEST_CASE("quantile examples")
{
    const DexpQuantileTable table(DexpParamsd(1, 0.3));
    CHECK(table.quantile(0.9) == doctest::Approx(0.4).epsilon(1e-14));
    const DexpQuantileTable expo(DexpParamsd(1, 0));
    CHECK(expo.quantile(0.5) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
}

TEST_CASE("linear segment is exact")
{
    const DexpParamsd p(2, 0.15);
    const DexpQuantileTable table(p);
    for (const double u : {0.999, 0.9, 0.75, 1 - p.product()})
        CHECK(table.quantile(u) == p.tau + (1 - u) / p.mu);
}

TEST_CASE("rejects invalid parameters")
{
    CHECK_THROWS_AS(DexpQuantileTable(DexpParamsd(1, 0.7)), std::domain_error);
}

TEST_CASE("table values strictly decrease")
{
    for (const double x : {0.05, 0.3, 1 / std::numbers::e}) {
        const DexpQuantileTable table(DexpParamsd(1, x));
        const auto v = table.breakpoint_values();
        REQUIRE(v.size() >= 3);
        CHECK(v[0] == 1.0);
        CHECK(v[1] == 1.0);
        for (std::size_t n = 2; n < v.size(); ++n)
            REQUIRE(v[n] < v[n - 1]);
        // covers the clamp floor, or hands over to the exponential tail
        CHECK((v.back() < DexpQuantileTable::kUniformMin || v.size() == DexpQuantileTable::kMaxBreakpoints));
    }
}

TEST_CASE("inversion residual")
{
    RngStream rng(5, 0);
    for (const auto& p : {DexpParamsd(1, 0.3), DexpParamsd(4, 0.05), DexpParamsd(1, 1 / std::numbers::e),
                          DexpParamsd(1, 0.001)}) {
        const DexpQuantileTable table(p);
        for (int i = 0; i < 20000; ++i) {
            // spread u over many decades
            const double u = std::pow(rng.uniform_open(), 1 + 20 * rng.uniform_open());
            if (u < DexpQuantileTable::kUniformMin)
                continue;
            const double t = table.quantile(u);
            REQUIRE(t >= p.tau);
            REQUIRE(std::abs(dexp_eval(t, p) - u) <= 1e-10);
        }
    }
}

TEST_CASE("clamped uniforms stay finite")
{
    const DexpQuantileTable table(DexpParamsd(1, 0.3));
    const double lo = table.quantile(0.0);
    const double hi = table.quantile(1.0);
    CHECK(std::isfinite(lo));
    CHECK(hi >= 0.3);
    CHECK(lo == table.quantile(DexpQuantileTable::kUniformMin));
}

TEST_CASE("sample mean and variance")
{
    const DexpParamsd p(1, 0.3);
    const DexpQuantileTable table(p);
    RngStream rng(2024, 0);
    const int n = 1000000;
    double sum = 0.0;
    double sq = 0.0;
    double smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double t = sample_dexp(rng, table);
        sum += t;
        sq += t * t;
        smallest = std::min(smallest, t);
    }
    const double mean = sum / n;
    const double var = (sq - n * mean * mean) / (n - 1);
    CHECK(std::abs(mean - 1.0) <= 3 * std::sqrt(0.4 / n));
    CHECK(std::abs(var - 0.4) <= 0.01 * 0.4);
    CHECK(smallest >= 0.3);
}

TEST_CASE("empirical survival within the DKW band")
{
    const DexpParamsd p(1, 0.3);
    const DexpQuantileTable table(p);
    RngStream rng(99, 4);
    const int n = 100000;
    std::vector<double> draws(n);
    for (auto& d : draws)
        d = sample_dexp(rng, table);
    std::sort(draws.begin(), draws.end());
    const double band = std::sqrt(std::log(2 / 0.01) / (2.0 * n));
    for (int j = 0; j < 50; ++j) {
        const double t = 6.0 * j / 49.0;
        const auto above = draws.end() - std::upper_bound(draws.begin(), draws.end(), t);
        const double empirical = static_cast<double>(above) / n;
        CHECK(std::abs(empirical - dexp_eval(t, p)) <= band);
    }
}

TEST_CASE("reproducible draws")
{
    const DexpQuantileTable table(DexpParamsd(1.3, 0.2));
    RngStream a(17, 3);
    RngStream b(17, 3);
    for (int i = 0; i < 10000; ++i)
        REQUIRE(sample_dexp(a, table) == sample_dexp(b, table));
}

TEST_CASE("markov holding times")
{
    CHECK(std::isinf(markov_holding_from_uniform(0.5, 0.0)));
    RngStream rng(1, 0);
    CHECK(std::isinf(sample_markov_holding(rng, 0.0)));
    CHECK(markov_holding_from_uniform(0.5, 2.0) == doctest::Approx(std::numbers::ln2 / 2).epsilon(1e-15));
    CHECK_THROWS_AS(sample_markov_holding(rng, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(markov_holding_from_uniform(0.5, -1.0), std::invalid_argument);

    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        sum += sample_markov_holding(rng, 3.0);
    CHECK(std::abs(sum / n - 1.0 / 3.0) <= 3 * (1.0 / 3.0) / 1000.0);
}
