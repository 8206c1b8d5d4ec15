// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "delaysim/cli.hpp"
#include "delaysim/dde.hpp"
#include "delaysim/dexp.hpp"
#include "delaysim/lambert_w.hpp"
#include "delaysim/sampler.hpp"
#include "delaysim/ssa.hpp"

using namespace delaysim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
    return buf;
}

int failures = 0;
int ran = 0;
std::vector<int> selected;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body)
{
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end())
        return;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < budget_s;
    const bool pass = out.pass && in_time;
    if (!pass)
        ++failures;
    std::printf("[%s] %2d %-34s %s (%.2f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name, out.detail.c_str(),
                secs, budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

constexpr std::uint64_t kSeed = 20240611;

// ---------------------------------------------------------------------------

Outcome dexp_shape()
{
    std::mt19937_64 gen(kSeed);
    std::uniform_real_distribution<double> mu_dist(0.05, 20.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool constant = true;
    for (int i = 0; i < 20; ++i) {
        const double mu = mu_dist(gen);
        const DexpParamsd p(mu, unit(gen) / (std::numbers::e * mu));
        for (int j = 0; j <= 200; ++j)
            constant = constant && dexp_eval(p.tau * j / 200.0, p) == 1.0;
    }

    const DexpParamsd solid(1, 0.3);
    bool monotone = true;
    double prev = 1.0;
    double lowest_solid = 1.0;
    for (int j = 0; j <= 20000; ++j) {
        const double v = dexp_eval(20.0 * j / 20000.0, solid);
        monotone = monotone && v >= 0.0 && v <= prev;
        lowest_solid = std::min(lowest_solid, v);
        prev = v;
    }

    const DexpParamsd dashed(1, 0.7);
    double lowest = 1.0;
    for (int j = 0; j <= 10000; ++j)
        lowest = std::min(lowest, dexp_eval(10 * dashed.tau * j / 10000.0, dashed));

    return {constant && monotone && lowest < 0.0,
            std::string("constant=") + (constant ? "yes" : "no") + " monotone=" + (monotone ? "yes" : "no") +
                fmt(" min(mu*tau=0.7)=%.4g", lowest)};
}

Outcome sample_moments()
{
    const DexpQuantileTable table(DexpParamsd(1, 0.3));
    RngStream rng(kSeed, 0);
    const int n = 1000000;
    detail::CompensatedSum<double> sum;
    detail::CompensatedSum<double> sq;
    std::vector<double> draws(n);
    for (auto& t : draws) {
        t = sample_dexp(rng, table);
        sum.add(t);
    }
    const double mean = sum.value() / n;
    for (const double t : draws)
        sq.add((t - mean) * (t - mean));
    const double var = sq.value() / (n - 1);
    const double mean_tol = 3 * std::sqrt(0.4 / n);
    const bool ok = std::abs(mean - 1.0) <= mean_tol && std::abs(var - 0.4) <= 0.004;
    return {ok, fmt("mean=%.6f (|err| %.2e <= %.2e)", mean, std::abs(mean - 1), mean_tol) +
                    fmt(" variance=%.5f (rel err %.2e <= 1e-2)", var, std::abs(var - 0.4) / 0.4)};
}

Outcome empirical_survival()
{
    const DexpParamsd p(1, 0.3);
    const DexpQuantileTable table(p);
    RngStream rng(kSeed, 1);
    const int n = 100000;
    std::vector<double> draws(n);
    for (auto& t : draws)
        t = sample_dexp(rng, table);
    std::sort(draws.begin(), draws.end());
    const double band = std::sqrt(std::log(2 / 0.01) / (2.0 * n));
    double worst = 0.0;
    for (int j = 0; j < 50; ++j) {
        const double t = 8.0 * j / 49.0;
        const auto above = draws.end() - std::upper_bound(draws.begin(), draws.end(), t);
        worst = std::max(worst, std::abs(static_cast<double>(above) / n - dexp_eval(t, p)));
    }
    return {worst <= band, fmt("max |S_n - dexp| = %.3e, DKW 99%% band %.3e", worst, band)};
}

Outcome appendix_identities()
{
    std::mt19937_64 gen(kSeed);
    std::uniform_real_distribution<double> mu_dist(0.1, 10.0);
    std::uniform_real_distribution<double> prod_dist(0.0, 1 / std::numbers::e);
    double lambert_worst = 0.0;
    double char_worst = 0.0;
    int draws = 0;
    while (draws < 100) {
        const double x = prod_dist(gen);
        const double mu = mu_dist(gen);
        if (!(x > 0.0 && x < 1 / std::numbers::e))
            continue;
        ++draws;
        for (const auto branch : {LambertBranch::principal, LambertBranch::lower}) {
            const double w = lambert_w(branch, -x);
            lambert_worst = std::max(lambert_worst, std::abs(w * std::exp(w) + x));
        }
        const DexpParamsd p(mu, x / mu);
        const auto roots = characteristic_roots(p);
        for (const double lambda : {roots.lambda0, roots.lambda_neg1})
            char_worst = std::max(char_worst, std::abs(lambda + mu * std::exp(-lambda * p.tau)));
    }

    double deriv_worst = 0.0;
    for (const auto& p : {DexpParamsd(1, 0.3), DexpParamsd(2, 0.1), DexpParamsd(1, 1 / std::numbers::e)}) {
        const double h = 1e-6;
        for (double t = 0.005; t < 20 / p.mu; t += 0.0113) {
            const double r = t / p.tau;
            if (std::abs(r - std::round(r)) * p.tau < 1e-4)
                continue;
            const double fd = (dexp_eval(t + h, p) - dexp_eval(t - h, p)) / (2 * h);
            deriv_worst = std::max(deriv_worst, std::abs(fd + p.mu * dexp_eval(t - p.tau, p)));
        }
    }
    const bool ok = lambert_worst <= 1e-12 && char_worst <= 1e-10 && deriv_worst <= 1e-5;
    return {ok, fmt("W residual %.1e, root residual %.1e, derivative identity %.1e", lambert_worst, char_worst,
                    deriv_worst)};
}

Outcome delay_only_ensemble()
{
    const DexpParamsd p(1, 0.3);
    ModelSpec spec;
    spec.compartments = {{0, "X"}};
    spec.delays.push_back({"exit", 0, std::nullopt, p});
    spec.initial_counts = {1000};
    spec.horizon = 5.0;
    spec.record_grid = uniform_grid(spec.horizon, 51);
    const auto summary = run_ensemble(spec, 2000, kSeed);
    double worst = 0.0;
    int outside = 0;
    for (std::size_t j = 0; j < summary.grid.size(); ++j) {
        const auto row = static_cast<Eigen::Index>(j);
        const double diff = std::abs(summary.mean(row, 0) - 1000 * dexp_eval(summary.grid[j], p));
        const double se = summary.std_error(row, 0);
        if (diff > 3 * se)
            ++outside;
        if (se > 0)
            worst = std::max(worst, diff / se);
    }
    return {outside == 0, fmt("%.0f of 51 grid points outside 3 SE, max |diff|/SE = %.2f", outside, worst)};
}

Outcome pk_reproduction()
{
    // (a) closed form without delay
    const auto exact = solve(build_dde(preset_pk(1, 1, 0, 100)), 10.0, 1e-3);
    double err = 0.0;
    for (std::size_t j = 0; j < exact.nodes(); ++j) {
        const double t = exact.time(j);
        err = std::max(err, std::abs(exact.values()(1, static_cast<Eigen::Index>(j)) - 100 * t * std::exp(-t)));
    }

    // (b) ensemble against the deterministic solution, (c) peak ordering
    int outside = 0;
    double worst = 0.0;
    std::vector<double> peaks;
    for (const double tau : {0.0, 0.2, 0.35}) {
        const auto spec = preset_pk(1, 1, tau, 100);
        const auto sol = solve(build_dde(spec), spec.horizon, 1e-3);
        const Eigen::MatrixXd det = sol.sample(spec.record_grid);
        peaks.push_back(sol.values().row(1).maxCoeff());
        const auto summary = run_ensemble(spec, 2000, kSeed);
        for (Eigen::Index j = 0; j < det.rows(); ++j) {
            for (Eigen::Index c = 0; c < det.cols(); ++c) {
                const double diff = std::abs(summary.mean(j, c) - det(j, c));
                const double se = summary.std_error(j, c);
                if (diff > 3 * se)
                    ++outside;
                if (se > 0)
                    worst = std::max(worst, diff / se);
            }
        }
    }
    const bool ordered = peaks[2] > peaks[1] && peaks[1] > peaks[0];
    const bool ok = err <= 1e-6 && outside == 0 && ordered;
    return {ok, fmt("(a) max err %.1e (b) %.0f points outside 3 SE, max |diff|/SE %.2f", err, outside, worst) +
                    fmt(" (c) peaks %.3f < %.3f < %.3f", peaks[0], peaks[1], peaks[2])};
}

struct SisDeviation {
    double tau;
    double max_dev;
};

std::vector<SisDeviation> large_population;

double sis_max_deviation(double p0, std::int64_t i0, double tau, std::optional<double>* extinction)
{
    auto spec = preset_sis(0.1, 0.1, 2 / p0, 1.0, tau, static_cast<std::int64_t>(p0) - i0, i0);
    spec.horizon = 20.0;
    spec.record_grid = uniform_grid(spec.horizon, 201);
    const auto sol = solve(build_dde(spec), spec.horizon, 1e-3);
    const Eigen::MatrixXd det = sol.sample(spec.record_grid);
    EnsembleOptions opts;
    opts.extinction_compartment = spec.index_of("I");
    const auto summary = run_ensemble(spec, 2000, kSeed, opts);
    if (extinction)
        *extinction = summary.extinction->fraction;
    const auto col = static_cast<Eigen::Index>(spec.index_of("I"));
    return ((summary.mean.col(col) - det.col(col)) / p0).cwiseAbs().maxCoeff();
}

Outcome sis_large()
{
    large_population.clear();
    std::string detail = "max |mean - det| I/P0:";
    bool ok = true;
    for (const double tau : {0.0, 0.2, 0.35}) {
        const double dev = sis_max_deviation(2000, 100, tau, nullptr);
        large_population.push_back({tau, dev});
        ok = ok && dev <= 0.02;
        detail += fmt(" tau=%.2f: %.4f", tau, dev);
    }
    return {ok, detail + " (limit 0.02)"};
}

Outcome sis_small()
{
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < 3; ++k) {
        const double tau = std::array{0.0, 0.2, 0.35}[k];
        std::optional<double> extinct;
        const double dev = sis_max_deviation(100, 5, tau, &extinct);
        const double large = k < large_population.size() ? large_population[k].max_dev : INFINITY;
        ok = ok && extinct.value_or(0) > 0.0 && dev > large;
        detail += fmt("tau=%.2f: extinct %.3f, dev %.4f vs %.4f; ", tau, extinct.value_or(0), dev, large);
    }
    return {ok, detail};
}

Outcome endemic_levels()
{
    const double p0 = 2000;
    std::string detail;
    bool ok = true;
    for (const double tau : {0.0, 0.35}) {
        const auto sys = build_dde(preset_sis(0.1, 0.1, 2 / p0, 1.0, tau, 1900, 100));
        const std::vector<Eigen::VectorXd> starts{Eigen::Vector2d(1000, 1000)};
        const std::vector<LinearConstraint> total{{Eigen::Vector2d(1, 1), p0}};
        const auto root = steady_states(sys, starts, total).front();
        const double fixed = root.state(1) / p0;
        const auto sol = solve(sys, 30.0, 1e-3);
        const double at30 = sol(30.0)(1) / p0;
        double drift = 0.0;
        for (std::size_t j = 0; j < sol.nodes(); ++j)
            drift = std::max(drift, std::abs(sol.values().col(static_cast<Eigen::Index>(j)).sum() - p0));
        ok = ok && root.converged && std::abs(at30 - fixed) <= 0.005 && drift <= 1e-6 * p0;
        detail += fmt("tau=%.2f: I(30)/P0 %.4f vs fixed point %.4f, drift %.1e; ", tau, at30, fixed, drift);
    }
    return {ok, detail};
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome reproducibility()
{
    const auto root = fs::temp_directory_path() / "delaysim_acceptance_repro";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::vector<std::string>>> configs{
        {"pk", {"--preset", "pk", "--tau", "0.2", "--paths", "2000"}},
        {"sis", {"--preset", "sis", "--pop", "100", "--i0", "5", "--tau", "0.35", "--paths", "2000"}},
    };
    int compared = 0;
    bool identical = true;
    for (const auto& [name, base] : configs) {
        std::vector<std::string> outputs;
        for (const auto& [tag, par] : {std::pair{"a", "1"}, std::pair{"b", "1"}, std::pair{"c", "8"}}) {
            const auto dir = root / (name + "_" + tag);
            std::vector<std::string> args{"simulate"};
            args.insert(args.end(), base.begin(), base.end());
            for (const auto& extra : {"--seed", "7", "--save-paths", "3", "--parallel", par})
                args.emplace_back(extra);
            args.emplace_back("--out");
            args.push_back(dir.string());
            std::ostringstream sink;
            if (cli::run(args, sink, sink) != cli::kOk)
                return {false, "simulate failed: " + sink.str()};
            outputs.push_back(dir.string());
        }
        for (const auto* file : {"deterministic.csv", "ensemble.csv", "path_0.csv", "path_2.csv"}) {
            const auto first = slurp(fs::path(outputs[0]) / file);
            identical = identical && !first.empty();
            for (std::size_t k = 1; k < outputs.size(); ++k) {
                identical = identical && slurp(fs::path(outputs[k]) / file) == first;
                ++compared;
            }
        }
    }
    fs::remove_all(root);
    return {identical, fmt("%.0f file comparisons (repeat run, parallelism 1 vs 8), all byte-identical: ", compared) +
                           (identical ? "yes" : "no")};
}

} // namespace

// Optional arguments pick criteria by number; criterion 8 compares against
// the deviations measured by criterion 7.
int main(int argc, char** argv)
{
    for (int i = 1; i < argc; ++i)
        selected.push_back(std::atoi(argv[i]));
    criterion(1, "dexp shape", 1, dexp_shape);
    criterion(2, "moments of 10^6 draws", 10, sample_moments);
    criterion(3, "empirical survival (DKW)", 5, empirical_survival);
    criterion(4, "appendix identities", 1, appendix_identities);
    criterion(5, "delay-only ensemble = survival", 30, delay_only_ensemble);
    criterion(6, "PK reproduction", 60, pk_reproduction);
    criterion(7, "SIS large population", 300, sis_large);
    criterion(8, "SIS small population", 60, sis_small);
    criterion(9, "endemic levels", 10, endemic_levels);
    criterion(10, "reproducibility", 60, reproducibility);
    std::printf("%d of %d criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
