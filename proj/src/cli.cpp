#include "delaysim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"

#include "delaysim/config.hpp"
#include "delaysim/csv.hpp"
#include "delaysim/dde.hpp"
#include "delaysim/dexp.hpp"
#include "delaysim/sampler.hpp"
#include "delaysim/ssa.hpp"

namespace delaysim::cli {

namespace {

using nlohmann::json;

constexpr const char* kPresetNames = "pk, sis";

/// Preset parameters: flag values win over config-file values, which win
/// over the defaults.
struct PresetParams {
    std::map<std::string, double> values;

    double get(const std::string& key, double fallback) const
    {
        const auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
    bool has(const std::string& key) const { return values.count(key) != 0; }
};

std::int64_t as_count(double v, const char* name)
{
    if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e15)
        throw ConfigError(std::string(name) + " must be a non-negative integer");
    return static_cast<std::int64_t>(v);
}

ModelSpec build_preset(const std::string& name, const PresetParams& p)
{
    if (name == "pk")
        return preset_pk(p.get("k", 1.0), p.get("mu", 1.0), p.get("tau", 0.2),
                         as_count(p.get("x0", 100.0), "x0"));
    if (name == "sis") {
        const double i0 = p.get("i0", 5.0);
        double pop = p.get("pop", 100.0);
        double s0 = pop - i0;
        if (p.has("s0")) {
            s0 = p.get("s0", 0.0);
            if (!p.has("pop"))
                pop = s0 + i0;
        }
        if (!(pop > 0.0))
            throw ConfigError("sis preset: population must be positive");
        return preset_sis(p.get("b", 0.1), p.get("d", 0.1), p.get("lambda", 2.0 / pop), p.get("gamma", 1.0),
                          p.get("tau", 0.0), as_count(s0, "s0"), as_count(i0, "i0"));
    }
    throw ConfigError("unknown preset '" + name + "' (valid presets: " + kPresetNames + ")");
}

Mode parse_mode(const std::string& text)
{
    if (text == "stochastic")
        return Mode::stochastic;
    if (text == "deterministic")
        return Mode::deterministic;
    if (text == "both")
        return Mode::both;
    throw ConfigError("unknown mode '" + text + "' (expected stochastic, deterministic or both)");
}

std::vector<std::string> names_of(const ModelSpec& spec)
{
    std::vector<std::string> names;
    for (const auto& c : spec.compartments)
        names.push_back(c.name);
    return names;
}

double smallest_delay(const ModelSpec& spec)
{
    double tau_min = 0.0;
    for (const auto& d : spec.delays)
        if (d.params.tau > 0.0 && (tau_min == 0.0 || d.params.tau < tau_min))
            tau_min = d.params.tau;
    return tau_min;
}

std::ostream& open_or(std::ofstream& file, const std::string& path, std::ostream& fallback)
{
    if (path.empty())
        return fallback;
    file.open(path, std::ios::binary);
    if (!file)
        throw ConfigError("cannot write '" + path + "'");
    return file;
}

struct SimulateFlags {
    std::string preset;
    std::string config;
    std::map<std::string, double> params;
    std::string mode;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    double step = 0.0;
    std::size_t grid = 0;
    double horizon = 0.0;
    std::string out;
    std::size_t parallel = 0;
    std::size_t save_paths = 0;
    std::string extinction;
};

RunConfig resolve_simulate(const SimulateFlags& flags, const CLI::App& sub)
{
    const auto given = [&](const char* name) { return sub.count(name) > 0; };

    json file;
    if (!flags.config.empty())
        file = read_json_file(flags.config);
    if (!flags.config.empty() && !file.is_object())
        throw ConfigError("config file must hold a JSON object");
    if (flags.preset.empty() && flags.config.empty())
        throw ConfigError("simulate needs --preset or --config (valid presets: " + std::string(kPresetNames) + ")");

    RunConfig cfg;
    std::string preset = flags.preset;
    if (preset.empty() && file.contains("preset")) {
        if (!file.at("preset").is_string())
            throw ConfigError("config: 'preset' must be a string");
        preset = file.at("preset").get<std::string>();
    }

    if (!preset.empty()) {
        PresetParams params;
        if (file.contains("params")) {
            if (!file.at("params").is_object())
                throw ConfigError("config: 'params' must be an object");
            for (const auto& [key, value] : file.at("params").items()) {
                if (!value.is_number())
                    throw ConfigError("config: preset parameter '" + key + "' must be a number");
                params.values[key] = value.get<double>();
            }
        }
        for (const auto& [key, value] : flags.params)
            params.values[key] = value;
        cfg.model = build_preset(preset, params);
        if (file.contains("horizon")) {
            json view = model_to_json(cfg.model);
            view["horizon"] = file.at("horizon");
            view["grid"] = file.contains("grid") ? file.at("grid") : json{{"points", kDefaultGridPoints}};
            cfg.model = model_from_json(view);
        }
        if (preset == "sis")
            cfg.extinction_compartment = cfg.model.index_of("I");
    } else {
        cfg.model = model_from_json(file);
    }

    if (given("--horizon") || given("--grid")) {
        const double horizon = given("--horizon") ? flags.horizon : cfg.model.horizon;
        const std::size_t points = given("--grid") ? flags.grid : cfg.model.record_grid.size();
        if (!(horizon > 0.0))
            throw ConfigError("--horizon must be positive");
        if (points == 0)
            throw ConfigError("--grid must be at least 1");
        cfg.model.horizon = horizon;
        cfg.model.record_grid = uniform_grid(horizon, points);
    }
    require_valid(cfg.model);

    const json run = file.contains("run") ? file.at("run") : json::object();
    if (!run.is_object())
        throw ConfigError("config: 'run' must be an object");
    try {
        if (run.contains("mode"))
            cfg.mode = parse_mode(run.at("mode").get<std::string>());
        if (run.contains("paths"))
            cfg.n_paths = run.at("paths").get<std::size_t>();
        if (run.contains("seed"))
            cfg.seed = run.at("seed").get<std::uint64_t>();
        if (run.contains("step"))
            cfg.step = run.at("step").get<double>();
        if (run.contains("parallel"))
            cfg.parallelism = run.at("parallel").get<std::size_t>();
        if (run.contains("save_paths"))
            cfg.save_paths = run.at("save_paths").get<std::size_t>();
        if (run.contains("extinction"))
            cfg.extinction_compartment = cfg.model.index_of(run.at("extinction").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config 'run' section: ") + e.what());
    }

    if (given("--mode"))
        cfg.mode = parse_mode(flags.mode);
    if (given("--paths"))
        cfg.n_paths = flags.paths;
    if (given("--seed"))
        cfg.seed = flags.seed;
    if (given("--parallel"))
        cfg.parallelism = flags.parallel;
    if (given("--save-paths"))
        cfg.save_paths = flags.save_paths;
    if (given("--out"))
        cfg.output = flags.out;
    if (given("--extinction")) {
        if (flags.extinction.empty() || flags.extinction == "none")
            cfg.extinction_compartment.reset();
        else
            cfg.extinction_compartment = cfg.model.index_of(flags.extinction);
    }

    const double tau_min = smallest_delay(cfg.model);
    if (given("--step"))
        cfg.step = flags.step;
    else if (!run.contains("step") && tau_min > 0.0)
        cfg.step = std::min(cfg.step, tau_min / 4.0);

    if (cfg.mode != Mode::deterministic && cfg.n_paths < 1)
        throw ConfigError("--paths must be at least 1");
    if (cfg.mode != Mode::stochastic) {
        if (!(cfg.step > 0.0))
            throw ConfigError("--step must be positive");
        if (tau_min > 0.0 && cfg.step > tau_min / 4.0 * (1.0 + 1e-12))
            throw ConfigError("--step must not exceed a quarter of the smallest delay (" +
                              format_shortest(tau_min / 4.0) + ")");
    }
    return cfg;
}

int dexp_eval_cmd(double mu, double tau, double tmin, double tmax, std::size_t points, const std::string& path,
                  std::ostream& out)
{
    const DexpParamsd p(mu, tau);
    if (points < 1)
        throw ConfigError("--points must be at least 1");
    if (!(tmax > tmin) && points > 1)
        throw ConfigError("--tmax must exceed --tmin");
    std::vector<double> times(points);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(points), 1);
    for (std::size_t j = 0; j < points; ++j) {
        const double frac = points == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(points - 1);
        times[j] = j + 1 == points && points > 1 ? tmax : tmin + (tmax - tmin) * frac;
        values(static_cast<Eigen::Index>(j), 0) = dexp_eval(times[j], p);
    }
    std::ofstream file;
    const std::vector<std::string> header{"t", "dexp"};
    write_csv(open_or(file, path, out), header, times, values);
    return kOk;
}

int dexp_sample_cmd(double mu, double tau, std::size_t n, std::uint64_t seed, std::uint64_t stream,
                    const std::string& path, std::ostream& out, std::ostream& err)
{
    const DexpParamsd p(mu, tau);
    if (!is_distribution_valid(p))
        throw ConfigError("invalid distribution: mu*tau = " + format_shortest(p.product()) + " > 1/e");
    const DexpQuantileTable table(p);
    RngStream rng(seed, stream);
    std::ofstream file;
    std::ostream& sink = open_or(file, path, out);
    sink << "t\n";
    detail::CompensatedSum<double> sum;
    detail::CompensatedSum<double> sum_sq;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = sample_dexp(rng, table);
        sink << format_shortest(t) << '\n';
        sum.add(t);
        sum_sq.add(t * t);
    }
    if (n > 0) {
        const double mean = sum.value() / static_cast<double>(n);
        const double var = n > 1 ? (sum_sq.value() - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1) : 0.0;
        err << "n = " << n << ", mean = " << format_shortest(mean) << ", variance = " << format_shortest(var)
            << '\n';
    }
    return kOk;
}

int dexp_validate_cmd(double mu, double tau, std::ostream& out)
{
    const DexpParamsd p(mu, tau);
    const std::string product = format_shortest(p.product());
    if (!is_distribution_valid(p)) {
        out << "invalid: μτ = " << product << " > 1/e\n";
        return kOk;
    }
    out << "valid: μτ = " << product << " ≤ 1/e\n";
    const auto m = moments(p);
    out << "mean = " << format_shortest(m.mean) << ", variance = " << format_shortest(m.variance) << '\n';
    if (p.tau == 0.0) {
        out << "characteristic roots: undefined for τ = 0\n";
    } else if (!(p.product() < 1.0 / std::numbers::e)) {
        out << "characteristic roots: undefined at μτ = 1/e (the two real roots coincide)\n";
    } else {
        const auto roots = characteristic_roots(p);
        out << "lambda0 = " << format_shortest(roots.lambda0) << '\n';
        out << "lambda_-1 = " << format_shortest(roots.lambda_neg1) << '\n';
    }
    return kOk;
}

} // namespace

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& /*err*/)
{
    const auto& spec = config.model;
    std::filesystem::create_directories(config.output);
    const auto names = names_of(spec);

    if (config.mode != Mode::stochastic) {
        const auto sys = build_dde(spec);
        const auto sol = solve(sys, spec.horizon, config.step);
        const Eigen::MatrixXd table = sol.sample(spec.record_grid);
        std::vector<std::string> header{"t"};
        header.insert(header.end(), names.begin(), names.end());
        const auto path = config.output / "deterministic.csv";
        write_csv_file(path, header, spec.record_grid, table);
        out << "wrote " << path.string() << '\n';
    }

    if (config.mode != Mode::deterministic) {
        EnsembleOptions options;
        options.parallelism = config.parallelism;
        options.extinction_compartment = config.extinction_compartment;
        options.keep_paths = config.save_paths;
        const auto summary = run_ensemble(spec, config.n_paths, config.seed, options);

        std::vector<std::string> header{"t"};
        const auto cols = static_cast<Eigen::Index>(names.size());
        Eigen::MatrixXd table(summary.mean.rows(), 3 * cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& name = names[static_cast<std::size_t>(c)];
            header.push_back(name + "_mean");
            header.push_back(name + "_std");
            header.push_back(name + "_stderr");
            table.col(3 * c) = summary.mean.col(c);
            table.col(3 * c + 1) = summary.variance.col(c).array().sqrt().matrix();
            table.col(3 * c + 2) = summary.std_error.col(c);
        }
        const auto path = config.output / "ensemble.csv";
        write_csv_file(path, header, summary.grid, table);
        out << "wrote " << path.string() << " (" << summary.n_paths << " paths)\n";

        std::vector<std::string> path_header{"t"};
        path_header.insert(path_header.end(), names.begin(), names.end());
        for (std::size_t r = 0; r < summary.kept_paths.size(); ++r) {
            const auto file = config.output / ("path_" + std::to_string(r) + ".csv");
            write_csv_file(file, path_header, summary.grid, summary.kept_paths[r].counts_at_grid.cast<double>());
        }
        if (summary.extinction) {
            const auto& e = *summary.extinction;
            out << "extinction fraction (" << names[e.compartment] << "): " << format_shortest(e.fraction) << " ("
                << e.extinct_paths << "/" << summary.n_paths << ")\n";
        }
    }
    return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Delay compartment models: exact stochastic simulation and delay differential equations",
                 "delaysim"};
    app.require_subcommand(1);

    SimulateFlags sf;
    auto* sim = app.add_subcommand("simulate", "Run a preset or config model stochastically and/or deterministically");
    sim->add_option("--preset", sf.preset, "Preset model (pk, sis)");
    sim->add_option("--config", sf.config, "JSON model or run config file");
    for (const char* key : {"k", "mu", "tau", "x0", "b", "d", "lambda", "gamma", "s0", "i0", "pop"}) {
        auto* opt = sim->add_option_function<double>(std::string("--") + key,
                                                     [&sf, key](const double& v) { sf.params[key] = v; },
                                                     std::string("Preset parameter ") + key);
        (void)opt;
    }
    sim->add_option("--mode", sf.mode, "stochastic, deterministic or both");
    sim->add_option("--paths", sf.paths, "Number of stochastic sample paths");
    sim->add_option("--seed", sf.seed, "Ensemble seed");
    sim->add_option("--step", sf.step, "Deterministic solver step");
    sim->add_option("--grid", sf.grid, "Number of evenly spaced recording times");
    sim->add_option("--horizon", sf.horizon, "Simulation end time");
    sim->add_option("--out", sf.out, "Output directory");
    sim->add_option("--parallel", sf.parallel, "Worker threads (0 = hardware parallelism)");
    sim->add_option("--save-paths", sf.save_paths, "Write path_<r>.csv for the first r replicas");
    sim->add_option("--extinction", sf.extinction, "Compartment tracked for extinction (or none)");

    auto* dexp = app.add_subcommand("dexp", "Delay exponential function utilities");
    dexp->require_subcommand(1);
    double mu = 1.0;
    double tau = 0.0;
    double tmin = 0.0;
    double tmax = 5.0;
    std::size_t points = 200;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    std::string dexp_out;
    auto* d_eval = dexp->add_subcommand("eval", "Tabulate dexp on an even grid");
    auto* d_sample = dexp->add_subcommand("sample", "Draw waiting times");
    auto* d_validate = dexp->add_subcommand("validate", "Check mu*tau <= 1/e and report characteristic roots");
    for (auto* sub : {d_eval, d_sample, d_validate}) {
        sub->add_option("--mu", mu, "Scale parameter")->required();
        sub->add_option("--tau", tau, "Delay")->required();
    }
    d_eval->add_option("--tmin", tmin, "First time");
    d_eval->add_option("--tmax", tmax, "Last time");
    d_eval->add_option("--points", points, "Number of times");
    d_eval->add_option("--out", dexp_out, "CSV file (default stdout)");
    d_sample->add_option("-n", n, "Number of draws");
    d_sample->add_option("--seed", seed, "Seed");
    d_sample->add_option("--stream", stream, "Stream id");
    d_sample->add_option("--out", dexp_out, "CSV file (default stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidConfig;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(resolve_simulate(sf, *sim), out, err);
        if (d_eval->parsed())
            return dexp_eval_cmd(mu, tau, tmin, tmax, points, dexp_out, out);
        if (d_sample->parsed())
            return dexp_sample_cmd(mu, tau, n, seed, stream, dexp_out, out, err);
        if (d_validate->parsed())
            return dexp_validate_cmd(mu, tau, out);
    } catch (const SimulationError& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidConfig;
    }
    return kInvalidConfig;
}

} // namespace delaysim::cli
