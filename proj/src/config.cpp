#include "delaysim/config.hpp"

#include <fstream>

namespace delaysim {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw ConfigError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where)
{
    const auto& v = require(obj, key, where);
    if (!v.is_string())
        throw ConfigError(where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

double require_number(const json& obj, const char* key, const std::string& where)
{
    const auto& v = require(obj, key, where);
    if (!v.is_number())
        throw ConfigError(where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

std::size_t compartment_ref(const ModelSpec& spec, const std::string& name, const std::string& where)
{
    if (auto i = spec.find(name))
        return *i;
    throw ConfigError(where + ": unknown compartment '" + name + "'");
}

std::optional<std::size_t> endpoint(const ModelSpec& spec, const json& obj, const char* key,
                                    const char* outside, const std::string& where)
{
    const auto name = require_string(obj, key, where);
    if (name == outside)
        return std::nullopt;
    return compartment_ref(spec, name, where);
}

std::string name_of(const ModelSpec& spec, std::optional<std::size_t> i, const char* outside)
{
    return i ? spec.compartments.at(*i).name : std::string(outside);
}

} // namespace

json model_to_json(const ModelSpec& spec)
{
    json doc;
    doc["compartments"] = json::array();
    for (const auto& c : spec.compartments)
        doc["compartments"].push_back(c.name);

    doc["markov"] = json::array();
    for (const auto& p : spec.markov) {
        json operands = json::array();
        for (const auto op : p.law.operands)
            operands.push_back(spec.compartments.at(op).name);
        doc["markov"].push_back({{"label", p.label},
                                 {"source", name_of(spec, p.source, "external")},
                                 {"target", name_of(spec, p.target, "sink")},
                                 {"kind", std::string(to_string(p.law.kind))},
                                 {"coefficient", p.law.coefficient},
                                 {"operands", operands}});
    }

    doc["delays"] = json::array();
    for (const auto& d : spec.delays)
        doc["delays"].push_back({{"label", d.label},
                                 {"source", spec.compartments.at(d.source).name},
                                 {"target", name_of(spec, d.target, "sink")},
                                 {"mu", d.params.mu},
                                 {"tau", d.params.tau}});

    doc["initial"] = json::object();
    for (std::size_t i = 0; i < spec.compartments.size() && i < spec.initial_counts.size(); ++i)
        doc["initial"][spec.compartments[i].name] = spec.initial_counts[i];
    doc["horizon"] = spec.horizon;
    doc["grid"] = spec.record_grid;
    return doc;
}

ModelSpec model_from_json(const json& doc)
{
    if (!doc.is_object())
        throw ConfigError("model config must be a JSON object");
    ModelSpec spec;

    const auto& comps = require(doc, "compartments", "model");
    if (!comps.is_array())
        throw ConfigError("compartments: must be an array of names");
    for (const auto& c : comps) {
        if (!c.is_string())
            throw ConfigError("compartments: names must be strings");
        spec.compartments.push_back({spec.compartments.size(), c.get<std::string>()});
    }

    if (doc.contains("markov")) {
        const auto& arr = doc.at("markov");
        if (!arr.is_array())
            throw ConfigError("markov: must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& m = arr[i];
            const auto where = "markov[" + std::to_string(i) + "]";
            MarkovianProcess p;
            p.label = m.value("label", std::string{});
            p.source = endpoint(spec, m, "source", "external", where);
            p.target = endpoint(spec, m, "target", "sink", where);
            const auto kind_text = require_string(m, "kind", where);
            const auto kind = parse_rate_kind(kind_text);
            if (!kind)
                throw ConfigError(where + ": unknown rate kind '" + kind_text + "'");
            p.law.kind = *kind;
            p.law.coefficient = require_number(m, "coefficient", where);
            if (m.contains("operands")) {
                if (!m.at("operands").is_array())
                    throw ConfigError(where + ": operands must be an array");
                for (const auto& op : m.at("operands")) {
                    if (!op.is_string())
                        throw ConfigError(where + ": operands must be compartment names");
                    p.law.operands.push_back(compartment_ref(spec, op.get<std::string>(), where));
                }
            }
            spec.markov.push_back(std::move(p));
        }
    }

    if (doc.contains("delays")) {
        const auto& arr = doc.at("delays");
        if (!arr.is_array())
            throw ConfigError("delays: must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& m = arr[i];
            const auto where = "delays[" + std::to_string(i) + "]";
            DelayProcess d;
            d.label = m.value("label", std::string{});
            d.source = compartment_ref(spec, require_string(m, "source", where), where);
            d.target = endpoint(spec, m, "target", "sink", where);
            try {
                d.params = DexpParamsd(require_number(m, "mu", where), require_number(m, "tau", where));
            } catch (const std::domain_error& e) {
                throw ConfigError(where + ": " + e.what());
            }
            spec.delays.push_back(std::move(d));
        }
    }

    spec.initial_counts.assign(spec.compartments.size(), 0);
    if (doc.contains("initial")) {
        const auto& init = doc.at("initial");
        if (!init.is_object())
            throw ConfigError("initial: must map compartment names to counts");
        for (const auto& [name, value] : init.items()) {
            if (!value.is_number_integer())
                throw ConfigError("initial: count for '" + name + "' must be an integer");
            spec.initial_counts[compartment_ref(spec, name, "initial")] = value.get<std::int64_t>();
        }
    }

    spec.horizon = require_number(doc, "horizon", "model");
    if (!doc.contains("grid")) {
        spec.record_grid = uniform_grid(spec.horizon, kDefaultGridPoints);
    } else {
        const auto& g = doc.at("grid");
        if (g.is_array()) {
            for (const auto& t : g) {
                if (!t.is_number())
                    throw ConfigError("grid: times must be numbers");
                spec.record_grid.push_back(t.get<double>());
            }
        } else if (g.is_object() && g.contains("points") && g.at("points").is_number_integer()) {
            const auto points = g.at("points").get<std::int64_t>();
            if (points < 1)
                throw ConfigError("grid: points must be at least 1");
            spec.record_grid = uniform_grid(spec.horizon, static_cast<std::size_t>(points));
        } else {
            throw ConfigError("grid: expected an array of times or {\"points\": n}");
        }
    }
    return spec;
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& doc)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

} // namespace delaysim
