// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>
#include <fmt/ranges.h>

namespace ncdoa::cli {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> k = {
        {"geometry", {"elements", "spacing", "subarrays"}},
        {"scenario", {"preset", "doas", "snapshots", "snr_db", "perturbation"}},
        {"plan", {"snrs_db", "trials", "methods", "seed", "parallelism", "grid_min", "grid_max", "grid_step"}},
        {"solver",
         {"beta", "mu", "rho", "lambda", "max_outer", "max_inner", "tol_outer", "tol_inner", "sdp_rho"}},
    };
    return k;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ArgumentError("config: '" + key + "' is not a number: '" + v + "'");
}

long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != static_cast<double>(static_cast<long>(d))) throw ArgumentError("config: '" + key + "' must be an integer");
    return static_cast<long>(d);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
    return out;
}

std::string num(double d) { return fmt::format("{:.17g}", d); }

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string RunConfig::canonical() const {
    const auto& sc = plan.scenario;
    const auto& g = sc.geometry;
    const auto& s = plan.estimator.solver;
    std::vector<std::string> doas, snrs, methods, sizes;
    for (double d : sc.base_doas) doas.push_back(num(d));
    for (double d : plan.snrs_db) snrs.push_back(num(d));
    for (Method m : plan.methods) methods.push_back(to_string(m));
    for (int sz : g.subarray_sizes()) sizes.push_back(std::to_string(sz));
    const double spacing = g.num_elements() > 1 ? g.elements()[1].x - g.elements()[0].x : 0.0;

    std::map<std::string, std::string> kv = {
        {"geometry.elements", std::to_string(g.num_elements())},
        {"geometry.spacing", num(spacing / g.wavelength())},
        {"geometry.subarrays", fmt::format("{}", fmt::join(sizes, ","))},
        {"scenario.doas", fmt::format("{}", fmt::join(doas, ","))},
        {"scenario.snapshots", std::to_string(sc.snapshots)},
        {"scenario.snr_db", num(sc.snr_db)},
        {"scenario.perturbation", num(sc.perturbation)},
        {"plan.snrs_db", fmt::format("{}", fmt::join(snrs, ","))},
        {"plan.trials", std::to_string(plan.trials)},
        {"plan.methods", fmt::format("{}", fmt::join(methods, ","))},
        {"plan.seed", std::to_string(plan.seed)},
        {"plan.grid", fmt::format("{},{},{}", num(plan.grid[0]), num(plan.grid[plan.grid.size() - 1]),
                                  num(plan.grid.spacing()))},
        {"solver.beta", num(s.beta)},
        {"solver.mu", num(s.mu)},
        {"solver.rho", num(s.rho)},
        {"solver.lambda", s.lambda ? num(*s.lambda) : "default"},
        {"solver.max_outer", std::to_string(s.max_outer)},
        {"solver.max_inner", std::to_string(s.max_inner)},
        {"solver.tol_outer", num(s.tol_outer)},
        {"solver.tol_inner", num(s.tol_inner)},
        {"solver.sdp_rho", num(plan.estimator.sdp.rho)},
    };
    // parallelism only changes timings, so it stays out of the hash.
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", fnv1a64(canonical())); }

RunConfig load_run_config(const std::optional<std::string>& ini_path, const std::optional<std::string>& preset) {
    pt::ptree tree;
    if (ini_path) {
        if (!std::filesystem::is_regular_file(*ini_path)) throw IoError("cannot read config '" + *ini_path + "'");
        try {
            pt::read_ini(*ini_path, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ArgumentError("config '" + *ini_path + "': " + e.message() + " at line " +
                                std::to_string(e.line()));
        }
        for (const auto& [section, body] : tree) {
            const auto it = known_keys().find(section);
            if (it == known_keys().end()) throw ArgumentError("config: unknown section [" + section + "]");
            for (const auto& [key, value] : body)
                if (!it->second.count(key)) throw ArgumentError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }
    auto get = [&](const std::string& path) { return tree.get_optional<std::string>(pt::ptree::path_type(path, '.')); };

    std::string name = preset.value_or(get("scenario.preset").value_or("fig1"));
    const auto p = find_preset(name);
    if (!p) throw ArgumentError("unknown preset '" + name + "'");

    RunConfig cfg{.preset = name, .plan = ExperimentPlan{.scenario = p->scenario}};
    auto& plan = cfg.plan;
    plan.snrs_db = p->snrs_db;
    plan.methods = p->methods;

    // Geometry: any key rebuilds the ULA from the preset's values.
    const auto& g0 = p->scenario.geometry;
    int elements = g0.num_elements();
    double spacing = (g0.elements()[1].x - g0.elements()[0].x) / g0.wavelength();
    std::vector<int> sizes = g0.subarray_sizes();
    bool geometry_changed = false;
    if (auto v = get("geometry.elements")) elements = static_cast<int>(to_long("elements", *v)), geometry_changed = true;
    if (auto v = get("geometry.spacing")) spacing = to_double("spacing", *v), geometry_changed = true;
    if (auto v = get("geometry.subarrays")) {
        sizes.clear();
        for (const auto& item : split_list(*v)) sizes.push_back(static_cast<int>(to_long("subarrays", item)));
        geometry_changed = true;
    }
    if (geometry_changed) plan.scenario.geometry = ArrayGeometry::uniform_linear(elements, spacing, sizes);

    auto& sc = plan.scenario;
    if (auto v = get("scenario.doas")) sc.base_doas = to_doubles("doas", *v);
    if (auto v = get("scenario.snapshots")) sc.snapshots = static_cast<int>(to_long("snapshots", *v));
    if (auto v = get("scenario.snr_db")) sc.snr_db = to_double("snr_db", *v);
    if (auto v = get("scenario.perturbation")) sc.perturbation = to_double("perturbation", *v);

    if (auto v = get("plan.snrs_db")) plan.snrs_db = to_doubles("snrs_db", *v);
    if (auto v = get("plan.trials")) plan.trials = static_cast<int>(to_long("trials", *v));
    if (auto v = get("plan.methods")) {
        plan.methods.clear();
        for (const auto& item : split_list(*v)) {
            const auto m = parse_method(item);
            if (!m) throw ArgumentError("config: unknown method '" + item + "'");
            plan.methods.push_back(*m);
        }
    }
    if (auto v = get("plan.seed")) plan.seed = static_cast<std::uint64_t>(to_long("seed", *v));
    if (auto v = get("plan.parallelism")) plan.parallelism = static_cast<int>(to_long("parallelism", *v));
    double gmin = plan.grid[0], gmax = plan.grid[plan.grid.size() - 1], gstep = plan.grid.spacing();
    bool grid_changed = false;
    if (auto v = get("plan.grid_min")) gmin = to_double("grid_min", *v), grid_changed = true;
    if (auto v = get("plan.grid_max")) gmax = to_double("grid_max", *v), grid_changed = true;
    if (auto v = get("plan.grid_step")) gstep = to_double("grid_step", *v), grid_changed = true;
    if (grid_changed) plan.grid = DoaGrid::uniform(gmin, gmax, gstep);

    auto& s = plan.estimator.solver;
    if (auto v = get("solver.beta")) s.beta = to_double("beta", *v);
    if (auto v = get("solver.mu")) s.mu = to_double("mu", *v);
    if (auto v = get("solver.rho")) s.rho = to_double("rho", *v);
    if (auto v = get("solver.lambda")) s.lambda = to_double("lambda", *v);
    if (auto v = get("solver.max_outer")) s.max_outer = static_cast<int>(to_long("max_outer", *v));
    if (auto v = get("solver.max_inner")) s.max_inner = static_cast<int>(to_long("max_inner", *v));
    if (auto v = get("solver.tol_outer")) s.tol_outer = to_double("tol_outer", *v);
    if (auto v = get("solver.tol_inner")) s.tol_inner = to_double("tol_inner", *v);
    if (auto v = get("solver.sdp_rho")) plan.estimator.sdp.rho = to_double("sdp_rho", *v);

    sc.validate();
    s.validate();
    return cfg;
}

}  // namespace ncdoa::cli
