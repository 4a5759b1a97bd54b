#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sbd/cli.hpp"

namespace sbd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError(path + "/" + k, "unknown field");
}

double get_number(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(path + "/" + key, "required field missing");
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(path + "/" + key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path + "/" + key, "must be finite");
    return d;
}

double number_or(const json& j, const std::string& key, const std::string& path, double dflt) {
    return j.contains(key) && !j.at(key).is_null() ? get_number(j, key, path) : dflt;
}

std::uint64_t get_unsigned(const json& j, const std::string& key, const std::string& path,
                           std::uint64_t dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(path + "/" + key, "expected a nonnegative integer");
}

std::vector<double> number_list(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(path + "/" + std::to_string(i), "expected a number");
        out.push_back(j[i].get<double>());
    }
    return out;
}

Vec vec_from(const json& j, int dim, const std::string& path) {
    const auto v = number_list(j, path);
    if (static_cast<int>(v.size()) != dim)
        throw ConfigError(path, "expected " + std::to_string(dim) + " coordinates");
    Vec x{};
    std::copy(v.begin(), v.end(), x.begin());
    return x;
}

json vec_to(const Vec& x, int dim) { return std::vector<double>(x.begin(), x.begin() + dim); }

template <class F>
auto wrap_errors(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

ImmigrationField field_from_json(const json& j, const std::string& path) {
    if (j.is_number()) return wrap_errors(path, [&] { return ImmigrationField::constant(j.get<double>()); });
    allow_keys(j, path, {"constant", "grid"});
    if (j.contains("constant"))
        return wrap_errors(path, [&] { return ImmigrationField::constant(get_number(j, "constant", path)); });
    if (!j.contains("grid")) throw ConfigError(path, "expected a number, {constant} or {grid}");
    const json& g = j.at("grid");
    allow_keys(g, path + "/grid", {"cells_per_side", "values"});
    const auto n = get_unsigned(g, "cells_per_side", path + "/grid", 0);
    if (!g.contains("values")) throw ConfigError(path + "/grid/values", "required field missing");
    auto values = number_list(g.at("values"), path + "/grid/values");
    return wrap_errors(path + "/grid", [&] {
        return ImmigrationField::grid(static_cast<int>(n), std::move(values));
    });
}

json field_to_json(const ImmigrationField& f) {
    if (f.is_constant()) return json{{"constant", f.values().front()}};
    return json{{"grid", {{"cells_per_side", f.cells_per_side()}, {"values", f.values()}}}};
}

}  // namespace

Kernel kernel_from_json(const json& j, int default_dim, const std::string& path,
                        const fs::path& base_dir) {
    allow_keys(j, path, {"family", "params", "dim"});
    if (!j.contains("family") || !j.at("family").is_string())
        throw ConfigError(path + "/family", "expected a kernel family name");
    const std::string family = j.at("family").get<std::string>();
    const int dim = static_cast<int>(get_unsigned(j, "dim", path, static_cast<std::uint64_t>(default_dim)));
    const json params = j.value("params", json::object());
    const std::string pp = path + "/params";
    return wrap_errors(path, [&]() -> Kernel {
        if (family == "gaussian") {
            allow_keys(params, pp, {"c", "sigma"});
            return Kernel::gaussian(get_number(params, "c", pp), get_number(params, "sigma", pp), dim);
        }
        if (family == "triangular") {
            allow_keys(params, pp, {"c", "R"});
            return Kernel::triangular(get_number(params, "c", pp), get_number(params, "R", pp), dim);
        }
        if (family == "exponential") {
            allow_keys(params, pp, {"c", "lambda"});
            return Kernel::exponential(get_number(params, "c", pp), get_number(params, "lambda", pp),
                                       dim);
        }
        if (family == "tabulated") {
            allow_keys(params, pp, {"csv", "radii", "values", "tail_scale"});
            std::optional<double> tail;
            if (params.contains("tail_scale") && !params.at("tail_scale").is_null())
                tail = get_number(params, "tail_scale", pp);
            if (params.contains("csv")) {
                fs::path p = params.at("csv").get<std::string>();
                if (p.is_relative()) p = base_dir / p;
                return Kernel::tabulated_from_csv(p.string(), dim, tail);
            }
            if (!params.contains("radii") || !params.contains("values"))
                throw ConfigError(pp, "tabulated kernel needs csv or radii+values");
            return Kernel::tabulated(number_list(params.at("radii"), pp + "/radii"),
                                     number_list(params.at("values"), pp + "/values"), dim, tail);
        }
        throw ConfigError(path + "/family", "unknown kernel family '" + family + "'");
    });
}

json kernel_to_json(const Kernel& k) {
    json params;
    switch (k.family()) {
        case KernelFamily::gaussian: params = {{"c", k.param0()}, {"sigma", k.param1()}}; break;
        case KernelFamily::triangular: params = {{"c", k.param0()}, {"R", k.param1()}}; break;
        case KernelFamily::exponential: params = {{"c", k.param0()}, {"lambda", k.param1()}}; break;
        case KernelFamily::tabulated:
            params = {{"radii", k.table_radii()}, {"values", k.table_values()}};
            if (k.tail_scale()) params["tail_scale"] = *k.tail_scale();
            break;
    }
    return json{{"family", to_string(k.family())}, {"params", params}, {"dim", k.dim()}};
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
    allow_keys(j, "", {"model", "torus", "initial", "schedule", "replicas", "seed", "analysis",
                       "certificate", "output", "max_population", "record_events", "audit"});
    RunConfig c;

    // torus
    const json torus = j.value("torus", json::object());
    allow_keys(torus, "/torus", {"L", "d"});
    c.side = number_or(torus, "L", "/torus", 10.0);
    c.dim = static_cast<int>(get_unsigned(torus, "d", "/torus", 1));
    if (!(c.side > 0.0)) throw ConfigError("/torus/L", "must be positive");
    if (c.dim < 1 || c.dim > kMaxDim) throw ConfigError("/torus/d", "must be 1, 2 or 3");
    const Torus t = c.torus();

    // model
    if (!j.contains("model")) throw ConfigError("/model", "required field missing");
    const json& model = j.at("model");
    allow_keys(model, "/model", {"variant", "a_plus", "a_minus", "m", "b"});
    const std::string variant = model.value("variant", std::string("bolker_pacala"));
    if (variant == "bolker_pacala") {
        c.model.variant = ModelVariant::bolker_pacala;
    } else if (variant == "migration") {
        c.model.variant = ModelVariant::migration;
    } else {
        throw ConfigError("/model/variant", "expected bolker_pacala or migration");
    }
    for (const char* key : {"a_plus", "a_minus"}) {
        if (model.contains(key) && !model.at(key).is_null()) {
            Kernel k = kernel_from_json(model.at(key), c.dim, std::string("/model/") + key, base_dir);
            if (k.dim() != c.dim)
                throw ConfigError(std::string("/model/") + key + "/dim", "differs from torus dimension");
            (std::string(key) == "a_plus" ? c.model.a_plus : c.model.a_minus) = std::move(k);
        }
    }
    c.model.m = number_or(model, "m", "/model", 0.0);
    if (model.contains("b") && !model.at("b").is_null())
        c.model.b = field_from_json(model.at("b"), "/model/b");
    wrap_errors("/model", [&] {
        c.model.validate(t);
        return 0;
    });

    // initial state
    const json initial = j.value("initial", json{{"poisson", 1.0}});
    allow_keys(initial, "/initial", {"poisson", "csv", "points"});
    if (initial.contains("points")) {
        const json& pts = initial.at("points");
        if (!pts.is_array()) throw ConfigError("/initial/points", "expected an array");
        for (std::size_t i = 0; i < pts.size(); ++i)
            c.initial_points.push_back(vec_from(pts[i], c.dim, "/initial/points/" + std::to_string(i)));
        if (initial.contains("csv")) c.initial_csv = initial.at("csv").get<std::string>();
    } else if (initial.contains("csv")) {
        c.initial_csv = initial.at("csv").get<std::string>();
        fs::path p = *c.initial_csv;
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) throw ConfigError("/initial/csv", "cannot open " + p.string());
        c.initial_points = wrap_errors("/initial/csv", [&] { return read_points_csv(in, c.dim); });
    } else {
        c.initial_poisson = number_or(initial, "poisson", "/initial", 1.0);
        if (!(*c.initial_poisson >= 0.0)) throw ConfigError("/initial/poisson", "must be >= 0");
    }
    for (std::size_t i = 0; i < c.initial_points.size(); ++i)
        if (!t.contains(c.initial_points[i]))
            throw ConfigError("/initial", "point " + std::to_string(i) + " outside [0, L)^d");

    // schedule
    const json schedule = j.value("schedule", json::object());
    allow_keys(schedule, "/schedule", {"t_end", "snapshot_times", "snapshot_every", "burn_in"});
    c.t_end = number_or(schedule, "t_end", "/schedule", 1.0);
    if (!(c.t_end > 0.0)) throw ConfigError("/schedule/t_end", "must be positive");
    if (schedule.contains("snapshot_times")) {
        c.snapshot_times = number_list(schedule.at("snapshot_times"), "/schedule/snapshot_times");
        if (!std::is_sorted(c.snapshot_times.begin(), c.snapshot_times.end()) ||
            (!c.snapshot_times.empty() &&
             (c.snapshot_times.front() < 0.0 || c.snapshot_times.back() > c.t_end)))
            throw ConfigError("/schedule/snapshot_times", "must be sorted within [0, t_end]");
    } else {
        const double every = number_or(
            schedule, "snapshot_every", "/schedule",
            c.model.a_minus ? 1.0 / c.model.a_minus->mass() : c.t_end / 10.0);
        if (!(every > 0.0)) throw ConfigError("/schedule/snapshot_every", "must be positive");
        for (int k = 0;; ++k) {
            const double s = k * every;
            if (s > c.t_end * (1.0 + 1e-12)) break;
            c.snapshot_times.push_back(std::min(s, c.t_end));
        }
        if (c.snapshot_times.back() < c.t_end) c.snapshot_times.push_back(c.t_end);
    }
    c.burn_in = number_or(schedule, "burn_in", "/schedule", 0.5 * c.t_end);

    // replicas, seed
    c.replicas = get_unsigned(j, "replicas", "", 1);
    if (c.replicas < 1) throw ConfigError("/replicas", "must be at least 1");
    c.seed = get_unsigned(j, "seed", "", 1);

    // analysis
    const json analysis = j.value("analysis", json::object());
    allow_keys(analysis, "/analysis", {"window", "n_max", "g_bins", "g_rmax", "g_edges"});
    if (analysis.contains("window")) {
        const json& w = analysis.at("window");
        allow_keys(w, "/analysis/window", {"lo", "hi"});
        if (!w.contains("lo") || !w.contains("hi"))
            throw ConfigError("/analysis/window", "needs lo and hi");
        c.window = wrap_errors("/analysis/window", [&] {
            return Window::box(t, vec_from(w.at("lo"), c.dim, "/analysis/window/lo"),
                               vec_from(w.at("hi"), c.dim, "/analysis/window/hi"));
        });
    } else {
        c.window = Window::whole(t);
    }
    c.n_max = static_cast<int>(get_unsigned(analysis, "n_max", "/analysis", 3));
    if (c.n_max < 1) throw ConfigError("/analysis/n_max", "must be >= 1");
    if (analysis.contains("g_edges")) {
        c.g_edges = number_list(analysis.at("g_edges"), "/analysis/g_edges");
    } else {
        const double scale = c.model.a_minus  ? c.model.a_minus->characteristic_radius()
                             : c.model.a_plus ? c.model.a_plus->characteristic_radius()
                                              : 0.1 * c.side;
        const double rmax =
            number_or(analysis, "g_rmax", "/analysis", std::min(0.5 * c.side, 5.0 * scale));
        const int bins = static_cast<int>(get_unsigned(analysis, "g_bins", "/analysis", 20));
        c.g_edges = wrap_errors("/analysis", [&] { return equal_bins(rmax, bins); });
    }
    if (c.g_edges.size() < 2 || c.g_edges.back() > 0.5 * c.side * (1.0 + 1e-12))
        throw ConfigError("/analysis", "pair-correlation bins must lie within L/2");

    // certificate
    const json cert = j.value("certificate", json::object());
    allow_keys(cert, "/certificate", {"omega", "trials", "size_max", "packing", "grid", "sampler_mix"});
    c.certificate.omega = number_or(cert, "omega", "/certificate", 1.0);
    if (!(c.certificate.omega > 0.0)) throw ConfigError("/certificate/omega", "must be positive");
    c.certificate.trials = get_unsigned(cert, "trials", "/certificate", 100000);
    if (c.certificate.trials < 1) throw ConfigError("/certificate/trials", "must be >= 1");
    c.certificate.size_max = static_cast<int>(get_unsigned(cert, "size_max", "/certificate", 30));
    if (c.certificate.size_max < 1) throw ConfigError("/certificate/size_max", "must be >= 1");
    const std::string packing = cert.value("packing", std::string("unit"));
    if (packing == "unit") {
        c.certificate.packing = PackingChoice::unit;
    } else if (packing == "tight") {
        c.certificate.packing = PackingChoice::tight;
    } else {
        throw ConfigError("/certificate/packing", "expected unit or tight");
    }
    if (cert.contains("grid")) {
        const json& g = cert.at("grid");
        allow_keys(g, "/certificate/grid", {"eps", "r", "h_factors"});
        SearchGrid grid;
        grid.eps = number_list(g.value("eps", json::array()), "/certificate/grid/eps");
        grid.r = number_list(g.value("r", json::array()), "/certificate/grid/r");
        grid.h_factors = number_list(g.value("h_factors", json::array({0.5, 1.0, 2.0})),
                                     "/certificate/grid/h_factors");
        if (grid.eps.empty() || grid.r.empty() || grid.h_factors.empty())
            throw ConfigError("/certificate/grid", "eps, r and h_factors must be nonempty");
        for (double v : grid.eps)
            if (!(v > 0.0)) throw ConfigError("/certificate/grid/eps", "values must be positive");
        for (double v : grid.r)
            if (!(v > 0.0)) throw ConfigError("/certificate/grid/r", "values must be positive");
        for (double v : grid.h_factors)
            if (!(v > 0.0)) throw ConfigError("/certificate/grid/h_factors", "values must be positive");
        c.certificate.grid = grid;
    } else if (c.model.a_plus && c.model.a_minus) {
        c.certificate.grid = default_search_grid(*c.model.a_plus, *c.model.a_minus);
    }
    if (cert.contains("sampler_mix")) {
        c.certificate.sampler_mix = number_list(cert.at("sampler_mix"), "/certificate/sampler_mix");
        if (c.certificate.sampler_mix.size() != static_cast<std::size_t>(kSamplerKinds))
            throw ConfigError("/certificate/sampler_mix",
                              "expected " + std::to_string(kSamplerKinds) + " weights");
    }

    // output and run controls
    if (j.contains("output")) {
        if (!j.at("output").is_string()) throw ConfigError("/output", "expected a path");
        c.output_dir = j.at("output").get<std::string>();
    }
    c.max_population = get_unsigned(j, "max_population", "", 1000000);
    if (c.max_population < 1) throw ConfigError("/max_population", "must be >= 1");
    c.record_events = j.value("record_events", true);
    c.audit = j.value("audit", false);
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json to_json(const RunConfig& c) {
    json model = {{"variant", to_string(c.model.variant)}, {"m", c.model.m}};
    model["a_plus"] = c.model.a_plus ? kernel_to_json(*c.model.a_plus) : json(nullptr);
    model["a_minus"] = c.model.a_minus ? kernel_to_json(*c.model.a_minus) : json(nullptr);
    model["b"] = c.model.b ? field_to_json(*c.model.b) : json(nullptr);

    json initial;
    if (c.initial_poisson) {
        initial["poisson"] = *c.initial_poisson;
    } else {
        json pts = json::array();
        for (const Vec& x : c.initial_points) pts.push_back(vec_to(x, c.dim));
        initial["points"] = pts;
        if (c.initial_csv) initial["csv"] = *c.initial_csv;
    }

    json cert = {{"omega", c.certificate.omega},
                 {"trials", c.certificate.trials},
                 {"size_max", c.certificate.size_max},
                 {"packing", c.certificate.packing == PackingChoice::unit ? "unit" : "tight"},
                 {"sampler_mix", c.certificate.sampler_mix}};
    if (c.certificate.grid)
        cert["grid"] = {{"eps", c.certificate.grid->eps},
                        {"r", c.certificate.grid->r},
                        {"h_factors", c.certificate.grid->h_factors}};

    return json{
        {"model", model},
        {"torus", {{"L", c.side}, {"d", c.dim}}},
        {"initial", initial},
        {"schedule",
         {{"t_end", c.t_end}, {"snapshot_times", c.snapshot_times}, {"burn_in", c.burn_in}}},
        {"replicas", c.replicas},
        {"seed", c.seed},
        {"analysis",
         {{"window", {{"lo", vec_to(c.window.lo, c.dim)}, {"hi", vec_to(c.window.hi, c.dim)}}},
          {"n_max", c.n_max},
          {"g_edges", c.g_edges}}},
        {"certificate", cert},
        {"output", c.output_dir},
        {"max_population", c.max_population},
        {"record_events", c.record_events},
        {"audit", c.audit},
    };
}

json certificate_to_json(const Certificate& c) {
    return json{{"dim", c.dim},
                {"eps", c.eps},
                {"h", c.h},
                {"r", c.r},
                {"a_r_minus", c.a_r_minus},
                {"riemann_sum", c.riemann_sum},
                {"g", c.g},
                {"delta", c.delta},
                {"packing_constant", c.packing_constant},
                {"unit_ball_volume", c.unit_ball_volume},
                {"a_plus_mass", c.a_plus_mass},
                {"a_plus_sup", c.a_plus_sup},
                {"omega", c.omega},
                {"theta", c.theta}};
}

Certificate certificate_from_json(const json& j) {
    const json& src = j.contains("certificate") ? j.at("certificate") : j;
    Certificate c;
    try {
        c.dim = src.at("dim").get<int>();
        c.eps = src.at("eps").get<double>();
        c.h = src.at("h").get<double>();
        c.r = src.at("r").get<double>();
        c.a_r_minus = src.at("a_r_minus").get<double>();
        c.riemann_sum = src.at("riemann_sum").get<double>();
        c.g = src.at("g").get<double>();
        c.delta = src.at("delta").get<double>();
        c.packing_constant = src.at("packing_constant").get<double>();
        c.unit_ball_volume = src.at("unit_ball_volume").get<double>();
        c.a_plus_mass = src.at("a_plus_mass").get<double>();
        c.a_plus_sup = src.at("a_plus_sup").get<double>();
        c.omega = src.at("omega").get<double>();
        c.theta = src.at("theta").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("/certificate", std::string("malformed certificate: ") + e.what());
    }
    return c;
}

}  // namespace sbd::cli
