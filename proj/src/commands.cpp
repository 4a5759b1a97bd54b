#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>

#include "sbd/cli.hpp"

namespace sbd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i, int width, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%0*zu%s", prefix, width, i, suffix);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

void write_json(const fs::path& p, const json& j) {
    auto out = open_out(p);
    out << j.dump(2) << '\n';
}

TorusConfiguration initial_state(const RunConfig& c, Rng& rng) {
    const Torus t = c.torus();
    const double radius = c.model.interaction_radius();
    if (c.initial_poisson) return sample_poisson(t, *c.initial_poisson, rng, radius);
    TorusConfiguration cfg(t, radius);
    for (const Vec& x : c.initial_points) cfg.insert(x);
    return cfg;
}

struct ReplicaOutput {
    RunResult result;
    std::vector<Snapshot> snapshots;
    std::string trace;
    std::vector<std::string> snapshot_files;
    std::string error;
};

ReplicaOutput run_replica(const RunConfig& c, std::size_t index, const fs::path& out_dir) {
    ReplicaOutput o;
    Rng rng = make_stream(c.seed, index);
    TorusConfiguration init = initial_state(c, rng);

    RunOptions opts;
    opts.t_end = c.t_end;
    opts.snapshot_times = c.snapshot_times;
    opts.max_population = c.max_population;
    opts.audit_every = c.audit ? 1000 : 0;

    TraceRecorder rec(c.record_events);
    try {
        o.result = run(c.model, std::move(init), opts, rec, rng);
    } catch (const AuditFailure& e) {
        o.error = e.what();
    }
    o.snapshots = std::move(rec.snapshots);

    const std::string rel = "replicas/" + numbered("r", index, 4, "");
    fs::create_directories(out_dir / rel);
    if (c.record_events) {
        o.trace = rel + "/events.csv";
        auto out = open_out(out_dir / o.trace);
        write_events_csv(out, rec.events, c.dim);
    }
    for (std::size_t k = 0; k < o.snapshots.size(); ++k) {
        const Snapshot& s = o.snapshots[k];
        TorusConfiguration cfg(c.torus());
        for (std::size_t i = 0; i < s.points.size(); ++i) cfg.insert_with_id(s.points[i], s.ids[i]);
        const std::string file = rel + numbered("/snapshot_", k, 3, ".csv");
        auto out = open_out(out_dir / file);
        write_snapshot_csv(out, cfg, s.t);
        o.snapshot_files.push_back(file);
    }
    return o;
}

// Moment reports at every snapshot index present in all replicas.
std::vector<MomentReport> aggregate(const RunConfig& c, const std::vector<double>& times,
                                    const std::vector<std::vector<PointSet>>& by_replica,
                                    json& notes) {
    std::vector<MomentReport> out;
    if (by_replica.size() < 2) {
        notes.push_back("moment statistics need at least 2 replicas");
        return out;
    }
    std::size_t common = times.size();
    for (const auto& r : by_replica) common = std::min(common, r.size());
    const Torus t = c.torus();
    for (std::size_t k = 0; k < common; ++k) {
        std::vector<PointSet> at;
        at.reserve(by_replica.size());
        for (const auto& r : by_replica) at.push_back(r[k]);
        out.push_back(moment_report(t, times[k], at, c.window, c.n_max, c.g_edges));
    }
    if (common < times.size()) notes.push_back("snapshots after an explosion were not aggregated");
    return out;
}

// Free immigration-death runs have an exact density; compare at t_end.
void surgailis_check(const RunConfig& c, const std::vector<MomentReport>& moments, json& checks,
                     bool& passed) {
    const ModelSpec& m = c.model;
    if (m.variant != ModelVariant::migration || m.a_minus || !m.b || !m.b->is_constant() ||
        !c.initial_poisson || moments.empty())
        return;
    const double b = m.b->values().front();
    json table = json::array();
    for (const auto& r : moments) {
        const double expect = oracles::surgailis_density(*c.initial_poisson, b, m.m, r.t);
        table.push_back({{"t", r.t},
                         {"estimate", r.density.value},
                         {"se", r.density.se},
                         {"oracle", expect}});
    }
    const auto& last = moments.back();
    const double expect = oracles::surgailis_density(*c.initial_poisson, b, m.m, last.t);
    const double tol = 3.0 * last.density.se + 1e-12 * std::max(1.0, expect);
    const bool ok = std::abs(last.density.value - expect) <= tol;
    checks["surgailis_density"] = {{"t", last.t},
                                   {"estimate", last.density.value},
                                   {"se", last.density.se},
                                   {"oracle", expect},
                                   {"tolerance", "3 SE"},
                                   {"passed", ok},
                                   {"table", table}};
    passed = passed && ok;
}

}  // namespace

int ExperimentReport::exit_code() const {
    if (explosion) return kExplosion;
    return checks_passed ? kSuccess : kCheckFailed;
}

ExperimentReport cmd_simulate(const RunConfig& c) {
    const fs::path out_dir = c.output_dir;
    fs::create_directories(out_dir / "replicas");

    ExperimentReport rep;
    rep.manifest = to_json(c);
    write_json(out_dir / "manifest.json", rep.manifest);

    const auto n = static_cast<std::ptrdiff_t>(c.replicas);
    std::vector<ReplicaOutput> outs(c.replicas);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            outs[i] = run_replica(c, static_cast<std::size_t>(i), out_dir);
        } catch (...) {
#pragma omp critical(sbd_simulate_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    json replicas = json::array();
    json notes = json::array();
    std::vector<std::vector<PointSet>> by_replica;
    bool audit_ok = true;
    double worst_audit = 0.0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        const ReplicaOutput& o = outs[i];
        rep.runs.push_back(o.result);
        if (!o.trace.empty()) rep.trace_paths.push_back(o.trace);
        if (o.result.status == RunStatus::explosion) rep.explosion = true;
        if (!o.error.empty()) audit_ok = false;
        worst_audit = std::max(worst_audit, o.result.max_audit_deviation);
        std::vector<PointSet> sets;
        for (const auto& s : o.snapshots) sets.push_back(s.points);
        by_replica.push_back(std::move(sets));
        json r = {{"index", i},
                  {"status", to_string(o.result.status)},
                  {"events", o.result.events},
                  {"final_time", o.result.final_time},
                  {"final_population", o.result.final_population},
                  {"snapshots", o.snapshot_files}};
        r["trace"] = o.trace.empty() ? json(nullptr) : json(o.trace);
        if (!o.error.empty()) r["error"] = o.error;
        replicas.push_back(r);
    }

    rep.moments = aggregate(c, c.snapshot_times, by_replica, notes);
    json moments = json::array();
    for (std::size_t k = 0; k < rep.moments.size(); ++k) {
        json m = to_json(rep.moments[k], c.dim);
        if (!rep.moments[k].pair_correlation.empty()) {
            const std::string file = numbered("pair_correlation_", k, 3, ".csv");
            auto out = open_out(out_dir / file);
            write_pair_correlation_csv(out, rep.moments[k].pair_correlation);
            m["pair_correlation_csv"] = file;
        }
        moments.push_back(m);
    }

    if (c.audit) {
        rep.checks["cache_audit"] = {{"max_deviation", worst_audit}, {"passed", audit_ok}};
        rep.checks_passed = rep.checks_passed && audit_ok;
    }
    surgailis_check(c, rep.moments, rep.checks, rep.checks_passed);

    std::size_t extinct = 0;
    for (const auto& r : rep.runs) extinct += r.final_population == 0 ? 1 : 0;

    rep.json = {{"manifest", "manifest.json"},
                {"replicas", replicas},
                {"extinct_fraction", static_cast<double>(extinct) / static_cast<double>(c.replicas)},
                {"moments", moments},
                {"checks", rep.checks},
                {"checks_passed", rep.checks_passed},
                {"explosion", rep.explosion},
                {"notes", notes}};
    write_json(out_dir / "report.json", rep.json);
    return rep;
}

json cmd_analyze(const fs::path& run_dir, const fs::path& out_dir) {
    std::ifstream in(run_dir / "manifest.json");
    if (!in) throw ConfigError("", "no manifest.json in " + run_dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid manifest: ") + e.what());
    }
    const RunConfig c = parse_config(manifest, run_dir);

    std::vector<std::vector<PointSet>> by_replica;
    for (std::size_t i = 0; i < c.replicas; ++i) {
        const fs::path dir = run_dir / "replicas" / numbered("r", i, 4, "");
        std::vector<PointSet> sets;
        for (std::size_t k = 0; k < c.snapshot_times.size(); ++k) {
            std::ifstream s(dir / numbered("snapshot_", k, 3, ".csv"));
            if (!s) break;
            PointSet pts;
            for (const auto& row : read_snapshot_csv(s, c.dim)) pts.push_back(row.x);
            sets.push_back(std::move(pts));
        }
        by_replica.push_back(std::move(sets));
    }

    json notes = json::array();
    const auto moments = aggregate(c, c.snapshot_times, by_replica, notes);
    json mj = json::array();
    for (const auto& m : moments) mj.push_back(to_json(m, c.dim));
    json checks = json::object();
    bool passed = true;
    surgailis_check(c, moments, checks, passed);

    json result = {{"run_dir", run_dir.string()},
                   {"moments", mj},
                   {"checks", checks},
                   {"checks_passed", passed},
                   {"notes", notes}};
    fs::create_directories(out_dir);
    write_json(out_dir / "analysis.json", result);
    return result;
}

namespace {

json grid_to_json(const SearchGrid& g) {
    return {{"eps", g.eps}, {"r", g.r}, {"h_factors", g.h_factors}};
}

json report_to_json(const ViolationReport& v) {
    return {{"trials", v.trials},
            {"violations", v.violations},
            {"min_U", v.min_u},
            {"argmin_trial", v.argmin_trial}};
}

VerifyOptions verify_options(const RunConfig& c) {
    VerifyOptions o;
    o.trials = c.certificate.trials;
    o.size_max = c.certificate.size_max;
    o.seed = c.seed;
    o.sampler_mix = c.certificate.sampler_mix;
    return o;
}

// Certification step shared by certify and verify. Returns false (with the
// outcome filled in) when no certificate exists.
bool certify_into(const RunConfig& c, CertifyOutcome& o) {
    if (!c.model.a_plus) throw ConfigError("/model/a_plus", "required to certify");
    const SearchGrid grid =
        c.certificate.grid
            ? *c.certificate.grid
            : (c.model.a_minus ? default_search_grid(*c.model.a_plus, *c.model.a_minus)
                               : SearchGrid{});
    o.json["omega"] = c.certificate.omega;
    o.json["packing"] = c.certificate.packing == PackingChoice::unit ? "unit" : "tight";
    o.json["grid"] = grid_to_json(grid);
    if (!c.model.a_minus) {
        o.error = "no competition within reach";
    } else {
        try {
            o.certificate = certify(*c.model.a_plus, *c.model.a_minus, c.certificate.omega, grid,
                                    c.certificate.packing);
        } catch (const CertificationError& e) {
            o.error = e.what();
        }
    }
    if (!o.certificate) {
        o.json["error"] = o.error;
        o.exit_code = kCheckFailed;
        return false;
    }
    o.json["certificate"] = certificate_to_json(*o.certificate);
    return true;
}

}  // namespace

CertifyOutcome cmd_certify(const RunConfig& c) {
    CertifyOutcome o;
    fs::create_directories(c.output_dir);
    if (certify_into(c, o)) {
        o.violations = verify_certificate(*o.certificate, *c.model.a_plus, *c.model.a_minus,
                                          verify_options(c));
        o.json["verification"] = report_to_json(*o.violations);
        const bool ok = o.certificate->theta > 0.0 && o.violations->violations == 0;
        o.exit_code = ok ? kSuccess : kCheckFailed;
    }
    o.json["passed"] = o.exit_code == kSuccess;
    write_json(fs::path(c.output_dir) / "certificate.json", o.json);
    return o;
}

CertifyOutcome cmd_verify(const RunConfig& c, const std::optional<Certificate>& cert) {
    CertifyOutcome o;
    fs::create_directories(c.output_dir);
    if (cert) {
        if (!c.model.a_plus || !c.model.a_minus)
            throw ConfigError("/model", "verification needs both a_plus and a_minus");
        if (cert->dim != c.dim) throw ConfigError("/certificate/dim", "differs from torus dimension");
        o.certificate = cert;
        o.json["certificate"] = certificate_to_json(*cert);
    } else if (!certify_into(c, o)) {
        o.json["passed"] = false;
        write_json(fs::path(c.output_dir) / "verification.json", o.json);
        return o;
    }

    o.violations =
        verify_certificate(*o.certificate, *c.model.a_plus, *c.model.a_minus, verify_options(c));
    const fs::path csv = fs::path(c.output_dir) / "argmin_config.csv";
    {
        auto out = open_out(csv);
        out.precision(17);
        for (int i = 0; i < c.dim; ++i) out << (i ? ",x" : "x") << i + 1;
        out << '\n';
        for (const Vec& x : o.violations->argmin_config) {
            for (int i = 0; i < c.dim; ++i) out << (i ? "," : "") << x[i];
            out << '\n';
        }
    }
    o.json["trials"] = o.violations->trials;
    o.json["violations"] = o.violations->violations;
    o.json["min_U"] = o.violations->min_u;
    o.json["argmin_trial"] = o.violations->argmin_trial;
    o.json["argmin_config_csv_path"] = csv.string();
    const bool ok = o.certificate->theta > 0.0 && o.violations->violations == 0;
    o.exit_code = ok ? kSuccess : kCheckFailed;
    o.json["passed"] = ok;
    write_json(fs::path(c.output_dir) / "verification.json", o.json);
    return o;
}

json cmd_bounds(const std::string& variant, const oracles::NormBoundInput& in) {
    json inputs = {{"theta", in.theta},
                   {"theta_prime", in.theta_prime},
                   {"a_plus_mass", in.a_plus_mass},
                   {"a_minus_mass", in.a_minus_mass},
                   {"a_plus_sup", in.a_plus_sup},
                   {"a_minus_sup", in.a_minus_sup},
                   {"b_sup", in.b_sup}};
    double bound = 0.0;
    if (variant == "bolker_pacala" || variant == "bp") {
        bound = oracles::norm_bound_bp(in);
        return {{"variant", "bolker_pacala"}, {"inputs", inputs}, {"bound", bound}};
    }
    if (variant == "migration") {
        bound = oracles::norm_bound_migration(in);
        return {{"variant", "migration"}, {"inputs", inputs}, {"bound", bound}};
    }
    throw std::invalid_argument("unknown variant '" + variant + "' (bolker_pacala or migration)");
}

}  // namespace sbd::cli
