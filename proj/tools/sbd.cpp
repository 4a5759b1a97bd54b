#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "sbd/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbd::cli;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
    std::optional<std::string> out;
    bool audit{false};
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "64-bit seed");
    app->add_option("--out", o.out, "output directory");
}

RunConfig load(const Overrides& o) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("", "cannot open config " + o.config);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("", "expected a JSON object");
    if (o.seed) j["seed"] = *o.seed;
    if (o.replicas) j["replicas"] = *o.replicas;
    if (o.out) j["output"] = *o.out;
    if (o.audit) j["audit"] = true;
    const fs::path p(o.config);
    return parse_config(j, p.has_parent_path() ? p.parent_path() : fs::path("."));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial birth-death simulator and self-regulation certificates"};
    app.require_subcommand(1);

    Overrides sim_o, cert_o, ver_o;
    auto* sim = app.add_subcommand("simulate", "run replicas and write traces and statistics");
    add_common(sim, sim_o);
    sim->add_option("--replicas", sim_o.replicas, "number of replicas");
    sim->add_flag("--audit", sim_o.audit, "audit cached death rates during the run");

    auto* cert = app.add_subcommand("certify", "search for (omega, theta) and verify it");
    add_common(cert, cert_o);

    auto* ver = app.add_subcommand("verify", "brute-force check of a certificate");
    add_common(ver, ver_o);
    std::string cert_path;
    ver->add_option("--certificate", cert_path, "certificate JSON (certify first when absent)")
        ->check(CLI::ExistingFile);

    auto* ana = app.add_subcommand("analyze", "recompute statistics from stored snapshots");
    std::string run_dir, ana_out;
    ana->add_option("--run", run_dir, "directory written by simulate")
        ->required()
        ->check(CLI::ExistingDirectory);
    ana->add_option("--out", ana_out, "output directory (default: the run directory)");

    auto* bnd = app.add_subcommand("bounds", "operator-norm bounds on the weighted scale");
    std::string variant = "bolker_pacala";
    sbd::oracles::NormBoundInput in;
    bnd->add_option("--variant", variant, "bolker_pacala or migration");
    bnd->add_option("--theta", in.theta);
    bnd->add_option("--theta-prime", in.theta_prime);
    bnd->add_option("--a-plus-mass", in.a_plus_mass);
    bnd->add_option("--a-minus-mass", in.a_minus_mass);
    bnd->add_option("--a-plus-sup", in.a_plus_sup);
    bnd->add_option("--a-minus-sup", in.a_minus_sup);
    bnd->add_option("--b-sup", in.b_sup);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        if (*sim) {
            const RunConfig c = load(sim_o);
            const ExperimentReport rep = cmd_simulate(c);
            std::cout << json{{"report", (fs::path(c.output_dir) / "report.json").string()},
                              {"checks", rep.checks},
                              {"checks_passed", rep.checks_passed},
                              {"explosion", rep.explosion}}
                             .dump(2)
                      << '\n';
            if (rep.explosion) std::cerr << "explosion guard tripped\n";
            return rep.exit_code();
        }
        if (*cert) {
            const CertifyOutcome o = cmd_certify(load(cert_o));
            std::cout << o.json.dump(2) << '\n';
            if (!o.error.empty()) std::cerr << o.error << '\n';
            return o.exit_code;
        }
        if (*ver) {
            std::optional<sbd::Certificate> c;
            if (!cert_path.empty()) {
                std::ifstream f(cert_path);
                json j;
                try {
                    f >> j;
                } catch (const json::parse_error& e) {
                    throw ConfigError("", std::string("invalid certificate JSON: ") + e.what());
                }
                c = certificate_from_json(j);
            }
            const CertifyOutcome o = cmd_verify(load(ver_o), c);
            std::cout << o.json.dump(2) << '\n';
            if (!o.error.empty()) std::cerr << o.error << '\n';
            return o.exit_code;
        }
        if (*ana) {
            const fs::path out = ana_out.empty() ? fs::path(run_dir) : fs::path(ana_out);
            const json j = cmd_analyze(run_dir, out);
            std::cout << json{{"analysis", (out / "analysis.json").string()},
                              {"checks", j.at("checks")},
                              {"checks_passed", j.at("checks_passed")}}
                             .dump(2)
                      << '\n';
            return j.at("checks_passed").get<bool>() ? kSuccess : kCheckFailed;
        }
        if (*bnd) {
            std::cout << cmd_bounds(variant, in).dump(2) << '\n';
            return kSuccess;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error at " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kUsage;
}
