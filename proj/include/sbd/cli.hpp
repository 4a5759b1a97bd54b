#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbd/certificate.hpp"
#include "sbd/dynamics.hpp"
#include "sbd/geometry.hpp"
#include "sbd/oracles.hpp"
#include "sbd/statistics.hpp"

namespace sbd::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 2,
    kCheckFailed = 3,
    kExplosion = 4,
};

/// Invalid configuration; `path` is the JSON pointer of the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct CertificateSettings {
    double omega{1.0};
    std::uint64_t trials{100000};
    int size_max{30};
    PackingChoice packing{PackingChoice::unit};
    std::optional<SearchGrid> grid;  // default_search_grid when absent
    std::vector<double> sampler_mix{1, 1, 1, 1, 1, 1};
};

struct RunConfig {
    ModelSpec model;
    double side{10.0};
    int dim{1};
    std::optional<double> initial_poisson;      // density
    std::vector<Vec> initial_points;            // explicit points (loaded from CSV)
    std::optional<std::string> initial_csv;     // provenance only
    double t_end{1.0};
    std::vector<double> snapshot_times;
    double burn_in{0.0};
    std::size_t replicas{1};
    std::uint64_t seed{1};
    Window window;
    int n_max{3};
    std::vector<double> g_edges;
    CertificateSettings certificate;
    std::string output_dir{"out"};
    std::size_t max_population{1000000};
    bool record_events{true};
    bool audit{false};

    Torus torus() const { return Torus(side, dim); }
};

/// Parse and validate a configuration; relative CSV paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);
/// Resolved configuration with every default filled in. parse_config of the
/// result reproduces the same RunConfig.
nlohmann::json to_json(const RunConfig& c);

nlohmann::json kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const nlohmann::json& j, int default_dim, const std::string& path,
                        const std::filesystem::path& base_dir);
nlohmann::json certificate_to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j);

struct ExperimentReport {
    nlohmann::json manifest;
    std::vector<std::string> trace_paths;
    std::vector<MomentReport> moments;
    std::vector<RunResult> runs;
    nlohmann::json checks = nlohmann::json::object();
    bool checks_passed{true};
    bool explosion{false};
    nlohmann::json json;
    int exit_code() const;
};

/// Run all replicas (OpenMP over replicas), write traces, snapshots,
/// manifest.json and report.json under `output_dir`.
ExperimentReport cmd_simulate(const RunConfig& config);

/// Recompute statistics from the snapshots stored by cmd_simulate in `run_dir`;
/// writes analysis.json to `out_dir`.
nlohmann::json cmd_analyze(const std::filesystem::path& run_dir,
                           const std::filesystem::path& out_dir);

struct CertifyOutcome {
    std::optional<Certificate> certificate;
    std::optional<ViolationReport> violations;
    std::string error;
    nlohmann::json json;
    int exit_code{kSuccess};
};

/// Certify + verify. Exit code 0 iff theta > 0 and no violations.
CertifyOutcome cmd_certify(const RunConfig& config);

/// Verify an existing certificate (or certify first when none is given).
/// Writes the argmin configuration as CSV under `output_dir`.
CertifyOutcome cmd_verify(const RunConfig& config, const std::optional<Certificate>& cert);

/// {variant, inputs, bound}; throws std::invalid_argument when theta' <= theta.
nlohmann::json cmd_bounds(const std::string& variant, const oracles::NormBoundInput& in);

}  // namespace sbd::cli
