#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "sbd/geometry.hpp"
#include "sbd/vec.hpp"

namespace sbd {

/// One replica's points at a fixed time.
using PointSet = std::vector<Vec>;

struct Estimate {
    double value{0.0};
    double se{0.0};
};

/// Mean and between-replica standard error (sample sd / sqrt(n)).
Estimate mean_and_se(std::span<const double> samples);

/// Intensity |gamma| / L^d averaged over replicas. Requires >= 2 replicas.
Estimate density(const Torus& torus, std::span<const PointSet> replicas);

struct PairCorrelationBin {
    double r_lo{0.0};
    double r_hi{0.0};
    double g{0.0};
    double se{0.0};
    double r_mid() const noexcept { return 0.5 * (r_lo + r_hi); }
};

/// `count` equal-width bins on [0, r_max].
std::vector<double> equal_bins(double r_max, int count);

/// Pair correlation g(r) from ordered pairs at periodic distance in each bin.
/// Per replica with N >= 2 points: g_i = pairs_i / (N (N-1) V_shell / L^d),
/// which is unbiased for Poisson input given N; replicas are then averaged.
/// Replicas run in parallel (OpenMP); aggregation is in replica order.
std::vector<PairCorrelationBin> pair_correlation(const Torus& torus,
                                                 std::span<const PointSet> replicas,
                                                 std::span<const double> edges);

/// Replica averages of N_w (N_w - 1) ... (N_w - n + 1), n = 1..n_max.
std::vector<Estimate> factorial_moments(std::span<const PointSet> replicas, const Window& w,
                                        int dim, int n_max);

/// Same, from window counts.
std::vector<Estimate> factorial_moments_from_counts(std::span<const double> counts, int n_max);

/// Least-squares fit of log F_n = log C + n (theta + log V) over the positive moments.
struct EnvelopeFit {
    double c{0.0};
    double theta{0.0};
    std::vector<int> orders;         // n values used in the fit
    std::vector<double> residuals;   // log F_n - fitted
    double max_abs_residual{0.0};
    /// max_abs_residual <= tolerance: moments consistent with a C e^{theta n} V^n envelope.
    bool envelope_consistent{false};
};

class StatisticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

EnvelopeFit envelope_fit(std::span<const Estimate> moments, double window_volume,
                         double residual_tolerance = 0.05);

/// E[N^n] from falling-factorial moments (Stirling numbers of the second kind).
std::vector<double> power_from_factorial(std::span<const double> factorial);
/// Falling-factorial moments from E[N^n] (signed Stirling numbers of the first kind).
std::vector<double> factorial_from_power(std::span<const double> power);

struct MomentReport {
    double t{0.0};
    std::size_t replicas{0};
    Estimate density;
    std::vector<PairCorrelationBin> pair_correlation;
    Window window;
    double window_volume{0.0};
    std::vector<Estimate> factorial_moments;
    std::vector<double> power_moments;
    std::optional<EnvelopeFit> envelope;
};

MomentReport moment_report(const Torus& torus, double t, std::span<const PointSet> replicas,
                           const Window& w, int n_max, std::span<const double> edges);

nlohmann::json to_json(const MomentReport& r, int dim);
void write_pair_correlation_csv(std::ostream& out, std::span<const PairCorrelationBin> bins);

namespace serial {
std::vector<PairCorrelationBin> pair_correlation(const Torus& torus,
                                                 std::span<const PointSet> replicas,
                                                 std::span<const double> edges);
}

}  // namespace sbd
