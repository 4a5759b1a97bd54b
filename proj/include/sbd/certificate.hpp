#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sbd/kernel.hpp"
#include "sbd/vec.hpp"

namespace sbd {

/// Self-regulation certificate: constants (omega, theta) such that
///
///   U_theta(eta) = omega |eta| + sum_{x != y} a-(x-y) - theta sum_{x != y} a+(x-y) >= 0
///
/// for every finite configuration eta in R^d, built from a cubic partition of
/// side h (upper Riemann sum of a+ within eps of its mass), a ball radius r with
/// a-(2r) > 0, and a packing bound on r-separated points per cell.
struct Certificate {
    int dim{1};
    double eps{0.0};
    double h{0.0};
    double r{0.0};
    double a_r_minus{0.0};       // inf of a- on the ball of radius 2r
    double riemann_sum{0.0};     // h^d sum_l sup_{E_l} a+
    double g{0.0};               // (Delta / c_d) ((h + 2r) / (h r))^d
    double delta{0.0};           // max{ ||a+||, (<a+> + eps) g }
    double packing_constant{1.0};
    double unit_ball_volume{0.0};
    double a_plus_mass{0.0};
    double a_plus_sup{0.0};
    double omega{0.0};
    double theta{0.0};
};

enum class PackingChoice {
    unit,   // Delta(d) = 1 for every d
    tight,  // Delta(1) = 1, Delta(2) = pi / sqrt(12), Delta(3) = pi / sqrt(18)
};

double packing_constant(int dim, PackingChoice choice);

/// Search grid over (eps, r, h). eps values are absolute; h = factor * r.
struct SearchGrid {
    std::vector<double> eps;
    std::vector<double> r;
    std::vector<double> h_factors;
};

/// eps in {0.1, 0.5, 1} <a+>, r on a log grid over [1e-2, 10] times the
/// characteristic radius of a- (10 points per decade), h in {r/2, r, 2r}.
SearchGrid default_search_grid(const Kernel& a_plus, const Kernel& a_minus);

class CertificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// inf_{|x| < 2r} a-(x); for radial non-increasing kernels this is a-(2r).
double inf_on_ball(const Kernel& a_minus, double r);

/// Rigorous upper Riemann sum h^d sum_l sup_{E_l} a+ over the lattice cubes of
/// side h. Cells within the kernel cutoff are summed with the supremum taken at
/// the cell point nearest the origin; the remaining cells are bounded by
/// 2^d times the kernel tail mass. Throws if the enumeration would exceed
/// `max_cells` lattice points.
double riemann_upper_sum(const Kernel& a_plus, double h, double max_cells = 2e8);

/// g_d(h, r) = (Delta / c_d) ((h + 2r) / (h r))^d.
double packing_bound(int dim, double h, double r, double packing);

/// Certificate at a single grid point, or nullopt when the point is infeasible
/// (a-(2r) = 0, Riemann sum above <a+> + eps, or too many cells).
std::optional<Certificate> certificate_at(const Kernel& a_plus, const Kernel& a_minus,
                                          double omega, double eps, double h, double r,
                                          PackingChoice packing = PackingChoice::unit);

/// Certificate maximizing theta over the grid (first maximum in grid order).
/// Requires omega > 0. Throws CertificationError("no competition within reach")
/// when a-(2r) = 0 for every grid r.
Certificate certify(const Kernel& a_plus, const Kernel& a_minus, double omega,
                    const SearchGrid& grid, PackingChoice packing = PackingChoice::unit);

/// Recomputes the eps/h/r -> g -> delta -> theta chain from the stored fields.
bool certificate_consistent(const Certificate& c, double rel_tol = 1e-12);

/// U_theta(eta) with flat (non-periodic) distances.
double u_theta(std::span<const Vec> eta, const Kernel& a_plus, const Kernel& a_minus,
               double omega, double theta);
/// U_theta(eta) - U_theta(eta \ x) = omega + 2 (sum_y a-(x-y) - theta sum_y a+(x-y)).
double u_theta_increment(const Vec& x, std::span<const Vec> rest, const Kernel& a_plus,
                         const Kernel& a_minus, double omega, double theta);
/// Index of a point maximizing |eta intersect K_{2r}(y)| (first one on ties).
std::size_t max_crowding_point(std::span<const Vec> eta, double r, int dim);

// --- brute-force verification ----------------------------------------------

enum class SamplerKind {
    uniform_box,       // uniform in a box at the scale of both kernels
    poisson,           // Poisson count, uniform positions
    cluster_r,         // one Gaussian blob at the certificate radius r
    cluster_dispersal, // one Gaussian blob at the a+ scale
    multi_cluster,     // several tight blobs spread over the a+ scale
    coincident,        // all points at (numerically) the same location
};
inline constexpr int kSamplerKinds = 6;

struct VerifyOptions {
    std::uint64_t trials{100000};
    int size_max{30};
    std::uint64_t seed{1};
    /// Relative weights of the samplers, indexed by SamplerKind.
    std::vector<double> sampler_mix{1, 1, 1, 1, 1, 1};
};

struct ViolationReport {
    std::uint64_t trials{0};
    std::uint64_t violations{0};
    double min_u{0.0};
    std::uint64_t argmin_trial{0};
    std::vector<Vec> argmin_config;
};

/// Configuration for trial `trial` (deterministic in (seed, trial)).
std::vector<Vec> sample_trial_configuration(const Certificate& cert, const Kernel& a_plus,
                                            const Kernel& a_minus, const VerifyOptions& opts,
                                            std::uint64_t trial);

/// OpenMP-parallel over trials; reduction is the minimum with ties broken by
/// the lower trial index, so the result is independent of thread count.
ViolationReport verify_certificate(const Certificate& cert, const Kernel& a_plus,
                                   const Kernel& a_minus, const VerifyOptions& opts);

namespace serial {
double riemann_upper_sum(const Kernel& a_plus, double h, double max_cells = 2e8);
ViolationReport verify_certificate(const Certificate& cert, const Kernel& a_plus,
                                   const Kernel& a_minus, const VerifyOptions& opts);
}  // namespace serial

}  // namespace sbd
