#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbd/rng.hpp"
#include "sbd/vec.hpp"

namespace sbd {

enum class KernelFamily { gaussian, triangular, exponential, tabulated };

std::string to_string(KernelFamily f);

/// Radial, non-increasing, integrable interaction kernel a(x) = profile(|x|) on R^d.
///
/// Families:
///  - gaussian(c, sigma):    c (2 pi sigma^2)^{-d/2} exp(-|x|^2 / (2 sigma^2)), mass c
///  - exponential(c, scale): c exp(-|x|/scale) / (d! c_d scale^d),           mass c
///  - triangular(c, R):      c (1 - |x|/R)_+,  c is the height at the origin
///  - tabulated:             piecewise-linear profile on a radial grid starting at 0.
///                           If the last value is positive, a tail scale s must be
///                           declared and the profile continues as v_n exp(-(rho - r_n)/s).
///
/// Kernels are immutable values; samplers draw from the caller's RNG stream.
class Kernel {
public:
    static Kernel gaussian(double weight, double sigma, int dim);
    static Kernel triangular(double height, double radius, int dim);
    static Kernel exponential(double weight, double scale, int dim);
    static Kernel tabulated(std::vector<double> radii, std::vector<double> values, int dim,
                            std::optional<double> tail_scale = std::nullopt);
    /// Two-column CSV (radius, value), optional header line.
    static Kernel tabulated_from_csv(const std::string& path, int dim,
                                     std::optional<double> tail_scale = std::nullopt);

    KernelFamily family() const noexcept { return family_; }
    int dim() const noexcept { return dim_; }

    /// Integral over R^d. Closed form for every family (tabulated: exact
    /// piecewise-polynomial integration plus the analytic tail).
    double mass() const noexcept { return mass_; }
    /// sup_x a(x) = profile(0).
    double sup_norm() const { return profile(0.0); }

    double profile(double radius) const;
    double evaluate(std::span<const double> x) const;
    double evaluate(const Vec& x) const { return profile(norm(x, dim_)); }

    /// Integral of a over {|x| > radius}.
    double tail_mass(double radius) const;
    /// Radius beyond which the kernel vanishes (compact support) or carries
    /// less than kTailFraction of its mass.
    double cutoff() const noexcept { return cutoff_; }
    /// Length scale: sigma, scale, R, or the last tabulated radius.
    double characteristic_radius() const noexcept;
    bool compact() const noexcept;

    /// Same shape, multiplied by alpha > 0.
    Kernel scaled(double alpha) const;

    /// Displacement with density a(x) / mass().
    Vec sample_displacement(Rng& rng) const;

    /// Family parameters, in the order of the named constructor.
    double param0() const noexcept { return p0_; }
    double param1() const noexcept { return p1_; }
    const std::vector<double>& table_radii() const noexcept { return radii_; }
    const std::vector<double>& table_values() const noexcept { return values_; }
    std::optional<double> tail_scale() const noexcept { return tail_scale_; }

    static constexpr double kTailFraction = 1e-10;

private:
    Kernel() = default;
    void finalize();
    double tabulated_mass_beyond(double radius) const;
    double sample_radius(Rng& rng) const;
    double sample_tabulated_radius(Rng& rng) const;

    KernelFamily family_{KernelFamily::gaussian};
    int dim_{1};
    double p0_{0.0};  // weight / height
    double p1_{0.0};  // sigma / R / scale
    double norm_const_{0.0};  // profile(rho) = norm_const_ * shape(rho)
    std::vector<double> radii_, values_;
    std::optional<double> tail_scale_;
    std::vector<double> segment_step_mass_;  // tabulated sampler: cumulative dominating step masses
    double step_total_{0.0};
    double tail_total_{0.0};
    double mass_{0.0};
    double cutoff_{0.0};
};

/// Bounded nonnegative immigration intensity b(x) on the torus [0, L)^d:
/// either constant or piecewise constant on a regular grid of n^d cells.
class ImmigrationField {
public:
    static ImmigrationField constant(double b);
    /// `values` is row-major over cells (first coordinate slowest), n^d entries.
    static ImmigrationField grid(int cells_per_side, std::vector<double> values);

    bool is_constant() const noexcept { return cells_per_side_ == 0; }
    int cells_per_side() const noexcept { return cells_per_side_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double sup_norm() const noexcept { return sup_; }
    double value(const Vec& x, double side, int dim) const;
    /// Integral of b over [0, side)^dim.
    double integral(double side, int dim) const;
    /// Position with density b(x) / integral.
    Vec sample_position(double side, int dim, Rng& rng) const;

private:
    int cells_per_side_{0};
    std::vector<double> values_;  // constant: a single value
    std::vector<double> cumulative_;
    double sup_{0.0};
};

}  // namespace sbd
