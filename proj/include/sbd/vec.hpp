#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace sbd {

/// Spatial dimensions supported by the simulator and the certificate engine.
inline constexpr int kMaxDim = 3;

/// A point or displacement. Components at index >= dim are kept at zero.
using Vec = std::array<double, kMaxDim>;

inline double norm(const Vec& x, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

inline double flat_distance(const Vec& x, const Vec& y, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim)
        throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) +
                                    "], got " + std::to_string(dim));
}

/// Volume of the unit ball in R^d.
double unit_ball_volume(int dim);

/// Surface area of the unit sphere in R^d (d * unit_ball_volume(d)).
double unit_sphere_area(int dim);

}  // namespace sbd
