#include "sbd/oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sbd::oracles {

double surgailis_density(double rho0, double b, double m, double t) {
    if (rho0 < 0.0 || b < 0.0 || m < 0.0 || t < 0.0)
        throw std::invalid_argument("surgailis_density: arguments must be nonnegative");
    if (m == 0.0) return rho0 + b * t;
    const double eq = b / m;
    return eq + (rho0 - eq) * std::exp(-m * t);
}

double bp_meanfield(double rho0, double a_plus_mass, double a_minus_mass, double m, double t) {
    if (rho0 < 0.0 || a_plus_mass < 0.0 || a_minus_mass < 0.0 || m < 0.0 || t < 0.0)
        throw std::invalid_argument("bp_meanfield: arguments must be nonnegative");
    const double growth = a_plus_mass - m;
    if (rho0 == 0.0) return 0.0;
    if (a_minus_mass == 0.0) return rho0 * std::exp(growth * t);
    if (growth == 0.0) return rho0 / (1.0 + a_minus_mass * rho0 * t);
    // rho(t) = r rho0 / (a rho0 + (r - a rho0) e^{-r t})
    return growth * rho0 /
           (a_minus_mass * rho0 + (growth - a_minus_mass * rho0) * std::exp(-growth * t));
}

namespace {
void check(const NormBoundInput& in) {
    if (!(in.theta_prime > in.theta)) throw std::invalid_argument("theta_prime must exceed theta");
    if (in.a_plus_mass < 0.0 || in.a_minus_mass < 0.0 || in.a_plus_sup < 0.0 ||
        in.a_minus_sup < 0.0 || in.b_sup < 0.0)
        throw std::invalid_argument("kernel functionals must be nonnegative");
}
}  // namespace

double norm_bound_bp(const NormBoundInput& in) {
    check(in);
    const double e = std::numbers::e;
    const double gap = in.theta_prime - in.theta;
    return 4.0 * (in.a_plus_sup + in.a_minus_sup) / (e * e * gap * gap) +
           (in.a_plus_mass + in.a_minus_mass * std::exp(in.theta_prime)) / (e * gap);
}

double norm_bound_migration(const NormBoundInput& in) {
    check(in);
    const double e = std::numbers::e;
    const double gap = in.theta_prime - in.theta;
    return 4.0 * in.a_minus_sup / (e * e * gap * gap) +
           (in.b_sup * std::exp(-in.theta) + in.a_minus_mass * std::exp(in.theta_prime)) /
               (e * gap);
}

}  // namespace sbd::oracles
