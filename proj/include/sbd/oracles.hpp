#pragma once

namespace sbd::oracles {

/// Density of the Surgailis (free immigration-death) model started from a
/// Poisson state of density rho0: rho' = b - m rho.
///   m = 0: rho0 + b t;  m > 0: b/m + (rho0 - b/m) e^{-m t}.
double surgailis_density(double rho0, double b, double m, double t);

/// Poisson-closure logistic for the Bolker-Pacala density,
///   rho' = (<a+> - m) rho - <a-> rho^2,
/// solved in closed form. A mean-field comparator only; it neglects
/// spatial correlations and is used with loose tolerances.
double bp_meanfield(double rho0, double a_plus_mass, double a_minus_mass, double m, double t);

/// Kernel functionals entering the operator-norm bounds on the scale of
/// weighted spaces indexed by theta < theta_prime.
struct NormBoundInput {
    double theta{0.0};
    double theta_prime{1.0};
    double a_plus_mass{0.0};
    double a_minus_mass{0.0};
    double a_plus_sup{0.0};
    double a_minus_sup{0.0};
    double b_sup{0.0};
};

/// Bolker-Pacala:
///   4 (||a+|| + ||a-||) / (e^2 (t' - t)^2) + (<a+> + <a-> e^{t'}) / (e (t' - t)).
/// Throws std::invalid_argument if theta_prime <= theta.
double norm_bound_bp(const NormBoundInput& in);

/// Migration:
///   4 ||a-|| / (e^2 (t' - t)^2) + (||b|| e^{-t} + <a-> e^{t'}) / (e (t' - t)).
double norm_bound_migration(const NormBoundInput& in);

}  // namespace sbd::oracles
