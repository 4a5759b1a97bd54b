#include <cmath>
#include <initializer_list>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "sbd/oracles.hpp"

using namespace sbd::oracles;

TEST_CASE("Surgailis density") {
    CHECK(surgailis_density(1, 0.5, 0, 2) == 2.0);
    CHECK(surgailis_density(3, 1, 2, 200) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(surgailis_density(1, 1, 1, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS(surgailis_density(-1, 1, 1, 1));
}

TEST_CASE("Surgailis density solves rho' = b - m rho") {
    for (double m : {0.0, 0.3, 2.0}) {
        for (double t = 0.05; t < 5; t += 0.05) {
            const double h = 1e-4;
            const double d = (surgailis_density(1.3, 0.7, m, t + h) -
                              surgailis_density(1.3, 0.7, m, t - h)) /
                             (2 * h);
            // analytic derivative b - m rho checked against the central difference
            // (truncation error of the difference is O(h^2 m^3))
            CHECK(std::abs(d - (0.7 - m * surgailis_density(1.3, 0.7, m, t))) < 1e-7);
        }
    }
    // exact residual with the closed-form derivative
    for (double t = 0; t < 5; t += 0.1) {
        const double m = 0.8, b = 0.6, r0 = 2.0;
        const double deriv = -m * (r0 - b / m) * std::exp(-m * t);
        CHECK(std::abs(deriv - (b - m * surgailis_density(r0, b, m, t))) < 1e-10);
    }
}

TEST_CASE("Bolker-Pacala mean field") {
    CHECK(bp_meanfield(0.2, 2, 1, 1, 100) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bp_meanfield(0.5, 1.3, 0, 0, 2) == doctest::Approx(0.5 * std::exp(2.6)).epsilon(1e-14));
    CHECK(bp_meanfield(1.0, 1, 0.5, 1.5, 60) < 1e-10);
    CHECK(bp_meanfield(1.0, 1, 0, 1.5, 60) < 1e-10);
    // larger competition never raises the density
    for (double t : {0.5, 2.0, 10.0}) {
        double prev = INFINITY;
        for (double am : {0.0, 0.1, 0.5, 1.0, 3.0}) {
            const double r = bp_meanfield(1.5, 1.2, am, 0.2, t);
            CHECK(r <= prev);
            prev = r;
        }
    }
    // logistic ODE residual
    for (double t = 0.1; t < 8; t += 0.1) {
        const double h = 1e-5, ap = 1.4, am = 0.6, m = 0.3;
        const double d = (bp_meanfield(0.3, ap, am, m, t + h) - bp_meanfield(0.3, ap, am, m, t - h)) / (2 * h);
        const double r = bp_meanfield(0.3, ap, am, m, t);
        CHECK(std::abs(d - ((ap - m) * r - am * r * r)) < 1e-7);
    }
}

TEST_CASE("norm bounds at unit inputs") {
    NormBoundInput in{0, 1, 1, 1, 1, 1, 1};
    const double e = std::numbers::e;
    CHECK(norm_bound_bp(in) == doctest::Approx(8 / (e * e) + (1 + e) / e).epsilon(1e-14));
    CHECK(norm_bound_migration(in) == doctest::Approx(4 / (e * e) + (1 + e) / e).epsilon(1e-14));
    CHECK(std::abs(norm_bound_bp(in) - 2.450561707064344) < 1e-12);
    CHECK(std::abs(norm_bound_migration(in) - 1.9092205741178931) < 1e-12);
}

TEST_CASE("norm bounds: zero kernels, poles, and errors") {
    NormBoundInput zero{0, 1, 0, 0, 0, 0, 0};
    CHECK(norm_bound_bp(zero) == 0.0);
    CHECK(norm_bound_migration(zero) == 0.0);

    NormBoundInput in{0.5, 1.5, 1, 2, 0.5, 1, 3};
    double prev = 0;
    for (double gap : {1.0, 0.5, 0.1, 0.01, 1e-4}) {
        in.theta_prime = in.theta + gap;
        const double b = norm_bound_bp(in);
        CHECK(b > prev);
        prev = b;
    }
    CHECK(prev > 1e6);

    in.theta_prime = in.theta;
    CHECK_THROWS_AS(norm_bound_bp(in), std::invalid_argument);
    CHECK_THROWS_AS(norm_bound_migration(in), std::invalid_argument);
}

TEST_CASE("migration bound depends on theta through e^{-theta} and the gap") {
    NormBoundInput a{0.0, 1.0, 0, 0.7, 0, 1.3, 2.0};
    NormBoundInput b = a;
    b.theta = 0.4;
    b.theta_prime = 1.4;
    const double e = std::numbers::e;
    const double gap = 1.0;
    // only the b-term and the e^{theta'} term move
    const double expect = norm_bound_migration(a) +
                          (2.0 * (std::exp(-0.4) - 1) + 0.7 * (std::exp(1.4) - std::exp(1.0))) / (e * gap);
    CHECK(norm_bound_migration(b) == doctest::Approx(expect).epsilon(1e-13));
}
