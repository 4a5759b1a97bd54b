#include "sbd/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "sbd/rng.hpp"

namespace sbd {

double packing_constant(int dim, PackingChoice choice) {
    check_dim(dim);
    if (choice == PackingChoice::unit) return 1.0;
    switch (dim) {
        case 1: return 1.0;
        case 2: return std::numbers::pi / std::sqrt(12.0);
        case 3: return std::numbers::pi / std::sqrt(18.0);
        default: return 1.0;
    }
}

SearchGrid default_search_grid(const Kernel& a_plus, const Kernel& a_minus) {
    SearchGrid g;
    for (double f : {0.1, 0.5, 1.0}) g.eps.push_back(f * a_plus.mass());
    const double scale = a_minus.characteristic_radius();
    constexpr int kPerDecade = 10;
    for (int i = 0; i <= 3 * kPerDecade; ++i)
        g.r.push_back(scale * std::pow(10.0, -2.0 + static_cast<double>(i) / kPerDecade));
    g.h_factors = {0.5, 1.0, 2.0};
    return g;
}

double inf_on_ball(const Kernel& a_minus, double r) { return a_minus.profile(2.0 * r); }

double packing_bound(int dim, double h, double r, double packing) {
    return packing / unit_ball_volume(dim) * std::pow((h + 2.0 * r) / (h * r), dim);
}

namespace {

// Enumeration radius and tail bound shared by both Riemann-sum routes. A cell
// whose nearest point p to the origin has |p| >= R is dominated by the
// integral of a+ over a neighbouring cell lying in {|x| >= |p| - sqrt(d) h};
// each such cell is hit at most 2^d times.
struct RiemannPlan {
    double radius;
    double tail;
    long per_axis;  // nearest-point indices m in [0, per_axis)
};

RiemannPlan plan_riemann(const Kernel& k, double h, double max_cells) {
    if (!(h > 0.0)) throw std::invalid_argument("cell side must be positive");
    const int d = k.dim();
    RiemannPlan p;
    p.radius = k.cutoff() + std::sqrt(static_cast<double>(d)) * h;
    p.tail = std::pow(2.0, d) * k.tail_mass(k.cutoff());
    const double m = std::ceil(p.radius / h);
    if (std::pow(m, d) > max_cells)
        throw std::length_error("Riemann sum needs too many cells at this h");
    p.per_axis = static_cast<long>(m);
    return p;
}

// Sum of profile(h |m|) over m in N^{d-1} (the trailing coordinates) with
// h^2 |m|^2 < radius^2 - used.
double orthant_partial(const Kernel& k, double h, int remaining, double used_sq,
                       double radius_sq) {
    if (remaining == 0) return k.profile(std::sqrt(used_sq));
    double s = 0.0;
    for (long m = 0;; ++m) {
        const double c = h * static_cast<double>(m);
        const double sq = used_sq + c * c;
        if (sq >= radius_sq) break;
        s += orthant_partial(k, h, remaining - 1, sq, radius_sq);
    }
    return s;
}

}  // namespace

double riemann_upper_sum(const Kernel& a_plus, double h, double max_cells) {
    const RiemannPlan plan = plan_riemann(a_plus, h, max_cells);
    const int d = a_plus.dim();
    const double radius_sq = plan.radius * plan.radius;
    // Nearest-point magnitude m h occurs for lattice index m and -m-1 on each
    // axis, so the full sum is 2^d times the orthant sum.
    std::vector<double> partial(static_cast<std::size_t>(plan.per_axis), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
    for (long m0 = 0; m0 < plan.per_axis; ++m0) {
        const double c = h * static_cast<double>(m0);
        if (c * c < radius_sq)
            partial[static_cast<std::size_t>(m0)] =
                orthant_partial(a_plus, h, d - 1, c * c, radius_sq);
    }
    double s = 0.0;
    for (double v : partial) s += v;
    return std::pow(2.0 * h, d) * s + plan.tail;
}

namespace serial {

double riemann_upper_sum(const Kernel& a_plus, double h, double max_cells) {
    const RiemannPlan plan = plan_riemann(a_plus, h, max_cells);
    const int d = a_plus.dim();
    // Direct enumeration of every lattice cube [k h, (k+1) h)^d with |k_i| <= per_axis.
    const long lo = -plan.per_axis, hi = plan.per_axis - 1;
    std::array<long, kMaxDim> k{};
    for (int i = 0; i < d; ++i) k[i] = lo;
    double s = 0.0;
    for (;;) {
        Vec nearest{};
        for (int i = 0; i < d; ++i) {
            const double a = h * static_cast<double>(k[i]), b = a + h;
            nearest[i] = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
        }
        const double rho = norm(nearest, d);
        if (rho < plan.radius) s += a_plus.profile(rho);
        int i = d - 1;
        while (i >= 0 && k[i] == hi) k[i--] = lo;
        if (i < 0) break;
        ++k[i];
    }
    return std::pow(h, d) * s + plan.tail;
}

}  // namespace serial

namespace {

// Certificate chain for one (eps, h, r) once the Riemann sum is known.
std::optional<Certificate> assemble(const Kernel& a_plus, const Kernel& a_minus, double omega,
                                    double eps, double h, double r, double riemann_sum,
                                    PackingChoice packing) {
    Certificate c;
    c.dim = a_plus.dim();
    c.eps = eps;
    c.h = h;
    c.r = r;
    c.omega = omega;
    c.a_r_minus = inf_on_ball(a_minus, r);
    c.riemann_sum = riemann_sum;
    c.a_plus_mass = a_plus.mass();
    c.a_plus_sup = a_plus.sup_norm();
    if (!(c.a_r_minus > 0.0) || c.riemann_sum > c.a_plus_mass + eps) return std::nullopt;
    c.packing_constant = packing_constant(c.dim, packing);
    c.unit_ball_volume = unit_ball_volume(c.dim);
    c.g = packing_bound(c.dim, h, r, c.packing_constant);
    c.delta = std::max(c.a_plus_sup, (c.a_plus_mass + eps) * c.g);
    c.theta = std::min(omega / (2.0 * c.delta), c.a_r_minus / c.delta);
    return c;
}

}  // namespace

std::optional<Certificate> certificate_at(const Kernel& a_plus, const Kernel& a_minus,
                                          double omega, double eps, double h, double r,
                                          PackingChoice packing) {
    if (a_plus.dim() != a_minus.dim())
        throw std::invalid_argument("a+ and a- have different dimensions");
    if (!(inf_on_ball(a_minus, r) > 0.0)) return std::nullopt;
    double sum;
    try {
        sum = riemann_upper_sum(a_plus, h);
    } catch (const std::length_error&) {
        return std::nullopt;
    }
    return assemble(a_plus, a_minus, omega, eps, h, r, sum, packing);
}

Certificate certify(const Kernel& a_plus, const Kernel& a_minus, double omega,
                    const SearchGrid& grid, PackingChoice packing) {
    if (!(omega > 0.0) || !std::isfinite(omega))
        throw std::invalid_argument("omega must be positive");
    if (a_plus.dim() != a_minus.dim())
        throw std::invalid_argument("a+ and a- have different dimensions");

    // theta does not depend on the Riemann sum, which only decides feasibility.
    // Rank candidates by theta (stable, so ties keep grid order) and compute
    // sums lazily until the first feasible one.
    struct Candidate {
        double eps, h, r, theta;
    };
    std::vector<Candidate> cands;
    for (double r : grid.r) {
        if (!(inf_on_ball(a_minus, r) > 0.0)) continue;
        for (double factor : grid.h_factors)
            for (double eps : grid.eps) {
                const auto c =
                    assemble(a_plus, a_minus, omega, eps, factor * r, r, a_plus.mass(), packing);
                if (c) cands.push_back({eps, factor * r, r, c->theta});
            }
    }
    if (cands.empty()) throw CertificationError("no competition within reach");
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.theta > b.theta; });

    std::map<double, std::optional<double>> sums;  // h -> Riemann sum (nullopt: too many cells)
    for (const Candidate& cand : cands) {
        auto [it, fresh] = sums.try_emplace(cand.h);
        if (fresh) {
            try {
                it->second = riemann_upper_sum(a_plus, cand.h);
            } catch (const std::length_error&) {
                it->second.reset();
            }
        }
        if (!it->second) continue;
        const auto c =
            assemble(a_plus, a_minus, omega, cand.eps, cand.h, cand.r, *it->second, packing);
        if (c) return *c;
    }
    throw CertificationError("no grid point satisfies the Riemann bound");
}

bool certificate_consistent(const Certificate& c, double rel_tol) {
    auto close = [rel_tol](double a, double b) {
        return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
    };
    const double g = c.packing_constant / c.unit_ball_volume *
                     std::pow((c.h + 2.0 * c.r) / (c.h * c.r), c.dim);
    const double delta = std::max(c.a_plus_sup, (c.a_plus_mass + c.eps) * g);
    const double theta_max = std::min(c.omega / (2.0 * delta), c.a_r_minus / delta);
    return c.a_r_minus > 0.0 && c.riemann_sum <= c.a_plus_mass + c.eps &&
           close(c.unit_ball_volume, unit_ball_volume(c.dim)) && close(g, c.g) &&
           close(delta, c.delta) && c.theta > 0.0 && c.theta <= theta_max * (1.0 + rel_tol);
}

double u_theta(std::span<const Vec> eta, const Kernel& a_plus, const Kernel& a_minus,
               double omega, double theta) {
    const int d = a_plus.dim();
    double minus = 0.0, plus = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        for (std::size_t j = i + 1; j < eta.size(); ++j) {
            const double rho = flat_distance(eta[i], eta[j], d);
            minus += a_minus.profile(rho);
            plus += a_plus.profile(rho);
        }
    }
    // Ordered pairs: each unordered pair counted twice.
    return omega * static_cast<double>(eta.size()) + 2.0 * minus - theta * 2.0 * plus;
}

double u_theta_increment(const Vec& x, std::span<const Vec> rest, const Kernel& a_plus,
                         const Kernel& a_minus, double omega, double theta) {
    const int d = a_plus.dim();
    double minus = 0.0, plus = 0.0;
    for (const Vec& y : rest) {
        const double rho = flat_distance(x, y, d);
        minus += a_minus.profile(rho);
        plus += a_plus.profile(rho);
    }
    return omega + 2.0 * (minus - theta * plus);
}

std::size_t max_crowding_point(std::span<const Vec> eta, double r, int dim) {
    std::size_t best = 0, best_count = 0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        std::size_t count = 0;
        for (const Vec& y : eta)
            if (flat_distance(eta[i], y, dim) < 2.0 * r) ++count;
        if (count > best_count) {
            best = i;
            best_count = count;
        }
    }
    return best;
}

// --- verification -----------------------------------------------------------

std::vector<Vec> sample_trial_configuration(const Certificate& cert, const Kernel& a_plus,
                                            const Kernel& a_minus, const VerifyOptions& opts,
                                            std::uint64_t trial) {
    Rng rng = make_stream(opts.seed, trial);
    const int d = cert.dim;
    const double dispersal = a_plus.characteristic_radius();
    const double box = 2.0 * std::max({dispersal, 2.0 * cert.r, a_minus.characteristic_radius()});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> size(1, std::max(1, opts.size_max));

    std::vector<double> cumulative;
    double acc = 0.0;
    for (int i = 0; i < kSamplerKinds; ++i) {
        acc += i < static_cast<int>(opts.sampler_mix.size()) ? opts.sampler_mix[i] : 0.0;
        cumulative.push_back(acc);
    }
    if (!(acc > 0.0)) throw std::invalid_argument("sampler mix has no positive weight");
    const double pick = unif(rng) * acc;
    auto kind = static_cast<SamplerKind>(
        std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                     cumulative.begin(),
                                 kSamplerKinds - 1));

    auto uniform_point = [&](double side) {
        Vec x{};
        for (int i = 0; i < d; ++i) x[i] = side * unif(rng);
        return x;
    };
    auto gaussian_around = [&](const Vec& c, double sd) {
        std::normal_distribution<double> normal(0.0, sd);
        Vec x = c;
        for (int i = 0; i < d; ++i) x[i] += normal(rng);
        return x;
    };

    std::vector<Vec> eta;
    switch (kind) {
        case SamplerKind::uniform_box: {
            const int n = size(rng);
            for (int i = 0; i < n; ++i) eta.push_back(uniform_point(box));
            break;
        }
        case SamplerKind::poisson: {
            int n = static_cast<int>(std::poisson_distribution<int>(0.5 * opts.size_max)(rng));
            n = std::clamp(n, 1, opts.size_max);
            for (int i = 0; i < n; ++i) eta.push_back(uniform_point(box));
            break;
        }
        case SamplerKind::cluster_r: {
            const int n = size(rng);
            const Vec c = uniform_point(box);
            for (int i = 0; i < n; ++i) eta.push_back(gaussian_around(c, 0.5 * cert.r));
            break;
        }
        case SamplerKind::cluster_dispersal: {
            const int n = size(rng);
            const Vec c = uniform_point(box);
            for (int i = 0; i < n; ++i) eta.push_back(gaussian_around(c, dispersal));
            break;
        }
        case SamplerKind::multi_cluster: {
            const int n = size(rng);
            const int k = std::uniform_int_distribution<int>(2, 5)(rng);
            std::vector<Vec> centers;
            for (int j = 0; j < k; ++j) centers.push_back(uniform_point(2.0 * dispersal));
            std::uniform_int_distribution<int> which(0, k - 1);
            for (int i = 0; i < n; ++i)
                eta.push_back(gaussian_around(centers[which(rng)], 0.25 * cert.r));
            break;
        }
        case SamplerKind::coincident: {
            const int n = size(rng);
            const Vec c = uniform_point(box);
            for (int i = 0; i < n; ++i) eta.push_back(gaussian_around(c, 1e-9 * cert.r));
            break;
        }
    }
    return eta;
}

namespace {
struct TrialBest {
    double u{std::numeric_limits<double>::infinity()};
    std::uint64_t trial{0};
    std::uint64_t violations{0};

    void offer(double value, std::uint64_t t) {
        if (value < 0.0) ++violations;
        if (value < u || (value == u && t < trial)) {
            u = value;
            trial = t;
        }
    }
    void merge(const TrialBest& o) {
        violations += o.violations;
        if (o.u < u || (o.u == u && o.trial < trial)) {
            u = o.u;
            trial = o.trial;
        }
    }
};

ViolationReport finish(const TrialBest& best, const Certificate& cert, const Kernel& a_plus,
                       const Kernel& a_minus, const VerifyOptions& opts) {
    ViolationReport rep;
    rep.trials = opts.trials;
    rep.violations = best.violations;
    rep.min_u = best.u;
    rep.argmin_trial = best.trial;
    if (opts.trials > 0)
        rep.argmin_config = sample_trial_configuration(cert, a_plus, a_minus, opts, best.trial);
    return rep;
}
}  // namespace

ViolationReport verify_certificate(const Certificate& cert, const Kernel& a_plus,
                                   const Kernel& a_minus, const VerifyOptions& opts) {
    if (opts.trials < 1) throw std::invalid_argument("verification needs at least one trial");
    TrialBest best;
    const auto n = static_cast<std::int64_t>(opts.trials);
#pragma omp parallel
    {
        TrialBest local;
#pragma omp for schedule(static) nowait
        for (std::int64_t t = 0; t < n; ++t) {
            const auto trial = static_cast<std::uint64_t>(t);
            const auto eta = sample_trial_configuration(cert, a_plus, a_minus, opts, trial);
            local.offer(u_theta(eta, a_plus, a_minus, cert.omega, cert.theta), trial);
        }
#pragma omp critical(sbd_verify_merge)
        best.merge(local);
    }
    return finish(best, cert, a_plus, a_minus, opts);
}

namespace serial {
ViolationReport verify_certificate(const Certificate& cert, const Kernel& a_plus,
                                   const Kernel& a_minus, const VerifyOptions& opts) {
    if (opts.trials < 1) throw std::invalid_argument("verification needs at least one trial");
    TrialBest best;
    for (std::uint64_t t = 0; t < opts.trials; ++t) {
        const auto eta = sample_trial_configuration(cert, a_plus, a_minus, opts, t);
        best.offer(u_theta(eta, a_plus, a_minus, cert.omega, cert.theta), t);
    }
    return finish(best, cert, a_plus, a_minus, opts);
}
}  // namespace serial

}  // namespace sbd
