#include "sbd/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sbd {

Estimate mean_and_se(std::span<const double> samples) {
    Estimate e;
    const auto n = samples.size();
    if (n == 0) return e;
    double sum = 0.0;
    for (double v : samples) sum += v;
    e.value = sum / static_cast<double>(n);
    if (n < 2) return e;
    double ss = 0.0;
    for (double v : samples) ss += (v - e.value) * (v - e.value);
    e.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    return e;
}

Estimate density(const Torus& torus, std::span<const PointSet> replicas) {
    if (replicas.size() < 2) throw StatisticsError("density estimate needs at least 2 replicas");
    std::vector<double> rho;
    rho.reserve(replicas.size());
    for (const auto& r : replicas) rho.push_back(static_cast<double>(r.size()) / torus.volume());
    return mean_and_se(rho);
}

std::vector<double> equal_bins(double r_max, int count) {
    if (count < 1 || !(r_max > 0.0)) throw std::invalid_argument("bins need count >= 1, r_max > 0");
    std::vector<double> edges(static_cast<std::size_t>(count) + 1);
    for (int i = 0; i <= count; ++i) edges[static_cast<std::size_t>(i)] = r_max * i / count;
    return edges;
}

namespace {

void check_edges(const Torus& torus, std::span<const double> edges) {
    if (edges.size() < 2) throw std::invalid_argument("need at least one bin");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]) || edges[i - 1] < 0.0)
            throw std::invalid_argument("bin edges must be increasing and nonnegative");
    if (edges.back() > 0.5 * torus.side() * (1.0 + 1e-12))
        throw std::invalid_argument("bin edges must not exceed L/2");
}

std::size_t bin_of(std::span<const double> edges, double dist) {
    if (dist < edges.front() || dist >= edges.back()) return edges.size();  // out of range
    const auto it = std::upper_bound(edges.begin(), edges.end(), dist);
    return static_cast<std::size_t>(it - edges.begin()) - 1;
}

// Ordered-pair counts per bin, from unordered pairs.
std::vector<double> pair_counts_unordered(const Torus& torus, const PointSet& pts,
                                          std::span<const double> edges) {
    std::vector<double> counts(edges.size() - 1, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const std::size_t b = bin_of(edges, torus.distance(pts[i], pts[j]));
            if (b < counts.size()) counts[b] += 2.0;
        }
    return counts;
}

std::vector<double> pair_counts_ordered(const Torus& torus, const PointSet& pts,
                                        std::span<const double> edges) {
    std::vector<double> counts(edges.size() - 1, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            const std::size_t b = bin_of(edges, torus.distance(pts[i], pts[j]));
            if (b < counts.size()) counts[b] += 1.0;
        }
    return counts;
}

std::vector<PairCorrelationBin> aggregate_pair_correlation(
    const Torus& torus, std::span<const PointSet> replicas, std::span<const double> edges,
    const std::vector<std::vector<double>>& counts) {
    const int d = torus.dim();
    const std::size_t nbins = edges.size() - 1;
    std::vector<std::vector<double>> per_bin(nbins);
    for (std::size_t r = 0; r < replicas.size(); ++r) {
        const double n = static_cast<double>(replicas[r].size());
        if (n < 2.0) continue;
        for (std::size_t b = 0; b < nbins; ++b) {
            const double shell = unit_ball_volume(d) *
                                 (std::pow(edges[b + 1], d) - std::pow(edges[b], d));
            const double expected = n * (n - 1.0) * shell / torus.volume();
            per_bin[b].push_back(counts[r][b] / expected);
        }
    }
    if (per_bin.front().empty())
        throw StatisticsError("pair correlation needs a replica with at least 2 points");
    std::vector<PairCorrelationBin> out(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        const Estimate e = mean_and_se(per_bin[b]);
        out[b] = PairCorrelationBin{edges[b], edges[b + 1], e.value, e.se};
    }
    return out;
}

}  // namespace

std::vector<PairCorrelationBin> pair_correlation(const Torus& torus,
                                                 std::span<const PointSet> replicas,
                                                 std::span<const double> edges) {
    check_edges(torus, edges);
    std::vector<std::vector<double>> counts(replicas.size());
    const auto n = static_cast<std::int64_t>(replicas.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t r = 0; r < n; ++r) {
        const auto i = static_cast<std::size_t>(r);
        counts[i] = pair_counts_unordered(torus, replicas[i], edges);
    }
    return aggregate_pair_correlation(torus, replicas, edges, counts);
}

namespace serial {
std::vector<PairCorrelationBin> pair_correlation(const Torus& torus,
                                                 std::span<const PointSet> replicas,
                                                 std::span<const double> edges) {
    check_edges(torus, edges);
    std::vector<std::vector<double>> counts;
    for (const auto& r : replicas) counts.push_back(pair_counts_ordered(torus, r, edges));
    return aggregate_pair_correlation(torus, replicas, edges, counts);
}
}  // namespace serial

std::vector<Estimate> factorial_moments_from_counts(std::span<const double> counts, int n_max) {
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    std::vector<Estimate> out;
    std::vector<double> falling(counts.size());
    for (int n = 1; n <= n_max; ++n) {
        for (std::size_t i = 0; i < counts.size(); ++i) {
            double f = 1.0;
            for (int k = 0; k < n; ++k) f *= counts[i] - k;
            falling[i] = f;
        }
        out.push_back(mean_and_se(falling));
    }
    return out;
}

std::vector<Estimate> factorial_moments(std::span<const PointSet> replicas, const Window& w,
                                        int dim, int n_max) {
    std::vector<double> counts;
    counts.reserve(replicas.size());
    for (const auto& r : replicas)
        counts.push_back(static_cast<double>(count_in_window(r, w, dim)));
    return factorial_moments_from_counts(counts, n_max);
}

EnvelopeFit envelope_fit(std::span<const Estimate> moments, double window_volume,
                         double residual_tolerance) {
    if (!(window_volume > 0.0)) throw std::invalid_argument("window volume must be positive");
    std::vector<double> xs, ys;
    EnvelopeFit fit;
    for (std::size_t i = 0; i < moments.size(); ++i) {
        if (!(moments[i].value > 0.0)) continue;
        fit.orders.push_back(static_cast<int>(i) + 1);
        xs.push_back(static_cast<double>(i + 1));
        ys.push_back(std::log(moments[i].value));
    }
    if (xs.empty()) throw StatisticsError("no positive factorial moments to fit");
    double intercept = 0.0, slope;
    if (xs.size() == 1) {
        slope = ys[0] / xs[0];  // C fixed at 1
    } else {
        const double n = static_cast<double>(xs.size());
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= n;
        my /= n;
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        slope = sxy / sxx;
        intercept = my - slope * mx;
    }
    fit.c = std::exp(intercept);
    fit.theta = slope - std::log(window_volume);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (intercept + slope * xs[i]);
        fit.residuals.push_back(r);
        fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
    }
    fit.envelope_consistent = fit.max_abs_residual <= residual_tolerance;
    return fit;
}

std::vector<double> power_from_factorial(std::span<const double> factorial) {
    const std::size_t n_max = factorial.size();
    // S2[n][k], n, k in 0..n_max
    std::vector<std::vector<double>> s2(n_max + 1, std::vector<double>(n_max + 1, 0.0));
    s2[0][0] = 1.0;
    for (std::size_t n = 1; n <= n_max; ++n)
        for (std::size_t k = 1; k <= n; ++k)
            s2[n][k] = static_cast<double>(k) * s2[n - 1][k] + s2[n - 1][k - 1];
    std::vector<double> out(n_max, 0.0);
    for (std::size_t n = 1; n <= n_max; ++n)
        for (std::size_t k = 1; k <= n; ++k) out[n - 1] += s2[n][k] * factorial[k - 1];
    return out;
}

std::vector<double> factorial_from_power(std::span<const double> power) {
    const std::size_t n_max = power.size();
    // Signed Stirling numbers of the first kind: s(n,k) = s(n-1,k-1) - (n-1) s(n-1,k).
    std::vector<std::vector<double>> s1(n_max + 1, std::vector<double>(n_max + 1, 0.0));
    s1[0][0] = 1.0;
    for (std::size_t n = 1; n <= n_max; ++n)
        for (std::size_t k = 1; k <= n; ++k)
            s1[n][k] = s1[n - 1][k - 1] - static_cast<double>(n - 1) * s1[n - 1][k];
    std::vector<double> out(n_max, 0.0);
    for (std::size_t n = 1; n <= n_max; ++n)
        for (std::size_t k = 1; k <= n; ++k) out[n - 1] += s1[n][k] * power[k - 1];
    return out;
}

MomentReport moment_report(const Torus& torus, double t, std::span<const PointSet> replicas,
                           const Window& w, int n_max, std::span<const double> edges) {
    MomentReport rep;
    rep.t = t;
    rep.replicas = replicas.size();
    rep.density = density(torus, replicas);
    if (!edges.empty()) {
        try {
            rep.pair_correlation = pair_correlation(torus, replicas, edges);
        } catch (const StatisticsError&) {
            rep.pair_correlation.clear();
        }
    }
    rep.window = w;
    rep.window_volume = w.volume(torus.dim());
    rep.factorial_moments = factorial_moments(replicas, w, torus.dim(), n_max);
    std::vector<double> f;
    for (const auto& e : rep.factorial_moments) f.push_back(e.value);
    rep.power_moments = power_from_factorial(f);
    try {
        rep.envelope = envelope_fit(rep.factorial_moments, rep.window_volume);
    } catch (const StatisticsError&) {
        rep.envelope.reset();
    }
    return rep;
}

nlohmann::json to_json(const MomentReport& r, int dim) {
    using nlohmann::json;
    json j;
    j["t"] = r.t;
    j["replicas"] = r.replicas;
    j["density"] = {{"value", r.density.value}, {"se", r.density.se}};
    json g = json::array();
    for (const auto& b : r.pair_correlation)
        g.push_back({{"r_lo", b.r_lo}, {"r_hi", b.r_hi}, {"g", b.g}, {"se", b.se}});
    j["pair_correlation"] = g;
    j["window"] = {{"lo", std::vector<double>(r.window.lo.begin(), r.window.lo.begin() + dim)},
                   {"hi", std::vector<double>(r.window.hi.begin(), r.window.hi.begin() + dim)},
                   {"volume", r.window_volume}};
    json fm = json::array();
    for (std::size_t i = 0; i < r.factorial_moments.size(); ++i)
        fm.push_back({{"n", i + 1},
                      {"value", r.factorial_moments[i].value},
                      {"se", r.factorial_moments[i].se}});
    j["factorial_moments"] = fm;
    j["power_moments"] = r.power_moments;
    if (r.envelope) {
        j["envelope"] = {{"C", r.envelope->c},
                         {"theta", r.envelope->theta},
                         {"orders", r.envelope->orders},
                         {"residuals", r.envelope->residuals},
                         {"max_abs_residual", r.envelope->max_abs_residual},
                         {"envelope_consistent", r.envelope->envelope_consistent}};
    } else {
        j["envelope"] = nullptr;
    }
    return j;
}

void write_pair_correlation_csv(std::ostream& out, std::span<const PairCorrelationBin> bins) {
    out << "r,g,se\n";
    const auto old = out.precision(17);
    for (const auto& b : bins) out << b.r_mid() << ',' << b.g << ',' << b.se << '\n';
    out.precision(old);
}

}  // namespace sbd
