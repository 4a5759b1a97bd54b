#include "sbd/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sbd {

double unit_ball_volume(int dim) {
    const double half = 0.5 * dim;
    return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

double unit_sphere_area(int dim) { return dim * unit_ball_volume(dim); }

std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::triangular: return "triangular";
        case KernelFamily::exponential: return "exponential";
        case KernelFamily::tabulated: return "tabulated";
    }
    return "unknown";
}

namespace {

// Regularized upper incomplete gamma Q(a, x) for a a positive multiple of 1/2,
// via Q(a+1, x) = Q(a, x) + x^a e^{-x} / Gamma(a+1).
double upper_gamma_q_half_integer(int twice_a, double x) {
    if (x <= 0.0) return 1.0;
    double q;
    double a;
    if (twice_a % 2 == 0) {
        q = std::exp(-x);
        a = 1.0;
    } else {
        q = std::erfc(std::sqrt(x));
        a = 0.5;
    }
    while (2.0 * a < twice_a) {
        q += std::exp(a * std::log(x) - x - std::lgamma(a + 1.0));
        a += 1.0;
    }
    return std::min(q, 1.0);
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(what) + " must be positive and finite");
}

// \int_lo^hi (alpha + beta rho) rho^{d-1} d rho
double segment_moment(double alpha, double beta, double lo, double hi, int dim) {
    return alpha * (std::pow(hi, dim) - std::pow(lo, dim)) / dim +
           beta * (std::pow(hi, dim + 1) - std::pow(lo, dim + 1)) / (dim + 1);
}

// \int_R^inf exp(-(rho - R)/s) rho^{d-1} d rho = sum_k C(d-1,k) R^{d-1-k} s^{k+1} k!
double exp_tail_moment(double radius, double scale, int dim) {
    double total = 0.0;
    double binom = 1.0;
    double fact = 1.0;
    for (int k = 0; k < dim; ++k) {
        if (k > 0) {
            binom = binom * (dim - k) / k;
            fact *= k;
        }
        total += binom * std::pow(radius, dim - 1 - k) * std::pow(scale, k + 1) * fact;
    }
    return total;
}

Vec uniform_direction(int dim, Rng& rng) {
    Vec u{};
    if (dim == 1) {
        u[0] = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
        return u;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    double n = 0.0;
    do {
        for (int i = 0; i < dim; ++i) u[i] = normal(rng);
        n = norm(u, dim);
    } while (n == 0.0);
    for (int i = 0; i < dim; ++i) u[i] /= n;
    return u;
}

}  // namespace

Kernel Kernel::gaussian(double weight, double sigma, int dim) {
    check_dim(dim);
    require_positive(weight, "gaussian weight");
    require_positive(sigma, "gaussian sigma");
    Kernel k;
    k.family_ = KernelFamily::gaussian;
    k.dim_ = dim;
    k.p0_ = weight;
    k.p1_ = sigma;
    k.finalize();
    return k;
}

Kernel Kernel::triangular(double height, double radius, int dim) {
    check_dim(dim);
    require_positive(height, "triangular height");
    require_positive(radius, "triangular radius");
    Kernel k;
    k.family_ = KernelFamily::triangular;
    k.dim_ = dim;
    k.p0_ = height;
    k.p1_ = radius;
    k.finalize();
    return k;
}

Kernel Kernel::exponential(double weight, double scale, int dim) {
    check_dim(dim);
    require_positive(weight, "exponential weight");
    require_positive(scale, "exponential scale");
    Kernel k;
    k.family_ = KernelFamily::exponential;
    k.dim_ = dim;
    k.p0_ = weight;
    k.p1_ = scale;
    k.finalize();
    return k;
}

Kernel Kernel::tabulated(std::vector<double> radii, std::vector<double> values, int dim,
                         std::optional<double> tail_scale) {
    check_dim(dim);
    if (radii.size() != values.size() || radii.size() < 2)
        throw std::invalid_argument("tabulated kernel needs at least two (radius, value) rows");
    if (radii.front() != 0.0)
        throw std::invalid_argument("tabulated kernel radii must start at 0");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!std::isfinite(radii[i]) || !std::isfinite(values[i]) || values[i] < 0.0)
            throw std::invalid_argument("tabulated kernel values must be finite and nonnegative");
        if (i > 0 && !(radii[i] > radii[i - 1]))
            throw std::invalid_argument("tabulated kernel radii must be strictly increasing");
        if (i > 0 && values[i] > values[i - 1])
            throw std::invalid_argument("tabulated kernel must be non-increasing in radius");
    }
    if (values.front() <= 0.0) throw std::invalid_argument("tabulated kernel is identically zero");
    if (values.back() > 0.0 && !tail_scale)
        throw std::invalid_argument(
            "tabulated kernel with a nonzero last value requires a declared tail bound");
    if (tail_scale) require_positive(*tail_scale, "tabulated tail scale");
    Kernel k;
    k.family_ = KernelFamily::tabulated;
    k.dim_ = dim;
    k.radii_ = std::move(radii);
    k.values_ = std::move(values);
    if (k.values_.back() > 0.0) k.tail_scale_ = tail_scale;
    k.finalize();
    return k;
}

Kernel Kernel::tabulated_from_csv(const std::string& path, int dim,
                                  std::optional<double> tail_scale) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open kernel table " + path);
    std::vector<double> radii, values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double r, v;
        if (!(row >> r >> v)) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw std::runtime_error("malformed row in kernel table " + path + ": " + line);
        }
        first = false;
        radii.push_back(r);
        values.push_back(v);
    }
    return tabulated(std::move(radii), std::move(values), dim, tail_scale);
}

void Kernel::finalize() {
    const int d = dim_;
    switch (family_) {
        case KernelFamily::gaussian:
            norm_const_ = p0_ / std::pow(2.0 * std::numbers::pi * p1_ * p1_, 0.5 * d);
            mass_ = p0_;
            break;
        case KernelFamily::exponential:
            norm_const_ = p0_ / (std::tgamma(d + 1.0) * unit_ball_volume(d) * std::pow(p1_, d));
            mass_ = p0_;
            break;
        case KernelFamily::triangular:
            norm_const_ = p0_;
            mass_ = p0_ * unit_ball_volume(d) * std::pow(p1_, d) / (d + 1);
            break;
        case KernelFamily::tabulated: {
            const double area = unit_sphere_area(d);
            segment_step_mass_.clear();
            double table = 0.0;
            step_total_ = 0.0;
            for (std::size_t i = 0; i + 1 < radii_.size(); ++i) {
                const double lo = radii_[i], hi = radii_[i + 1];
                const double beta = (values_[i + 1] - values_[i]) / (hi - lo);
                const double alpha = values_[i] - beta * lo;
                table += area * segment_moment(alpha, beta, lo, hi, d);
                const double step = values_[i] * std::pow(hi, d - 1) * (hi - lo);
                step_total_ += step;
                segment_step_mass_.push_back(step_total_);
            }
            tail_total_ = tail_scale_ ? area * values_.back() *
                                            exp_tail_moment(radii_.back(), *tail_scale_, d)
                                      : 0.0;
            mass_ = table + tail_total_;
            break;
        }
    }
    if (compact()) {
        cutoff_ = family_ == KernelFamily::triangular ? p1_ : radii_.back();
        return;
    }
    // Smallest radius whose tail carries at most kTailFraction of the mass.
    const double target = kTailFraction * mass_;
    double hi = characteristic_radius();
    while (tail_mass(hi) > target) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (tail_mass(mid) > target ? lo : hi) = mid;
    }
    cutoff_ = hi;
}

bool Kernel::compact() const noexcept {
    return family_ == KernelFamily::triangular ||
           (family_ == KernelFamily::tabulated && !tail_scale_);
}

double Kernel::characteristic_radius() const noexcept {
    return family_ == KernelFamily::tabulated ? radii_.back() : p1_;
}

double Kernel::profile(double rho) const {
    if (rho < 0.0) rho = -rho;
    switch (family_) {
        case KernelFamily::gaussian:
            return norm_const_ * std::exp(-0.5 * rho * rho / (p1_ * p1_));
        case KernelFamily::exponential:
            return norm_const_ * std::exp(-rho / p1_);
        case KernelFamily::triangular:
            return rho >= p1_ ? 0.0 : p0_ * (1.0 - rho / p1_);
        case KernelFamily::tabulated: {
            if (rho >= radii_.back()) {
                if (!tail_scale_) return 0.0;
                return values_.back() * std::exp(-(rho - radii_.back()) / *tail_scale_);
            }
            const auto it = std::upper_bound(radii_.begin(), radii_.end(), rho);
            const std::size_t i = static_cast<std::size_t>(it - radii_.begin()) - 1;
            const double t = (rho - radii_[i]) / (radii_[i + 1] - radii_[i]);
            return values_[i] + t * (values_[i + 1] - values_[i]);
        }
    }
    return 0.0;
}

double Kernel::evaluate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("displacement has dimension " + std::to_string(x.size()) +
                                    ", kernel has dimension " + std::to_string(dim_));
    double s = 0.0;
    for (double v : x) s += v * v;
    return profile(std::sqrt(s));
}

double Kernel::tail_mass(double radius) const {
    if (radius <= 0.0) return mass_;
    const int d = dim_;
    switch (family_) {
        case KernelFamily::gaussian:
            return p0_ * upper_gamma_q_half_integer(d, 0.5 * radius * radius / (p1_ * p1_));
        case KernelFamily::exponential:
            return p0_ * upper_gamma_q_half_integer(2 * d, radius / p1_);
        case KernelFamily::triangular: {
            if (radius >= p1_) return 0.0;
            const double R = p1_;
            const double tail = (std::pow(R, d) - std::pow(radius, d)) -
                                d * (std::pow(R, d + 1) - std::pow(radius, d + 1)) / ((d + 1) * R);
            return std::max(0.0, p0_ * unit_ball_volume(d) * tail);
        }
        case KernelFamily::tabulated:
            return tabulated_mass_beyond(radius);
    }
    return 0.0;
}

double Kernel::tabulated_mass_beyond(double radius) const {
    const int d = dim_;
    const double area = unit_sphere_area(d);
    const double last = radii_.back();
    if (radius >= last) {
        if (!tail_scale_) return 0.0;
        const double s = *tail_scale_;
        return area * values_.back() * std::exp(-(radius - last) / s) *
               exp_tail_moment(radius, s, d);
    }
    double total = tail_total_;
    for (std::size_t i = 0; i + 1 < radii_.size(); ++i) {
        const double lo = std::max(radii_[i], radius), hi = radii_[i + 1];
        if (hi <= lo) continue;
        const double beta = (values_[i + 1] - values_[i]) / (radii_[i + 1] - radii_[i]);
        const double alpha = values_[i] - beta * radii_[i];
        total += area * segment_moment(alpha, beta, lo, hi, d);
    }
    return std::max(0.0, total);
}

Kernel Kernel::scaled(double alpha) const {
    require_positive(alpha, "kernel scale factor");
    Kernel k = *this;
    if (family_ == KernelFamily::tabulated) {
        for (double& v : k.values_) v *= alpha;
    } else {
        k.p0_ *= alpha;
    }
    k.finalize();
    return k;
}

double Kernel::sample_radius(Rng& rng) const {
    const int d = dim_;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    switch (family_) {
        case KernelFamily::exponential:
            return std::gamma_distribution<double>(d, p1_)(rng);
        case KernelFamily::triangular: {
            // CDF of u = rho/R is (d+1) u^d - d u^{d+1}; invert by bisection.
            const double target = unif(rng);
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double cdf = (d + 1) * std::pow(mid, d) - d * std::pow(mid, d + 1);
                (cdf < target ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi) * p1_;
        }
        case KernelFamily::tabulated:
            return sample_tabulated_radius(rng);
        case KernelFamily::gaussian:
            break;
    }
    throw std::logic_error("sample_radius: gaussian samples coordinates directly");
}

double Kernel::sample_tabulated_radius(Rng& rng) const {
    const int d = dim_;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double table_mass = mass_ - tail_total_;
    if (tail_scale_ && unif(rng) * mass_ >= table_mass) {
        // rho = r_n + u with density ~ exp(-u/s) (r_n + u)^{d-1}: a finite
        // mixture of Gamma(k+1, s) terms.
        const double s = *tail_scale_, rn = radii_.back();
        std::vector<double> w(d);
        double binom = 1.0, fact = 1.0, total = 0.0;
        for (int k = 0; k < d; ++k) {
            if (k > 0) {
                binom = binom * (d - k) / k;
                fact *= k;
            }
            w[k] = binom * std::pow(rn, d - 1 - k) * std::pow(s, k + 1) * fact;
            total += w[k];
        }
        double pick = unif(rng) * total;
        int k = 0;
        while (k + 1 < d && pick >= w[k]) pick -= w[k++];
        return rn + std::gamma_distribution<double>(k + 1, s)(rng);
    }
    // Rejection against the step function v_i r_{i+1}^{d-1} on segment i
    // (profile is non-increasing, so v_i dominates the segment).
    for (;;) {
        const double pick = unif(rng) * step_total_;
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(segment_step_mass_.begin(), segment_step_mass_.end(), pick) -
            segment_step_mass_.begin());
        i = std::min(i, segment_step_mass_.size() - 1);
        const double lo = radii_[i], hi = radii_[i + 1];
        const double rho = lo + (hi - lo) * unif(rng);
        const double bound = values_[i] * std::pow(hi, d - 1);
        if (unif(rng) * bound <= profile(rho) * std::pow(rho, d - 1)) return rho;
    }
}

Vec Kernel::sample_displacement(Rng& rng) const {
    Vec x{};
    if (family_ == KernelFamily::gaussian) {
        std::normal_distribution<double> normal(0.0, p1_);
        for (int i = 0; i < dim_; ++i) x[i] = normal(rng);
        return x;
    }
    const double rho = sample_radius(rng);
    const Vec u = uniform_direction(dim_, rng);
    for (int i = 0; i < dim_; ++i) x[i] = rho * u[i];
    return x;
}

// --- ImmigrationField -------------------------------------------------------

ImmigrationField ImmigrationField::constant(double b) {
    if (!(b >= 0.0) || !std::isfinite(b))
        throw std::invalid_argument("immigration rate must be finite and nonnegative");
    ImmigrationField f;
    f.values_ = {b};
    f.sup_ = b;
    return f;
}

ImmigrationField ImmigrationField::grid(int cells_per_side, std::vector<double> values) {
    if (cells_per_side < 1) throw std::invalid_argument("immigration grid needs >= 1 cell per side");
    const auto n = static_cast<std::size_t>(cells_per_side);
    if (values.size() != n && values.size() != n * n && values.size() != n * n * n)
        throw std::invalid_argument("immigration grid needs n^d values");
    ImmigrationField f;
    f.cells_per_side_ = cells_per_side;
    f.values_ = std::move(values);
    double acc = 0.0;
    for (double v : f.values_) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("immigration grid values must be finite and nonnegative");
        acc += v;
        f.cumulative_.push_back(acc);
        f.sup_ = std::max(f.sup_, v);
    }
    return f;
}

namespace {
std::size_t grid_cells(int n, int dim) {
    std::size_t c = 1;
    for (int i = 0; i < dim; ++i) c *= static_cast<std::size_t>(n);
    return c;
}
}  // namespace

double ImmigrationField::value(const Vec& x, double side, int dim) const {
    if (is_constant()) return values_.front();
    if (values_.size() != grid_cells(cells_per_side_, dim))
        throw std::invalid_argument("immigration grid size does not match dimension");
    std::size_t idx = 0;
    for (int i = 0; i < dim; ++i) {
        int c = static_cast<int>(std::floor(x[i] / side * cells_per_side_));
        c = std::clamp(c, 0, cells_per_side_ - 1);
        idx = idx * cells_per_side_ + static_cast<std::size_t>(c);
    }
    return values_[idx];
}

double ImmigrationField::integral(double side, int dim) const {
    const double volume = std::pow(side, dim);
    if (is_constant()) return values_.front() * volume;
    if (values_.size() != grid_cells(cells_per_side_, dim))
        throw std::invalid_argument("immigration grid size does not match dimension");
    return cumulative_.back() * volume / static_cast<double>(values_.size());
}

Vec ImmigrationField::sample_position(double side, int dim, Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec x{};
    if (is_constant()) {
        for (int i = 0; i < dim; ++i) x[i] = side * unif(rng);
    } else {
        const double pick = unif(rng) * cumulative_.back();
        std::size_t idx = static_cast<std::size_t>(
            std::upper_bound(cumulative_.begin(), cumulative_.end(), pick) - cumulative_.begin());
        idx = std::min(idx, values_.size() - 1);
        const double cell = side / cells_per_side_;
        for (int i = dim - 1; i >= 0; --i) {
            const auto c = idx % static_cast<std::size_t>(cells_per_side_);
            idx /= static_cast<std::size_t>(cells_per_side_);
            x[i] = cell * (static_cast<double>(c) + unif(rng));
        }
    }
    for (int i = 0; i < dim; ++i)
        if (x[i] >= side) x[i] = std::nextafter(side, 0.0);
    return x;
}

}  // namespace sbd
