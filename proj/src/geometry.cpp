#include "sbd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sbd {

namespace {
// Keeps the total number of index cells bounded for small interaction radii.
constexpr std::size_t kMaxIndexCells = std::size_t{1} << 16;
}  // namespace

Torus::Torus(double side, int dim) : side_(side), dim_(dim) {
    check_dim(dim);
    if (!(side > 0.0) || !std::isfinite(side))
        throw std::invalid_argument("torus side must be positive and finite");
}

double Torus::volume() const noexcept { return std::pow(side_, dim_); }

Vec Torus::displacement(const Vec& x, const Vec& y) const noexcept {
    Vec d{};
    for (int i = 0; i < dim_; ++i) {
        double v = y[i] - x[i];
        v -= side_ * std::round(v / side_);
        d[i] = v;
    }
    return d;
}

double Torus::distance(const Vec& x, const Vec& y) const noexcept {
    return norm(displacement(x, y), dim_);
}

Vec Torus::wrap(Vec x) const noexcept {
    for (int i = 0; i < dim_; ++i) {
        double v = x[i] - side_ * std::floor(x[i] / side_);
        if (v >= side_ || v < 0.0) v = 0.0;
        x[i] = v;
    }
    for (int i = dim_; i < kMaxDim; ++i) x[i] = 0.0;
    return x;
}

bool Torus::contains(const Vec& x) const noexcept {
    for (int i = 0; i < dim_; ++i)
        if (!(x[i] >= 0.0 && x[i] < side_)) return false;
    return true;
}

Window Window::box(const Torus& t, const Vec& lo, const Vec& hi) {
    for (int i = 0; i < t.dim(); ++i) {
        if (!(lo[i] >= 0.0 && hi[i] <= t.side() && lo[i] < hi[i]))
            throw std::invalid_argument("window must be a nonempty sub-box of [0, L)^d");
    }
    return Window{lo, hi};
}

Window Window::whole(const Torus& t) {
    Window w;
    for (int i = 0; i < t.dim(); ++i) w.hi[i] = t.side();
    return w;
}

double Window::volume(int dim) const noexcept {
    double v = 1.0;
    for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
    return v;
}

bool Window::contains(const Vec& x, int dim) const noexcept {
    for (int i = 0; i < dim; ++i)
        if (!(x[i] >= lo[i] && x[i] < hi[i])) return false;
    return true;
}

// --- TorusConfiguration -----------------------------------------------------

TorusConfiguration::TorusConfiguration(const Torus& torus, double interaction_radius)
    : torus_(torus) {
    const int d = torus.dim();
    int n = interaction_radius > 0.0
                ? static_cast<int>(std::floor(torus.side() / interaction_radius))
                : 8;
    n = std::max(n, 1);
    const auto cap = static_cast<int>(std::floor(
        std::pow(static_cast<double>(kMaxIndexCells), 1.0 / d) + 1e-9));
    n = std::min(n, cap);
    cells_per_side_ = n;
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(n);
    cells_.resize(total);
}

std::size_t TorusConfiguration::cell_of(const Vec& x) const noexcept {
    const int d = torus_.dim();
    const double scale = cells_per_side_ / torus_.side();
    std::size_t cell = 0;
    for (int i = 0; i < d; ++i) {
        int c = static_cast<int>(std::floor(x[i] * scale));
        c = std::clamp(c, 0, cells_per_side_ - 1);
        cell = cell * static_cast<std::size_t>(cells_per_side_) + static_cast<std::size_t>(c);
    }
    return cell;
}

void TorusConfiguration::cell_coords_around(const Vec& x,
                                            std::array<std::array<int, 3>, kMaxDim>& coords,
                                            std::array<int, kMaxDim>& counts) const noexcept {
    const int n = cells_per_side_;
    const double scale = n / torus_.side();
    for (int i = 0; i < torus_.dim(); ++i) {
        if (n < 3) {
            // The one-cell ring would wrap onto itself; visit each cell once.
            counts[i] = n;
            for (int c = 0; c < n; ++c) coords[i][c] = c;
            continue;
        }
        const int c = std::clamp(static_cast<int>(std::floor(x[i] * scale)), 0, n - 1);
        counts[i] = 3;
        coords[i] = {(c + n - 1) % n, c, (c + 1) % n};
    }
}

PointId TorusConfiguration::insert(const Vec& x) {
    const PointId id = next_id_;
    insert_with_id(x, id);
    return id;
}

void TorusConfiguration::insert_with_id(const Vec& x, PointId id) {
    if (!torus_.contains(x)) throw std::out_of_range("point outside the torus box");
    if (slot_of_.count(id)) throw std::invalid_argument("duplicate point id");
    Vec p = x;
    for (int i = torus_.dim(); i < kMaxDim; ++i) p[i] = 0.0;
    const std::size_t slot = pos_.size();
    const std::size_t cell = cell_of(p);
    pos_.push_back(p);
    ids_.push_back(id);
    cell_.push_back(cell);
    pos_in_cell_.push_back(cells_[cell].size());
    cells_[cell].push_back(slot);
    slot_of_.emplace(id, slot);
    next_id_ = std::max(next_id_, id + 1);
}

void TorusConfiguration::erase(PointId id) {
    const auto found = slot_of_.find(id);
    if (found == slot_of_.end()) throw std::out_of_range("erase: unknown point id");
    const std::size_t slot = found->second;
    slot_of_.erase(found);

    // Remove from its cell (swap with the cell's last entry).
    auto& members = cells_[cell_[slot]];
    const std::size_t at = pos_in_cell_[slot];
    const std::size_t moved_in_cell = members.back();
    members[at] = moved_in_cell;
    pos_in_cell_[moved_in_cell] = at;
    members.pop_back();

    // Move the last slot into the freed one.
    const std::size_t last = pos_.size() - 1;
    if (slot != last) {
        pos_[slot] = pos_[last];
        ids_[slot] = ids_[last];
        cell_[slot] = cell_[last];
        pos_in_cell_[slot] = pos_in_cell_[last];
        cells_[cell_[slot]][pos_in_cell_[slot]] = slot;
        slot_of_[ids_[slot]] = slot;
    }
    pos_.pop_back();
    ids_.pop_back();
    cell_.pop_back();
    pos_in_cell_.pop_back();
}

void TorusConfiguration::clear() {
    pos_.clear();
    ids_.clear();
    cell_.clear();
    pos_in_cell_.clear();
    for (auto& c : cells_) c.clear();
    slot_of_.clear();
}

std::optional<std::size_t> TorusConfiguration::slot_of(PointId id) const {
    const auto it = slot_of_.find(id);
    if (it == slot_of_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::vector<PointId>> TorusConfiguration::index_snapshot() const {
    std::vector<std::vector<PointId>> out(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        for (std::size_t slot : cells_[c]) out[c].push_back(ids_[slot]);
        std::sort(out[c].begin(), out[c].end());
    }
    return out;
}

bool TorusConfiguration::index_consistent() const {
    std::vector<std::vector<PointId>> rebuilt(cells_.size());
    for (std::size_t slot = 0; slot < pos_.size(); ++slot) {
        if (!torus_.contains(pos_[slot])) return false;
        rebuilt[cell_of(pos_[slot])].push_back(ids_[slot]);
    }
    for (auto& c : rebuilt) std::sort(c.begin(), c.end());
    if (rebuilt != index_snapshot()) return false;
    for (std::size_t slot = 0; slot < pos_.size(); ++slot) {
        const auto it = slot_of_.find(ids_[slot]);
        if (it == slot_of_.end() || it->second != slot) return false;
        if (cells_[cell_[slot]][pos_in_cell_[slot]] != slot) return false;
    }
    return slot_of_.size() == pos_.size();
}

// --- free functions ---------------------------------------------------------

KernelSum kernel_sum_at(const TorusConfiguration& cfg, const Kernel& k, const Vec& x,
                        std::optional<PointId> exclude) {
    const Torus& t = cfg.torus();
    if (k.dim() != t.dim()) throw std::invalid_argument("kernel and torus dimensions differ");
    const double cutoff = k.cutoff();
    if (cutoff > 0.5 * t.side()) throw std::invalid_argument("kernel too wide for torus");
    if (cfg.cells_per_side() >= 3 && cutoff > cfg.cell_size() * (1.0 + 1e-12))
        throw std::invalid_argument("kernel cutoff exceeds the index cell size");

    const std::optional<std::size_t> skip = exclude ? cfg.slot_of(*exclude) : std::nullopt;
    KernelSum out;
    std::size_t visited = 0;
    cfg.for_each_within(x, cutoff, [&](std::size_t slot, double dist) {
        if (skip && slot == *skip) return;
        out.value += k.profile(dist);
        ++visited;
    });
    const std::size_t others = cfg.size() - (skip ? 1 : 0);
    out.tail_error = k.profile(cutoff) * static_cast<double>(others - visited);
    return out;
}

double kernel_sum_brute_force(const TorusConfiguration& cfg, const Kernel& k, const Vec& x,
                              std::optional<PointId> exclude) {
    double s = 0.0;
    for (std::size_t slot = 0; slot < cfg.size(); ++slot) {
        if (exclude && cfg.id(slot) == *exclude) continue;
        s += k.profile(cfg.torus().distance(x, cfg.position(slot)));
    }
    return s;
}

std::size_t count_in_window(std::span<const Vec> points, const Window& w, int dim) {
    return static_cast<std::size_t>(std::count_if(
        points.begin(), points.end(), [&](const Vec& p) { return w.contains(p, dim); }));
}

std::size_t count_in_window(const TorusConfiguration& cfg, const Window& w) {
    return count_in_window(cfg.positions(), w, cfg.torus().dim());
}

TorusConfiguration sample_poisson(const Torus& t, double density, Rng& rng,
                                  double interaction_radius) {
    if (!(density >= 0.0) || !std::isfinite(density))
        throw std::invalid_argument("Poisson density must be finite and nonnegative");
    TorusConfiguration cfg(t, interaction_radius);
    if (density == 0.0) return cfg;
    const auto n = std::poisson_distribution<std::uint64_t>(density * t.volume())(rng);
    std::uniform_real_distribution<double> unif(0.0, t.side());
    for (std::uint64_t i = 0; i < n; ++i) {
        Vec x{};
        for (int j = 0; j < t.dim(); ++j) x[j] = unif(rng);
        cfg.insert(t.wrap(x));
    }
    return cfg;
}

void write_snapshot_csv(std::ostream& out, const TorusConfiguration& cfg, double t) {
    const int d = cfg.torus().dim();
    out << "t,id";
    for (int i = 0; i < d; ++i) out << ",x" << (i + 1);
    out << '\n';
    const auto old = out.precision(17);
    for (std::size_t slot = 0; slot < cfg.size(); ++slot) {
        out << t << ',' << cfg.id(slot);
        for (int i = 0; i < d; ++i) out << ',' << cfg.position(slot)[i];
        out << '\n';
    }
    out.precision(old);
}

namespace {
std::vector<std::vector<double>> read_numeric_rows(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        while (ss >> v) row.push_back(v);
        if (!ss.eof()) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw std::runtime_error("malformed CSV row: " + line);
        }
        first = false;
        rows.push_back(std::move(row));
    }
    return rows;
}
}  // namespace

std::vector<SnapshotRow> read_snapshot_csv(std::istream& in, int dim) {
    std::vector<SnapshotRow> out;
    for (const auto& row : read_numeric_rows(in)) {
        if (static_cast<int>(row.size()) != dim + 2)
            throw std::runtime_error("snapshot row has wrong column count");
        SnapshotRow r{row[0], static_cast<PointId>(row[1]), Vec{}};
        for (int i = 0; i < dim; ++i) r.x[i] = row[2 + i];
        out.push_back(r);
    }
    return out;
}

std::vector<Vec> read_points_csv(std::istream& in, int dim) {
    std::vector<Vec> out;
    for (const auto& row : read_numeric_rows(in)) {
        if (static_cast<int>(row.size()) != dim)
            throw std::runtime_error("point row has wrong column count");
        Vec x{};
        for (int i = 0; i < dim; ++i) x[i] = row[i];
        out.push_back(x);
    }
    return out;
}

}  // namespace sbd
