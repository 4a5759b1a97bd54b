#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sbd/kernel.hpp"
#include "sbd/rng.hpp"
#include "sbd/vec.hpp"

namespace sbd {

using PointId = std::uint64_t;

/// Periodic box [0, L)^d.
class Torus {
public:
    Torus(double side, int dim);

    double side() const noexcept { return side_; }
    int dim() const noexcept { return dim_; }
    double volume() const noexcept;

    /// Minimum-image displacement y - x.
    Vec displacement(const Vec& x, const Vec& y) const noexcept;
    double distance(const Vec& x, const Vec& y) const noexcept;
    /// Map an arbitrary point back into [0, L)^d.
    Vec wrap(Vec x) const noexcept;
    bool contains(const Vec& x) const noexcept;

private:
    double side_;
    int dim_;
};

inline double periodic_distance(const Torus& t, const Vec& x, const Vec& y) {
    return t.distance(x, y);
}

/// Axis-aligned sub-box [lo, hi) of the torus.
struct Window {
    Vec lo{};
    Vec hi{};

    static Window box(const Torus& t, const Vec& lo, const Vec& hi);
    static Window whole(const Torus& t);
    double volume(int dim) const noexcept;
    bool contains(const Vec& x, int dim) const noexcept;
};

/// Kernel sum with the certified bound on what lies beyond the cutoff.
struct KernelSum {
    double value{0.0};
    double tail_error{0.0};
};

/// Finite point configuration on a torus with stable point ids and a cell-list
/// index. Points are stored densely (slots); erasing moves the last point into
/// the freed slot, so slots are not stable but ids are.
class TorusConfiguration {
public:
    /// `interaction_radius` sets the index cell size (>= radius, L / cell an integer).
    explicit TorusConfiguration(const Torus& torus, double interaction_radius = 0.0);

    const Torus& torus() const noexcept { return torus_; }
    std::size_t size() const noexcept { return pos_.size(); }
    bool empty() const noexcept { return pos_.empty(); }

    int cells_per_side() const noexcept { return cells_per_side_; }
    double cell_size() const noexcept { return torus_.side() / cells_per_side_; }

    PointId insert(const Vec& x);
    /// Insert with an explicit id (e.g. when loading a snapshot).
    void insert_with_id(const Vec& x, PointId id);
    void erase(PointId id);
    void clear();

    const Vec& position(std::size_t slot) const { return pos_[slot]; }
    PointId id(std::size_t slot) const { return ids_[slot]; }
    std::optional<std::size_t> slot_of(PointId id) const;
    const std::vector<Vec>& positions() const noexcept { return pos_; }
    const std::vector<PointId>& ids() const noexcept { return ids_; }
    PointId next_id() const noexcept { return next_id_; }

    /// Calls f(slot, distance) for every point within `radius` of x (periodic
    /// metric). Only cells intersecting the ball are visited; radius must not
    /// exceed the index cell size.
    template <class F>
    void for_each_within(const Vec& x, double radius, F&& f) const;

    /// Cell contents sorted by id, for comparing against a from-scratch rebuild.
    std::vector<std::vector<PointId>> index_snapshot() const;
    /// True when rebuilding the index from positions gives the same cell contents.
    bool index_consistent() const;

private:
    std::size_t cell_of(const Vec& x) const noexcept;
    void cell_coords_around(const Vec& x, std::array<std::array<int, 3>, kMaxDim>& coords,
                            std::array<int, kMaxDim>& counts) const noexcept;

    Torus torus_;
    int cells_per_side_{1};
    std::vector<Vec> pos_;
    std::vector<PointId> ids_;
    std::vector<std::size_t> cell_;          // slot -> cell
    std::vector<std::size_t> pos_in_cell_;   // slot -> index in cells_[cell]
    std::vector<std::vector<std::size_t>> cells_;  // cell -> slots
    std::unordered_map<PointId, std::size_t> slot_of_;
    PointId next_id_{0};
};

/// Sum of a(x - y) over points y within the kernel cutoff, skipping `exclude`.
/// Throws if the kernel cutoff exceeds L/2 or the index cell size.
KernelSum kernel_sum_at(const TorusConfiguration& cfg, const Kernel& k, const Vec& x,
                        std::optional<PointId> exclude = std::nullopt);
/// All-pairs reference used by tests.
double kernel_sum_brute_force(const TorusConfiguration& cfg, const Kernel& k, const Vec& x,
                              std::optional<PointId> exclude = std::nullopt);

std::size_t count_in_window(const TorusConfiguration& cfg, const Window& w);
std::size_t count_in_window(std::span<const Vec> points, const Window& w, int dim);

/// Poisson(kappa L^d) points placed i.i.d. uniformly.
TorusConfiguration sample_poisson(const Torus& t, double density, Rng& rng,
                                  double interaction_radius = 0.0);

/// Snapshot CSV: header `t,id,x1..xd`, one row per point.
void write_snapshot_csv(std::ostream& out, const TorusConfiguration& cfg, double t);
struct SnapshotRow {
    double t;
    PointId id;
    Vec x;
};
std::vector<SnapshotRow> read_snapshot_csv(std::istream& in, int dim);
/// Plain point list CSV (x1..xd per row, optional header) for initial states.
std::vector<Vec> read_points_csv(std::istream& in, int dim);

template <class F>
void TorusConfiguration::for_each_within(const Vec& x, double radius, F&& f) const {
    std::array<std::array<int, 3>, kMaxDim> coords{};
    std::array<int, kMaxDim> counts{};
    cell_coords_around(x, coords, counts);
    const int d = torus_.dim();
    const auto n = static_cast<std::size_t>(cells_per_side_);
    std::array<int, kMaxDim> it{};
    for (;;) {
        std::size_t cell = 0;
        for (int i = 0; i < d; ++i) cell = cell * n + static_cast<std::size_t>(coords[i][it[i]]);
        for (std::size_t slot : cells_[cell]) {
            const double dist = torus_.distance(x, pos_[slot]);
            if (dist <= radius) f(slot, dist);
        }
        int i = d - 1;
        while (i >= 0 && ++it[i] == counts[i]) it[i--] = 0;
        if (i < 0) break;
    }
}

}  // namespace sbd
