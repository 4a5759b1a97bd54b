#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbd/geometry.hpp"
#include "sbd/kernel.hpp"
#include "sbd/rng.hpp"

namespace sbd {

enum class ModelVariant { bolker_pacala, migration };

std::string to_string(ModelVariant v);

/// Birth-and-death model on the torus.
///  - bolker_pacala: each point y gives birth at rate <a+>, the child is placed
///    at y + a displacement with density a+/<a+>.
///  - migration: newcomers arrive with intensity b(x), independently of the state.
/// In both variants a point x dies at rate m + sum_{y != x} a-(x - y).
struct ModelSpec {
    ModelVariant variant{ModelVariant::bolker_pacala};
    std::optional<Kernel> a_plus;
    std::optional<Kernel> a_minus;
    double m{0.0};
    std::optional<ImmigrationField> b;

    /// Throws std::invalid_argument when required fields are missing.
    void validate(const Torus& torus) const;
    /// Largest kernel cutoff (0 when there are no kernels).
    double interaction_radius() const;
};

enum class EventKind { birth, death };

struct Event {
    double time{0.0};
    EventKind kind{EventKind::birth};
    Vec position{};
    PointId id{0};
    std::optional<PointId> parent;
};

struct Rates {
    double birth{0.0};
    double death{0.0};
    double total() const noexcept { return birth + death; }
};

/// Exact (direct-method Gillespie) simulation of one replica. Per-point death
/// rates are cached and updated through the cell list of the changed point;
/// death selection uses a Fenwick tree over the cached rates.
class Simulation {
public:
    Simulation(ModelSpec spec, TorusConfiguration init, double t0 = 0.0);

    const ModelSpec& spec() const noexcept { return spec_; }
    const TorusConfiguration& configuration() const noexcept { return cfg_; }
    double time() const noexcept { return t_; }

    Rates total_rates() const;
    double death_rate_of(PointId id) const;

    /// Time of the next event, drawn from Exp(B + D); nullopt when absorbed.
    std::optional<double> next_event_time(Rng& rng) const;
    /// Apply one event at time `t` (births and deaths chosen by rate).
    Event apply_event(double t, Rng& rng);
    /// next_event_time + apply_event.
    std::optional<Event> step(Rng& rng);
    /// Advance the clock without events (used to stop exactly at t_end).
    void advance_to(double t) { t_ = t; }

    /// Max relative deviation between cached and recomputed death rates
    /// (and of the cached total D).
    double audit() const;
    /// Recompute every cache entry from scratch.
    void rebuild_caches();

private:
    double recompute_death_rate(std::size_t slot) const;
    void set_rate(std::size_t slot, double rate);
    void fenwick_rebuild();
    void fenwick_add(std::size_t slot, double delta);
    std::size_t fenwick_find(double target) const;
    double fenwick_total() const;

    ModelSpec spec_;
    TorusConfiguration cfg_;
    double t_;
    double birth_per_point_{0.0};
    double immigration_total_{0.0};
    std::vector<double> rate_;   // slot -> cached death rate
    std::vector<double> tree_;   // Fenwick tree over rate_, 1-based
    std::size_t updates_since_rebuild_{0};
};

/// Receives events and snapshots during run().
class Observer {
public:
    virtual ~Observer() = default;
    virtual void on_event(const Event&) {}
    virtual void on_snapshot(double /*t*/, const TorusConfiguration&) {}
};

enum class RunStatus { completed, absorbed, explosion };

std::string to_string(RunStatus s);

struct RunOptions {
    double t_end{1.0};
    /// Snapshot times (sorted, in [0, t_end]); the state at time s is the state
    /// after every event with time <= s.
    std::vector<double> snapshot_times;
    std::size_t max_population{1000000};
    /// Audit the caches every `audit_every` events (0 disables).
    std::size_t audit_every{0};
    double audit_tolerance{1e-9};
};

struct RunResult {
    RunStatus status{RunStatus::completed};
    double final_time{0.0};
    std::uint64_t events{0};
    std::size_t final_population{0};
    double max_audit_deviation{0.0};
};

class AuditFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RunResult run(const ModelSpec& spec, TorusConfiguration init, const RunOptions& opts,
              Observer& observer, Rng& rng);

struct Snapshot {
    double t{0.0};
    std::vector<Vec> points;
    std::vector<PointId> ids;
};

/// Observer that records the full trace.
class TraceRecorder : public Observer {
public:
    explicit TraceRecorder(bool keep_events = true) : keep_events_(keep_events) {}
    void on_event(const Event& e) override;
    void on_snapshot(double t, const TorusConfiguration& cfg) override;

    std::vector<Event> events;
    std::vector<Snapshot> snapshots;

private:
    bool keep_events_;
};

/// Events CSV: header `t,kind,x1..xd,id,parent_id` (parent empty for deaths and immigrants).
void write_events_csv(std::ostream& out, const std::vector<Event>& events, int dim);

}  // namespace sbd
