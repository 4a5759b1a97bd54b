#include "sbd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sbd {

std::string to_string(ModelVariant v) {
    return v == ModelVariant::bolker_pacala ? "bolker_pacala" : "migration";
}

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::absorbed: return "absorbed";
        case RunStatus::explosion: return "explosion";
    }
    return "unknown";
}

void ModelSpec::validate(const Torus& torus) const {
    if (!(m >= 0.0) || !std::isfinite(m))
        throw std::invalid_argument("mortality m must be finite and nonnegative");
    if (variant == ModelVariant::bolker_pacala && !a_plus)
        throw std::invalid_argument("bolker_pacala model requires a dispersal kernel a_plus");
    if (variant == ModelVariant::migration && !b)
        throw std::invalid_argument("migration model requires an immigration field b");
    for (const auto* k : {&a_plus, &a_minus}) {
        if (!*k) continue;
        if ((*k)->dim() != torus.dim())
            throw std::invalid_argument("kernel dimension differs from torus dimension");
        if ((*k)->cutoff() > 0.5 * torus.side())
            throw std::invalid_argument("kernel too wide for torus");
    }
    if (b && !b->is_constant()) (void)b->integral(torus.side(), torus.dim());
}

double ModelSpec::interaction_radius() const { return a_minus ? a_minus->cutoff() : 0.0; }

namespace {
TorusConfiguration reindexed(const TorusConfiguration& src, double radius) {
    TorusConfiguration out(src.torus(), radius);
    for (std::size_t slot = 0; slot < src.size(); ++slot)
        out.insert_with_id(src.position(slot), src.id(slot));
    return out;
}

constexpr std::size_t kFenwickRebuildEvery = 4096;
}  // namespace

Simulation::Simulation(ModelSpec spec, TorusConfiguration init, double t0)
    : spec_(std::move(spec)),
      cfg_(reindexed(init, spec_.interaction_radius())),
      t_(t0) {
    spec_.validate(cfg_.torus());
    const Torus& torus = cfg_.torus();
    if (spec_.variant == ModelVariant::bolker_pacala) {
        birth_per_point_ = spec_.a_plus->mass();
    } else {
        immigration_total_ = spec_.b->integral(torus.side(), torus.dim());
    }
    rebuild_caches();
}

double Simulation::recompute_death_rate(std::size_t slot) const {
    double rate = spec_.m;
    if (spec_.a_minus)
        rate += kernel_sum_at(cfg_, *spec_.a_minus, cfg_.position(slot), cfg_.id(slot)).value;
    return rate;
}

void Simulation::rebuild_caches() {
    rate_.resize(cfg_.size());
    for (std::size_t s = 0; s < cfg_.size(); ++s) rate_[s] = recompute_death_rate(s);
    fenwick_rebuild();
}

void Simulation::fenwick_rebuild() {
    std::size_t cap = 16;
    while (cap < rate_.size() + 1) cap *= 2;
    tree_.assign(cap + 1, 0.0);
    for (std::size_t i = 0; i < rate_.size(); ++i) tree_[i + 1] = rate_[i];
    for (std::size_t i = 1; i <= cap; ++i) {
        const std::size_t parent = i + (i & (~i + 1));
        if (parent <= cap) tree_[parent] += tree_[i];
    }
    updates_since_rebuild_ = 0;
}

void Simulation::fenwick_add(std::size_t slot, double delta) {
    const std::size_t cap = tree_.size() - 1;
    for (std::size_t i = slot + 1; i <= cap; i += i & (~i + 1)) tree_[i] += delta;
    ++updates_since_rebuild_;
}

double Simulation::fenwick_total() const { return tree_.back(); }

std::size_t Simulation::fenwick_find(double target) const {
    // Smallest slot whose prefix sum exceeds target.
    const std::size_t cap = tree_.size() - 1;
    std::size_t pos = 0;
    for (std::size_t step = cap; step > 0; step >>= 1) {
        if (pos + step <= cap && tree_[pos + step] <= target) {
            pos += step;
            target -= tree_[pos];
        }
    }
    const std::size_t slot = std::min(pos, rate_.size() - 1);
    if (rate_[slot] > 0.0) return slot;
    // Rounding landed on a zero-rate slot; take the nearest positive one.
    for (std::size_t k = 1; k < rate_.size(); ++k) {
        if (slot >= k && rate_[slot - k] > 0.0) return slot - k;
        if (slot + k < rate_.size() && rate_[slot + k] > 0.0) return slot + k;
    }
    return slot;
}

void Simulation::set_rate(std::size_t slot, double rate) {
    if (slot >= rate_.size()) rate_.resize(slot + 1, 0.0);
    if (rate_.size() > tree_.size() - 1) {
        rate_[slot] = rate;
        fenwick_rebuild();
        return;
    }
    const double delta = rate - rate_[slot];
    rate_[slot] = rate;
    if (delta != 0.0) fenwick_add(slot, delta);
}

Rates Simulation::total_rates() const {
    Rates r;
    r.birth = spec_.variant == ModelVariant::bolker_pacala
                  ? birth_per_point_ * static_cast<double>(cfg_.size())
                  : immigration_total_;
    r.death = cfg_.empty() ? 0.0 : std::max(0.0, fenwick_total());
    return r;
}

double Simulation::death_rate_of(PointId id) const {
    const auto slot = cfg_.slot_of(id);
    if (!slot) throw std::out_of_range("unknown point id");
    return rate_[*slot];
}

std::optional<double> Simulation::next_event_time(Rng& rng) const {
    const double total = total_rates().total();
    if (!(total > 0.0)) return std::nullopt;
    return t_ + std::exponential_distribution<double>(total)(rng);
}

Event Simulation::apply_event(double t, Rng& rng) {
    const Rates rates = total_rates();
    const Torus& torus = cfg_.torus();
    const double u = std::uniform_real_distribution<double>(0.0, rates.total())(rng);
    t_ = t;
    Event ev;
    ev.time = t;

    if (u < rates.birth || cfg_.empty()) {
        ev.kind = EventKind::birth;
        Vec x{};
        if (spec_.variant == ModelVariant::bolker_pacala) {
            const auto parent = std::uniform_int_distribution<std::size_t>(0, cfg_.size() - 1)(rng);
            const Vec disp = spec_.a_plus->sample_displacement(rng);
            x = cfg_.position(parent);
            for (int i = 0; i < torus.dim(); ++i) x[i] += disp[i];
            x = torus.wrap(x);
            ev.parent = cfg_.id(parent);
        } else {
            x = spec_.b->sample_position(torus.side(), torus.dim(), rng);
        }
        double own = spec_.m;
        if (spec_.a_minus) {
            const Kernel& k = *spec_.a_minus;
            cfg_.for_each_within(x, k.cutoff(), [&](std::size_t slot, double dist) {
                const double v = k.profile(dist);
                own += v;
                set_rate(slot, rate_[slot] + v);
            });
        }
        ev.id = cfg_.insert(x);
        ev.position = x;
        set_rate(cfg_.size() - 1, own);
    } else {
        ev.kind = EventKind::death;
        const std::size_t slot = fenwick_find(u - rates.birth);
        ev.id = cfg_.id(slot);
        ev.position = cfg_.position(slot);
        if (spec_.a_minus) {
            const Kernel& k = *spec_.a_minus;
            cfg_.for_each_within(ev.position, k.cutoff(), [&](std::size_t other, double dist) {
                if (other == slot) return;
                const double before = rate_[other];
                double after = before - k.profile(dist);
                if (after - spec_.m <= 1e-13 * before) after = spec_.m;
                set_rate(other, after);
            });
        }
        cfg_.erase(ev.id);
        // The configuration moved its last slot into `slot`; mirror that.
        const std::size_t last = rate_.size() - 1;
        if (slot != last) set_rate(slot, rate_[last]);
        set_rate(last, 0.0);
        rate_.pop_back();
    }
    if (updates_since_rebuild_ >= kFenwickRebuildEvery) fenwick_rebuild();
    return ev;
}

std::optional<Event> Simulation::step(Rng& rng) {
    const auto t = next_event_time(rng);
    if (!t) return std::nullopt;
    return apply_event(*t, rng);
}

double Simulation::audit() const {
    const double scale = spec_.m + (spec_.a_minus ? spec_.a_minus->sup_norm() : 0.0);
    double worst = 0.0, total = 0.0;
    for (std::size_t s = 0; s < cfg_.size(); ++s) {
        const double truth = recompute_death_rate(s);
        total += truth;
        const double denom = std::max({std::abs(truth), scale, 1e-300});
        worst = std::max(worst, std::abs(rate_[s] - truth) / denom);
        if (rate_[s] < spec_.m) worst = std::max(worst, (spec_.m - rate_[s]) / denom);
    }
    if (!cfg_.empty()) {
        const double denom = std::max({total, scale, 1e-300});
        worst = std::max(worst, std::abs(fenwick_total() - total) / denom);
    }
    return worst;
}

RunResult run(const ModelSpec& spec, TorusConfiguration init, const RunOptions& opts,
              Observer& observer, Rng& rng) {
    if (!(opts.t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
    if (!std::is_sorted(opts.snapshot_times.begin(), opts.snapshot_times.end()))
        throw std::invalid_argument("snapshot times must be sorted");
    Simulation sim(spec, std::move(init));
    RunResult res;
    std::size_t next_snapshot = 0;
    auto emit_before = [&](double horizon) {
        while (next_snapshot < opts.snapshot_times.size() &&
               opts.snapshot_times[next_snapshot] < horizon &&
               opts.snapshot_times[next_snapshot] <= opts.t_end) {
            observer.on_snapshot(opts.snapshot_times[next_snapshot], sim.configuration());
            ++next_snapshot;
        }
    };
    auto do_audit = [&]() {
        const double dev = sim.audit();
        res.max_audit_deviation = std::max(res.max_audit_deviation, dev);
        if (dev > opts.audit_tolerance)
            throw AuditFailure("death-rate cache deviates from recomputation by " +
                               std::to_string(dev));
    };

    if (sim.configuration().size() > opts.max_population) {
        res.status = RunStatus::explosion;
        res.final_population = sim.configuration().size();
        return res;
    }
    for (;;) {
        const auto t_next = sim.next_event_time(rng);
        if (!t_next) {
            emit_before(std::numeric_limits<double>::infinity());
            sim.advance_to(opts.t_end);
            res.status = RunStatus::absorbed;
            break;
        }
        if (*t_next > opts.t_end) {
            emit_before(std::numeric_limits<double>::infinity());
            sim.advance_to(opts.t_end);
            res.status = RunStatus::completed;
            break;
        }
        emit_before(*t_next);
        const Event ev = sim.apply_event(*t_next, rng);
        ++res.events;
        observer.on_event(ev);
        if (opts.audit_every > 0 && res.events % opts.audit_every == 0) do_audit();
        if (sim.configuration().size() > opts.max_population) {
            res.status = RunStatus::explosion;
            break;
        }
    }
    if (opts.audit_every > 0) do_audit();
    res.final_time = sim.time();
    res.final_population = sim.configuration().size();
    return res;
}

void TraceRecorder::on_event(const Event& e) {
    if (keep_events_) events.push_back(e);
}

void TraceRecorder::on_snapshot(double t, const TorusConfiguration& cfg) {
    snapshots.push_back(Snapshot{t, cfg.positions(), cfg.ids()});
}

void write_events_csv(std::ostream& out, const std::vector<Event>& events, int dim) {
    out << "t,kind";
    for (int i = 0; i < dim; ++i) out << ",x" << (i + 1);
    out << ",id,parent_id\n";
    const auto old = out.precision(17);
    for (const Event& e : events) {
        out << e.time << ',' << (e.kind == EventKind::birth ? "birth" : "death");
        for (int i = 0; i < dim; ++i) out << ',' << e.position[i];
        out << ',' << e.id << ',';
        if (e.parent) out << *e.parent;
        out << '\n';
    }
    out.precision(old);
}

}  // namespace sbd
