#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "sbd/dynamics.hpp"
#include "sbd/oracles.hpp"

using namespace sbd;

namespace {

ModelSpec migration(double b, double m, std::optional<Kernel> a_minus = std::nullopt) {
    ModelSpec s;
    s.variant = ModelVariant::migration;
    s.b = ImmigrationField::constant(b);
    s.m = m;
    s.a_minus = std::move(a_minus);
    return s;
}

ModelSpec bolker_pacala(Kernel a_plus, std::optional<Kernel> a_minus, double m) {
    ModelSpec s;
    s.a_plus = std::move(a_plus);
    s.a_minus = std::move(a_minus);
    s.m = m;
    return s;
}

struct Stats {
    double mean, se, var;
};

Stats stats(const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= x.size();
    double v2 = 0;
    for (double v : x) v2 += (v - m) * (v - m);
    v2 /= x.size() - 1;
    return {m, std::sqrt(v2 / x.size()), v2};
}

// Kolmogorov-Smirnov distance of a sample against Exp(1).
double ks_exp1(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    double d = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = 1 - std::exp(-x[i]);
        d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    return d;
}

class CountingObserver : public Observer {
public:
    void on_event(const Event& e) override {
        if (e.time <= last_) monotone = false;
        last_ = e.time;
        ++count;
    }
    std::uint64_t count{0};
    bool monotone{true};

private:
    double last_{-1};
};

}  // namespace

TEST_CASE("total rates") {
    const Torus t(10, 1);
    const Kernel k = Kernel::triangular(1, 1, 1);
    Simulation empty(bolker_pacala(k, k, 0.5), TorusConfiguration(t));
    CHECK(empty.total_rates().birth == 0.0);
    CHECK(empty.total_rates().death == 0.0);
    Rng rng(1);
    CHECK_FALSE(empty.next_event_time(rng).has_value());
    CHECK_FALSE(empty.step(rng).has_value());

    TorusConfiguration one(t);
    one.insert(Vec{3});
    Simulation single(bolker_pacala(k, k, 2.0), one);
    CHECK(single.total_rates().death == 2.0);
    CHECK(single.total_rates().birth == doctest::Approx(1.0));

    Simulation mig(migration(0.5, 0.0), one);
    CHECK(mig.total_rates().birth == doctest::Approx(5.0));
}

TEST_CASE("model validation") {
    const Torus t(10, 1);
    ModelSpec s;
    CHECK_THROWS(s.validate(t));  // bolker_pacala without a+
    ModelSpec w = bolker_pacala(Kernel::gaussian(1, 2, 1), std::nullopt, 0);
    CHECK_THROWS_WITH(w.validate(t), "kernel too wide for torus");
    ModelSpec m = migration(1, -1);
    CHECK_THROWS(m.validate(t));
}

TEST_CASE("holding time of a lone point is Exp(1)") {
    const Torus t(10, 1);
    TorusConfiguration one(t);
    one.insert(Vec{5});
    const Simulation sim(migration(0.0, 1.0), one);
    std::vector<double> w;
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) w.push_back(*sim.next_event_time(rng));
    const Stats s = stats(w);
    CHECK(std::abs(s.mean - 1.0) <= 3 * s.se);
}

TEST_CASE("death selection follows the cached rates (1:3)") {
    // Centre point with three neighbours at distance 0.5; the neighbours are
    // out of each other's range, so their rates are a(0.5) and the centre's 3 a(0.5).
    const Torus t(10, 2);
    const Kernel am = Kernel::triangular(1, 0.6, 2);
    TorusConfiguration cfg(t, am.cutoff());
    const PointId centre = cfg.insert(Vec{5, 5});
    for (int i = 0; i < 3; ++i) {
        const double a = 2 * std::numbers::pi * i / 3;
        cfg.insert(Vec{5 + 0.5 * std::cos(a), 5 + 0.5 * std::sin(a)});
    }
    const Simulation base(migration(0.0, 0.0, am), cfg);
    const PointId outer = cfg.id(1);
    CHECK(base.death_rate_of(centre) == doctest::Approx(3 * base.death_rate_of(outer)));

    std::map<PointId, int> hits;
    Rng rng(3);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Simulation s = base;
        const Event e = s.apply_event(1.0, rng);
        REQUIRE(e.kind == EventKind::death);
        ++hits[e.id];
    }
    // centre has probability 1/2
    const double p = hits[centre] / static_cast<double>(n);
    CHECK(std::abs(p - 0.5) <= 3 * std::sqrt(0.25 / n));
    const double q = hits[outer] / static_cast<double>(n);
    CHECK(std::abs(q - 1.0 / 6) <= 3 * std::sqrt(1.0 / 6 * 5.0 / 6 / n));
}

TEST_CASE("immigration without deaths: event count is Poisson(t * integral of b)") {
    const Torus t(10, 1);
    const ModelSpec spec = migration(0.5, 0.0);
    RunOptions o;
    o.t_end = 2.0;
    std::vector<double> counts;
    for (int rep = 0; rep < 2000; ++rep) {
        Rng rng = make_stream(4, rep);
        CountingObserver obs;
        run(spec, TorusConfiguration(t), o, obs, rng);
        counts.push_back(static_cast<double>(obs.count));
    }
    const Stats s = stats(counts);
    CHECK(std::abs(s.mean - 10.0) <= 3 * s.se);
    CHECK(std::abs(s.var - 10.0) <= 3 * std::sqrt(210.0 / counts.size()));
}

TEST_CASE("rescaled inter-event times are exponential (KS)") {
    const Torus t(10, 1);
    Rng rng(5);
    TorusConfiguration init = sample_poisson(t, 1.0, rng);
    Simulation sim(migration(1.0, 0.5), init);
    std::vector<double> u;
    for (int i = 0; i < 20000; ++i) {
        const double rate = sim.total_rates().total();
        const double t0 = sim.time();
        REQUIRE(sim.step(rng).has_value());
        u.push_back((sim.time() - t0) * rate);
    }
    // p > 0.001 for n = 20000: D < 1.95 / sqrt(n)
    CHECK(ks_exp1(u) < 1.95 / std::sqrt(20000.0));
}

TEST_CASE("events change the population by one and keep other ids") {
    const Torus t(15, 2);
    const Kernel ap = Kernel::gaussian(1, 0.5, 2), am = Kernel::triangular(0.5, 1, 2);
    Rng rng(6);
    Simulation sim(bolker_pacala(ap, am, 0.1), sample_poisson(t, 0.5, rng, am.cutoff()));
    for (int i = 0; i < 3000; ++i) {
        const auto before_ids = sim.configuration().ids();
        std::map<PointId, Vec> before;
        for (std::size_t s = 0; s < before_ids.size(); ++s)
            before[before_ids[s]] = sim.configuration().position(s);
        const auto e = sim.step(rng);
        REQUIRE(e.has_value());
        const auto& cfg = sim.configuration();
        if (e->kind == EventKind::birth) {
            REQUIRE(cfg.size() == before.size() + 1);
            CHECK(e->parent.has_value());
            CHECK(before.count(*e->parent) == 1);
            CHECK_FALSE(before.count(e->id));
        } else {
            REQUIRE(cfg.size() + 1 == before.size());
            CHECK(before.count(e->id) == 1);
        }
        if (i % 300 == 0) {
            for (std::size_t s = 0; s < cfg.size(); ++s) {
                const auto it = before.find(cfg.id(s));
                if (it != before.end()) CHECK(it->second == cfg.position(s));
            }
        }
    }
}

TEST_CASE("cached rates match recomputation (audit every 1000 events)") {
    const Torus t(20, 2);
    const Kernel ap = Kernel::gaussian(1.2, 0.7, 2), am = Kernel::gaussian(0.3, 0.5, 2);
    Rng rng(7);
    RunOptions o;
    o.t_end = 10;
    o.audit_every = 1000;
    o.audit_tolerance = 1e-9;
    CountingObserver obs;
    const RunResult r =
        run(bolker_pacala(ap, am, 0.2), sample_poisson(t, 1.0, rng, am.cutoff()), o, obs, rng);
    CHECK(r.events > 5000);
    CHECK(r.max_audit_deviation <= 1e-9);
    CHECK(obs.monotone);
}

TEST_CASE("runs are reproducible given the seed") {
    const Torus t(30, 1);
    const Kernel ap = Kernel::exponential(1, 0.5, 1), am = Kernel::triangular(0.5, 1, 1);
    auto trace = [&](std::uint64_t seed) {
        Rng rng = make_stream(seed, 0);
        TraceRecorder rec;
        RunOptions o;
        o.t_end = 10;
        o.snapshot_times = {0, 5, 10};
        run(bolker_pacala(ap, am, 0.1), sample_poisson(t, 1.0, rng, am.cutoff()), o, rec, rng);
        std::ostringstream s;
        write_events_csv(s, rec.events, 1);
        return std::make_pair(s.str(), rec.snapshots.size());
    };
    const auto a = trace(11), b = trace(11), c = trace(12);
    CHECK(a.first == b.first);
    CHECK(a.first != c.first);
    CHECK(a.second == 3);
    CHECK(a.first.rfind("t,kind,x1,id,parent_id\n", 0) == 0);
}

TEST_CASE("snapshots see every event up to their time") {
    const Torus t(10, 1);
    Rng rng(8);
    TraceRecorder rec;
    RunOptions o;
    o.t_end = 5;
    o.snapshot_times = {0, 1, 2.5, 5};
    run(migration(1.0, 0.3), TorusConfiguration(t), o, rec, rng);
    REQUIRE(rec.snapshots.size() == 4);
    for (const Snapshot& s : rec.snapshots) {
        long n = 0;
        for (const Event& e : rec.events)
            if (e.time <= s.t) n += e.kind == EventKind::birth ? 1 : -1;
        CHECK(static_cast<long>(s.points.size()) == n);
    }
}

TEST_CASE("explosion guard and absorption") {
    const Torus t(30, 1);
    const Kernel ap = Kernel::gaussian(2, 1, 1);
    Rng rng(9);
    TorusConfiguration init(t);
    init.insert(Vec{15});
    RunOptions o;
    o.t_end = 100;
    o.max_population = 300;
    Observer none;
    const RunResult r = run(bolker_pacala(ap, std::nullopt, 0), init, o, none, rng);
    CHECK(r.status == RunStatus::explosion);
    CHECK(r.final_population == 301);

    const RunResult a = run(bolker_pacala(ap, std::nullopt, 0), TorusConfiguration(t), o, none, rng);
    CHECK(a.status == RunStatus::absorbed);
    CHECK(a.events == 0);
}

TEST_CASE("contact model with m > <a+> dies out") {
    const Torus t(40, 1);
    const Kernel ap = Kernel::gaussian(1, 1, 1);
    RunOptions o;
    o.t_end = 20;
    Observer none;
    int extinct = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng = make_stream(10, rep);
        TorusConfiguration init(t);
        for (int i = 0; i < 10; ++i) init.insert(Vec{2.0 + 3.5 * i});
        extinct += run(bolker_pacala(ap, std::nullopt, 1.5), init, o, none, rng).final_population == 0;
    }
    CHECK(extinct >= 95);
}

TEST_CASE("weak long-range interaction settles near the mean-field density") {
    // a+ = a-, m = 0: mean-field fixed point 1. Wide kernels keep the closure close.
    const Torus t(60, 1);
    const Kernel k = Kernel::gaussian(1, 4, 1);
    const ModelSpec spec = bolker_pacala(k, k, 0.0);
    RunOptions o;
    o.t_end = 30;
    o.snapshot_times = {20, 25, 30};
    std::vector<double> dens;
    for (int rep = 0; rep < 20; ++rep) {
        Rng rng = make_stream(12, rep);
        TraceRecorder rec(false);
        run(spec, sample_poisson(t, 1.0, rng, k.cutoff()), o, rec, rng);
        for (const Snapshot& s : rec.snapshots) dens.push_back(s.points.size() / t.side());
    }
    const double target = oracles::bp_meanfield(1.0, 1.0, 1.0, 0.0, 30.0);
    CHECK(std::abs(stats(dens).mean - target) <= 0.15 * target);
}
