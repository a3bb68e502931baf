#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hwsim/best_response.hpp"

using namespace hwsim;

namespace {

GameContext make_context(int th = 8, int w = 1, uint64_t seed_mix = 0) {
    GameContext ctx;
    ctx.horizon = Horizon{0, th, w, 1, 1.0 / 60};
    ctx.n = 1;
    ctx.xi.assign(th, 0.0);
    ctx.p_hat.assign(th, 0.6);
    ctx.chi = chi_series(ctx.horizon);
    ctx.committed.theta_old.assign(th, 0);
    ctx.committed.u_old.assign(th, 0.0);
    ctx.committed.delta_old.assign(th, 0);
    ctx.gamma = 0.01;
    ctx.upsilon = 0.02;
    ctx.epsilon = 1e-4;
    ctx.station = StationConfig{3, 12.0, 1, 0.5, 4.0};
    ctx.fifo_floor = 0;
    (void)seed_mix;
    return ctx;
}

GameContext random_context(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int w = static_cast<int>(rng() % 3);
    int th = std::max<int>(2 * w + 2, 5 + static_cast<int>(rng() % 4));
    GameContext ctx = make_context(th, w);
    ctx.station.plug_count = 1 + static_cast<int>(rng() % 3);
    ctx.station.min_charge_intervals = 1 + static_cast<int>(rng() % 2);
    ctx.station.max_energy_per_interval = 2.0 + 8.0 * unif(rng);
    ctx.fifo_floor = static_cast<long>(rng() % 3);
    for (int j = 0; j < th; ++j) {
        ctx.xi[j] = 0.08 * unif(rng);
        ctx.p_hat[j] = 0.2 + 0.8 * unif(rng);
        ctx.committed.theta_old[j] = static_cast<int>(rng() % 3);
        ctx.committed.u_old[j] = 0.6 * ctx.station.max_energy_per_interval * unif(rng);
        ctx.committed.delta_old[j] = static_cast<int>(rng() % 2);
    }
    return ctx;
}

VehicleParams random_vehicle(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    VehicleParams par;
    par.b = 0.015 + 0.015 * unif(rng);
    par.x0 = 0.3 + 0.6 * unif(rng);
    par.x_ref = 0.35 + 0.3 * unif(rng);
    par.alpha = 0.1 + 0.8 * unif(rng);
    par.p_bar = 0.3 + 0.5 * unif(rng);
    return par;
}

OthersAggregates random_others(std::mt19937_64& rng, const GameContext& ctx) {
    OthersAggregates agg = OthersAggregates::zeros(ctx.horizon.length);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int j = 0; j < ctx.horizon.length; ++j) {
        agg.theta[j] = static_cast<int>(rng() % 3);
        agg.delta[j] = static_cast<int>(rng() % 2);
        agg.u[j] = 0.3 * ctx.station.max_energy_per_interval * unif(rng);
    }
    return agg;
}

}  // namespace

TEST_CASE("pulse enumeration lists the no-stop window and interior entries") {
    Horizon h{0, 5, 1, 1, 1.0 / 60};
    auto pulses = enumerate_pulses(h);
    REQUIRE(pulses.size() == 2);
    CHECK(pulses[0].entry == 0);
    CHECK(pulses[0].first == 0);
    CHECK(pulses[0].last == 1);
    CHECK(pulses[1].entry == 3);
    CHECK(pulses[1].first == 2);
    CHECK(pulses[1].last == 4);

    // Width-one pulses when the entry window is degenerate.
    Horizon h0{0, 4, 0, 1, 1.0 / 60};
    for (const auto& p : enumerate_pulses(h0)) CHECK(p.last - p.first == 0);

    // One admissible entry per extra interval.
    Horizon h8{0, 8, 1, 1, 1.0 / 60};
    CHECK(enumerate_pulses(h8).size() == pulses.size() + 3);
}

TEST_CASE("no discount and a healthy battery means driving on") {
    GameContext ctx = make_context();
    for (int j = 0; j < 8; ++j) ctx.p_hat[j] = 0.7;  // above any reference
    VehicleParams par{0.02, 0.8, 0.5, 0.5, 0.6};
    OthersAggregates others = OthersAggregates::zeros(8);

    BestResponseResult br = best_response(par, others, ctx);
    REQUIRE(br.feasible);
    CHECK_FALSE(br.strategy.stops());
    BestResponseResult oracle = brute_force_oracle(par, others, ctx);
    CHECK(br.cost == oracle.cost);
}

TEST_CASE("an empty battery forces a stop that reaches the threshold") {
    GameContext ctx = make_context();
    VehicleParams par{0.02, 0.3, 0.6, 0.5, 0.6};
    OthersAggregates others = OthersAggregates::zeros(8);
    BestResponseResult br = best_response(par, others, ctx);
    REQUIRE(br.feasible);
    CHECK(br.strategy.stops());
    PulseBounds p = pulse_bounds(br.strategy.theta);
    int entry = entry_offset(p, ctx.horizon.entry_half_width);
    CHECK(br.strategy.x[entry] >= par.x_ref - 1e-9);
}

TEST_CASE("a deep discount converts price-sensitive drivers") {
    GameContext ctx = make_context();
    for (int j = 0; j < 8; ++j) ctx.p_hat[j] = 0.1;  // far below reference
    VehicleParams par{0.02, 0.6, 0.4, 0.95, 0.8};
    OthersAggregates others = OthersAggregates::zeros(8);
    BestResponseResult br = best_response(par, others, ctx);
    REQUIRE(br.feasible);
    CHECK(br.strategy.stops());
    CHECK(br.strategy.total_energy() > 0.0);

    // The same vehicle with time-dominant preferences keeps driving.
    par.alpha = 0.001;
    br = best_response(par, others, ctx);
    CHECK_FALSE(br.strategy.stops());
}

TEST_CASE("no feasible strategy is reported when the station is full") {
    GameContext ctx = make_context();
    for (int j = 0; j < 8; ++j) ctx.committed.delta_old[j] = ctx.station.plug_count;
    VehicleParams par{0.02, 0.3, 0.6, 0.5, 0.6};  // must charge, cannot
    OthersAggregates others = OthersAggregates::zeros(8);
    BestResponseResult br = best_response(par, others, ctx);
    CHECK_FALSE(br.feasible);
    BestResponseResult oracle = brute_force_oracle(par, others, ctx);
    CHECK_FALSE(oracle.feasible);
}

TEST_CASE("structured search matches the exhaustive oracle on random instances") {
    std::mt19937_64 rng(41);
    int feasible_seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        GameContext ctx = random_context(rng);
        VehicleParams par = random_vehicle(rng);
        OthersAggregates others = random_others(rng, ctx);
        BestResponseResult fast = best_response(par, others, ctx);
        BestResponseResult slow = brute_force_oracle(par, others, ctx);
        CAPTURE(trial);
        REQUIRE(fast.feasible == slow.feasible);
        if (!fast.feasible) continue;
        CHECK(fast.cost == slow.cost);
        ++feasible_seen;
    }
    CHECK(feasible_seen > 100);

    // The oracle reports the full binary enumeration.
    GameContext ctx = make_context(6, 1);
    BestResponseResult slow =
        brute_force_oracle(random_vehicle(rng), OthersAggregates::zeros(6), ctx);
    CHECK(slow.explored == (1L << 12));
}

TEST_CASE("sequential play reaches a certified equilibrium") {
    std::mt19937_64 rng(43);
    GameContext ctx = make_context(7, 1);
    ctx.station.plug_count = 1;  // force plug contention
    for (int j = 0; j < 7; ++j) ctx.p_hat[j] = 0.25;

    std::vector<VehicleParams> cohort = {
        {0.02, 0.45, 0.6, 0.8, 0.7},  // must charge
        {0.02, 0.5, 0.6, 0.8, 0.7},   // must charge
    };
    InitialJoint init = initial_joint_strategy(cohort, ctx);
    REQUIRE(init.feasible[0]);
    REQUIRE(init.feasible[1]);

    SequentialResult res = run_sequential(cohort, ctx, init.strategies,
                                          Schedule::RoundRobin, 1);
    CHECK(res.trace.converged);
    MineCertificate cert = certify_mine(res.joint, cohort, ctx, ctx.epsilon);
    CHECK(cert.is_equilibrium);

    // With one plug the two charge windows never overlap.
    for (int j = 0; j < 7; ++j)
        CHECK(res.joint[0].delta[j] + res.joint[1].delta[j] <= 1);
}

TEST_CASE("single agent converges in one accepted update at most") {
    GameContext ctx = make_context();
    std::vector<VehicleParams> cohort = {{0.02, 0.8, 0.5, 0.5, 0.6}};
    InitialJoint init = initial_joint_strategy(cohort, ctx);
    SequentialResult res =
        run_sequential(cohort, ctx, init.strategies, Schedule::RoundRobin, 0);
    CHECK(res.trace.converged);
    CHECK(res.trace.accepted_count <= 1);
    MineCertificate cert = certify_mine(res.joint, cohort, ctx, ctx.epsilon);
    CHECK(cert.is_equilibrium);
}

TEST_CASE("accepted updates drop the cost by at least epsilon and the potential follows") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 30; ++trial) {
        GameContext ctx = random_context(rng);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        int n = 2 + static_cast<int>(rng() % 4);
        double alpha = 0.15 + 0.7 * unif(rng);
        std::vector<VehicleParams> cohort;
        for (int i = 0; i < n; ++i) {
            VehicleParams par = random_vehicle(rng);
            par.alpha = alpha;  // shared weight keeps the potential exact
            par.x_ref = std::min(par.x_ref, par.x0);
            cohort.push_back(par);
        }
        InitialJoint init = initial_joint_strategy(cohort, ctx);
        SequentialResult res = run_sequential(
            cohort, ctx, init.strategies,
            trial % 2 ? Schedule::SeededRandom : Schedule::FifoReplay, trial);
        REQUIRE(res.trace.converged);

        double last_pot = res.trace.initial_potential;
        for (const auto& e : res.trace.entries) {
            if (!e.accepted) continue;
            CHECK(e.old_cost - e.new_cost >= ctx.epsilon - 1e-12);
            CHECK(e.potential_after <= last_pot - ctx.epsilon + 1e-9);
            last_pot = e.potential_after;
        }
        double bound = (res.trace.initial_potential - res.trace.final_potential) /
                       ctx.epsilon;
        CHECK(res.trace.accepted_count <= bound + 1e-6);

        MineCertificate cert = certify_mine(res.joint, cohort, ctx, ctx.epsilon);
        CHECK(cert.is_equilibrium);
    }
}

TEST_CASE("perturbing an equilibrium strategy breaks the certificate") {
    GameContext ctx = make_context();
    for (int j = 0; j < 8; ++j) ctx.p_hat[j] = 0.15;
    std::vector<VehicleParams> cohort = {{0.02, 0.5, 0.4, 0.9, 0.8}};
    InitialJoint init = initial_joint_strategy(cohort, ctx);
    SequentialResult res =
        run_sequential(cohort, ctx, init.strategies, Schedule::RoundRobin, 0);
    REQUIRE(res.trace.converged);
    REQUIRE(res.joint[0].stops());

    // Swap in the clearly worse no-stop strategy.
    std::vector<Strategy> worse = res.joint;
    worse[0] = make_no_stop(ctx.horizon, cohort[0].x0);
    MineCertificate cert = certify_mine(worse, cohort, ctx, ctx.epsilon);
    CHECK_FALSE(cert.is_equilibrium);
    CHECK(cert.worst_improvement >= ctx.epsilon);

    // An infinite tolerance certifies anything.
    cert = certify_mine(worse, cohort, ctx,
                        std::numeric_limits<double>::infinity());
    CHECK(cert.is_equilibrium);
}

TEST_CASE("ties keep the incumbent strategy") {
    GameContext ctx = make_context();
    VehicleParams par{0.02, 0.8, 0.5, 0.5, 0.6};
    OthersAggregates others = OthersAggregates::zeros(8);
    BestResponseResult first = best_response(par, others, ctx);
    REQUIRE(first.feasible);
    BestResponseResult again = best_response(par, others, ctx, &first.strategy);
    CHECK(again.strategy.theta == first.strategy.theta);
    CHECK(again.cost == first.cost);
}

namespace {

// Independent check of the energy allocation: the linear program
//   min sum margin_j * u_j   s.t.  lo <= u <= hi,  sum_{j<gate} u >= L,
//                                  sum u <= U
// attains its optimum at a vertex, where at most one coordinate sits strictly
// between its bounds (pinned by one of the two coupling rows). Enumerating
// all bound patterns with one fractional coordinate is therefore exact.
struct TinyLp {
    std::vector<double> lo, hi, margin;
    double need = 0.0;     // L, over coordinates before `gate`
    double battery = 0.0;  // U, over all coordinates
    int gate = 0;
};

bool lp_feasible(const TinyLp& lp, const std::vector<double>& u, double tol = 1e-9) {
    double total = 0.0, before = 0.0;
    for (size_t j = 0; j < u.size(); ++j) {
        if (u[j] < lp.lo[j] - tol || u[j] > lp.hi[j] + tol) return false;
        total += u[j];
        if (static_cast<int>(j) < lp.gate) before += u[j];
    }
    return before >= lp.need - tol && total <= lp.battery + tol;
}

double lp_cost(const TinyLp& lp, const std::vector<double>& u) {
    double c = 0.0;
    for (size_t j = 0; j < u.size(); ++j) c += lp.margin[j] * u[j];
    return c;
}

double vertex_optimum(const TinyLp& lp) {
    const int n = static_cast<int>(lp.lo.size());
    double best = std::numeric_limits<double>::infinity();
    for (int pattern = 0; pattern < (1 << n); ++pattern) {
        std::vector<double> u(n);
        for (int j = 0; j < n; ++j)
            u[j] = (pattern >> j) & 1 ? lp.hi[j] : lp.lo[j];
        if (lp_feasible(lp, u)) best = std::min(best, lp_cost(lp, u));
        // One fractional coordinate pinned by each coupling row in turn.
        for (int f = 0; f < n; ++f) {
            double others_before = 0.0, others_total = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == f) continue;
                others_total += u[j];
                if (j < lp.gate) others_before += u[j];
            }
            if (f < lp.gate) {
                std::vector<double> v = u;
                v[f] = lp.need - others_before;  // makes the gate row tight
                if (lp_feasible(lp, v)) best = std::min(best, lp_cost(lp, v));
            }
            std::vector<double> w = u;
            w[f] = lp.battery - others_total;  // makes the battery row tight
            if (lp_feasible(lp, w)) best = std::min(best, lp_cost(lp, w));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("the greedy energy allocation solves its linear program exactly") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int solved = 0, infeasible_agreed = 0;
    for (int trial = 0; trial < 500; ++trial) {
        int n = 1 + static_cast<int>(rng() % 3);
        StationConfig station{4, 100.0, 1, 0.2 + 0.5 * unif(rng), 0.0};
        station.u_max_per_vehicle = station.u_min + 2.5 * unif(rng);
        double b = 0.02 + 0.03 * unif(rng);
        double x0 = 0.2 + 0.5 * unif(rng);
        double x_ref = x0 + (unif(rng) - 0.3) * 0.2;  // sometimes above x0

        std::vector<uint8_t> delta(n, 1);
        std::vector<double> margin(n), cap(n);
        for (int j = 0; j < n; ++j) {
            margin[j] = unif(rng) - 0.5;
            cap[j] = station.u_min + 3.0 * unif(rng);
        }
        int gate = n;  // the whole block precedes the merge-back

        auto u = optimal_energy(delta, margin, cap, station, b, x0, x_ref, gate);

        TinyLp lp;
        lp.gate = gate;
        lp.need = std::max(0.0, (x_ref - x0) / b);
        lp.battery = (1.0 - x0) / b;
        lp.margin = margin;
        for (int j = 0; j < n; ++j) {
            lp.lo.push_back(station.u_min);
            lp.hi.push_back(std::min(station.u_max_per_vehicle, cap[j]));
        }
        bool box_ok = true;
        for (int j = 0; j < n; ++j)
            if (lp.hi[j] < lp.lo[j]) box_ok = false;
        double best = box_ok ? vertex_optimum(lp)
                             : std::numeric_limits<double>::infinity();

        if (!u) {
            CHECK(best == std::numeric_limits<double>::infinity());
            ++infeasible_agreed;
            continue;
        }
        REQUIRE(lp_feasible(lp, *u));
        CHECK(lp_cost(lp, *u) <= best + 1e-9);
        ++solved;
    }
    CHECK(solved > 200);
    CHECK(infeasible_agreed > 20);
}
