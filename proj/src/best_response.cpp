#include "hwsim/best_response.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hwsim {

std::vector<PulseCandidate> enumerate_pulses(const Horizon& horizon) {
    const int w = horizon.entry_half_width;
    std::vector<PulseCandidate> out;
    out.push_back({0, 0, std::min(w, horizon.length - 1)});  // no-stop
    // Interior pulses keep the first window clear and must fall fully inside
    // the horizon, so the vehicle merges back at least W+1 intervals before
    // the end of its plan.
    for (int entry = 2 * w + 1; entry + w <= horizon.length - 1; ++entry)
        out.push_back({entry, entry - w, entry + w});
    return out;
}

std::optional<std::vector<double>> optimal_energy(
    std::span<const uint8_t> delta, std::span<const double> price_margin,
    std::span<const double> residual_cap, const StationConfig& station, double b,
    double x0, double x_ref, int first_gate) {
    const int n = static_cast<int>(delta.size());
    std::vector<double> u(n, 0.0), hi(n, 0.0);
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
        if (!delta[j]) continue;
        u[j] = station.u_min;
        hi[j] = std::min(station.u_max_per_vehicle, residual_cap[j]);
        if (hi[j] < station.u_min - 1e-12) return std::nullopt;
        total += u[j];
    }
    double battery = (1.0 - x0) / b;
    if (total > battery + 1e-12) return std::nullopt;

    double need = 0.0;
    if (first_gate >= 0) {
        need = (x_ref - x0) / b;
        for (int j = 0; j < first_gate; ++j) need -= u[j];
    }

    std::vector<int> order;
    for (int j = 0; j < n; ++j)
        if (delta[j]) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int bidx) {
        return price_margin[a] < price_margin[bidx];
    });
    double room = battery - total;

    // Mandatory pass: cover the SoC deficit before the gate, cheapest first.
    for (int j : order) {
        if (need <= 1e-15) break;
        if (j >= first_gate) continue;
        double bump = std::min({hi[j] - u[j], need, room});
        u[j] += bump;
        room -= bump;
        need -= bump;
    }
    if (need > 1e-9) return std::nullopt;  // cannot reach the trip threshold in time

    // Voluntary pass: keep buying wherever the margin is a saving.
    for (int j : order) {
        if (price_margin[j] >= 0.0) break;
        double bump = std::min(hi[j] - u[j], room);
        u[j] += bump;
        room -= bump;
    }
    return u;
}

namespace {

// Offsets whose window point the SoC gate guards; -1 when the pulse guards
// nothing (cannot happen for a valid pulse).
int first_gate_offset(std::span<const uint8_t> theta, int w) {
    const int n = static_cast<int>(theta.size());
    for (int j = 0; j < n; ++j)
        if (theta[std::max(0, j - w)]) return j;
    return -1;
}

Strategy assemble(const GameContext& ctx, const VehicleParams& par,
                  std::vector<uint8_t> theta, std::vector<uint8_t> delta,
                  std::vector<double> u) {
    Strategy s;
    s.k = ctx.horizon.k;
    s.theta = std::move(theta);
    s.delta = std::move(delta);
    s.u = std::move(u);
    s.x.assign(ctx.horizon.length + 1, par.x0);
    for (int j = 0; j < ctx.horizon.length; ++j)
        s.x[j + 1] = s.x[j] + par.b * s.u[j];
    return s;
}

struct Candidate {
    Strategy strategy;
    double cost = 0.0;
    int exit = 0;
};

// Shared scaffolding for both search routes: margins, caps, and the cost of
// one completed strategy.
struct SearchEnv {
    const GameContext& ctx;
    const VehicleParams& par;
    const OthersAggregates& others;
    std::vector<double> margin;        // p_hat - p_bar per offset
    std::vector<double> residual_cap;  // shared energy left for this agent

    SearchEnv(const GameContext& c, const VehicleParams& p, const OthersAggregates& o)
        : ctx(c), par(p), others(o) {
        const int n = ctx.horizon.length;
        margin.resize(n);
        residual_cap.resize(n);
        for (int j = 0; j < n; ++j) {
            margin[j] = ctx.p_hat[j] - par.p_bar;
            residual_cap[j] = ctx.station.max_energy_per_interval -
                              ctx.committed.u_old[j] - others.u[j];
        }
    }

    double cost(const Strategy& s) const { return cost_total(s, others, ctx, par); }

    bool plugs_free(int first, int last) const {
        for (int j = first; j <= last; ++j)
            if (ctx.committed.delta_old[j] + others.delta[j] + 1 >
                ctx.station.plug_count)
                return false;
        return true;
    }
};

}  // namespace

BestResponseResult best_response(const VehicleParams& agent,
                                 const OthersAggregates& others,
                                 const GameContext& ctx, const Strategy* incumbent) {
    const int n = ctx.horizon.length;
    const int w = ctx.horizon.entry_half_width;
    const int hbar = ctx.station.min_charge_intervals;
    SearchEnv env(ctx, agent, others);

    // The coupling rows bind the whole cohort: when the rest of the game
    // already exceeds a shared cap, no strategy of this agent is feasible.
    for (int j = 0; j < n; ++j) {
        if (ctx.committed.delta_old[j] + others.delta[j] > ctx.station.plug_count ||
            env.residual_cap[j] < -1e-9)
            return BestResponseResult{};
    }

    std::optional<Candidate> best;
    long explored = 0;
    auto consider = [&](Strategy s, int exit) {
        double c = env.cost(s);
        if (!best || c < best->cost - 1e-12 ||
            (std::abs(c - best->cost) <= 1e-12 && exit < best->exit)) {
            best = Candidate{std::move(s), c, exit};
        }
    };

    const int fifo_off =
        static_cast<int>(std::max<long>(0, ctx.fifo_floor - ctx.horizon.k));

    for (const PulseCandidate& pulse : enumerate_pulses(ctx.horizon)) {
        // A width-one stay cannot clear the first window and satisfy the
        // minimum-stay biconditional at once, so nobody can stop when W = 0.
        if (pulse.entry > 0 && w == 0) continue;
        std::vector<uint8_t> theta(n, 0);
        for (int j = pulse.first; j <= pulse.last; ++j) theta[j] = 1;
        std::vector<uint8_t> no_charge(n, 0);
        ++explored;
        // Not charging is admissible only when the battery already clears the
        // trip threshold; the energy routine decides that uniformly.
        if (auto u0 = optimal_energy(no_charge, env.margin, env.residual_cap,
                                     ctx.station, agent.b, agent.x0, agent.x_ref,
                                     pulse.entry)) {
            consider(assemble(ctx, agent, theta, no_charge, std::move(*u0)),
                     pulse.entry);
        }
        if (pulse.entry == 0) continue;  // drivers-on never charge

        // Charge blocks end exactly one interval before the merge-back and
        // must last at least h_bar+1 intervals.
        for (int a = fifo_off; a <= pulse.entry - 1 - hbar; ++a) {
            ++explored;
            if (!env.plugs_free(a, pulse.entry - 1)) continue;
            std::vector<uint8_t> delta(n, 0);
            for (int j = a; j < pulse.entry; ++j) delta[j] = 1;
            auto u = optimal_energy(delta, env.margin, env.residual_cap, ctx.station,
                                    agent.b, agent.x0, agent.x_ref, pulse.entry);
            if (!u) continue;
            consider(assemble(ctx, agent, theta, delta, std::move(*u)), pulse.entry);
        }
    }

    BestResponseResult res;
    res.explored = explored;
    if (!best) return res;  // no feasible strategy at all
    res.feasible = true;
    res.optimal = true;
    if (incumbent) {
        double inc_cost = env.cost(*incumbent);
        if (inc_cost <= best->cost + 1e-12) {
            res.strategy = *incumbent;
            res.cost = inc_cost;
            return res;
        }
    }
    res.strategy = std::move(best->strategy);
    res.cost = best->cost;
    return res;
}

BestResponseResult brute_force_oracle(const VehicleParams& agent,
                                      const OthersAggregates& others,
                                      const GameContext& ctx) {
    const int n = ctx.horizon.length;
    const int w = ctx.horizon.entry_half_width;
    SearchEnv env(ctx, agent, others);

    BestResponseResult res;
    std::optional<Candidate> best;
    const uint64_t count = 1ull << (2 * n);
    res.explored = static_cast<long>(count);
    for (uint64_t bits = 0; bits < count; ++bits) {
        std::vector<uint8_t> theta(n), delta(n);
        for (int j = 0; j < n; ++j) {
            theta[j] = (bits >> j) & 1;
            delta[j] = (bits >> (n + j)) & 1;
        }
        auto u = optimal_energy(delta, env.margin, env.residual_cap, ctx.station,
                                agent.b, agent.x0, agent.x_ref,
                                first_gate_offset(theta, w));
        if (!u) continue;
        Strategy s = assemble(ctx, agent, theta, delta, std::move(*u));
        if (!check_feasible_logical(s, agent, others, ctx).feasible) continue;
        double c = env.cost(s);
        PulseBounds pb = pulse_bounds(s.theta);
        int exit = entry_offset(pb, w);
        if (!best || c < best->cost - 1e-12 ||
            (std::abs(c - best->cost) <= 1e-12 && exit < best->exit))
            best = Candidate{std::move(s), c, exit};
    }
    if (!best) return res;
    res.feasible = true;
    res.optimal = true;
    res.strategy = std::move(best->strategy);
    res.cost = best->cost;
    return res;
}

OthersAggregates aggregates_excluding(std::span<const Strategy> joint, size_t self,
                                      int horizon_length) {
    OthersAggregates agg = OthersAggregates::zeros(horizon_length);
    for (size_t i = 0; i < joint.size(); ++i) {
        if (i == self) continue;
        for (int j = 0; j < horizon_length; ++j) {
            agg.theta[j] += joint[i].theta[j];
            agg.delta[j] += joint[i].delta[j];
            agg.u[j] += joint[i].u[j];
        }
    }
    return agg;
}

InitialJoint initial_joint_strategy(std::span<const VehicleParams> cohort,
                                    const GameContext& ctx) {
    InitialJoint out;
    out.strategies.reserve(cohort.size());
    out.feasible.assign(cohort.size(), true);
    const int n = ctx.horizon.length;
    std::vector<Strategy> built;
    for (size_t i = 0; i < cohort.size(); ++i) {
        const auto& par = cohort[i];
        OthersAggregates agg = aggregates_excluding(built, built.size(), n);
        {
            std::vector<uint8_t> no_charge(n, 0);
            SearchEnv probe(ctx, par, agg);
            if (optimal_energy(no_charge, probe.margin, probe.residual_cap,
                               ctx.station, par.b, par.x0, par.x_ref, 0)) {
                built.push_back(make_no_stop(ctx.horizon, par.x0));
                continue;
            }
        }
        // Must stop: earliest merge-back with any feasible charge window,
        // honoring the members already placed.
        SearchEnv env(ctx, par, agg);
        const int fifo_off =
            static_cast<int>(std::max<long>(0, ctx.fifo_floor - ctx.horizon.k));
        bool placed = false;
        for (const PulseCandidate& pulse : enumerate_pulses(ctx.horizon)) {
            if (pulse.entry == 0 || placed) continue;
            if (ctx.horizon.entry_half_width == 0) break;  // stopping infeasible
            for (int a = fifo_off;
                 a <= pulse.entry - 1 - ctx.station.min_charge_intervals && !placed;
                 ++a) {
                if (!env.plugs_free(a, pulse.entry - 1)) continue;
                std::vector<uint8_t> theta(n, 0), delta(n, 0);
                for (int j = pulse.first; j <= pulse.last; ++j) theta[j] = 1;
                for (int j = a; j < pulse.entry; ++j) delta[j] = 1;
                auto u = optimal_energy(delta, env.margin, env.residual_cap,
                                        ctx.station, par.b, par.x0, par.x_ref,
                                        pulse.entry);
                if (!u) continue;
                built.push_back(assemble(ctx, par, theta, delta, std::move(*u)));
                placed = true;
            }
        }
        if (!placed) {
            out.feasible[i] = false;
            built.push_back(make_no_stop(ctx.horizon, par.x0));  // placeholder
        }
    }
    out.strategies = std::move(built);
    return out;
}

SequentialResult run_sequential(std::span<const VehicleParams> cohort,
                                const GameContext& ctx, std::vector<Strategy> initial,
                                Schedule schedule, uint64_t seed, long max_updates) {
    if (!context_valid(ctx))
        throw std::invalid_argument("run_sequential: malformed game context");
    const int n_agents = static_cast<int>(cohort.size());
    const int n = ctx.horizon.length;
    SequentialResult out;
    out.joint = std::move(initial);
    if (n_agents == 0) {
        out.trace.converged = true;
        return out;
    }
    if (max_updates < 0)
        max_updates = 10L * n_agents * n_agents * ctx.horizon.length;

    std::vector<VehicleParams> params(cohort.begin(), cohort.end());
    out.trace.initial_potential = potential(out.joint, params, ctx);
    double pot = out.trace.initial_potential;

    std::mt19937_64 rng(seed);
    std::vector<int> queue;  // FifoReplay request queue
    std::vector<bool> queued(n_agents, false);
    for (int i = 0; i < n_agents; ++i) {
        queue.push_back(i);
        queued[i] = true;
    }

    long tau = 0;
    int since_accept = 0;
    int rr_next = 0;
    bool converged = false;

    auto pick_agent = [&]() -> int {
        switch (schedule) {
            case Schedule::RoundRobin:
                return rr_next++ % n_agents;
            case Schedule::SeededRandom:
                return static_cast<int>(rng() % n_agents);
            case Schedule::FifoReplay: {
                if (queue.empty()) return -1;
                int i = queue.front();
                queue.erase(queue.begin());
                queued[i] = false;
                return i;
            }
        }
        return 0;
    };

    auto certified = [&]() {
        for (int i = 0; i < n_agents; ++i) {
            OthersAggregates agg = aggregates_excluding(out.joint, i, n);
            double cur = cost_total(out.joint[i], agg, ctx, params[i]);
            BestResponseResult br = best_response(params[i], agg, ctx, &out.joint[i]);
            if (br.feasible && cur - br.cost >= ctx.epsilon) return false;
        }
        return true;
    };

    while (tau < max_updates) {
        int i = pick_agent();
        if (i < 0) {  // request queue drained
            if (certified()) {
                converged = true;
                break;
            }
            for (int j = 0; j < n_agents; ++j)
                if (!queued[j]) {
                    queue.push_back(j);
                    queued[j] = true;
                }
            continue;
        }
        OthersAggregates agg = aggregates_excluding(out.joint, i, n);
        double old_cost = cost_total(out.joint[i], agg, ctx, params[i]);
        BestResponseResult br = best_response(params[i], agg, ctx, &out.joint[i]);
        bool accept = br.feasible && old_cost - br.cost >= ctx.epsilon;
        TraceEntry entry{tau, i, old_cost, br.feasible ? br.cost : old_cost, accept, pot};
        if (accept) {
            out.joint[i] = br.strategy;
            ++out.trace.accepted_count;
            since_accept = 0;
            pot = potential(out.joint, params, ctx);
            entry.potential_after = pot;
            if (schedule == Schedule::FifoReplay) {
                for (int j = 0; j < n_agents; ++j)
                    if (j != i && !queued[j]) {
                        queue.push_back(j);
                        queued[j] = true;
                    }
            }
        } else {
            ++since_accept;
        }
        out.trace.entries.push_back(entry);
        ++tau;
        if (schedule != Schedule::FifoReplay && since_accept >= n_agents) {
            if (certified()) {
                converged = true;
                break;
            }
            since_accept = 0;
        }
    }

    out.trace.converged = converged;
    out.trace.final_potential = potential(out.joint, params, ctx);

    // With one shared preference weight the potential is exact, so the number
    // of accepted updates is bounded by the total potential drop.
    bool uniform_alpha = true;
    for (int i = 1; i < n_agents; ++i)
        if (std::abs(params[i].alpha - params[0].alpha) > 1e-12) uniform_alpha = false;
    if (converged && uniform_alpha && out.trace.accepted_count > 0) {
        double bound = (out.trace.initial_potential - out.trace.final_potential) /
                       ctx.epsilon;
        if (out.trace.accepted_count > bound * (1.0 + 1e-9) + 1e-6)
            throw std::logic_error("run_sequential: potential accounting broken");
    }
    return out;
}

MineCertificate certify_mine(std::span<const Strategy> joint,
                             std::span<const VehicleParams> cohort,
                             const GameContext& ctx, double eps) {
    MineCertificate cert;
    cert.is_equilibrium = true;
    for (size_t i = 0; i < joint.size(); ++i) {
        OthersAggregates agg =
            aggregates_excluding(joint, i, ctx.horizon.length);
        double cur = cost_total(joint[i], agg, ctx, cohort[i]);
        BestResponseResult br = brute_force_oracle(cohort[i], agg, ctx);
        if (!br.feasible) continue;
        double improvement = cur - br.cost;
        if (improvement > cert.worst_improvement) {
            cert.worst_improvement = improvement;
            cert.worst_agent = static_cast<int>(i);
        }
        if (improvement >= eps) cert.is_equilibrium = false;
    }
    return cert;
}

}  // namespace hwsim
