#include "hwsim/sim_loop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hwsim/milp.hpp"

#include "json.hpp"

namespace hwsim {

namespace {

double uniform_draw(std::mt19937_64& rng, const Range& r) {
    std::uniform_real_distribution<double> dist(r.lo, r.hi);
    return dist(rng);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Per-game RNG stream: pairs runs with the same seed game by game.
std::mt19937_64 game_rng(uint64_t seed, long interval) {
    return std::mt19937_64(seed ^ (0x9E3779B97F4A7C15ull * (interval + 1)));
}

}  // namespace

Simulation::Simulation(Scenario scenario, uint64_t seed, bool games_enabled)
    : scenario_(std::move(scenario)), seed_(seed), games_enabled_(games_enabled) {
    state_.step_length_h = scenario_.step_h;
    state_.cells.resize(scenario_.cells.size());
    for (size_t l = 0; l < scenario_.cells.size(); ++l)
        state_.cells[l].density_vehkm = l < scenario_.initial_density_vehkm.size()
                                            ? scenario_.initial_density_vehkm[l]
                                            : 0.0;
}

double Simulation::vehicle_balance() const {
    double initial = 0.0;
    for (size_t l = 0; l < scenario_.cells.size(); ++l) {
        double rho0 = l < scenario_.initial_density_vehkm.size()
                          ? scenario_.initial_density_vehkm[l]
                          : 0.0;
        initial += rho0 * scenario_.cells[l].length_km;
    }
    return vehicles_on_road(state_, scenario_.cells) + state_.upstream_queue_veh +
           station_count_veh_ - net_in_veh_ - initial;
}

void Simulation::play_game(long interval) {
    const auto& cells = scenario_.cells;
    const int th = scenario_.horizon_length;
    const int l = scenario_.subsample;
    const long m = ctm_step_;

    Horizon horizon{interval, th, scenario_.entry_half_width, l, scenario_.step_h};

    CommittedAggregates committed = ledger_.fold_commitments(interval, th);
    std::vector<double> s2r_pred(th);
    for (int j = 0; j < th; ++j)
        s2r_pred[j] = ledger_.extract_s2r(interval + j, scenario_.entry_half_width, l,
                                          scenario_.step_h);

    std::vector<double> roll_in(static_cast<size_t>(th) * l);
    std::vector<double> roll_s2r(roll_in.size());
    for (size_t i = 0; i < roll_in.size(); ++i) {
        roll_in[i] = scenario_.inflow.at(m + static_cast<long>(i));
        roll_s2r[i] = s2r_pred[i / l];
    }
    auto rollout = rollout_free(state_, cells, th * l, roll_in, roll_s2r);
    auto v_hat = interval_speeds(rollout, cells, horizon);
    CongestionDelays delays = predicted_delays(v_hat, cells);

    // Spot price for this interval, from the no-stop view of the road.
    std::vector<double> delta_now;
    for (size_t c = 1; c < cells.size(); ++c)
        delta_now.push_back(realized_delay(cells[c], v_hat[0][c]));
    double base_d = scenario_.base_demand.at(m);
    double spot = spot_price(scenario_.pricing, base_d, committed.u_old.empty()
                                                            ? 0.0
                                                            : committed.u_old[0],
                             delta_now);
    last_price_ = spot;

    // Close the loop on earlier forecasts, then refit the discount schedule.
    for (auto& rec : history_) {
        for (size_t j = 0; j < rec.realized_price.size(); ++j) {
            if (rec.forecast_interval + static_cast<long>(j) == interval &&
                std::isnan(rec.realized_price[j]))
                rec.realized_price[j] = spot;
        }
    }
    if (scenario_.fit_betas_online &&
        static_cast<int>(history_.size()) >= 2) {
        BetaFit f = fit_betas(history_, th);
        scenario_.pricing.beta0 = f.beta0;
        scenario_.pricing.beta1 = f.beta1;
    }

    std::vector<double> d_series(th);
    for (int j = 0; j < th; ++j)
        d_series[j] = scenario_.base_demand.at(m + static_cast<long>(j) * l);
    std::vector<double> p_hat = estimated_price(scenario_.pricing, d_series, delays);

    PriceHistoryRecord rec;
    rec.forecast_interval = interval;
    rec.sum_delta_hat.resize(th);
    rec.c1_base_demand.resize(th);
    rec.realized_price.assign(th, std::nan(""));
    rec.realized_price[0] = spot;  // the offset-0 forecast is settled right away
    for (int j = 0; j < th; ++j) {
        rec.sum_delta_hat[j] = delays.sum_delta_hat(j);
        rec.c1_base_demand[j] = scenario_.pricing.c1 * d_series[j];
    }
    history_.push_back(std::move(rec));
    if (static_cast<int>(history_.size()) > scenario_.fit_window)
        history_.erase(history_.begin());

    price_rows_.push_back({interval, spot, p_hat});

    double d1 = demand(cells[0], state_.cells[0]);
    double s2 = supply(cells[1], state_.cells[1]);
    double s2r_now = s2r_pred[0];
    int n = cohort_size(d1, s2, s2r_now, scenario_.pev_fraction,
                        l * scenario_.step_h);

    std::vector<Strategy> cohort_strategies;
    if (n > 0) {
        GameContext ctx;
        ctx.horizon = horizon;
        ctx.n = n;
        ctx.xi = travel_delay_xi(v_hat, cells, horizon);
        ctx.p_hat = p_hat;
        ctx.chi = chi_series(horizon);
        ctx.committed = committed;
        ctx.gamma = scenario_.gamma;
        ctx.upsilon = scenario_.upsilon;
        ctx.epsilon = scenario_.epsilon;
        ctx.station = scenario_.station;
        ctx.fifo_floor = ledger_.fifo_charge_floor(interval);

        auto rng = game_rng(seed_, interval);
        double alpha = uniform_draw(rng, scenario_.vehicles.alpha);
        std::vector<VehicleParams> cohort(n);
        for (auto& par : cohort) {
            par.alpha = alpha;
            par.x0 = uniform_draw(rng, scenario_.vehicles.soc_init);
            par.x_ref = uniform_draw(rng, scenario_.vehicles.soc_ref);
            par.p_bar = uniform_draw(rng, scenario_.vehicles.p_bar);
            par.b = uniform_draw(rng, scenario_.vehicles.b);
        }

        last_context_ = ctx;
        last_cohort_ = cohort;
        InitialJoint init = initial_joint_strategy(cohort, ctx);
        std::vector<VehicleParams> playable;
        std::vector<Strategy> initial;
        for (size_t i = 0; i < cohort.size(); ++i) {
            if (!init.feasible[i]) {
                ++summary_.dropped_infeasible;
                continue;
            }
            playable.push_back(cohort[i]);
            initial.push_back(init.strategies[i]);
        }

        if (!playable.empty()) {
            long cap = static_cast<long>(scenario_.max_sweep_factor) *
                       static_cast<long>(playable.size()) *
                       static_cast<long>(playable.size()) * th;
            SequentialResult res =
                run_sequential(playable, ctx, std::move(initial), scenario_.schedule,
                               seed_ ^ static_cast<uint64_t>(interval), cap);
            if (!res.trace.converged)
                throw NonConvergenceError("game at interval " +
                                          std::to_string(interval) +
                                          " hit the update cap");
            double prev_pot = res.trace.initial_potential;
            for (const auto& e : res.trace.entries) {
                game_log_.push_back({interval, e.iteration, e.agent, e.old_cost,
                                     e.new_cost, e.old_cost - e.new_cost,
                                     prev_pot - e.potential_after, e.accepted,
                                     e.potential_after});
                prev_pot = e.potential_after;
            }
            cohort_strategies = std::move(res.joint);
            for (size_t i = 0; i < cohort_strategies.size(); ++i) {
                CommittedVehicle cv;
                cv.vehicle_id = next_vehicle_id_++;
                cv.decision_interval = interval;
                cv.params = playable[i];
                cv.strategy = cohort_strategies[i];
                for (int j = 0; j < th; ++j)
                    cv.estimated_payment += p_hat[j] * cv.strategy.u[j];
                ledger_.commit(std::move(cv));
            }
            summary_.cohorts_played += 1;
            summary_.vehicles_played += static_cast<int>(playable.size());
        }
    }

    // The spot price applies to all energy drawn during this interval.
    for (auto& cvr : ledger_.records()) {
        long off = interval - cvr.strategy.k;
        if (off >= 0 && off < static_cast<long>(cvr.strategy.u.size()))
            cvr.realized_payment += spot * cvr.strategy.u[static_cast<size_t>(off)];
    }

    if (!cohort_strategies.empty()) {
        // Vehicles dropped as infeasible keep driving, so the flow is taken
        // over the cohort that actually played.
        double interval_h = l * scenario_.step_h;
        double r2s = extract_r2s(cohort_strategies,
                                 static_cast<int>(cohort_strategies.size()),
                                 interval, interval_h);
        double stoppers = r2s * interval_h;
        summary_.stoppers += static_cast<int>(std::llround(stoppers));
        divert_queue_veh_ += stoppers;
    }
}

void Simulation::step_once() {
    const auto& cells = scenario_.cells;
    const long m = ctm_step_;
    const int l = scenario_.subsample;
    const long g = m / l;

    if (games_enabled_ && m % l == 0) play_game(g);
    if (m % l == 0)
        divert_rate_vehh_ = divert_queue_veh_ / (l * scenario_.step_h);

    double s2r_now =
        ledger_.extract_s2r(g, scenario_.entry_half_width, l, scenario_.step_h);
    double d1 = demand(cells[0], state_.cells[0]);
    double r2s = std::min({divert_rate_vehh_,
                           divert_queue_veh_ / scenario_.step_h, d1});
    double requested_in = scenario_.inflow.at(m);

    StepDiagnostics diag;
    HighwayState flowed = with_flows(state_, cells, r2s, s2r_now, requested_in, &diag);
    divert_queue_veh_ -= flowed.r2s_vehh * scenario_.step_h;
    station_count_veh_ +=
        scenario_.step_h * (flowed.r2s_vehh - flowed.s2r_vehh);
    net_in_veh_ +=
        scenario_.step_h * (requested_in - flowed.output_flow_vehh);

    std::vector<double> v = speeds(flowed, cells);
    for (size_t c = 0; c < cells.size(); ++c) {
        trajectory_.push_back({m, static_cast<int>(c) + 1,
                               flowed.cells[c].density_vehkm,
                               flowed.cells[c].inflow_vehh,
                               flowed.cells[c].outflow_vehh,
                               flowed.cells[c].interface_flow_vehh, v[c]});
        if (c >= 1) summary_.total_delay_h += realized_delay(cells[c], v[c]);
    }
    int busy = ledger_.plugs_busy(g);
    station_rows_.push_back({m, flowed.r2s_vehh, flowed.s2r_vehh,
                             ledger_.occupants(g) - busy, busy,
                             games_enabled_ ? last_price_ : 0.0});

    summary_.any_supply_deficit |= diag.supply_deficit;

    state_ = advance_state(flowed, cells, &diag);
    summary_.any_density_violation |= diag.density_violation;
    ++ctm_step_;
}

void Simulation::run(long steps) {
    for (long s = 0; s < steps; ++s) step_once();
    summary_.steps = ctm_step_;
}

void Simulation::run_single_game() {
    play_game(0);
    summary_.steps = 0;
    if (!last_cohort_.empty()) {
        milp::AgentModel model = milp::compile_agent(
            last_cohort_[0], last_context_,
            OthersAggregates::zeros(last_context_.horizon.length));
        std::ostringstream out;
        milp::dump_lp(model.set, out);
        single_game_lp_ = out.str();
    }
}

RunSummary Simulation::summary() const {
    RunSummary out = summary_;
    out.steps = ctm_step_;
    for (const auto& rec : ledger_.records()) {
        out.total_energy_sold += rec.strategy.total_energy();
    }
    int stop_count = 0;
    double stay_total = 0.0;
    for (const auto& rec : ledger_.records()) {
        if (!rec.strategy.stops()) continue;
        PulseBounds p = pulse_bounds(rec.strategy.theta);
        int w = (p.width() - 1) / 2;
        stay_total += entry_offset(p, w);
        ++stop_count;
    }
    out.mean_stop_intervals = stop_count ? stay_total / stop_count : 0.0;

    // Counterfactual with the station decoupled, same arrivals.
    HighwayState bare;
    bare.step_length_h = scenario_.step_h;
    bare.cells.resize(scenario_.cells.size());
    for (size_t l = 0; l < scenario_.cells.size(); ++l)
        bare.cells[l].density_vehkm = l < scenario_.initial_density_vehkm.size()
                                          ? scenario_.initial_density_vehkm[l]
                                          : 0.0;
    for (long m = 0; m < ctm_step_; ++m) {
        HighwayState flowed =
            with_flows(bare, scenario_.cells, 0.0, 0.0, scenario_.inflow.at(m));
        std::vector<double> v = speeds(flowed, scenario_.cells);
        for (size_t c = 1; c < scenario_.cells.size(); ++c)
            out.baseline_delay_h += realized_delay(scenario_.cells[c], v[c]);
        bare = advance_state(flowed, scenario_.cells);
    }
    return out;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

void write_outputs(const Simulation& sim, const std::string& dir,
                   const std::string& scenario_path, uint64_t seed, long steps,
                   RunMode mode) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::string traj = "k,cell,rho_vehkm,inflow_vehh,outflow_vehh,interface_vehh,speed_kmh\n";
    for (const auto& r : sim.trajectory())
        traj += std::to_string(r.k) + "," + std::to_string(r.cell) + "," + fmt(r.rho) +
                "," + fmt(r.inflow) + "," + fmt(r.outflow) + "," + fmt(r.phi) + "," +
                fmt(r.v) + "\n";
    write_file(dir + "/trajectory.csv", traj);

    std::string station = "k,r2s_vehh,s2r_vehh,queue_len,plugs_busy,price\n";
    for (const auto& r : sim.station_rows())
        station += std::to_string(r.k) + "," + fmt(r.r2s) + "," + fmt(r.s2r) + "," +
                   std::to_string(r.queue_len) + "," + std::to_string(r.plugs_busy) +
                   "," + fmt(r.price) + "\n";
    write_file(dir + "/station.csv", station);

    std::string prices = "interval,realized_price,p_hat\n";
    for (const auto& r : sim.price_rows()) {
        prices += std::to_string(r.interval) + "," + fmt(r.realized) + ",";
        for (size_t j = 0; j < r.p_hat.size(); ++j)
            prices += (j ? ";" : "") + fmt(r.p_hat[j]);
        prices += "\n";
    }
    write_file(dir + "/prices.csv", prices);

    std::string trace =
        "interval,iteration,agent,old_cost,new_cost,delta_j,delta_p,accepted,"
        "potential\n";
    for (const auto& r : sim.game_log())
        trace += std::to_string(r.interval) + "," + std::to_string(r.iteration) + "," +
                 std::to_string(r.agent) + "," + fmt(r.old_cost) + "," +
                 fmt(r.new_cost) + "," + fmt(r.delta_j) + "," + fmt(r.delta_p) + "," +
                 (r.accepted ? "1" : "0") + "," + fmt(r.potential) + "\n";
    write_file(dir + "/trace.csv", trace);
    if (mode == RunMode::SingleGame && !sim.single_game_lp().empty())
        write_file(dir + "/agent0.lp", sim.single_game_lp());

    std::string ledger =
        "vehicle_id,decision_interval,stops,queue_entry,charge_start,charge_end,"
        "exit_interval,energy_per_interval,total_energy,estimated_payment,"
        "realized_payment,payment_gap\n";
    for (const auto& rec : sim.ledger().records()) {
        const Strategy& s = rec.strategy;
        PulseBounds p = pulse_bounds(s.theta);
        int w = p.valid() ? (s.stops() ? (p.width() - 1) / 2 : p.last) : 0;
        long exit_iv = s.k + (s.stops() ? entry_offset(p, w) : 0);
        long charge_start = -1, charge_end = -1;
        for (size_t j = 0; j < s.delta.size(); ++j) {
            if (s.delta[j] && charge_start < 0) charge_start = s.k + j;
            if (s.delta[j]) charge_end = s.k + j;
        }
        std::string energies;
        for (size_t j = 0; j < s.u.size(); ++j)
            energies += (j ? ";" : "") + fmt(s.u[j]);
        ledger += std::to_string(rec.vehicle_id) + "," +
                  std::to_string(rec.decision_interval) + "," +
                  (s.stops() ? "1" : "0") + "," +
                  std::to_string(s.stops() ? rec.decision_interval : -1) + "," +
                  std::to_string(charge_start) + "," + std::to_string(charge_end) +
                  "," + std::to_string(exit_iv) + "," + energies + "," +
                  fmt(s.total_energy()) + "," + fmt(rec.estimated_payment) + "," +
                  fmt(rec.realized_payment) + "," +
                  fmt(rec.realized_payment - rec.estimated_payment) + "\n";
    }
    write_file(dir + "/ledger.csv", ledger);

    RunSummary sum = sim.summary();
    nlohmann::json js;
    js["steps"] = sum.steps;
    js["total_delay_h"] = sum.total_delay_h;
    js["baseline_delay_h"] = sum.baseline_delay_h;
    js["total_energy_sold"] = sum.total_energy_sold;
    js["cohorts_played"] = sum.cohorts_played;
    js["vehicles_played"] = sum.vehicles_played;
    js["stoppers"] = sum.stoppers;
    js["dropped_infeasible"] = sum.dropped_infeasible;
    js["mean_stop_intervals"] = sum.mean_stop_intervals;
    js["any_supply_deficit"] = sum.any_supply_deficit;
    js["any_density_violation"] = sum.any_density_violation;
    write_file(dir + "/summary.json", js.dump(2) + "\n");

    const Scenario& sc = sim.scenario();
    nlohmann::json mf;
    mf["scenario_path"] = scenario_path;
    mf["scenario_name"] = sc.name;
    mf["seed"] = seed;
    mf["steps"] = steps;
    mf["mode"] = mode == RunMode::ClosedLoop ? "closed-loop"
                 : mode == RunMode::CtmOnly  ? "ctm-only"
                                             : "single-game";
    mf["epsilon"] = sc.epsilon;
    mf["schedule"] = sc.schedule == Schedule::RoundRobin   ? "round_robin"
                     : sc.schedule == Schedule::FifoReplay ? "fifo_replay"
                                                           : "seeded_random";
    mf["gamma_h_per_veh"] = sc.gamma;
    mf["upsilon_h"] = sc.upsilon;
    mf["horizon_intervals"] = sc.horizon_length;
    mf["entry_half_width"] = sc.entry_half_width;
    mf["subsample"] = sc.subsample;
    mf["pev_fraction"] = sc.pev_fraction;
    mf["pricing"] = {{"c1", sc.pricing.c1},
                     {"c2", sc.pricing.c2},
                     {"c3", sc.pricing.c3},
                     {"beta0", sc.pricing.beta0},
                     {"beta1", sc.pricing.beta1}};
    mf["station"] = {{"plug_count", sc.station.plug_count},
                     {"max_energy_per_interval", sc.station.max_energy_per_interval},
                     {"min_charge_intervals", sc.station.min_charge_intervals},
                     {"u_min", sc.station.u_min},
                     {"u_max", sc.station.u_max_per_vehicle}};
    write_file(dir + "/manifest.json", mf.dump(2) + "\n");
}

}  // namespace hwsim
