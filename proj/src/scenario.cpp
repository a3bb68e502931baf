#include "hwsim/scenario.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace hwsim {

using nlohmann::json;

namespace {

SeriesSpec parse_series(const json& j) {
    SeriesSpec s;
    if (j.is_number()) {
        s.fallback = j.get<double>();
        return s;
    }
    if (j.contains("pattern")) s.pattern = j["pattern"].get<std::vector<double>>();
    if (j.contains("default")) s.fallback = j["default"].get<double>();
    return s;
}

Range parse_range(const json& j) {
    if (j.is_number()) {
        double v = j.get<double>();
        return {v, v};
    }
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::vector<double> parse_betas(const json& j) {
    if (j.is_number()) return {j.get<double>()};
    return j.get<std::vector<double>>();
}

void check_range(std::vector<std::string>& errs, const Range& r, double lo, double hi,
                 const std::string& field) {
    if (r.lo > r.hi) errs.push_back(field + ": empty range");
    if (r.lo < lo || r.hi > hi)
        errs.push_back(field + ": outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
}

}  // namespace

std::vector<std::string> validate_scenario(const Scenario& sc) {
    std::vector<std::string> errs;
    if (sc.step_h <= 0.0) errs.push_back("step_length_s: must be positive");
    if (sc.cells.size() < 2) errs.push_back("cells: need at least 2");
    for (size_t l = 0; l < sc.cells.size(); ++l) {
        const auto& c = sc.cells[l];
        std::string p = "cells[" + std::to_string(l) + "].";
        if (c.length_km <= 0) errs.push_back(p + "length_km: must be positive");
        if (c.free_flow_speed_kmh <= 0)
            errs.push_back(p + "free_flow_speed_kmh: must be positive");
        if (c.congestion_wave_speed_kmh <= 0)
            errs.push_back(p + "congestion_wave_speed_kmh: must be positive");
        if (c.max_capacity_vehh <= 0)
            errs.push_back(p + "max_capacity_vehh: must be positive");
        if (c.max_jam_density_vehkm <= 0)
            errs.push_back(p + "max_jam_density_vehkm: must be positive");
        if (c.free_flow_speed_kmh * c.max_jam_density_vehkm < c.max_capacity_vehh)
            errs.push_back(p + "max_capacity_vehh: demand cannot saturate capacity "
                               "(v_bar * rho_max < q_max)");
    }
    if (!sc.cells.empty() && sc.step_h > 0.0) {
        double bound = max_stable_step_h(sc.cells);
        if (sc.step_h > bound + 1e-12)
            errs.push_back("step_length_s: exceeds the stability bound " +
                           std::to_string(bound * 3600.0) + " s");
    }
    if (!sc.initial_density_vehkm.empty() &&
        sc.initial_density_vehkm.size() != sc.cells.size())
        errs.push_back("initial_density_vehkm: size must match cells");
    for (size_t l = 0; l < sc.initial_density_vehkm.size(); ++l) {
        if (sc.initial_density_vehkm[l] < 0.0 ||
            (l < sc.cells.size() &&
             sc.initial_density_vehkm[l] > sc.cells[l].max_jam_density_vehkm))
            errs.push_back("initial_density_vehkm[" + std::to_string(l) +
                           "]: outside [0, rho_max]");
    }
    if (sc.pev_fraction < 0.0 || sc.pev_fraction > 1.0)
        errs.push_back("pev_fraction: outside [0, 1]");
    if (sc.subsample < 1) errs.push_back("game.l: must be >= 1");
    if (sc.entry_half_width < 0) errs.push_back("game.entry_half_width: must be >= 0");
    if (sc.horizon_length < 2 * sc.entry_half_width + 2)
        errs.push_back("game.horizon_intervals: must be >= 2W+2");
    if (sc.epsilon <= 0.0) errs.push_back("game.epsilon: must be positive");
    if (sc.gamma <= 0.0) errs.push_back("game.gamma_h_per_veh: must be positive");
    if (sc.upsilon <= 0.0) errs.push_back("game.upsilon_h: must be positive");
    if (sc.max_sweep_factor < 1) errs.push_back("game.max_sweep_factor: must be >= 1");
    if (!station_config_valid(sc.station))
        errs.push_back("station: invalid (plugs >= 1, energies positive, "
                       "u_min <= u_max, h_bar >= 1)");
    if (sc.pricing.c1 <= 0 || sc.pricing.c2 < 0 || sc.pricing.c3 <= 0)
        errs.push_back("pricing: c1, c3 must be positive and c2 nonnegative");
    check_range(errs, sc.vehicles.soc_init, 0.0, 1.0, "vehicles.soc_init");
    check_range(errs, sc.vehicles.soc_ref, 1e-9, 1.0, "vehicles.soc_ref");
    check_range(errs, sc.vehicles.alpha, 1e-9, 1.0 - 1e-9, "vehicles.alpha");
    if (sc.vehicles.p_bar.lo <= 0 || sc.vehicles.p_bar.lo > sc.vehicles.p_bar.hi)
        errs.push_back("vehicles.p_bar: must be positive and ordered");
    if (sc.vehicles.b.lo <= 0 || sc.vehicles.b.lo > sc.vehicles.b.hi)
        errs.push_back("vehicles.b: must be positive and ordered");
    return errs;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioParseError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ScenarioParseError("scenario JSON parse failed: " + std::string(e.what()));
    }

    Scenario sc;
    try {
        sc.name = j.value("name", std::string("unnamed"));
        sc.step_h = j.at("step_length_s").get<double>() / 3600.0;
        for (const auto& cj : j.at("cells")) {
            CellParams c;
            c.length_km = cj.at("length_km").get<double>();
            c.free_flow_speed_kmh = cj.at("free_flow_speed_kmh").get<double>();
            c.congestion_wave_speed_kmh = cj.at("congestion_wave_speed_kmh").get<double>();
            c.max_capacity_vehh = cj.at("max_capacity_vehh").get<double>();
            c.max_jam_density_vehkm = cj.at("max_jam_density_vehkm").get<double>();
            sc.cells.push_back(c);
        }
        if (j.contains("initial_density_vehkm"))
            sc.initial_density_vehkm =
                j["initial_density_vehkm"].get<std::vector<double>>();
        sc.inflow = parse_series(j.at("inflow_vehh"));
        sc.base_demand = parse_series(j.at("base_demand"));
        sc.pev_fraction = j.value("pev_fraction", 0.0);

        const json& g = j.at("game");
        sc.subsample = g.value("l", 1);
        sc.horizon_length = g.at("horizon_intervals").get<int>();
        sc.entry_half_width = g.at("entry_half_width").get<int>();
        sc.epsilon = g.value("epsilon", 1e-4);
        sc.gamma = g.at("gamma_h_per_veh").get<double>();
        sc.upsilon = g.at("upsilon_h").get<double>();
        sc.max_sweep_factor = g.value("max_sweep_factor", 10);
        std::string sched = g.value("schedule", std::string("round_robin"));
        if (sched == "round_robin") sc.schedule = Schedule::RoundRobin;
        else if (sched == "fifo_replay") sc.schedule = Schedule::FifoReplay;
        else if (sched == "seeded_random") sc.schedule = Schedule::SeededRandom;
        else throw ScenarioParseError("unknown schedule: " + sched);

        const json& st = j.at("station");
        sc.station.plug_count = st.at("plug_count").get<int>();
        sc.station.max_energy_per_interval = st.at("max_energy_per_interval").get<double>();
        sc.station.min_charge_intervals = st.at("min_charge_intervals").get<int>();
        sc.station.u_min = st.at("u_min").get<double>();
        sc.station.u_max_per_vehicle = st.at("u_max").get<double>();

        const json& pr = j.at("pricing");
        sc.pricing.c1 = pr.at("c1").get<double>();
        sc.pricing.c2 = pr.value("c2", 0.0);
        sc.pricing.c3 = pr.at("c3").get<double>();
        sc.pricing.beta0 = parse_betas(pr.value("beta0", json(0.0)));
        sc.pricing.beta1 = parse_betas(pr.value("beta1", json(0.0)));
        if (pr.contains("price_floor") && !pr["price_floor"].is_null())
            sc.pricing.price_floor = pr["price_floor"].get<double>();
        sc.fit_betas_online = pr.value("fit_betas", false);
        sc.fit_window = pr.value("fit_window", 32);

        const json& v = j.at("vehicles");
        sc.vehicles.soc_init = parse_range(v.at("soc_init"));
        sc.vehicles.soc_ref = parse_range(v.at("soc_ref"));
        sc.vehicles.alpha = parse_range(v.at("alpha"));
        sc.vehicles.p_bar = parse_range(v.at("p_bar"));
        sc.vehicles.b = parse_range(v.at("b"));

        sc.seed = j.value("seed", 0ull);
    } catch (const json::exception& e) {
        throw ScenarioParseError("scenario field error: " + std::string(e.what()));
    }

    auto errs = validate_scenario(sc);
    if (!errs.empty()) throw ScenarioError("scenario validation failed", errs);
    return sc;
}

}  // namespace hwsim
