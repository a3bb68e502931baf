#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hwsim/scenario.hpp"
#include "hwsim/sim_loop.hpp"

using namespace hwsim;
namespace fs = std::filesystem;

namespace {

const char* kMinimalScenario = R"({
  "name": "minimal",
  "step_length_s": 30,
  "cells": [
    {"length_km": 1.0, "free_flow_speed_kmh": 100, "congestion_wave_speed_kmh": 25,
     "max_capacity_vehh": 2000, "max_jam_density_vehkm": 150},
    {"length_km": 1.0, "free_flow_speed_kmh": 100, "congestion_wave_speed_kmh": 25,
     "max_capacity_vehh": 2000, "max_jam_density_vehkm": 150}
  ],
  "inflow_vehh": {"default": 1000},
  "base_demand": {"default": 10.0},
  "pev_fraction": 0.2,
  "game": {"l": 1, "horizon_intervals": 6, "entry_half_width": 1,
           "gamma_h_per_veh": 0.002, "upsilon_h": 0.01},
  "station": {"plug_count": 2, "max_energy_per_interval": 5.0,
              "min_charge_intervals": 1, "u_min": 0.25, "u_max": 2.0},
  "pricing": {"c1": 0.05, "c3": 1.0},
  "vehicles": {"soc_init": [0.6, 0.9], "soc_ref": [0.3, 0.5],
               "alpha": [0.4, 0.8], "p_bar": [0.5, 0.7], "b": [0.018, 0.022]},
  "seed": 5
})";

std::string write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream(p) << content;
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

}  // namespace

TEST_CASE("a minimal two-cell scenario loads") {
    std::string path = write_temp("hwsim_minimal.json", kMinimalScenario);
    Scenario sc = load_scenario(path);
    CHECK(sc.cells.size() == 2);
    CHECK(sc.step_h == doctest::Approx(30.0 / 3600));
    CHECK(sc.pev_fraction == doctest::Approx(0.2));
    CHECK(sc.station.plug_count == 2);
}

TEST_CASE("shipped scenarios load") {
    CHECK_NOTHROW(load_scenario("scenarios/freeflow_3cell.json"));
    CHECK_NOTHROW(load_scenario("scenarios/congestion_wave.json"));
}

TEST_CASE("validation names the offending field") {
    std::string bad(kMinimalScenario);
    auto pos = bad.find("\"free_flow_speed_kmh\": 100");
    bad.replace(pos, 26, "\"free_flow_speed_kmh\": -10");
    std::string path = write_temp("hwsim_bad_speed.json", bad);
    try {
        load_scenario(path);
        FAIL("expected a validation error");
    } catch (const ScenarioError& e) {
        bool found = false;
        for (const auto& v : e.violations())
            if (v.find("cells[0].free_flow_speed_kmh") != std::string::npos)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("an oversized step is rejected with the computed bound") {
    std::string bad(kMinimalScenario);
    auto pos = bad.find("\"step_length_s\": 30");
    bad.replace(pos, 19, "\"step_length_s\": 60");
    std::string path = write_temp("hwsim_bad_step.json", bad);
    try {
        load_scenario(path);
        FAIL("expected a validation error");
    } catch (const ScenarioError& e) {
        bool found = false;
        for (const auto& v : e.violations())
            if (v.find("stability bound") != std::string::npos &&
                v.find("36") != std::string::npos)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("unreadable files and broken JSON raise parse errors") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/path.json"), ScenarioParseError);
    std::string path = write_temp("hwsim_broken.json", "{ not json");
    CHECK_THROWS_AS(load_scenario(path), ScenarioParseError);
    std::string missing = write_temp("hwsim_missing.json", "{\"name\": \"x\"}");
    CHECK_THROWS_AS(load_scenario(missing), ScenarioParseError);
}

TEST_CASE("output files carry schema rows and are byte-stable") {
    Scenario sc = load_scenario("scenarios/freeflow_3cell.json");
    sc.pricing.beta0 = {0.25};  // produce station traffic
    sc.vehicles.alpha = {0.85, 0.95};

    auto run_to = [&](const std::string& dir) {
        Simulation sim(sc, sc.seed, true);
        sim.run(120);
        write_outputs(sim, dir, "scenarios/freeflow_3cell.json", sc.seed, 120,
                      RunMode::ClosedLoop);
    };
    std::string dir_a = (fs::temp_directory_path() / "hwsim_out_a").string();
    std::string dir_b = (fs::temp_directory_path() / "hwsim_out_b").string();
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    run_to(dir_a);
    run_to(dir_b);

    CHECK(first_line(slurp(dir_a + "/trajectory.csv")) ==
          "k,cell,rho_vehkm,inflow_vehh,outflow_vehh,interface_vehh,speed_kmh");
    CHECK(first_line(slurp(dir_a + "/station.csv")) ==
          "k,r2s_vehh,s2r_vehh,queue_len,plugs_busy,price");
    CHECK(first_line(slurp(dir_a + "/prices.csv")) ==
          "interval,realized_price,p_hat");
    CHECK(first_line(slurp(dir_a + "/trace.csv")) ==
          "interval,iteration,agent,old_cost,new_cost,delta_j,delta_p,accepted,"
          "potential");
    CHECK(first_line(slurp(dir_a + "/ledger.csv")) ==
          "vehicle_id,decision_interval,stops,queue_entry,charge_start,charge_end,"
          "exit_interval,energy_per_interval,total_energy,estimated_payment,"
          "realized_payment,payment_gap");

    for (const char* f : {"trajectory.csv", "station.csv", "prices.csv", "trace.csv",
                          "ledger.csv", "summary.json", "manifest.json"}) {
        CAPTURE(f);
        CHECK(slurp(dir_a + "/" + f) == slurp(dir_b + "/" + f));
        CHECK(!slurp(dir_a + "/" + f).empty());
    }
}
