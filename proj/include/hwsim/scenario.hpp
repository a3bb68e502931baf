#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hwsim/best_response.hpp"
#include "hwsim/ctm.hpp"
#include "hwsim/pricing.hpp"
#include "hwsim/station.hpp"

namespace hwsim {

// Time series with a fallback once the explicit pattern runs out.
struct SeriesSpec {
    std::vector<double> pattern;
    double fallback = 0.0;

    double at(long idx) const {
        if (idx >= 0 && idx < static_cast<long>(pattern.size()))
            return pattern[static_cast<size_t>(idx)];
        return fallback;
    }
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct VehicleRanges {
    Range soc_init{0.5, 0.9};
    Range soc_ref{0.3, 0.5};
    Range alpha{0.4, 0.8};   // one draw per cohort
    Range p_bar{0.5, 0.7};
    Range b{0.015, 0.025};
};

struct Scenario {
    std::string name;
    double step_h = 0.0;
    std::vector<CellParams> cells;
    std::vector<double> initial_density_vehkm;  // optional, defaults to zero
    SeriesSpec inflow;        // veh/h per CTM step
    SeriesSpec base_demand;   // per CTM step, sampled at game boundaries
    double pev_fraction = 0.0;

    int subsample = 1;        // l
    int horizon_length = 8;   // T_h
    int entry_half_width = 1; // W
    double epsilon = 1e-4;
    double gamma = 0.002;     // hours per overlapping vehicle
    double upsilon = 0.03;    // hours per interval at the station
    Schedule schedule = Schedule::RoundRobin;
    int max_sweep_factor = 10;

    StationConfig station;
    PriceCoefficients pricing;
    bool fit_betas_online = false;
    int fit_window = 32;

    VehicleRanges vehicles;
    uint64_t seed = 0;
};

// Configuration failed validation; `violations` lists every offending field.
class ScenarioError : public std::runtime_error {
  public:
    ScenarioError(std::string what, std::vector<std::string> violations)
        : std::runtime_error(std::move(what)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const { return violations_; }

  private:
    std::vector<std::string> violations_;
};

// File could not be read or is not valid JSON.
class ScenarioParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Collects every violated invariant, empty when the scenario is sound.
std::vector<std::string> validate_scenario(const Scenario& sc);

// Loads and validates; throws ScenarioParseError or ScenarioError.
Scenario load_scenario(const std::string& path);

}  // namespace hwsim
