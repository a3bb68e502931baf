#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hwsim/best_response.hpp"
#include "hwsim/scenario.hpp"

namespace hwsim {

enum class RunMode { ClosedLoop, CtmOnly, SingleGame };

struct TrajectoryRow {
    long k = 0;
    int cell = 0;
    double rho = 0, inflow = 0, outflow = 0, phi = 0, v = 0;
};

struct StationRow {
    long k = 0;
    double r2s = 0, s2r = 0;
    int queue_len = 0, plugs_busy = 0;
    double price = 0;
};

struct PriceRow {
    long interval = 0;
    double realized = 0;
    std::vector<double> p_hat;
};

struct GameLogRow {
    long interval = 0;
    long iteration = 0;
    int agent = 0;
    double old_cost = 0, new_cost = 0;
    double delta_j = 0, delta_p = 0;
    bool accepted = false;
    double potential = 0;
};

struct RunSummary {
    long steps = 0;
    double total_delay_h = 0.0;     // realized congestion delay, cells 2..N
    double baseline_delay_h = 0.0;  // same inflows with the station decoupled
    double total_energy_sold = 0.0;
    int cohorts_played = 0;
    int vehicles_played = 0;
    int stoppers = 0;
    int dropped_infeasible = 0;
    double mean_stop_intervals = 0.0;
    bool any_supply_deficit = false;
    bool any_density_violation = false;
};

// Sequential scheme ran out of its update budget.
class NonConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// The four-step closed loop: sense, broadcast, play, actuate. One CTM step
// per call to step_once(); games run at every interval boundary (multiples
// of the subsampling factor) while enabled.
class Simulation {
  public:
    Simulation(Scenario scenario, uint64_t seed, bool games_enabled);

    void run(long steps);
    void run_single_game();

    const Scenario& scenario() const { return scenario_; }
    const HighwayState& state() const { return state_; }
    const StationLedger& ledger() const { return ledger_; }
    const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }
    const std::vector<StationRow>& station_rows() const { return station_rows_; }
    const std::vector<PriceRow>& price_rows() const { return price_rows_; }
    const std::vector<GameLogRow>& game_log() const { return game_log_; }
    const std::string& single_game_lp() const { return single_game_lp_; }
    RunSummary summary() const;

    // Conservation probe: mainline + station + upstream queue minus the net
    // boundary exchange and the initial load; zero along any run.
    double vehicle_balance() const;

  private:
    void step_once();
    void play_game(long interval);

    Scenario scenario_;
    uint64_t seed_ = 0;
    bool games_enabled_ = true;
    HighwayState state_;
    StationLedger ledger_;
    long ctm_step_ = 0;
    double divert_queue_veh_ = 0.0;   // stoppers waiting to leave cell 1
    double divert_rate_vehh_ = 0.0;   // uniform pour rate over the interval
    double station_count_veh_ = 0.0;  // flow-integrated station occupancy
    double net_in_veh_ = 0.0;         // cumulative inflow minus outflow
    int next_vehicle_id_ = 0;
    double last_price_ = 0.0;
    std::vector<PriceHistoryRecord> history_;
    std::string single_game_lp_;  // constraint dump from single-game mode
    GameContext last_context_;
    std::vector<VehicleParams> last_cohort_;

    std::vector<TrajectoryRow> trajectory_;
    std::vector<StationRow> station_rows_;
    std::vector<PriceRow> price_rows_;
    std::vector<GameLogRow> game_log_;
    mutable RunSummary summary_;
};

// Writes every artifact (CSV tables, summary and manifest JSON) into `dir`.
void write_outputs(const Simulation& sim, const std::string& dir,
                   const std::string& scenario_path, uint64_t seed, long steps,
                   RunMode mode);

}  // namespace hwsim
