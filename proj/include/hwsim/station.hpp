#pragma once

#include <span>
#include <vector>

#include "hwsim/strategy.hpp"

namespace hwsim {

struct StationConfig {
    int plug_count = 4;                   // delta_bar
    double max_energy_per_interval = 20.0;// u_max, shared by all plugs
    int min_charge_intervals = 1;         // h_bar
    double u_min = 0.5;                   // per-vehicle minimum when plugged
    double u_max_per_vehicle = 5.0;       // per-vehicle maximum per interval
};

bool station_config_valid(const StationConfig& c);

// Sum of committed entries/energy/plug use per future interval, aligned to
// offsets of the horizon starting at interval `k`.
struct CommittedAggregates {
    long k = 0;
    std::vector<int> theta_old;
    std::vector<double> u_old;
    std::vector<int> delta_old;
};

// One vehicle whose decision is final. Strategies are kept verbatim so the
// station exits of earlier cohorts stay extractable.
struct CommittedVehicle {
    int vehicle_id = 0;
    long decision_interval = 0;
    VehicleParams params;
    Strategy strategy;
    double realized_payment = 0.0;   // priced at the spot price while charging
    double estimated_payment = 0.0;  // what the broadcast estimate promised
};

class StationLedger {
  public:
    void commit(CommittedVehicle vehicle);
    const std::vector<CommittedVehicle>& records() const { return records_; }
    std::vector<CommittedVehicle>& records() { return records_; }

    // Aggregates over all vehicles committed before interval `k`, restricted
    // to the `horizon_length` intervals from `k` on.
    CommittedAggregates fold_commitments(long k, int horizon_length) const;

    // Station-to-road flow during interval `k`: every committed stopper whose
    // pulse satisfies theta(k-W) * theta(k+W) = 1 merges back during k and
    // contributes 1/(l*T). Non-stoppers never enter the station and are
    // skipped outright (their width-(W+1) pulse would self-select when W=0).
    double extract_s2r(long k, int entry_half_width, int subsample,
                       double ctm_step_h) const;

    // Earliest interval at which a vehicle deciding at `k` may begin to
    // charge without overtaking an earlier-queued vehicle that is still
    // waiting: max first-charge interval among committed stoppers whose
    // charging starts after `k`. Returns `k` when the queue is clear.
    long fifo_charge_floor(long k) const;

    // Vehicles present at the station during interval `t` (committed
    // stoppers between their decision interval and their merge-back).
    int occupants(long t) const;
    int plugs_busy(long t) const;

  private:
    std::vector<CommittedVehicle> records_;
};

// Road-to-station flow produced by a cohort of `n` vehicles deciding at
// interval `k`: (n - #non-stoppers) / interval_length.
double extract_r2s(std::span<const Strategy> cohort, int n, long k,
                   double interval_h);

}  // namespace hwsim
