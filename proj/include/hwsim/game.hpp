#pragma once

#include <span>
#include <string>
#include <vector>

#include "hwsim/ctm.hpp"
#include "hwsim/pricing.hpp"
#include "hwsim/station.hpp"
#include "hwsim/strategy.hpp"

namespace hwsim {

// Aggregate view of the rest of the cohort, per horizon offset. Agents never
// see individual strategies, only these sums.
struct OthersAggregates {
    std::vector<int> theta;
    std::vector<double> u;
    std::vector<int> delta;

    static OthersAggregates zeros(int horizon_length);
};

// Everything frozen at the decision interval that the game needs.
struct GameContext {
    Horizon horizon;
    int n = 0;                      // cohort size
    std::vector<double> xi;         // predicted extra travel time per offset [h]
    std::vector<double> p_hat;      // broadcast price estimate per offset
    std::vector<double> chi;        // pulse-width normalization per offset
    CommittedAggregates committed;  // theta_old / u_old / delta_old
    double gamma = 0.0;             // extra time per vehicle merging nearby [h]
    double upsilon = 0.0;           // perceived cost of one interval at the station [h]
    double epsilon = 1e-4;          // improvement threshold
    StationConfig station;
    long fifo_floor = 0;            // earliest admissible first-charge interval
};

bool context_valid(const GameContext& ctx);

// Number of players drawn at the decision interval, assuming maximum
// congestion (nobody stops). Returns 0 when the residual supply is negative.
int cohort_size(double demand1, double supply2, double s2r, double pev_fraction,
                double interval_h);

// Per-interval speed table sampled from a CTM rollout: v[offset][cell] is the
// speed at the first CTM step of each game interval.
std::vector<std::vector<double>> interval_speeds(
    std::span<const HighwayState> rollout, std::span<const CellParams> params,
    const Horizon& horizon);

// Predicted extra travel time through cells 2..N for a vehicle entering
// cell 2 at each horizon offset. The recursion walks the cells, looking up
// the speed at the interval the vehicle actually reaches (accumulated delay
// rounded to the nearest interval, clamped to the table's end).
std::vector<double> travel_delay_xi(const std::vector<std::vector<double>>& v_hat,
                                    std::span<const CellParams> params,
                                    const Horizon& horizon);
std::vector<double> travel_delay_xi(std::span<const HighwayState> rollout,
                                    std::span<const CellParams> params,
                                    const Horizon& horizon);

// Predicted per-cell congestion delays from the same speed table.
CongestionDelays predicted_delays(const std::vector<std::vector<double>>& v_hat,
                                  std::span<const CellParams> params);

// Extra station time caused by everyone else entering cell 2 nearby:
// gamma * (theta_old(t) + sum_j theta_j(t)).
std::vector<double> xi_cs(const OthersAggregates& others,
                          std::span<const int> theta_old, double gamma);

// Energy bill relative to the reference fast-charge price.
double cost_price(const Strategy& strategy, std::span<const double> p_hat,
                  double p_bar);

// Time cost: sum over the entry window of chi * [(t-k)*upsilon + xi + xi_cs].
double cost_time(const Strategy& strategy, const OthersAggregates& others,
                 const GameContext& ctx);

// alpha * price + (1 - alpha) * time, with the vehicle's own preference
// weight and reference price.
double cost_total(const Strategy& strategy, const OthersAggregates& others,
                  const GameContext& ctx, const VehicleParams& params);

// Pairwise interaction term: (1-alpha_i) * gamma * sum chi * theta_i * theta_j.
// Symmetric across the pair whenever the cohort shares one alpha.
double cross_term(const Strategy& zi, const Strategy& zj, const GameContext& ctx,
                  double alpha_i);

// Exact potential of the cohort game: sum of local terms plus one cross term
// per unordered pair. A unilateral deviation changes this by exactly the
// deviator's cost change when the cohort shares one alpha.
double potential(std::span<const Strategy> strategies,
                 std::span<const VehicleParams> params, const GameContext& ctx);

struct FeasibilityReport {
    bool feasible = true;
    std::vector<std::string> violations;

    void fail(std::string what);
};

// Evaluates every behavioral constraint directly in its logical form and
// reports all violations: single entry pulse of the admissible width, no
// charging after the merge-back, the exit window around the end of charging,
// minimum charge-run length, minimum stay, SoC dynamics and bounds, the
// energy box tied to the plug indicator, the minimum-SoC gate on leaving,
// the shared energy and plug caps, and queue precedence.
FeasibilityReport check_feasible_logical(const Strategy& strategy,
                                         const VehicleParams& params,
                                         const OthersAggregates& others,
                                         const GameContext& ctx);

}  // namespace hwsim
