#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hwsim/game.hpp"

namespace hwsim {

// Admissible entry-pulse shapes: the no-stop pulse plus one interior pulse
// per admissible merge-back offset.
struct PulseCandidate {
    int entry = 0;   // merge-back offset; 0 means not stopping
    int first = 0;   // pulse start offset
    int last = 0;    // pulse end offset
};

std::vector<PulseCandidate> enumerate_pulses(const Horizon& horizon);

// Cost-minimal energy allocation for a fixed charging pattern. Boxes come
// from the plug indicator and the residual shared cap, `need_before` is the
// SoC deficit that must be covered before the given offset, and the battery
// bounds the total. Returns nothing when no allocation fits.
std::optional<std::vector<double>> optimal_energy(
    std::span<const uint8_t> delta, std::span<const double> price_margin,
    std::span<const double> residual_cap, const StationConfig& station, double b,
    double x0, double x_ref, int first_gate);

struct BestResponseResult {
    bool feasible = false;
    Strategy strategy;
    double cost = 0.0;
    bool optimal = false;  // exact enumeration certificate
    long explored = 0;     // integer assignments examined
};

// Exact mixed-integer best response: enumerates every admissible pulse and
// charge window, solves the residual energy problem in closed form, and
// returns the global minimum. Ties within 1e-12 keep the incumbent, then
// prefer the earlier merge-back.
BestResponseResult best_response(const VehicleParams& agent,
                                 const OthersAggregates& others,
                                 const GameContext& ctx,
                                 const Strategy* incumbent = nullptr);

// Independent check: enumerates all 2^(2*T_h) binary assignments, filters
// through the logical feasibility checker, and optimizes the energy with the
// same closed form. Intended for desk-scale horizons.
BestResponseResult brute_force_oracle(const VehicleParams& agent,
                                      const OthersAggregates& others,
                                      const GameContext& ctx);

enum class Schedule { RoundRobin, FifoReplay, SeededRandom };

struct TraceEntry {
    long iteration = 0;
    int agent = 0;
    double old_cost = 0.0;
    double new_cost = 0.0;
    bool accepted = false;
    double potential_after = 0.0;
};

struct GameTrace {
    std::vector<TraceEntry> entries;
    bool converged = false;
    long accepted_count = 0;
    double initial_potential = 0.0;
    double final_potential = 0.0;
};

// Builds the default starting point: no-stop wherever the battery allows,
// otherwise the earliest feasible stop-and-charge. Vehicles with no feasible
// strategy at all are flagged false in the second return member.
struct InitialJoint {
    std::vector<Strategy> strategies;
    std::vector<bool> feasible;
};
InitialJoint initial_joint_strategy(std::span<const VehicleParams> cohort,
                                    const GameContext& ctx);

// Sequential best response with an epsilon acceptance test. Terminates when
// a full certification sweep finds no agent improving by epsilon or more;
// aborts with converged = false if the update cap is exceeded.
struct SequentialResult {
    std::vector<Strategy> joint;
    GameTrace trace;
};
SequentialResult run_sequential(std::span<const VehicleParams> cohort,
                                const GameContext& ctx,
                                std::vector<Strategy> initial, Schedule schedule,
                                uint64_t seed = 0, long max_updates = -1);

// Equilibrium certificate: no agent's exhaustive best response improves on
// its current cost by eps or more. Returns the worst improvement found.
struct MineCertificate {
    bool is_equilibrium = false;
    double worst_improvement = 0.0;
    int worst_agent = -1;
};
MineCertificate certify_mine(std::span<const Strategy> joint,
                             std::span<const VehicleParams> cohort,
                             const GameContext& ctx, double eps);

// Aggregate view of everyone except `self`.
OthersAggregates aggregates_excluding(std::span<const Strategy> joint, size_t self,
                                      int horizon_length);

}  // namespace hwsim
