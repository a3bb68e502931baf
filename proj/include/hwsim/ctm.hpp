#pragma once

#include <span>
#include <vector>

namespace hwsim {

// Fixed parameters of one highway cell.
struct CellParams {
    double length_km = 1.0;                 // L
    double free_flow_speed_kmh = 100.0;     // v_bar
    double congestion_wave_speed_kmh = 25.0;// w
    double max_capacity_vehh = 2000.0;      // q_max
    double max_jam_density_vehkm = 150.0;   // rho_max
};

// Per-interval traffic state of one cell. The flow fields describe the
// interval that starts at the owning HighwayState's time_index; they are
// zero until with_flows() has been applied.
struct CellState {
    double density_vehkm = 0.0;       // rho
    double inflow_vehh = 0.0;         // Phi+
    double outflow_vehh = 0.0;        // Phi-
    double interface_flow_vehh = 0.0; // phi, flow entering from upstream
};

struct HighwayState {
    long time_index = 0;
    std::vector<CellState> cells;
    double r2s_vehh = 0.0;          // road-to-station flow applied this interval
    double s2r_vehh = 0.0;          // station-to-road flow applied this interval
    double input_flow_vehh = 0.0;   // phi_1 admitted into cell 1
    double output_flow_vehh = 0.0;  // phi_{N+1}
    double step_length_h = 0.0;     // T
    double upstream_queue_veh = 0.0;// vehicles held back when phi_1 is clipped
};

struct StepDiagnostics {
    bool supply_deficit = false;   // S_2 - s2r < 0
    bool r2s_capped = false;       // requested r2s exceeded D_1
    bool density_violation = false;// some density left [0, rho_max] beyond tolerance
};

// Density used as the empty-road cutoff in the speed division.
inline constexpr double kDensityFloor = 1e-6;

// Flow cell `l-1` can send downstream: min{v_bar * rho, q_max}.
double demand(const CellParams& cell, const CellState& state);

// Flow cell `l` can accept: min{w * (rho_max - rho), q_max}.
double supply(const CellParams& cell, const CellState& state);

// Flow across the interface that hosts the charging station. Free-flow
// branch sends D1 - r2s, congested branch fills the residual supply
// S2 - s2r. Result is clamped at zero; a negative residual supply is
// reported through `supply_deficit`.
double interface_flow_2(double demand_1, double supply_2, double r2s, double s2r,
                        bool* supply_deficit = nullptr);

// Computes all interval flows from the current densities and writes them
// into a copy of `state`. Does not advance time. `input_flow` is the
// exogenous arrival rate; it is clipped to cell 1's supply with the excess
// accumulating in the upstream queue at advance_state() time.
HighwayState with_flows(const HighwayState& state, std::span<const CellParams> params,
                        double r2s, double s2r, double input_flow,
                        StepDiagnostics* diag = nullptr);

// Applies the density update rho' = rho + (T/L)(Phi+ - Phi-) to a
// flow-filled state and advances the clock and the upstream queue.
HighwayState advance_state(const HighwayState& flowed, std::span<const CellParams> params,
                     StepDiagnostics* diag = nullptr);

// with_flows followed by advance. The returned state has its flow fields
// cleared; call with_flows/advance separately when the per-interval flows
// are needed (e.g. for trajectory recording).
HighwayState step(const HighwayState& state, std::span<const CellParams> params,
                  double r2s, double s2r, double input_flow,
                  StepDiagnostics* diag = nullptr);

// Per-cell speed v = Phi-/rho, with the free-flow convention below the
// density floor. Expects a flow-filled state.
std::vector<double> speeds(const HighwayState& state, std::span<const CellParams> params);

// Predicts `horizon` intervals ahead with r2s forced to zero. `s2r_flows`
// carries the station exits already committed by earlier cohorts. Returns
// one flow-filled state per interval (the state each interval starts from);
// the live state is not modified.
std::vector<HighwayState> rollout_free(const HighwayState& state,
                                       std::span<const CellParams> params,
                                       int horizon,
                                       std::span<const double> input_flows,
                                       std::span<const double> s2r_flows);

// Total vehicle count on the mainline (excluding the upstream queue).
double vehicles_on_road(const HighwayState& state, std::span<const CellParams> params);

// Largest step length that keeps the density update inside [0, rho_max]:
// min over cells of L / max(v_bar, w).
double max_stable_step_h(std::span<const CellParams> params);

}  // namespace hwsim
