#include "hwsim/ctm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hwsim {

double demand(const CellParams& cell, const CellState& state) {
    double d = std::min(cell.free_flow_speed_kmh * state.density_vehkm,
                        cell.max_capacity_vehh);
    return std::max(0.0, d);
}

double supply(const CellParams& cell, const CellState& state) {
    double s = std::min(cell.congestion_wave_speed_kmh *
                            (cell.max_jam_density_vehkm - state.density_vehkm),
                        cell.max_capacity_vehh);
    return std::max(0.0, s);
}

double interface_flow_2(double demand_1, double supply_2, double r2s, double s2r,
                        bool* supply_deficit) {
    double residual_supply = supply_2 - s2r;
    if (supply_deficit) *supply_deficit = residual_supply < 0.0;
    double flow = (demand_1 - r2s <= residual_supply) ? demand_1 - r2s
                                                      : residual_supply;
    return std::max(0.0, flow);
}

HighwayState with_flows(const HighwayState& state, std::span<const CellParams> params,
                        double r2s, double s2r, double input_flow,
                        StepDiagnostics* diag) {
    const size_t n = params.size();
    if (n < 2) throw std::invalid_argument("with_flows: need at least 2 cells");
    if (state.cells.size() != n)
        throw std::invalid_argument("with_flows: state/params size mismatch");

    HighwayState out = state;

    double d1 = demand(params[0], state.cells[0]);
    if (r2s > d1) {
        if (diag) diag->r2s_capped = true;
        r2s = d1;  // the game cannot divert more than exits cell 1
    }

    // phi_l for l = 1..N+1. phi[0] is the network input, phi[n] the output.
    std::vector<double> phi(n + 1, 0.0);
    double requested = input_flow + (state.step_length_h > 0.0
                                         ? state.upstream_queue_veh / state.step_length_h
                                         : 0.0);
    phi[0] = std::min(requested, supply(params[0], state.cells[0]));

    bool deficit = false;
    phi[1] = interface_flow_2(d1, supply(params[1], state.cells[1]), r2s, s2r, &deficit);
    if (diag && deficit) diag->supply_deficit = true;

    for (size_t l = 2; l < n; ++l) {
        phi[l] = std::max(0.0, std::min(demand(params[l - 1], state.cells[l - 1]),
                                        supply(params[l], state.cells[l])));
    }
    phi[n] = demand(params[n - 1], state.cells[n - 1]);  // free outflow boundary

    for (size_t l = 0; l < n; ++l) {
        double in = phi[l] + (l == 1 ? s2r : 0.0);
        double ex = phi[l + 1] + (l == 0 ? r2s : 0.0);
        out.cells[l].interface_flow_vehh = phi[l];
        out.cells[l].inflow_vehh = in;
        out.cells[l].outflow_vehh = ex;
    }
    out.r2s_vehh = r2s;
    out.s2r_vehh = s2r;
    out.input_flow_vehh = phi[0];
    out.output_flow_vehh = phi[n];
    // Queue after this interval's admission: grows by whatever could not
    // enter, shrinks when phi_1 drains it. A state at time k therefore
    // carries the queue standing at the start of interval k.
    out.upstream_queue_veh = state.upstream_queue_veh +
                             state.step_length_h * (input_flow - phi[0]);
    return out;
}

HighwayState advance_state(const HighwayState& flowed, std::span<const CellParams> params,
                     StepDiagnostics* diag) {
    HighwayState out = flowed;
    out.time_index = flowed.time_index + 1;
    const double t = flowed.step_length_h;
    for (size_t l = 0; l < params.size(); ++l) {
        double rho = flowed.cells[l].density_vehkm +
                     (t / params[l].length_km) *
                         (flowed.cells[l].inflow_vehh - flowed.cells[l].outflow_vehh);
        double tol = 1e-9 * params[l].max_jam_density_vehkm;
        if (diag && (rho < -tol || rho > params[l].max_jam_density_vehkm + tol))
            diag->density_violation = true;
        out.cells[l].density_vehkm = rho;
        out.cells[l].inflow_vehh = 0.0;
        out.cells[l].outflow_vehh = 0.0;
        out.cells[l].interface_flow_vehh = 0.0;
    }
    out.r2s_vehh = 0.0;
    out.s2r_vehh = 0.0;
    out.input_flow_vehh = 0.0;
    out.output_flow_vehh = 0.0;
    return out;
}

HighwayState step(const HighwayState& state, std::span<const CellParams> params,
                  double r2s, double s2r, double input_flow, StepDiagnostics* diag) {
    return advance_state(with_flows(state, params, r2s, s2r, input_flow, diag), params, diag);
}

std::vector<double> speeds(const HighwayState& state, std::span<const CellParams> params) {
    std::vector<double> v(params.size());
    for (size_t l = 0; l < params.size(); ++l) {
        double rho = state.cells[l].density_vehkm;
        v[l] = (rho > kDensityFloor) ? state.cells[l].outflow_vehh / rho
                                     : params[l].free_flow_speed_kmh;
    }
    return v;
}

std::vector<HighwayState> rollout_free(const HighwayState& state,
                                       std::span<const CellParams> params,
                                       int horizon,
                                       std::span<const double> input_flows,
                                       std::span<const double> s2r_flows) {
    std::vector<HighwayState> out;
    out.reserve(static_cast<size_t>(std::max(horizon, 0)));
    HighwayState cur = state;
    for (int j = 0; j < horizon; ++j) {
        double inflow = j < static_cast<int>(input_flows.size()) ? input_flows[j] : 0.0;
        double s2r = j < static_cast<int>(s2r_flows.size()) ? s2r_flows[j] : 0.0;
        HighwayState flowed = with_flows(cur, params, 0.0, s2r, inflow);
        out.push_back(flowed);
        cur = advance_state(flowed, params);
    }
    return out;
}

double vehicles_on_road(const HighwayState& state, std::span<const CellParams> params) {
    double total = 0.0;
    for (size_t l = 0; l < params.size(); ++l)
        total += state.cells[l].density_vehkm * params[l].length_km;
    return total;
}

double max_stable_step_h(std::span<const CellParams> params) {
    double bound = std::numeric_limits<double>::infinity();
    for (const auto& p : params)
        bound = std::min(bound, p.length_km / std::max(p.free_flow_speed_kmh,
                                                       p.congestion_wave_speed_kmh));
    return bound;
}

}  // namespace hwsim
