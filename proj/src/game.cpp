#include "hwsim/game.hpp"

#include <algorithm>
#include <cmath>

namespace hwsim {

OthersAggregates OthersAggregates::zeros(int horizon_length) {
    OthersAggregates o;
    o.theta.assign(horizon_length, 0);
    o.u.assign(horizon_length, 0.0);
    o.delta.assign(horizon_length, 0);
    return o;
}

bool context_valid(const GameContext& ctx) {
    return horizon_valid(ctx.horizon) && ctx.gamma > 0.0 && ctx.upsilon > 0.0 &&
           ctx.epsilon > 0.0 && station_config_valid(ctx.station) &&
           static_cast<int>(ctx.xi.size()) == ctx.horizon.length &&
           static_cast<int>(ctx.p_hat.size()) == ctx.horizon.length &&
           static_cast<int>(ctx.chi.size()) == ctx.horizon.length;
}

int cohort_size(double demand1, double supply2, double s2r, double pev_fraction,
                double interval_h) {
    double flow;
    if (demand1 + s2r <= supply2) {
        flow = demand1;
    } else {
        flow = supply2 - s2r;
        if (flow < 0.0) return 0;
    }
    return static_cast<int>(std::floor(pev_fraction * flow * interval_h + 1e-9));
}

std::vector<std::vector<double>> interval_speeds(std::span<const HighwayState> rollout,
                                                 std::span<const CellParams> params,
                                                 const Horizon& horizon) {
    std::vector<std::vector<double>> v;
    v.reserve(horizon.length);
    for (int j = 0; j < horizon.length; ++j) {
        size_t idx = static_cast<size_t>(j) * horizon.subsample;
        idx = std::min(idx, rollout.size() - 1);
        v.push_back(speeds(rollout[idx], params));
    }
    return v;
}

std::vector<double> travel_delay_xi(const std::vector<std::vector<double>>& v_hat,
                                    std::span<const CellParams> params,
                                    const Horizon& horizon) {
    const double interval_h = horizon.game_step_h();
    const int last = static_cast<int>(v_hat.size()) - 1;
    std::vector<double> xi(horizon.length, 0.0);
    for (int j = 0; j < horizon.length; ++j) {
        double acc = 0.0;  // xi_1 = 0
        for (size_t l = 1; l < params.size(); ++l) {
            int idx = j + static_cast<int>(std::llround(acc / interval_h));
            idx = std::clamp(idx, 0, last);
            double v = std::max(v_hat[idx][l], 1e-6);
            acc += params[l].length_km / v -
                   params[l].length_km / params[l].free_flow_speed_kmh;
        }
        xi[j] = std::max(0.0, acc);
    }
    return xi;
}

std::vector<double> travel_delay_xi(std::span<const HighwayState> rollout,
                                    std::span<const CellParams> params,
                                    const Horizon& horizon) {
    return travel_delay_xi(interval_speeds(rollout, params, horizon), params, horizon);
}

CongestionDelays predicted_delays(const std::vector<std::vector<double>>& v_hat,
                                  std::span<const CellParams> params) {
    CongestionDelays d;
    d.delta_hat.reserve(v_hat.size());
    for (const auto& row : v_hat) {
        std::vector<double> cells(params.size());
        for (size_t l = 0; l < params.size(); ++l)
            cells[l] = realized_delay(params[l], row[l]);
        d.delta_hat.push_back(std::move(cells));
    }
    return d;
}

std::vector<double> xi_cs(const OthersAggregates& others,
                          std::span<const int> theta_old, double gamma) {
    std::vector<double> out(others.theta.size(), 0.0);
    for (size_t j = 0; j < out.size(); ++j) {
        int old = j < theta_old.size() ? theta_old[j] : 0;
        out[j] = gamma * (old + others.theta[j]);
    }
    return out;
}

double cost_price(const Strategy& strategy, std::span<const double> p_hat,
                  double p_bar) {
    double total = 0.0;
    for (size_t j = 0; j < strategy.u.size(); ++j)
        total += (p_hat[j] - p_bar) * strategy.u[j];
    return total;
}

double cost_time(const Strategy& strategy, const OthersAggregates& others,
                 const GameContext& ctx) {
    double total = 0.0;
    for (int j = 0; j < ctx.horizon.length; ++j) {
        if (!strategy.theta[j]) continue;
        double crowd = ctx.gamma * (ctx.committed.theta_old[j] + others.theta[j]);
        total += ctx.chi[j] * (j * ctx.upsilon + ctx.xi[j] + crowd);
    }
    return total;
}

double cost_total(const Strategy& strategy, const OthersAggregates& others,
                  const GameContext& ctx, const VehicleParams& params) {
    return params.alpha * cost_price(strategy, ctx.p_hat, params.p_bar) +
           (1.0 - params.alpha) * cost_time(strategy, others, ctx);
}

double cross_term(const Strategy& zi, const Strategy& zj, const GameContext& ctx,
                  double alpha_i) {
    double overlap = 0.0;
    for (int j = 0; j < ctx.horizon.length; ++j)
        if (zi.theta[j] && zj.theta[j]) overlap += ctx.chi[j];
    return (1.0 - alpha_i) * ctx.gamma * overlap;
}

double potential(std::span<const Strategy> strategies,
                 std::span<const VehicleParams> params, const GameContext& ctx) {
    double p = 0.0;
    for (size_t i = 0; i < strategies.size(); ++i) {
        // Local part: full cost against an empty rest-of-cohort.
        OthersAggregates none = OthersAggregates::zeros(ctx.horizon.length);
        double local = params[i].alpha *
                           cost_price(strategies[i], ctx.p_hat, params[i].p_bar) +
                       (1.0 - params[i].alpha) *
                           cost_time(strategies[i], none, ctx);
        p += local;
        for (size_t j = 0; j < i; ++j)
            p += cross_term(strategies[i], strategies[j], ctx, params[i].alpha);
    }
    return p;
}

void FeasibilityReport::fail(std::string what) {
    feasible = false;
    violations.push_back(std::move(what));
}

FeasibilityReport check_feasible_logical(const Strategy& strategy,
                                         const VehicleParams& params,
                                         const OthersAggregates& others,
                                         const GameContext& ctx) {
    FeasibilityReport report;
    const int n = ctx.horizon.length;
    const int w = ctx.horizon.entry_half_width;
    const auto& th = strategy.theta;
    const auto& de = strategy.delta;
    constexpr double tol = 1e-9;

    auto theta_at = [&](int j) -> int { return (j >= 0 && j < n) ? th[j] : 0; };
    auto delta_at = [&](int j) -> int { return (j >= 0 && j < n) ? de[j] : 0; };

    // Exactly one rising and one falling edge, with zero padding outside.
    int rises = 0, falls = 0;
    for (int j = 0; j <= n; ++j) {
        if (!theta_at(j - 1) && theta_at(j)) ++rises;
        if (theta_at(j - 1) && !theta_at(j)) ++falls;
    }
    if (rises != 1 || falls != 1) report.fail("theta_edges");

    PulseBounds pulse = pulse_bounds(th);
    if (pulse.valid()) {
        // Width fixed by where the window sits: W+1 when it starts at the
        // decision interval, 2W+1 for an interior entry.
        int required = pulse.first == 0 ? w + 1 : 2 * w + 1;
        if (pulse.width() != required) report.fail("theta_width");
    }

    // After the merge-back edge the vehicle is gone and cannot charge.
    for (int j = 0; j <= n; ++j) {
        if (theta_at(j - 1) && !theta_at(j)) {
            for (int r = std::max(0, j - w - 1); r < n; ++r)
                if (delta_at(r)) {
                    report.fail("no_charge_after_exit");
                    break;
                }
        }
    }

    // The end of charging must sit inside the entry window.
    for (int j = 0; j <= n; ++j) {
        if (delta_at(j - 1) && !delta_at(j)) {
            for (int r = std::max(0, j - w); r <= j + w; ++r) {
                if (!theta_at(r)) {
                    report.fail("exit_window@" + std::to_string(j));
                    break;
                }
            }
        }
    }

    // Every charge run extends at least h_bar intervals past its start.
    for (int j = 0; j < n; ++j) {
        if (delta_at(j) && !delta_at(j - 1)) {
            for (int h = 1; h <= ctx.station.min_charge_intervals; ++h)
                if (!delta_at(j + h)) {
                    report.fail("charge_run_length@" + std::to_string(j));
                    break;
                }
        }
    }

    // A stay wider than the no-stop window keeps the first W+1 intervals clear.
    int theta_sum = 0;
    for (int j = 0; j < n; ++j) theta_sum += th[j];
    bool first_window_clear = true;
    for (int j = 0; j <= w && j < n; ++j)
        if (th[j]) first_window_clear = false;
    if ((theta_sum > w + 1) != first_window_clear) report.fail("min_stay");

    // SoC follows the battery dynamics from x0.
    if (std::abs(strategy.x[0] - params.x0) > tol) report.fail("soc_dynamics");
    for (int j = 0; j < n; ++j)
        if (std::abs(strategy.x[j + 1] - strategy.x[j] - params.b * strategy.u[j]) > tol)
            report.fail("soc_dynamics");
    for (double x : strategy.x)
        if (x < -tol || x > 1.0 + tol) report.fail("soc_bounds");

    // Energy is purchased exactly while plugged, inside the per-plug box.
    for (int j = 0; j < n; ++j) {
        double lo = ctx.station.u_min * de[j];
        double hi = ctx.station.u_max_per_vehicle * de[j];
        if (strategy.u[j] < lo - tol || strategy.u[j] > hi + tol)
            report.fail("energy_box@" + std::to_string(j));
    }

    // Leaving requires enough charge: x(t) < x_ref forbids the window point.
    for (int j = 0; j < n; ++j) {
        if (strategy.x[j] < params.x_ref - tol && theta_at(std::max(0, j - w)))
            report.fail("min_soc_gate@" + std::to_string(j));
    }

    // Shared station limits against everyone already counted.
    for (int j = 0; j < n; ++j) {
        if (ctx.committed.u_old[j] + others.u[j] + strategy.u[j] >
            ctx.station.max_energy_per_interval + tol)
            report.fail("energy_cap@" + std::to_string(j));
        if (ctx.committed.delta_old[j] + others.delta[j] + de[j] >
            ctx.station.plug_count)
            report.fail("plug_cap@" + std::to_string(j));
    }

    // Queue precedence: no charging before vehicles queued earlier.
    for (int j = 0; j < n; ++j) {
        if (de[j] && ctx.horizon.k + j < ctx.fifo_floor) {
            report.fail("fifo_order");
            break;
        }
    }

    return report;
}

}  // namespace hwsim
