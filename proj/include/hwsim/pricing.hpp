#pragma once

#include <limits>
#include <span>
#include <vector>

#include "hwsim/ctm.hpp"

namespace hwsim {

struct PriceCoefficients {
    double c1 = 1.0;  // base-demand scaling
    double c2 = 0.0;  // PEV-load scaling
    double c3 = 1.0;  // congestion discount scaling
    std::vector<double> beta0;  // per horizon offset
    std::vector<double> beta1;  // per horizon offset
    double price_floor = -std::numeric_limits<double>::infinity();

    double beta0_at(int offset) const;
    double beta1_at(int offset) const;
};

// Realized (delta) and predicted (delta_hat) per-cell congestion delays.
struct CongestionDelays {
    std::vector<double> delta;                   // per cell, at the live interval
    std::vector<std::vector<double>> delta_hat;  // [horizon offset][cell]

    double sum_delta() const;             // cells 2..N
    double sum_delta_hat(int offset) const;
};

// Extra time to traverse one cell at speed v compared to free flow:
// max(0, L/v - L/v_bar).
double realized_delay(const CellParams& cell, double v);

// Spot energy price p = c1*d + c2*u_pev - c3 * sum of delays over cells 2..N,
// clamped at the configured floor.
double spot_price(const PriceCoefficients& coeffs, double base_demand,
                  double u_pev_total, std::span<const double> delays_cells_2_to_n);

// Broadcast price estimate for each horizon offset:
// p_hat = c1*d - (beta0 + beta1 * sum delta_hat), floor-clamped.
std::vector<double> estimated_price(const PriceCoefficients& coeffs,
                                    std::span<const double> base_demand,
                                    const CongestionDelays& delays);

// One completed prediction: at decision time the operator stored the
// congestion forecast per offset; the realized prices arrived later.
struct PriceHistoryRecord {
    long forecast_interval = 0;         // decision interval of the forecast
    std::vector<double> sum_delta_hat;  // per offset
    std::vector<double> c1_base_demand; // c1*d per offset
    std::vector<double> realized_price; // per offset, NaN while pending
};

struct BetaFit {
    std::vector<double> beta0;
    std::vector<double> beta1;
};

// Per-offset ordinary least squares of (c1*d - realized p) against
// (1, sum delta_hat). Degenerate offsets (too few points or constant
// forecasts) fall back to beta1 = 0 with beta0 absorbing the mean; an empty
// history yields all zeros.
BetaFit fit_betas(std::span<const PriceHistoryRecord> history, int horizon_length);

}  // namespace hwsim
