#include "hwsim/pricing.hpp"

#include <algorithm>
#include <cmath>

namespace hwsim {

namespace {
double series_at(const std::vector<double>& v, int offset, double fallback) {
    if (v.empty()) return fallback;
    if (offset < static_cast<int>(v.size())) return v[offset];
    return v.back();  // hold the last entry past the configured range
}
}  // namespace

double PriceCoefficients::beta0_at(int offset) const { return series_at(beta0, offset, 0.0); }
double PriceCoefficients::beta1_at(int offset) const { return series_at(beta1, offset, 0.0); }

double CongestionDelays::sum_delta() const {
    double s = 0.0;
    for (size_t l = 1; l < delta.size(); ++l) s += delta[l];
    return s;
}

double CongestionDelays::sum_delta_hat(int offset) const {
    double s = 0.0;
    const auto& row = delta_hat[static_cast<size_t>(offset)];
    for (size_t l = 1; l < row.size(); ++l) s += row[l];
    return s;
}

double realized_delay(const CellParams& cell, double v) {
    if (v <= 0.0) v = 1e-6;  // the division is undefined for stopped traffic
    return std::max(0.0, cell.length_km / v - cell.length_km / cell.free_flow_speed_kmh);
}

double spot_price(const PriceCoefficients& coeffs, double base_demand,
                  double u_pev_total, std::span<const double> delays_cells_2_to_n) {
    double delay_sum = 0.0;
    for (double d : delays_cells_2_to_n) delay_sum += d;
    double p = coeffs.c1 * base_demand + coeffs.c2 * u_pev_total - coeffs.c3 * delay_sum;
    return std::max(p, coeffs.price_floor);
}

std::vector<double> estimated_price(const PriceCoefficients& coeffs,
                                    std::span<const double> base_demand,
                                    const CongestionDelays& delays) {
    std::vector<double> p_hat(base_demand.size());
    for (size_t j = 0; j < base_demand.size(); ++j) {
        int off = static_cast<int>(j);
        double discount = coeffs.beta0_at(off) +
                          coeffs.beta1_at(off) * delays.sum_delta_hat(off);
        p_hat[j] = std::max(coeffs.c1 * base_demand[j] - discount, coeffs.price_floor);
    }
    return p_hat;
}

BetaFit fit_betas(std::span<const PriceHistoryRecord> history, int horizon_length) {
    BetaFit fit;
    fit.beta0.assign(horizon_length, 0.0);
    fit.beta1.assign(horizon_length, 0.0);
    for (int j = 0; j < horizon_length; ++j) {
        // Gather completed (x, y) pairs for this offset.
        std::vector<std::pair<double, double>> pts;
        for (const auto& rec : history) {
            if (j >= static_cast<int>(rec.sum_delta_hat.size())) continue;
            double y_p = rec.realized_price[j];
            if (std::isnan(y_p)) continue;
            pts.emplace_back(rec.sum_delta_hat[j], rec.c1_base_demand[j] - y_p);
        }
        if (pts.empty()) continue;
        double n = static_cast<double>(pts.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double det = n * sxx - sx * sx;
        double scale = std::max(1.0, sxx);
        if (pts.size() < 2 || det <= 1e-12 * n * scale) {
            fit.beta0[j] = sy / n;  // rank-deficient: no slope estimate
            continue;
        }
        fit.beta1[j] = (n * sxy - sx * sy) / det;
        fit.beta0[j] = (sy - fit.beta1[j] * sx) / n;
    }
    return fit;
}

}  // namespace hwsim
