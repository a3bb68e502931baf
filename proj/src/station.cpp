#include "hwsim/station.hpp"

#include <algorithm>

namespace hwsim {

namespace {

// theta value at absolute interval t; zero outside the strategy's window.
int theta_at(const Strategy& s, long t) {
    long off = t - s.k;
    if (off < 0 || off >= static_cast<long>(s.theta.size())) return 0;
    return s.theta[static_cast<size_t>(off)];
}

int delta_at(const Strategy& s, long t) {
    long off = t - s.k;
    if (off < 0 || off >= static_cast<long>(s.delta.size())) return 0;
    return s.delta[static_cast<size_t>(off)];
}

double u_at(const Strategy& s, long t) {
    long off = t - s.k;
    if (off < 0 || off >= static_cast<long>(s.u.size())) return 0.0;
    return s.u[static_cast<size_t>(off)];
}

// First charging interval, or -1 if the vehicle never charges.
long first_charge(const Strategy& s) {
    for (size_t j = 0; j < s.delta.size(); ++j)
        if (s.delta[j]) return s.k + static_cast<long>(j);
    return -1;
}

// Merge-back interval of a stopper (center of its pulse).
long merge_interval(const Strategy& s, int w) {
    PulseBounds p = pulse_bounds(s.theta);
    if (!p.valid()) return s.k;
    return s.k + entry_offset(p, w);
}

}  // namespace

bool station_config_valid(const StationConfig& c) {
    return c.plug_count >= 1 && c.max_energy_per_interval > 0.0 &&
           c.min_charge_intervals >= 1 && c.u_min > 0.0 &&
           c.u_min <= c.u_max_per_vehicle;
}

void StationLedger::commit(CommittedVehicle vehicle) {
    records_.push_back(std::move(vehicle));
}

CommittedAggregates StationLedger::fold_commitments(long k, int horizon_length) const {
    CommittedAggregates agg;
    agg.k = k;
    agg.theta_old.assign(horizon_length, 0);
    agg.u_old.assign(horizon_length, 0.0);
    agg.delta_old.assign(horizon_length, 0);
    for (const auto& rec : records_) {
        if (rec.decision_interval >= k) continue;
        for (int j = 0; j < horizon_length; ++j) {
            long t = k + j;
            agg.theta_old[j] += theta_at(rec.strategy, t);
            agg.delta_old[j] += delta_at(rec.strategy, t);
            agg.u_old[j] += u_at(rec.strategy, t);
        }
    }
    return agg;
}

double StationLedger::extract_s2r(long k, int entry_half_width, int subsample,
                                  double ctm_step_h) const {
    int exiting = 0;
    for (const auto& rec : records_) {
        if (rec.decision_interval >= k) continue;
        if (!rec.strategy.stops()) continue;
        if (theta_at(rec.strategy, k - entry_half_width) &&
            theta_at(rec.strategy, k + entry_half_width))
            ++exiting;
    }
    return exiting / (subsample * ctm_step_h);
}

long StationLedger::fifo_charge_floor(long k) const {
    long floor = k;
    for (const auto& rec : records_) {
        if (rec.decision_interval >= k) continue;
        long fc = first_charge(rec.strategy);
        if (fc > k) floor = std::max(floor, fc);
    }
    return floor;
}

int StationLedger::occupants(long t) const {
    int count = 0;
    for (const auto& rec : records_) {
        if (!rec.strategy.stops()) continue;
        long entry = rec.decision_interval;
        long exit = merge_interval(rec.strategy,
                                   (pulse_bounds(rec.strategy.theta).width() - 1) / 2);
        if (t >= entry && t < exit) ++count;
    }
    return count;
}

int StationLedger::plugs_busy(long t) const {
    int count = 0;
    for (const auto& rec : records_) count += delta_at(rec.strategy, t);
    return count;
}

double extract_r2s(std::span<const Strategy> cohort, int n, long k, double interval_h) {
    int driving_on = 0;
    for (const auto& s : cohort) driving_on += theta_at(s, k);
    return (n - driving_on) / interval_h;
}

}  // namespace hwsim
