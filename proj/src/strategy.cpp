#include "hwsim/strategy.hpp"

#include <numeric>
#include <stdexcept>

namespace hwsim {

bool horizon_valid(const Horizon& h) {
    return h.length >= 2 * h.entry_half_width + 2 && h.entry_half_width >= 0 &&
           h.subsample >= 1 && h.ctm_step_h > 0.0;
}

double Strategy::total_energy() const {
    return std::accumulate(u.begin(), u.end(), 0.0);
}

PulseBounds pulse_bounds(const std::vector<uint8_t>& theta) {
    PulseBounds b;
    int runs = 0;
    for (size_t t = 0; t < theta.size(); ++t) {
        if (theta[t] && (t == 0 || !theta[t - 1])) {
            ++runs;
            b.first = static_cast<int>(t);
        }
        if (theta[t]) b.last = static_cast<int>(t);
    }
    if (runs != 1) return PulseBounds{};
    for (int t = b.first; t <= b.last; ++t)
        if (!theta[t]) return PulseBounds{};  // hole inside the run
    return b;
}

int entry_offset(const PulseBounds& pulse, int entry_half_width) {
    if (!pulse.valid()) return -1;
    return pulse.first == 0 ? 0 : pulse.first + entry_half_width;
}

int required_pulse_width(int last_offset, int entry_half_width) {
    return std::min(last_offset + 1, 2 * entry_half_width + 1);
}

std::vector<double> chi_series(const Horizon& horizon) {
    std::vector<double> chi(horizon.length);
    const int w = horizon.entry_half_width;
    for (int j = 0; j < horizon.length; ++j)
        chi[j] = (j <= w) ? 1.0 / (w + 1) : 1.0 / (2 * w + 1);
    return chi;
}

Strategy make_no_stop(const Horizon& horizon, double x0) {
    Strategy s;
    s.k = horizon.k;
    s.u.assign(horizon.length, 0.0);
    s.x.assign(horizon.length + 1, x0);
    s.delta.assign(horizon.length, 0);
    s.theta.assign(horizon.length, 0);
    for (int j = 0; j <= horizon.entry_half_width && j < horizon.length; ++j)
        s.theta[j] = 1;
    return s;
}

Strategy make_stopper(const Horizon& horizon, double x0, double b, int entry,
                      std::optional<std::pair<int, int>> charge_block,
                      const std::vector<double>& block_energy) {
    const int w = horizon.entry_half_width;
    if (entry - w < 0 || entry + w >= horizon.length)
        throw std::invalid_argument("make_stopper: pulse does not fit the horizon");
    Strategy s;
    s.k = horizon.k;
    s.u.assign(horizon.length, 0.0);
    s.delta.assign(horizon.length, 0);
    s.theta.assign(horizon.length, 0);
    for (int j = entry - w; j <= entry + w; ++j) s.theta[j] = 1;
    if (charge_block) {
        auto [first, last] = *charge_block;
        if (first < 0 || last >= horizon.length || last < first)
            throw std::invalid_argument("make_stopper: bad charge block");
        if (block_energy.size() != static_cast<size_t>(last - first + 1))
            throw std::invalid_argument("make_stopper: energy size mismatch");
        for (int j = first; j <= last; ++j) {
            s.delta[j] = 1;
            s.u[j] = block_energy[j - first];
        }
    }
    s.x.assign(horizon.length + 1, x0);
    for (int j = 0; j < horizon.length; ++j) s.x[j + 1] = s.x[j] + b * s.u[j];
    return s;
}

}  // namespace hwsim
