#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace hwsim {

// Planning window of one decision round. Interval indices are absolute game
// intervals; index k covers the wall-clock span [k*l*T, (k+1)*l*T).
struct Horizon {
    long k = 0;          // decision interval
    int length = 8;      // T_h, number of intervals in the window
    int entry_half_width = 1;  // W
    int subsample = 1;   // l, game intervals per CTM step multiple
    double ctm_step_h = 0.0;   // T

    double game_step_h() const { return subsample * ctm_step_h; }
};

bool horizon_valid(const Horizon& h);  // requires length >= 2W+2, l >= 1, W >= 0

struct VehicleParams {
    double b = 0.02;        // SoC gained per unit of energy, eta/C
    double x0 = 0.5;        // initial SoC
    double x_ref = 0.4;     // minimum SoC to finish the trip
    double alpha = 0.5;     // price-vs-time preference weight, in (0,1)
    double p_bar = 0.6;     // reference fast-charge price
};

// One vehicle's decision vector over the horizon. u/delta/theta have
// `length` entries, x has one more (the post-horizon SoC).
struct Strategy {
    long k = 0;
    std::vector<double> u;        // energy purchased per interval
    std::vector<double> x;        // SoC trajectory, x[0] = x0
    std::vector<uint8_t> delta;   // 1 while actively charging
    std::vector<uint8_t> theta;   // cell-2 entry window pulse

    bool stops() const { return !theta.empty() && theta[0] == 0; }
    double total_energy() const;
};

// Closed [first, last] index range of the single theta pulse, as offsets
// into the horizon. Empty when theta is not a single rectangular pulse.
struct PulseBounds {
    int first = -1;
    int last = -1;
    bool valid() const { return first >= 0 && last >= first; }
    int width() const { return valid() ? last - first + 1 : 0; }
};

PulseBounds pulse_bounds(const std::vector<uint8_t>& theta);

// Cell-2 entry offset implied by a pulse: W past the rising edge for an
// interior pulse, 0 for a pulse starting at the decision interval.
int entry_offset(const PulseBounds& pulse, int entry_half_width);

// Required width of a pulse whose last index sits at offset `last_offset`:
// min(last_offset + 1, 2W + 1). Equals W+1 for the no-stop pulse and 2W+1
// for interior pulses.
int required_pulse_width(int last_offset, int entry_half_width);

// Cost normalization series: 1/(W+1) on the offsets only the no-stop pulse
// can occupy, 1/(2W+1) afterwards. Shared by all agents so that the
// pairwise interaction terms stay symmetric.
std::vector<double> chi_series(const Horizon& horizon);

// The no-stop strategy: pulse on {k..k+W}, never charging, flat SoC.
Strategy make_no_stop(const Horizon& horizon, double x0);

// A stopping strategy entering cell 2 at offset `entry` with an optional
// charge block [charge_first, charge_last] (offsets) and the given energy
// purchases on that block. SoC is rolled out from x0.
Strategy make_stopper(const Horizon& horizon, double x0, double b, int entry,
                      std::optional<std::pair<int, int>> charge_block,
                      const std::vector<double>& block_energy);

}  // namespace hwsim
