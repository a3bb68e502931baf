#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "hwsim/best_response.hpp"
#include "hwsim/milp.hpp"

using namespace hwsim;
using namespace hwsim::milp;

namespace {

// Standalone evaluation of a tiny set over one or two variables.
bool rows_hold(const ConstraintSet& set, std::vector<double> assignment) {
    return evaluate(set, assignment).empty();
}

GameContext tiny_context(int th, int w, int hbar) {
    GameContext ctx;
    ctx.horizon = Horizon{0, th, w, 1, 1.0 / 60};
    ctx.n = 1;
    ctx.xi.assign(th, 0.01);
    ctx.p_hat.assign(th, 0.5);
    ctx.chi = chi_series(ctx.horizon);
    ctx.committed.theta_old.assign(th, 0);
    ctx.committed.u_old.assign(th, 0.0);
    ctx.committed.delta_old.assign(th, 0);
    ctx.gamma = 0.01;
    ctx.upsilon = 0.02;
    ctx.epsilon = 1e-4;
    ctx.station = StationConfig{2, 6.0, hbar, 0.5, 3.0};
    ctx.fifo_floor = 0;
    return ctx;
}

}  // namespace

TEST_CASE("threshold gadget encodes [phi=1] iff [f >= c]") {
    // f a single variable on [0, 10], threshold 5.
    ConstraintSet set;
    int f = set.add_var("f", VarKind::Continuous, 0.0, 10.0);
    int phi = set.add_var("phi", VarKind::Binary, 0.0, 1.0);
    gadget_geq(set, phi, AffExpr::of(f), 5.0, 10.0, 0.0, kGadgetEps, "t");

    CHECK(rows_hold(set, {7.0, 1.0}));
    CHECK_FALSE(rows_hold(set, {7.0, 0.0}));
    CHECK(rows_hold(set, {5.0, 1.0}));  // boundary forces phi = 1
    CHECK_FALSE(rows_hold(set, {5.0, 0.0}));
    CHECK(rows_hold(set, {3.0, 0.0}));
    CHECK_FALSE(rows_hold(set, {3.0, 1.0}));

    // Dense sweep: agreement everywhere outside the epsilon band.
    int miscls = 0;
    for (int i = 0; i <= 2000; ++i) {
        double fv = 10.0 * i / 2000;
        bool semantic = fv >= 5.0;
        bool phi1 = rows_hold(set, {fv, 1.0});
        bool phi0 = rows_hold(set, {fv, 0.0});
        if (fv > 5.0 - kGadgetEps && fv < 5.0) continue;  // declared band
        if (phi1 != semantic || phi0 != !semantic) ++miscls;
    }
    CHECK(miscls == 0);

    CHECK_THROWS(gadget_geq(set, phi, AffExpr::of(f), 12.0, 10.0, 0.0, kGadgetEps, "bad"));
    CHECK_THROWS(gadget_geq(set, phi, AffExpr::of(f), -1.0, 10.0, 0.0, kGadgetEps, "bad"));
}

TEST_CASE("threshold gadget encodes [phi=1] iff [f <= c]") {
    ConstraintSet set;
    int f = set.add_var("f", VarKind::Continuous, 0.0, 10.0);
    int phi = set.add_var("phi", VarKind::Binary, 0.0, 1.0);
    gadget_leq(set, phi, AffExpr::of(f), 5.0, 10.0, 0.0, kGadgetEps, "t");

    CHECK(rows_hold(set, {3.0, 1.0}));
    CHECK_FALSE(rows_hold(set, {7.0, 1.0}));
    CHECK(rows_hold(set, {5.0, 1.0}));  // boundary forces phi = 1
    CHECK_FALSE(rows_hold(set, {5.0, 0.0}));
    CHECK(rows_hold(set, {7.0, 0.0}));

    int miscls = 0;
    for (int i = 0; i <= 2000; ++i) {
        double fv = 10.0 * i / 2000;
        bool semantic = fv <= 5.0;
        bool phi1 = rows_hold(set, {fv, 1.0});
        bool phi0 = rows_hold(set, {fv, 0.0});
        if (fv > 5.0 && fv < 5.0 + kGadgetEps) continue;
        if (phi1 != semantic || phi0 != !semantic) ++miscls;
    }
    CHECK(miscls == 0);
}

TEST_CASE("logical AND matches its truth table exactly") {
    ConstraintSet set;
    int s = set.add_var("s", VarKind::Binary, 0, 1);
    int t = set.add_var("t", VarKind::Binary, 0, 1);
    int phi = set.add_var("phi", VarKind::Binary, 0, 1);
    gadget_and(set, phi, AffExpr::of(s), AffExpr::of(t), "and");

    for (int sv = 0; sv <= 1; ++sv)
        for (int tv = 0; tv <= 1; ++tv)
            for (int pv = 0; pv <= 1; ++pv) {
                bool ok = rows_hold(set, {double(sv), double(tv), double(pv)});
                CHECK(ok == ((sv && tv) == pv));
            }
}

TEST_CASE("product gadget pins g to phi * f") {
    ConstraintSet set;
    int f = set.add_var("f", VarKind::Continuous, -4.0, 9.0);
    int phi = set.add_var("phi", VarKind::Binary, 0, 1);
    int g = set.add_var("g", VarKind::Continuous, -4.0, 9.0);
    gadget_product(set, g, AffExpr::of(f), phi, 9.0, -4.0, "p");

    CHECK(rows_hold(set, {3.7, 1.0, 3.7}));
    CHECK(rows_hold(set, {3.7, 0.0, 0.0}));
    CHECK_FALSE(rows_hold(set, {3.7, 0.0, 3.7}));
    CHECK_FALSE(rows_hold(set, {3.7, 1.0, 0.0}));

    // Grid oracle over the box and both phi values.
    int miscls = 0;
    for (int i = 0; i <= 60; ++i) {
        double fv = -4.0 + 13.0 * i / 60;
        for (int pv = 0; pv <= 1; ++pv)
            for (int k = 0; k <= 60; ++k) {
                double gv = -4.0 + 13.0 * k / 60;
                bool semantic = std::abs(gv - (pv ? fv : 0.0)) < 1e-12;
                if (rows_hold(set, {fv, double(pv), gv}) != semantic) ++miscls;
            }
    }
    CHECK(miscls == 0);
}

namespace {

// Reference feasibility: the logical checker plus the shared closed-form
// energy allocation, on a strategy assembled from raw bits.
bool logical_feasible(const GameContext& ctx, const VehicleParams& par,
                      const OthersAggregates& others, std::vector<uint8_t> theta,
                      std::vector<uint8_t> delta) {
    const int n = ctx.horizon.length;
    const int w = ctx.horizon.entry_half_width;
    std::vector<double> margin(n), cap(n);
    for (int j = 0; j < n; ++j) {
        margin[j] = ctx.p_hat[j] - par.p_bar;
        cap[j] = ctx.station.max_energy_per_interval - ctx.committed.u_old[j] -
                 others.u[j];
    }
    int first_gate = -1;
    for (int j = 0; j < n && first_gate < 0; ++j)
        if (theta[std::max(0, j - w)]) first_gate = j;
    auto u = optimal_energy(delta, margin, cap, ctx.station, par.b, par.x0,
                            par.x_ref, first_gate);
    if (!u) return false;
    Strategy s;
    s.k = ctx.horizon.k;
    s.theta = std::move(theta);
    s.delta = std::move(delta);
    s.u = std::move(*u);
    s.x.assign(n + 1, par.x0);
    for (int j = 0; j < n; ++j) s.x[j + 1] = s.x[j] + par.b * s.u[j];
    return check_feasible_logical(s, par, others, ctx).feasible;
}

int exhaustive_disagreements(const GameContext& ctx, const VehicleParams& par,
                             const OthersAggregates& others) {
    const int n = ctx.horizon.length;
    AgentModel model = compile_agent(par, ctx, others);
    int disagreements = 0;
    for (uint64_t bits = 0; bits < (1ull << (2 * n)); ++bits) {
        std::vector<uint8_t> theta(n), delta(n);
        for (int j = 0; j < n; ++j) {
            theta[j] = (bits >> j) & 1;
            delta[j] = (bits >> (n + j)) & 1;
        }
        bool log_ok = logical_feasible(ctx, par, others, theta, delta);
        bool milp_ok = check_fixed_binaries(model, theta, delta).feasible;
        if (log_ok != milp_ok) ++disagreements;
    }
    return disagreements;
}

}  // namespace

TEST_CASE("figure-style strategies compile feasible and bad ones do not") {
    GameContext ctx = tiny_context(6, 1, 1);
    VehicleParams par{0.02, 0.8, 0.5, 0.5, 0.6};
    OthersAggregates others = OthersAggregates::zeros(6);
    AgentModel model = compile_agent(par, ctx, others);

    // Not stopping: pulse on offsets 0..1.
    std::vector<uint8_t> theta = {1, 1, 0, 0, 0, 0};
    std::vector<uint8_t> delta(6, 0);
    CHECK(check_fixed_binaries(model, theta, delta).feasible);

    // Stop, wait 0..1, charge 2..3, merge at 4 with pulse 3..5.
    VehicleParams low{0.02, 0.42, 0.5, 0.5, 0.6};
    AgentModel model_low = compile_agent(low, ctx, others);
    theta = {0, 0, 0, 1, 1, 1};
    delta = {0, 0, 1, 1, 0, 0};
    CHECK(check_fixed_binaries(model_low, theta, delta).feasible);

    // Charging after the merge-back is rejected.
    delta = {0, 0, 0, 0, 1, 1};
    CHECK_FALSE(check_fixed_binaries(model_low, theta, delta).feasible);

    // Two pulses are rejected.
    theta = {1, 1, 0, 1, 1, 1};
    delta.assign(6, 0);
    CHECK_FALSE(check_fixed_binaries(model, theta, delta).feasible);
}

TEST_CASE("exhaustive equivalence on the tiny-instance matrix") {
    std::vector<VehicleParams> fleet = {
        {0.02, 0.70, 0.50, 0.5, 0.45},  // can drive on
        {0.02, 0.45, 0.50, 0.5, 0.70},  // must charge before leaving
        {0.09, 0.88, 0.50, 0.5, 0.70},  // nearly full: the battery cap bites
    };
    for (int th : {4, 5}) {
        for (int w : {0, 1}) {
            for (int hbar : {1, 2}) {
                if (th < 2 * w + 2) continue;
                GameContext ctx = tiny_context(th, w, hbar);
                for (const auto& par : fleet) {
                    OthersAggregates others = OthersAggregates::zeros(th);
                    CAPTURE(th);
                    CAPTURE(w);
                    CAPTURE(hbar);
                    CHECK(exhaustive_disagreements(ctx, par, others) == 0);
                }
            }
        }
    }
}

TEST_CASE("equivalence survives tight caps and prior commitments") {
    GameContext ctx = tiny_context(6, 1, 1);
    ctx.station = StationConfig{1, 1.8, 1, 0.5, 3.0};
    for (int j = 0; j < 6; ++j) {
        ctx.committed.theta_old[j] = j % 2;
        ctx.committed.u_old[j] = (j == 2) ? 1.5 : 0.0;
        ctx.committed.delta_old[j] = (j == 3) ? 1 : 0;
    }
    ctx.fifo_floor = 2;
    VehicleParams par{0.02, 0.45, 0.50, 0.5, 0.7};
    OthersAggregates others = OthersAggregates::zeros(6);
    others.u[4] = 0.4;
    others.delta[4] = 0;
    CHECK(exhaustive_disagreements(ctx, par, others) == 0);
}

TEST_CASE("constraint dump lists variables and rows") {
    GameContext ctx = tiny_context(4, 0, 1);
    VehicleParams par{0.02, 0.8, 0.5, 0.5, 0.6};
    AgentModel model = compile_agent(par, ctx, OthersAggregates::zeros(4));
    std::ostringstream out;
    dump_lp(model.set, out);
    std::string text = out.str();
    CHECK(text.find("u0") != std::string::npos);
    CHECK(text.find("one_rise") != std::string::npos);
    CHECK(text.find("rows") != std::string::npos);
}

namespace {

// Joint feasibility of a two-agent assignment: each side is checked against
// the other's aggregate footprint, which reproduces the shared coupling rows
// once both assignments are fixed.
bool joint_logical(const GameContext& ctx, const VehicleParams& par,
                   const std::vector<uint8_t>& th1, const std::vector<uint8_t>& de1,
                   const std::vector<uint8_t>& th2, const std::vector<uint8_t>& de2) {
    const int n = ctx.horizon.length;
    OthersAggregates from2 = OthersAggregates::zeros(n);
    OthersAggregates from1 = OthersAggregates::zeros(n);
    for (int j = 0; j < n; ++j) {
        from2.theta[j] = th2[j];
        from2.delta[j] = de2[j];
        from1.theta[j] = th1[j];
        from1.delta[j] = de1[j];
    }
    return logical_feasible(ctx, par, from2, th1, de1) &&
           logical_feasible(ctx, par, from1, th2, de2);
}

bool joint_milp(const GameContext& ctx, const VehicleParams& par,
                const std::vector<uint8_t>& th1, const std::vector<uint8_t>& de1,
                const std::vector<uint8_t>& th2, const std::vector<uint8_t>& de2) {
    const int n = ctx.horizon.length;
    OthersAggregates from2 = OthersAggregates::zeros(n);
    OthersAggregates from1 = OthersAggregates::zeros(n);
    for (int j = 0; j < n; ++j) {
        from2.theta[j] = th2[j];
        from2.delta[j] = de2[j];
        from1.theta[j] = th1[j];
        from1.delta[j] = de1[j];
    }
    AgentModel m1 = compile_agent(par, ctx, from2);
    AgentModel m2 = compile_agent(par, ctx, from1);
    return check_fixed_binaries(m1, th1, de1).feasible &&
           check_fixed_binaries(m2, th2, de2).feasible;
}

}  // namespace

TEST_CASE("joint equivalence with plug contention between two agents") {
    const int th = 4, w = 1;
    GameContext ctx = tiny_context(th, w, 1);
    ctx.station = StationConfig{1, 50.0, 1, 0.5, 3.0};  // one plug, ample energy
    VehicleParams par{0.02, 0.70, 0.50, 0.5, 0.45};

    long disagreements = 0;
    for (uint64_t bits = 0; bits < (1ull << (4 * th)); ++bits) {
        std::vector<uint8_t> th1(th), de1(th), th2(th), de2(th);
        for (int j = 0; j < th; ++j) {
            th1[j] = (bits >> j) & 1;
            de1[j] = (bits >> (th + j)) & 1;
            th2[j] = (bits >> (2 * th + j)) & 1;
            de2[j] = (bits >> (3 * th + j)) & 1;
        }
        if (joint_logical(ctx, par, th1, de1, th2, de2) !=
            joint_milp(ctx, par, th1, de1, th2, de2))
            ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("auxiliary binaries are pinned by their defining rows") {
    GameContext ctx = tiny_context(6, 1, 1);
    VehicleParams par{0.02, 0.42, 0.5, 0.5, 0.6};
    AgentModel model = compile_agent(par, ctx, OthersAggregates::zeros(6));
    std::vector<uint8_t> theta = {0, 0, 0, 1, 1, 1};
    std::vector<uint8_t> delta = {0, 0, 1, 1, 0, 0};
    FixedBinaryResult res = check_fixed_binaries(model, theta, delta);
    REQUIRE(res.feasible);

    // Flipping any auxiliary binary away from its propagated value must
    // violate at least one row, i.e. the gadgets leave no slack.
    std::vector<int> aux;
    for (int v : model.psi) aux.push_back(v);
    for (int v : model.sigma) aux.push_back(v);
    for (int v : model.phi_lh) aux.push_back(v);
    for (int v : model.phi_hl) aux.push_back(v);
    for (const auto& level : model.mu)
        for (int v : level) aux.push_back(v);
    aux.push_back(model.nu);
    for (int var : aux) {
        std::vector<double> flipped = res.assignment;
        flipped[var] = 1.0 - flipped[var];
        CHECK(!evaluate(model.set, flipped).empty());
    }
}
