#include "hwsim/milp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace hwsim {
namespace milp {

AffExpr AffExpr::of(int var, double coef, double c) {
    AffExpr e;
    e.constant = c;
    e.terms.push_back({var, coef});
    return e;
}

AffExpr& AffExpr::add(int var, double coef) {
    terms.push_back({var, coef});
    return *this;
}

AffExpr& AffExpr::operator+=(const AffExpr& other) {
    constant += other.constant;
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    return *this;
}

namespace {
AffExpr scaled(const AffExpr& e, double s) {
    AffExpr out;
    out.constant = e.constant * s;
    out.terms.reserve(e.terms.size());
    for (const auto& t : e.terms) out.terms.push_back({t.var, t.coef * s});
    return out;
}
}  // namespace

int ConstraintSet::add_var(std::string name, VarKind kind, double lo, double hi) {
    vars.push_back({std::move(name), kind, lo, hi});
    return static_cast<int>(vars.size()) - 1;
}

void ConstraintSet::add_row(const AffExpr& lhs, Rel rel, double rhs, std::string tag) {
    Row row;
    row.rel = rel;
    row.rhs = rhs - lhs.constant;  // constants live on the right-hand side
    row.tag = std::move(tag);
    for (const auto& t : lhs.terms)
        if (t.coef != 0.0) row.lhs.push_back(t);
    rows.push_back(std::move(row));
}

void ConstraintSet::add_le(const AffExpr& lhs, double rhs, std::string tag) {
    add_row(lhs, Rel::Le, rhs, std::move(tag));
}

void ConstraintSet::add_ge(const AffExpr& lhs, double rhs, std::string tag) {
    add_row(scaled(lhs, -1.0), Rel::Le, -rhs, std::move(tag));
}

void ConstraintSet::add_eq(const AffExpr& lhs, double rhs, std::string tag) {
    add_row(lhs, Rel::Eq, rhs, std::move(tag));
}

void gadget_geq(ConstraintSet& set, int phi, const AffExpr& f, double c, double M,
                double m, double eps, const std::string& tag) {
    if (m > c || c > M)
        throw std::invalid_argument("gadget_geq: threshold outside [m, M] for " + tag);
    // (c - m) phi <= f - m
    AffExpr r1 = AffExpr::of(phi, c - m);
    r1 += scaled(f, -1.0);
    set.add_le(r1, -m, tag + ":geq1");
    // (M - c + eps) phi >= f - c + eps
    AffExpr r2 = f;
    r2.add(phi, -(M - c + eps));
    set.add_le(r2, c - eps, tag + ":geq2");
}

void gadget_leq(ConstraintSet& set, int phi, const AffExpr& f, double c, double M,
                double m, double eps, const std::string& tag) {
    if (m > c || c > M)
        throw std::invalid_argument("gadget_leq: threshold outside [m, M] for " + tag);
    // (M - c) phi <= M - f
    AffExpr r1 = AffExpr::of(phi, M - c);
    r1 += f;
    set.add_le(r1, M, tag + ":leq1");
    // (c + eps - m) phi >= eps + c - f
    AffExpr r2 = scaled(f, -1.0);
    r2.add(phi, -(c + eps - m));
    set.add_le(r2, -eps - c, tag + ":leq2");
}

void gadget_and(ConstraintSet& set, int phi, const AffExpr& sigma, const AffExpr& tau,
                const std::string& tag) {
    AffExpr r1 = scaled(sigma, -1.0);
    r1.add(phi, 1.0);
    set.add_le(r1, 0.0, tag + ":and1");
    AffExpr r2 = scaled(tau, -1.0);
    r2.add(phi, 1.0);
    set.add_le(r2, 0.0, tag + ":and2");
    AffExpr r3 = sigma;
    r3 += tau;
    r3.add(phi, -1.0);
    set.add_le(r3, 1.0, tag + ":and3");
}

void gadget_product(ConstraintSet& set, int g, const AffExpr& f, int phi, double M,
                    double m, const std::string& tag) {
    // m phi <= g <= M phi
    AffExpr r1 = AffExpr::of(phi, m);
    r1.add(g, -1.0);
    set.add_le(r1, 0.0, tag + ":prod1");
    AffExpr r2 = AffExpr::of(g, 1.0);
    r2.add(phi, -M);
    set.add_le(r2, 0.0, tag + ":prod2");
    // -M (1 - phi) <= g - f <= -m (1 - phi)
    AffExpr r3 = f;  // f - g + M phi <= M  is  -M(1-phi) <= g - f
    r3.add(g, -1.0);
    r3.add(phi, M);
    set.add_le(r3, M, tag + ":prod3");
    AffExpr r4 = AffExpr::of(g, 1.0);  // g - f - m phi <= -m
    r4 += scaled(f, -1.0);
    r4.add(phi, -m);
    set.add_le(r4, -m, tag + ":prod4");
}

namespace {

int pulse_cap(int offset, int w) { return std::min(offset + 1, 2 * w + 1); }

std::string idx(const std::string& base, int j) { return base + std::to_string(j); }

}  // namespace

AgentModel compile_agent(const VehicleParams& params, const GameContext& ctx,
                         const OthersAggregates& others) {
    AgentModel model;
    model.params = params;
    model.ctx = ctx;
    ConstraintSet& set = model.set;

    const int n = ctx.horizon.length;
    const int w = ctx.horizon.entry_half_width;
    const int hbar = ctx.station.min_charge_intervals;
    const double u_lo = ctx.station.u_min;
    const double u_hi = ctx.station.u_max_per_vehicle;
    const double eps = kGadgetEps;

    for (int j = 0; j < n; ++j)
        model.u.push_back(set.add_var(idx("u", j), VarKind::Continuous, 0.0, u_hi));
    for (int j = 0; j <= n; ++j)
        model.x.push_back(set.add_var(idx("x", j), VarKind::Continuous, 0.0, 1.0));
    for (int j = 0; j < n; ++j)
        model.delta.push_back(set.add_var(idx("de", j), VarKind::Binary, 0.0, 1.0));
    for (int j = 0; j < n; ++j)
        model.theta.push_back(set.add_var(idx("th", j), VarKind::Binary, 0.0, 1.0));
    for (int j = 0; j <= n; ++j)
        model.psi.push_back(set.add_var(idx("psi", j), VarKind::Binary, 0.0, 1.0));
    for (int j = 0; j < n; ++j)
        model.sigma.push_back(set.add_var(idx("sig", j), VarKind::Binary, 0.0, 1.0));
    for (int j = 0; j < n; ++j)
        model.omega.push_back(set.add_var(idx("om", j), VarKind::Binary, 0.0, 1.0));
    for (int j = 0; j <= n; ++j)
        model.phi_lh.push_back(set.add_var(idx("lh", j), VarKind::Binary, 0.0, 1.0));
    for (int j = 0; j <= n; ++j)
        model.phi_hl.push_back(set.add_var(idx("hl", j), VarKind::Binary, 0.0, 1.0));
    model.mu.resize(hbar);
    for (int h = 1; h <= hbar; ++h)
        for (int j = 0; j < n; ++j)
            model.mu[h - 1].push_back(set.add_var(
                "mu" + std::to_string(h) + "_" + std::to_string(j), VarKind::Binary,
                0.0, 1.0));
    for (int j = 0; j < n; ++j) {
        double lo = -pulse_cap(j, w);
        double hi = n - pulse_cap(j, w);
        model.g.push_back(set.add_var(idx("g", j), VarKind::Integer, lo, hi));
        model.q.push_back(set.add_var(idx("q", j), VarKind::Integer, std::min(lo, 0.0),
                                      std::max(hi, 0.0)));
    }
    model.nu = set.add_var("nu", VarKind::Binary, 0.0, 1.0);

    // theta/delta as expressions with zero padding outside the horizon.
    auto th = [&](int j) -> AffExpr {
        return (j >= 0 && j < n) ? AffExpr::of(model.theta[j]) : AffExpr(0.0);
    };
    auto de = [&](int j) -> AffExpr {
        return (j >= 0 && j < n) ? AffExpr::of(model.delta[j]) : AffExpr(0.0);
    };
    auto one_minus = [&](const AffExpr& e) {
        AffExpr out = scaled(e, -1.0);
        out.constant += 1.0;
        return out;
    };

    // Battery dynamics anchored at the sensed SoC.
    set.add_eq(AffExpr::of(model.x[0]), params.x0, "soc_init");
    for (int j = 0; j < n; ++j) {
        AffExpr e = AffExpr::of(model.x[j + 1]);
        e.add(model.x[j], -1.0);
        e.add(model.u[j], -params.b);
        set.add_eq(e, 0.0, idx("soc_dyn", j));
    }

    // Energy box tied to the plug indicator, plus the threshold gadget that
    // makes the indicator exact.
    for (int j = 0; j < n; ++j) {
        AffExpr up = AffExpr::of(model.u[j]);
        up.add(model.delta[j], -u_hi);
        set.add_le(up, 0.0, idx("u_upper", j));
        AffExpr lo = AffExpr::of(model.delta[j], u_lo);
        lo.add(model.u[j], -1.0);
        set.add_le(lo, 0.0, idx("u_lower", j));
        gadget_geq(set, model.delta[j], AffExpr::of(model.u[j]), u_lo, u_hi, 0.0, eps,
                   idx("delta_u", j));
    }

    // Rising and falling edges of the entry pulse, one of each.
    for (int j = 0; j <= n; ++j) {
        gadget_and(set, model.phi_lh[j], one_minus(th(j - 1)), th(j), idx("edge_lh", j));
        gadget_and(set, model.phi_hl[j], th(j - 1), one_minus(th(j)), idx("edge_hl", j));
    }
    AffExpr rises, falls;
    for (int j = 0; j <= n; ++j) {
        rises.add(model.phi_lh[j]);
        falls.add(model.phi_hl[j]);
    }
    set.add_eq(rises, 1.0, "one_rise");
    set.add_eq(falls, 1.0, "one_fall");

    // A pulse that starts at the decision interval covers the whole first
    // window {k..k+W}.
    for (int j = 1; j <= w && j < n; ++j) {
        AffExpr e = AffExpr::of(model.theta[0]);
        e.add(model.theta[j], -1.0);
        set.add_le(e, 0.0, idx("start_window", j));
    }

    // Pulse width pinned at the falling edge: sum(theta) equals the width of
    // the entry window ending at that offset.
    AffExpr theta_sum;
    for (int j = 0; j < n; ++j) theta_sum.add(model.theta[j]);
    for (int j = 0; j < n; ++j) {
        AffExpr e = AffExpr::of(model.g[j]);
        e += scaled(theta_sum, -1.0);
        set.add_eq(e, -pulse_cap(j, w), idx("g_def", j));
        gadget_product(set, model.q[j], AffExpr::of(model.g[j]), model.phi_hl[j + 1],
                       n - pulse_cap(j, w), -pulse_cap(j, w), idx("q_prod", j));
        set.add_eq(AffExpr::of(model.q[j]), 0.0, idx("width_at_fall", j));
    }

    // No charging once the merge-back edge is near or past.
    for (int j = 0; j < n; ++j) {
        AffExpr e = de(j);
        for (int p = 0; p <= std::min(j + w + 1, n); ++p) e.add(model.phi_hl[p]);
        set.add_le(e, 1.0, idx("no_charge_after_exit", j));
    }

    // End of charging sits inside the entry window.
    for (int j = 0; j <= n; ++j) {
        gadget_and(set, model.psi[j], de(j - 1), one_minus(de(j)), idx("psi_def", j));
        for (int r = std::max(0, j - w); r <= j + w; ++r) {
            AffExpr e = AffExpr::of(model.psi[j]);
            e += scaled(th(r), -1.0);  // constant 0 past the horizon forces psi = 0
            set.add_le(e, 0.0, idx("exit_window", j) + "_" + std::to_string(r));
        }
    }

    // Charge runs last at least h_bar intervals past their start.
    for (int j = 0; j < n; ++j) {
        gadget_and(set, model.sigma[j], one_minus(de(j - 1)), de(j), idx("sigma_def", j));
        AffExpr mu_sum;
        for (int h = 1; h <= hbar; ++h) {
            gadget_and(set, model.mu[h - 1][j], AffExpr::of(model.sigma[j]), de(j + h),
                       "mu" + std::to_string(h) + "_def" + std::to_string(j));
            mu_sum.add(model.mu[h - 1][j]);
        }
        mu_sum.add(model.sigma[j], -static_cast<double>(hbar));
        set.add_eq(mu_sum, 0.0, idx("charge_run", j));
    }

    // Minimum stay: a pulse wider than the no-stop window keeps the first
    // W+1 offsets clear, and vice versa.
    gadget_geq(set, model.nu, theta_sum, w + 2, n, 0.0, eps, "nu_def");
    AffExpr stay = AffExpr::of(model.nu);
    for (int p = 0; p <= w && p < n; ++p)
        stay.add(model.theta[p], 1.0 / (w + 1));
    set.add_le(stay, 1.0, "min_stay_hi");
    set.add_ge(stay, eps, "min_stay_lo");

    // SoC gate on leaving: omega flags a battery below the trip threshold and
    // then blocks the entry-window offset it maps to.
    for (int j = 0; j < n; ++j) {
        gadget_leq(set, model.omega[j], AffExpr::of(model.x[j]), params.x_ref, 1.0,
                   0.0, eps, idx("omega_def", j));
        AffExpr e = AffExpr::of(model.omega[j]);
        e += th(std::max(0, j - w));
        set.add_le(e, 1.0, idx("min_soc_gate", j));
    }

    // Shared station limits given everyone already counted.
    for (int j = 0; j < n; ++j) {
        double residual = ctx.station.max_energy_per_interval -
                          ctx.committed.u_old[j] - others.u[j];
        model.u_cap.push_back(residual);
        set.add_le(AffExpr::of(model.u[j]), residual, idx("energy_cap", j));
        set.add_le(AffExpr::of(model.delta[j]),
                   static_cast<double>(ctx.station.plug_count -
                                       ctx.committed.delta_old[j] - others.delta[j]),
                   idx("plug_cap", j));
    }

    // Queue precedence.
    for (int j = 0; j < n; ++j)
        if (ctx.horizon.k + j < ctx.fifo_floor)
            set.add_le(AffExpr::of(model.delta[j]), 0.0, idx("fifo", j));

    return model;
}

std::vector<std::string> evaluate(const ConstraintSet& set,
                                  std::span<const double> assignment, double tol) {
    std::vector<std::string> violated;
    for (size_t v = 0; v < set.vars.size(); ++v) {
        const auto& info = set.vars[v];
        double val = assignment[v];
        if (val < info.lo - tol || val > info.hi + tol)
            violated.push_back("bound:" + info.name);
        if (info.kind != VarKind::Continuous &&
            std::abs(val - std::llround(val)) > tol)
            violated.push_back("integrality:" + info.name);
    }
    for (const auto& row : set.rows) {
        double lhs = 0.0;
        for (const auto& t : row.lhs) lhs += t.coef * assignment[t.var];
        bool ok = row.rel == Rel::Le ? lhs <= row.rhs + tol
                                     : std::abs(lhs - row.rhs) <= tol;
        if (!ok) violated.push_back(row.tag);
    }
    return violated;
}

FixedBinaryResult check_fixed_binaries(const AgentModel& model,
                                       std::span<const uint8_t> theta,
                                       std::span<const uint8_t> delta) {
    const GameContext& ctx = model.ctx;
    const VehicleParams& par = model.params;
    const int n = ctx.horizon.length;
    const int w = ctx.horizon.entry_half_width;
    const double eps = kGadgetEps;

    FixedBinaryResult res;
    res.assignment.assign(model.set.vars.size(), 0.0);
    auto& a = res.assignment;

    auto th_at = [&](int j) -> int { return (j >= 0 && j < n) ? theta[j] : 0; };
    auto de_at = [&](int j) -> int { return (j >= 0 && j < n) ? delta[j] : 0; };

    for (int j = 0; j < n; ++j) a[model.theta[j]] = theta[j];
    for (int j = 0; j < n; ++j) a[model.delta[j]] = delta[j];

    // Every auxiliary binary/integer is a function of (theta, delta).
    int theta_sum = 0;
    for (int j = 0; j < n; ++j) theta_sum += theta[j];
    for (int j = 0; j <= n; ++j) {
        a[model.phi_lh[j]] = (!th_at(j - 1) && th_at(j)) ? 1.0 : 0.0;
        a[model.phi_hl[j]] = (th_at(j - 1) && !th_at(j)) ? 1.0 : 0.0;
        a[model.psi[j]] = (de_at(j - 1) && !de_at(j)) ? 1.0 : 0.0;
    }
    for (int j = 0; j < n; ++j) {
        a[model.sigma[j]] = (!de_at(j - 1) && de_at(j)) ? 1.0 : 0.0;
        for (size_t h = 0; h < model.mu.size(); ++h)
            a[model.mu[h][j]] =
                (a[model.sigma[j]] > 0.5 && de_at(j + static_cast<int>(h) + 1)) ? 1.0
                                                                                : 0.0;
        a[model.g[j]] = theta_sum - pulse_cap(j, w);
        a[model.q[j]] = a[model.phi_hl[j + 1]] > 0.5 ? a[model.g[j]] : 0.0;
    }
    a[model.nu] = theta_sum >= w + 2 ? 1.0 : 0.0;

    // Continuous remainder: find an energy allocation that satisfies the
    // per-interval boxes, the shared cap, the battery, and the SoC gates.
    std::vector<double> lo(n, 0.0), hi(n, 0.0);
    bool box_ok = true;
    for (int j = 0; j < n; ++j) {
        if (!delta[j]) continue;
        lo[j] = ctx.station.u_min;
        hi[j] = std::min(ctx.station.u_max_per_vehicle, model.u_cap[j]);
        if (hi[j] < lo[j] - 1e-12) box_ok = false;
    }

    int first_gate = -1;
    for (int j = 0; j < n && first_gate < 0; ++j)
        if (th_at(std::max(0, j - w))) first_gate = j;

    std::vector<double> u(n, 0.0);
    bool u_ok = box_ok;
    if (u_ok) {
        for (int j = 0; j < n; ++j) u[j] = lo[j];
        double need = 0.0;
        if (first_gate >= 0) need = (par.x_ref + eps - par.x0) / par.b;
        double have = 0.0;
        for (int j = 0; j < first_gate; ++j) have += u[j];
        for (int j = 0; j < first_gate && have < need; ++j) {
            double bump = std::min(hi[j] - u[j], need - have);
            u[j] += bump;
            have += bump;
        }
        if (first_gate >= 0 && have < need - 1e-12) u_ok = false;
        double total = 0.0;
        for (int j = 0; j < n; ++j) total += u[j];
        if (par.x0 + par.b * total > 1.0 + 1e-12) u_ok = false;
    }
    if (!u_ok) {
        res.feasible = false;
        res.violated_rows.push_back("no_energy_allocation");
        return res;
    }

    for (int j = 0; j < n; ++j) a[model.u[j]] = u[j];
    a[model.x[0]] = par.x0;
    for (int j = 0; j < n; ++j) a[model.x[j + 1]] = a[model.x[j]] + par.b * u[j];
    for (int j = 0; j < n; ++j)
        a[model.omega[j]] = a[model.x[j]] <= par.x_ref ? 1.0 : 0.0;

    res.violated_rows = evaluate(model.set, res.assignment);
    res.feasible = res.violated_rows.empty();
    return res;
}

void dump_lp(const ConstraintSet& set, std::ostream& out) {
    out << "vars " << set.vars.size() << "\n";
    for (const auto& v : set.vars) {
        const char* kind = v.kind == VarKind::Continuous ? "cont"
                           : v.kind == VarKind::Binary   ? "bin"
                                                         : "int";
        out << "  " << v.name << " " << kind << " [" << v.lo << ", " << v.hi << "]\n";
    }
    out << "rows " << set.rows.size() << "\n";
    for (const auto& row : set.rows) {
        out << "  " << row.tag << ": ";
        for (const auto& t : row.lhs)
            out << (t.coef >= 0 ? "+" : "") << t.coef << "*" << set.vars[t.var].name
                << " ";
        out << (row.rel == Rel::Le ? "<= " : "== ") << row.rhs << "\n";
    }
}

}  // namespace milp
}  // namespace hwsim
