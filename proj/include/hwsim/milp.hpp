#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hwsim/game.hpp"

namespace hwsim {
namespace milp {

enum class VarKind { Continuous, Binary, Integer };

struct VarInfo {
    std::string name;
    VarKind kind = VarKind::Continuous;
    double lo = 0.0;
    double hi = 1.0;
};

struct LinTerm {
    int var = -1;
    double coef = 0.0;
};

// Small affine expression: sum of terms plus a constant.
struct AffExpr {
    std::vector<LinTerm> terms;
    double constant = 0.0;

    AffExpr() = default;
    AffExpr(double c) : constant(c) {}
    static AffExpr of(int var, double coef = 1.0, double c = 0.0);
    AffExpr& add(int var, double coef = 1.0);
    AffExpr& operator+=(const AffExpr& other);
};

enum class Rel { Le, Eq };

struct Row {
    std::vector<LinTerm> lhs;
    Rel rel = Rel::Le;
    double rhs = 0.0;
    std::string tag;
};

struct ConstraintSet {
    std::vector<VarInfo> vars;
    std::vector<Row> rows;

    int add_var(std::string name, VarKind kind, double lo, double hi);
    void add_row(const AffExpr& lhs, Rel rel, double rhs, std::string tag);
    // lhs <= rhs and lhs >= rhs expressed through Le rows.
    void add_le(const AffExpr& lhs, double rhs, std::string tag);
    void add_ge(const AffExpr& lhs, double rhs, std::string tag);
    void add_eq(const AffExpr& lhs, double rhs, std::string tag);
};

// Tolerance used by the threshold gadgets to separate the two sides of an
// indicator, and by the strict inequality of the minimum-stay rows.
inline constexpr double kGadgetEps = 1e-6;

// [phi = 1] <=> [f >= c].  m and c must satisfy m <= c <= M where [m, M]
// bounds f over its variable box; anything else makes the gadget vacuous or
// infeasible and is rejected.
void gadget_geq(ConstraintSet& set, int phi, const AffExpr& f, double c, double M,
                double m, double eps, const std::string& tag);

// [phi = 1] <=> [f <= c], mirror of gadget_geq.
void gadget_leq(ConstraintSet& set, int phi, const AffExpr& f, double c, double M,
                double m, double eps, const std::string& tag);

// [phi = 1] <=> [sigma = 1 and tau = 1] for affine 0/1-valued expressions.
void gadget_and(ConstraintSet& set, int phi, const AffExpr& sigma, const AffExpr& tau,
                const std::string& tag);

// g = phi * f for binary phi: phi = 0 forces g = 0, phi = 1 forces g = f.
void gadget_product(ConstraintSet& set, int g, const AffExpr& f, int phi, double M,
                    double m, const std::string& tag);

// Variable layout of one compiled agent. Vectors are indexed by horizon
// offset; phi_lh/phi_hl and psi carry one extra slot for the edge that may
// fall just past the horizon.
struct AgentModel {
    ConstraintSet set;
    VehicleParams params;
    GameContext ctx;
    std::vector<double> u_cap;  // residual shared energy available per offset
    std::vector<int> u, x, delta, theta, psi, sigma, omega;
    std::vector<int> phi_lh, phi_hl;
    std::vector<std::vector<int>> mu;  // [h-1][offset]
    std::vector<int> g, q;
    int nu = -1;
};

// Translates the full logical constraint stack of one agent into
// mixed-integer affine rows, with every big-M taken as the exact bound of
// the guarded expression over its box.
AgentModel compile_agent(const VehicleParams& params, const GameContext& ctx,
                         const OthersAggregates& others);

// Mechanical row check: returns the tags of all rows the assignment
// violates beyond `tol`.
std::vector<std::string> evaluate(const ConstraintSet& set,
                                  std::span<const double> assignment,
                                  double tol = 1e-9);

// Decides whether the compiled set admits any completion for fixed theta and
// delta columns. All auxiliary binaries and integers are uniquely pinned by
// their defining gadgets; the continuous remainder reduces to a one-sided
// energy allocation, which is constructed and then verified row by row.
struct FixedBinaryResult {
    bool feasible = false;
    std::vector<double> assignment;   // full witness when feasible
    std::vector<std::string> violated_rows;
};
FixedBinaryResult check_fixed_binaries(const AgentModel& model,
                                       std::span<const uint8_t> theta,
                                       std::span<const uint8_t> delta);

// Plain-text dump of variables, bounds and rows.
void dump_lp(const ConstraintSet& set, std::ostream& out);

}  // namespace milp
}  // namespace hwsim
