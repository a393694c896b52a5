#pragma once

#include <limits>
#include <vector>

namespace bpec::lp {

enum class Relation { Le, Eq, Ge };
enum class Status { Optimal, Infeasible, Unbounded };

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kFeasTol = 1e-9;
inline constexpr double kPivotTol = 1e-12;

struct Constraint {
    std::vector<double> coeffs;
    Relation rel = Relation::Le;
    double rhs = 0.0;
};

// maximize objective . x  subject to constraints and lower <= x <= upper.
// Lower bounds must be finite; upper bounds may be +inf.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<Constraint> constraints;
    std::vector<double> lower;
    std::vector<double> upper;

    int num_vars() const { return static_cast<int>(objective.size()); }
    int add_var(double lo = 0.0, double hi = kInf, double obj = 0.0);
    // Sparse row helper: pairs of (variable, coefficient).
    void add_row(const std::vector<std::pair<int, double>>& terms, Relation rel, double rhs);
};

struct Solution {
    Status status = Status::Infeasible;
    double value = 0.0;
    std::vector<double> witness;
    // Row duals of the final basis and the resulting duality gap (dual bound minus value).
    std::vector<double> duals;
    double duality_gap = 0.0;
    bool certificate_ok = false;
    int iterations = 0;

    bool optimal() const { return status == Status::Optimal; }
};

Solution solve(const LinearProgram& lp);
bool feasible(const LinearProgram& lp);

// Largest violation of rows and bounds by x; used by tests and by the solver's self-check.
double max_violation(const LinearProgram& lp, const std::vector<double>& x);

}  // namespace bpec::lp
