#include "bpec/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpec::lp {

int LinearProgram::add_var(double lo, double hi, double obj) {
    objective.push_back(obj);
    lower.push_back(lo);
    upper.push_back(hi);
    for (auto& c : constraints) c.coeffs.push_back(0.0);
    return num_vars() - 1;
}

void LinearProgram::add_row(const std::vector<std::pair<int, double>>& terms, Relation rel, double rhs) {
    Constraint c;
    c.coeffs.assign(objective.size(), 0.0);
    for (const auto& [var, coef] : terms) c.coeffs.at(var) += coef;
    c.rel = rel;
    c.rhs = rhs;
    constraints.push_back(std::move(c));
}

double max_violation(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = 0.0;
    for (int j = 0; j < lp.num_vars(); ++j) {
        worst = std::max(worst, lp.lower[j] - x[j]);
        if (std::isfinite(lp.upper[j])) worst = std::max(worst, x[j] - lp.upper[j]);
    }
    for (const auto& c : lp.constraints) {
        double lhs = 0.0;
        for (int j = 0; j < lp.num_vars(); ++j) lhs += c.coeffs[j] * x[j];
        double v = lhs - c.rhs;
        if (c.rel == Relation::Le) worst = std::max(worst, v);
        else if (c.rel == Relation::Ge) worst = std::max(worst, -v);
        else worst = std::max(worst, std::abs(v));
    }
    return worst;
}

namespace {

constexpr double kCostTol = 1e-10;

// Bounded-variable primal simplex on a dense tableau. Every column j has bounds [0, ub[j]];
// nonbasic columns sit at one of their bounds.
class Tableau {
public:
    Tableau(int m, int ncols) : m_(m), n_(ncols), t_(static_cast<size_t>(m) * ncols, 0.0), beta_(m, 0.0),
                                ub_(ncols, kInf), at_upper_(ncols, false), basic_row_(ncols, -1), basis_(m, -1),
                                d_(ncols, 0.0) {}

    double& at(int i, int j) { return t_[static_cast<size_t>(i) * n_ + j]; }
    double at(int i, int j) const { return t_[static_cast<size_t>(i) * n_ + j]; }

    void set_basis(int row, int col) {
        basis_[row] = col;
        basic_row_[col] = row;
    }

    // Reduced costs for objective c (maximization).
    void price(const std::vector<double>& c) {
        cost_ = c;
        for (int j = 0; j < n_; ++j) {
            double v = c[j];
            for (int i = 0; i < m_; ++i) v -= c[basis_[i]] * at(i, j);
            d_[j] = v;
        }
        for (int j = 0; j < n_; ++j)
            if (basic_row_[j] >= 0) d_[j] = 0.0;
    }

    double value_of(int j) const {
        if (basic_row_[j] >= 0) return beta_[basic_row_[j]];
        return at_upper_[j] ? ub_[j] : 0.0;
    }

    double objective_value() const {
        double v = 0.0;
        for (int j = 0; j < n_; ++j) v += cost_[j] * value_of(j);
        return v;
    }

    // Returns false when the objective is unbounded.
    bool optimize(int& iterations, int max_iterations) {
        // Largest reduced cost first; after a long run of degenerate pivots fall back to Bland's
        // lowest-index rule, which cannot cycle.
        int degenerate_run = 0;
        bool bland = false;
        while (iterations < max_iterations) {
            int enter = -1;
            double best = 0.0;
            for (int j = 0; j < n_; ++j) {
                if (basic_row_[j] >= 0) continue;
                double gain = 0.0;
                if (!at_upper_[j] && d_[j] > kCostTol && ub_[j] > 0.0) gain = d_[j];
                else if (at_upper_[j] && d_[j] < -kCostTol) gain = -d_[j];
                else continue;
                if (bland) { enter = j; break; }
                if (gain > best) { best = gain; enter = j; }
            }
            if (enter < 0) return true;
            ++iterations;

            const double sigma = at_upper_[enter] ? -1.0 : 1.0;
            double step = ub_[enter];
            int leave_row = -1;
            for (int i = 0; i < m_; ++i) {
                double a = sigma * at(i, enter);
                if (std::abs(a) <= kPivotTol) continue;
                double limit;
                if (a > 0) limit = std::max(beta_[i], 0.0) / a;
                else {
                    double ub = ub_[basis_[i]];
                    if (!std::isfinite(ub)) continue;
                    limit = std::max(ub - beta_[i], 0.0) / -a;
                }
                bool better = limit < step - 1e-15;
                bool tie = !better && leave_row >= 0 && std::abs(limit - step) <= 1e-15 &&
                           basis_[i] < basis_[leave_row];
                if (better || tie) {
                    step = limit;
                    leave_row = i;
                }
            }
            if (!std::isfinite(step)) return false;
            degenerate_run = step <= 1e-15 ? degenerate_run + 1 : 0;
            if (degenerate_run > 50) bland = true;

            for (int i = 0; i < m_; ++i) beta_[i] -= sigma * step * at(i, enter);
            if (leave_row < 0) {
                at_upper_[enter] = !at_upper_[enter];
                continue;
            }

            const int leave = basis_[leave_row];
            const double entering_value = (at_upper_[enter] ? ub_[enter] : 0.0) + sigma * step;
            at_upper_[leave] = sigma * at(leave_row, enter) < 0;
            basic_row_[leave] = -1;
            at_upper_[enter] = false;
            pivot(leave_row, enter);
            beta_[leave_row] = entering_value;
        }
        throw std::runtime_error("simplex iteration limit reached");
    }

    int m_, n_;
    std::vector<double> t_;
    std::vector<double> beta_;
    std::vector<double> ub_;
    std::vector<bool> at_upper_;
    std::vector<int> basic_row_;
    std::vector<int> basis_;
    std::vector<double> d_;
    std::vector<double> cost_;

private:
    void pivot(int r, int col) {
        const double p = at(r, col);
        for (int j = 0; j < n_; ++j) at(r, j) /= p;
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            const double f = at(i, col);
            if (f == 0.0) continue;
            for (int j = 0; j < n_; ++j) at(i, j) -= f * at(r, j);
            at(i, col) = 0.0;
        }
        const double f = d_[col];
        if (f != 0.0)
            for (int j = 0; j < n_; ++j) d_[j] -= f * at(r, j);
        d_[col] = 0.0;
        set_basis(r, col);
    }
};

}  // namespace

Solution solve(const LinearProgram& lp) {
    const int n = lp.num_vars();
    const int m = static_cast<int>(lp.constraints.size());
    if (static_cast<int>(lp.lower.size()) != n || static_cast<int>(lp.upper.size()) != n)
        throw std::invalid_argument("bound vectors do not match the objective");
    for (const auto& c : lp.constraints)
        if (static_cast<int>(c.coeffs.size()) != n) throw std::invalid_argument("constraint dimension mismatch");
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(lp.lower[j])) throw std::invalid_argument("lower bounds must be finite");
        if (lp.upper[j] < lp.lower[j]) {
            Solution s;
            s.status = Status::Infeasible;
            return s;
        }
    }

    int num_slack = 0;
    for (const auto& c : lp.constraints)
        if (c.rel != Relation::Eq) ++num_slack;
    const int ncols = n + num_slack + m;
    const int art0 = n + num_slack;
    Tableau tab(m, ncols);
    std::vector<double> row_sign(m, 1.0);

    int slack = n;
    for (int i = 0; i < m; ++i) {
        const auto& c = lp.constraints[i];
        double rhs = c.rhs;
        for (int j = 0; j < n; ++j) {
            tab.at(i, j) = c.coeffs[j];
            rhs -= c.coeffs[j] * lp.lower[j];
        }
        if (c.rel == Relation::Le) tab.at(i, slack++) = 1.0;
        else if (c.rel == Relation::Ge) tab.at(i, slack++) = -1.0;
        if (rhs < 0) {
            row_sign[i] = -1.0;
            rhs = -rhs;
            for (int j = 0; j < art0; ++j) tab.at(i, j) = -tab.at(i, j);
        }
        tab.at(i, art0 + i) = 1.0;
        tab.set_basis(i, art0 + i);
        tab.beta_[i] = rhs;
    }
    for (int j = 0; j < n; ++j) tab.ub_[j] = lp.upper[j] - lp.lower[j];

    Solution sol;
    const int max_iter = 50000 + 50 * ncols;

    std::vector<double> phase1(ncols, 0.0);
    for (int i = 0; i < m; ++i) phase1[art0 + i] = -1.0;
    tab.price(phase1);
    tab.optimize(sol.iterations, max_iter);
    if (tab.objective_value() < -kFeasTol) {
        sol.status = Status::Infeasible;
        return sol;
    }

    // Artificials are pinned at zero from here on.
    for (int i = 0; i < m; ++i) {
        tab.ub_[art0 + i] = 0.0;
        tab.at_upper_[art0 + i] = false;
    }
    std::vector<double> phase2(ncols, 0.0);
    for (int j = 0; j < n; ++j) phase2[j] = lp.objective[j];
    tab.price(phase2);
    if (!tab.optimize(sol.iterations, max_iter)) {
        sol.status = Status::Unbounded;
        return sol;
    }

    sol.status = Status::Optimal;
    sol.witness.resize(n);
    for (int j = 0; j < n; ++j) {
        double v = lp.lower[j] + tab.value_of(j);
        if (std::isfinite(lp.upper[j])) v = std::min(v, lp.upper[j]);
        sol.witness[j] = std::max(v, lp.lower[j]);
    }
    sol.value = 0.0;
    for (int j = 0; j < n; ++j) sol.value += lp.objective[j] * sol.witness[j];

    // Dual certificate: y = c_B B^{-1} read off the artificial columns.
    sol.duals.resize(m);
    for (int i = 0; i < m; ++i) sol.duals[i] = -tab.d_[art0 + i] * row_sign[i];
    bool dual_ok = true;
    double dual_bound = 0.0;
    for (int i = 0; i < m; ++i) {
        const auto& c = lp.constraints[i];
        if (c.rel == Relation::Le && sol.duals[i] < -1e-7) dual_ok = false;
        if (c.rel == Relation::Ge && sol.duals[i] > 1e-7) dual_ok = false;
        dual_bound += sol.duals[i] * c.rhs;
    }
    for (int j = 0; j < n; ++j) {
        double r = lp.objective[j];
        for (int i = 0; i < m; ++i) r -= sol.duals[i] * lp.constraints[i].coeffs[j];
        if (r > 0) {
            if (!std::isfinite(lp.upper[j])) {
                if (r > 1e-7) dual_ok = false;
            } else {
                dual_bound += r * lp.upper[j];
            }
        } else {
            dual_bound += r * lp.lower[j];
        }
    }
    sol.duality_gap = dual_bound - sol.value;
    sol.certificate_ok = dual_ok && std::abs(sol.duality_gap) <= 1e-7 * std::max(1.0, std::abs(sol.value)) &&
                         max_violation(lp, sol.witness) <= kFeasTol;
    return sol;
}

bool feasible(const LinearProgram& lp) {
    LinearProgram copy = lp;
    std::fill(copy.objective.begin(), copy.objective.end(), 0.0);
    return solve(copy).status != Status::Infeasible;
}

}  // namespace bpec::lp
