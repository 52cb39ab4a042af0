#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairalloc::lp {

enum class Status { FeasibleOptimal, Infeasible, Unbounded };

inline const char* status_name(Status s) {
    switch (s) {
        case Status::FeasibleOptimal: return "FEASIBLE_OPTIMAL";
        case Status::Infeasible: return "INFEASIBLE";
        case Status::Unbounded: return "UNBOUNDED";
    }
    return "?";
}

struct Constraint {
    std::vector<double> a;
    double b = 0.0;
};

// Minimize c.x subject to equality rows a.x = b, inequality rows a.x <= b and
// per-variable bounds lo <= x <= hi (hi may be +infinity).
struct LinearProgram {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<Constraint> equalities;
    std::vector<Constraint> inequalities;
    std::vector<double> lower;
    std::vector<double> upper;

    // Adds a variable and returns its index.
    int add_variable(double lo, double hi, double cost = 0.0) {
        lower.push_back(lo);
        upper.push_back(hi);
        objective.push_back(cost);
        return num_vars++;
    }

    void add_equality(std::vector<double> a, double b) { equalities.push_back({std::move(a), b}); }
    void add_inequality(std::vector<double> a, double b) {
        inequalities.push_back({std::move(a), b});
    }

    void validate() const {
        if (num_vars <= 0) throw std::invalid_argument("lp: no variables");
        if (static_cast<int>(objective.size()) != num_vars ||
            static_cast<int>(lower.size()) != num_vars ||
            static_cast<int>(upper.size()) != num_vars)
            throw std::invalid_argument("lp: objective/bounds dimension mismatch");
        auto check_row = [&](const Constraint& c) {
            if (static_cast<int>(c.a.size()) != num_vars)
                throw std::invalid_argument("lp: constraint dimension mismatch");
            for (double v : c.a)
                if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite coefficient");
            if (!std::isfinite(c.b)) throw std::invalid_argument("lp: non-finite right-hand side");
        };
        for (const auto& c : equalities) check_row(c);
        for (const auto& c : inequalities) check_row(c);
        for (int j = 0; j < num_vars; ++j) {
            if (!std::isfinite(objective[j]))
                throw std::invalid_argument("lp: non-finite objective coefficient");
            if (!std::isfinite(lower[j]))
                throw std::invalid_argument("lp: lower bound must be finite");
            if (upper[j] < lower[j]) throw std::invalid_argument("lp: upper bound below lower");
        }
    }
};

struct Result {
    Status status = Status::Infeasible;
    std::vector<double> x;          // solution (FeasibleOptimal) or least-infeasible point
    double objective_value = 0.0;   // c.x when FeasibleOptimal
    double phase1_residual = 0.0;   // aggregated constraint violation certificate
    int iterations = 0;
};

namespace detail {

constexpr double kPivotTol = 1e-10;
constexpr double kReducedCostTol = 1e-10;

// Dense tableau over the standardized nonnegative variables.
struct Tableau {
    int ncols = 0;
    std::vector<std::vector<double>> rows;  // each: ncols coefficients + rhs
    std::vector<int> basic;                 // basic column per row
    int iterations = 0;

    double& rhs(int i) { return rows[i][ncols]; }

    void pivot(int r, int c) {
        const double p = rows[r][c];
        for (double& v : rows[r]) v /= p;
        for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
            if (i == r) continue;
            const double f = rows[i][c];
            if (f == 0.0) continue;
            for (int j = 0; j <= ncols; ++j) rows[i][j] -= f * rows[r][j];
        }
        basic[r] = c;
    }

    // Reduced costs and objective value for cost vector `cost` at the
    // current basis. Recomputed from scratch each pivot; the problems this
    // kernel targets are small enough that robustness wins over speed.
    void reduced_costs(const std::vector<double>& cost, std::vector<double>& out,
                       double& value) const {
        out.assign(ncols, 0.0);
        value = 0.0;
        for (int j = 0; j < ncols; ++j) out[j] = cost[j];
        for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
            const double cb = cost[basic[i]];
            if (cb == 0.0) continue;
            value += cb * rows[i][ncols];
            for (int j = 0; j < ncols; ++j) out[j] -= cb * rows[i][j];
        }
    }

    void dump(std::ostream& os) const {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            os << "  [basic " << basic[i] << "]";
            for (double v : rows[i]) os << " " << v;
            os << "\n";
        }
    }

    // Bland's rule: entering column = lowest index with negative reduced
    // cost; leaving row = minimum ratio, ties broken by lowest basic index.
    // Returns false at optimality; throws on unboundedness.
    bool step(const std::vector<double>& cost, const std::vector<bool>& banned,
              std::ostream* trace) {
        std::vector<double> rc;
        double value = 0.0;
        reduced_costs(cost, rc, value);
        int enter = -1;
        for (int j = 0; j < ncols; ++j) {
            if (banned[j]) continue;
            if (rc[j] < -kReducedCostTol) { enter = j; break; }
        }
        if (enter < 0) return false;

        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
            const double a = rows[i][enter];
            if (a <= kPivotTol) continue;
            const double ratio = rows[i][ncols] / a;
            if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 &&
                                         (leave < 0 || basic[i] < basic[leave]))) {
                best = ratio;
                leave = i;
            }
        }
        if (leave < 0) throw std::domain_error("unbounded");
        if (trace) {
            *trace << "pivot enter=" << enter << " leave_row=" << leave << " ratio=" << best
                   << " obj=" << value << "\n";
            dump(*trace);
        }
        pivot(leave, enter);
        ++iterations;
        if (iterations > 20000 + 50 * (ncols + static_cast<int>(rows.size())))
            throw std::runtime_error("lp: iteration limit exceeded");
        return true;
    }
};

}  // namespace detail

// Deterministic two-phase simplex. Bland's anti-cycling rule guarantees
// termination; identical inputs give identical outputs.
inline Result solve(const LinearProgram& prob, std::ostream* trace = nullptr) {
    prob.validate();
    const int n = prob.num_vars;

    // Shift to u = x - lower, u >= 0, u <= cap (cap possibly infinite).
    std::vector<double> cap(n);
    for (int j = 0; j < n; ++j) cap[j] = prob.upper[j] - prob.lower[j];

    enum RowKind { LE, GE, EQ };
    struct Row {
        std::vector<double> a;
        double b;
        RowKind kind;
    };
    std::vector<Row> rows;
    auto shift_b = [&](const Constraint& c) {
        double b = c.b;
        for (int j = 0; j < n; ++j) b -= c.a[j] * prob.lower[j];
        return b;
    };
    for (const auto& c : prob.equalities) rows.push_back({c.a, shift_b(c), EQ});
    for (const auto& c : prob.inequalities) rows.push_back({c.a, shift_b(c), LE});
    for (int j = 0; j < n; ++j) {
        if (!std::isfinite(cap[j])) continue;
        std::vector<double> a(n, 0.0);
        a[j] = 1.0;
        rows.push_back({std::move(a), cap[j], LE});
    }
    for (auto& r : rows) {
        if (r.b < 0.0) {
            for (double& v : r.a) v = -v;
            r.b = -r.b;
            if (r.kind == LE) r.kind = GE;
            else if (r.kind == GE) r.kind = LE;
        }
    }

    const int m = static_cast<int>(rows.size());
    int slacks = 0, artificials = 0;
    for (const auto& r : rows) {
        if (r.kind != EQ) ++slacks;
        if (r.kind != LE) ++artificials;
    }
    detail::Tableau tab;
    tab.ncols = n + slacks + artificials;
    tab.rows.assign(m, std::vector<double>(tab.ncols + 1, 0.0));
    tab.basic.assign(m, -1);

    int next_slack = n, next_art = n + slacks;
    std::vector<bool> is_artificial(tab.ncols, false);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) tab.rows[i][j] = rows[i].a[j];
        tab.rows[i][tab.ncols] = rows[i].b;
        if (rows[i].kind == LE) {
            tab.rows[i][next_slack] = 1.0;
            tab.basic[i] = next_slack++;
        } else if (rows[i].kind == GE) {
            tab.rows[i][next_slack++] = -1.0;
            tab.rows[i][next_art] = 1.0;
            is_artificial[next_art] = true;
            tab.basic[i] = next_art++;
        } else {
            tab.rows[i][next_art] = 1.0;
            is_artificial[next_art] = true;
            tab.basic[i] = next_art++;
        }
    }

    Result res;
    auto extract_x = [&]() {
        std::vector<double> x(n, 0.0);
        for (int i = 0; i < static_cast<int>(tab.rows.size()); ++i)
            if (tab.basic[i] < n) x[tab.basic[i]] = tab.rows[i][tab.ncols];
        // Degenerate pivots can leave basic values a hair outside their
        // bounds; snap back so callers can derive constraints from x.
        for (int j = 0; j < n; ++j) {
            x[j] = std::max(x[j], 0.0);
            if (std::isfinite(cap[j])) x[j] = std::min(x[j], cap[j]);
            x[j] += prob.lower[j];
        }
        return x;
    };

    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1_cost(tab.ncols, 0.0);
    for (int j = 0; j < tab.ncols; ++j)
        if (is_artificial[j]) phase1_cost[j] = 1.0;
    std::vector<bool> none(tab.ncols, false);
    try {
        while (tab.step(phase1_cost, none, trace)) {}
    } catch (const std::domain_error&) {
        throw std::runtime_error("lp: phase 1 reported unbounded (internal error)");
    }
    {
        std::vector<double> rc;
        double p1 = 0.0;
        tab.reduced_costs(phase1_cost, rc, p1);
        if (p1 > 1e-9) {
            res.status = Status::Infeasible;
            res.phase1_residual = p1;
            res.x = extract_x();
            res.iterations = tab.iterations;
            return res;
        }
        res.phase1_residual = std::max(p1, 0.0);
    }

    // Drive leftover artificials out of the basis; drop redundant rows.
    for (int i = m - 1; i >= 0; --i) {
        if (!is_artificial[tab.basic[i]]) continue;
        int col = -1;
        for (int j = 0; j < tab.ncols; ++j) {
            if (is_artificial[j]) continue;
            if (std::abs(tab.rows[i][j]) > detail::kPivotTol) { col = j; break; }
        }
        if (col >= 0) {
            tab.pivot(i, col);
        } else {
            tab.rows.erase(tab.rows.begin() + i);
            tab.basic.erase(tab.basic.begin() + i);
        }
    }

    // Phase 2: minimize the real objective with artificials banned.
    std::vector<double> cost(tab.ncols, 0.0);
    for (int j = 0; j < n; ++j) cost[j] = prob.objective[j];
    try {
        while (tab.step(cost, is_artificial, trace)) {}
    } catch (const std::domain_error&) {
        res.status = Status::Unbounded;
        res.x = extract_x();
        res.iterations = tab.iterations;
        return res;
    }

    res.status = Status::FeasibleOptimal;
    res.x = extract_x();
    res.objective_value = 0.0;
    for (int j = 0; j < n; ++j) res.objective_value += prob.objective[j] * res.x[j];
    res.iterations = tab.iterations;
    return res;
}

// Largest violation of the program's constraints and bounds at x.
inline double feasibility_residual(const LinearProgram& prob, const std::vector<double>& x) {
    double worst = 0.0;
    for (const auto& c : prob.equalities) {
        double v = -c.b;
        for (int j = 0; j < prob.num_vars; ++j) v += c.a[j] * x[j];
        worst = std::max(worst, std::abs(v));
    }
    for (const auto& c : prob.inequalities) {
        double v = -c.b;
        for (int j = 0; j < prob.num_vars; ++j) v += c.a[j] * x[j];
        worst = std::max(worst, v);
    }
    for (int j = 0; j < prob.num_vars; ++j) {
        worst = std::max(worst, prob.lower[j] - x[j]);
        if (std::isfinite(prob.upper[j])) worst = std::max(worst, x[j] - prob.upper[j]);
    }
    return worst;
}

}  // namespace fairalloc::lp
