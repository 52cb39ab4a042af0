#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lp.hpp"
#include "metrics.hpp"
#include "policy.hpp"
#include "population.hpp"

namespace fairalloc {

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ConstraintKind { SpAllocation, CspAllocation, SpOutcomes, CspOutcomes };

struct FairnessConstraint {
    ConstraintKind kind = ConstraintKind::SpOutcomes;
    Scope legit = Scope::L0;  // conditioning levels for the Csp* kinds
};

struct FeasibilitySpec {
    std::vector<FairnessConstraint> constraints;
    double budget = 1.0;
    Scope scope = Scope::L0xL1;
    double tolerance = 1e-9;
};

enum class FeasibilityStatus { Feasible, Infeasible, InfeasibleByCondition };

inline const char* feasibility_status_name(FeasibilityStatus s) {
    switch (s) {
        case FeasibilityStatus::Feasible: return "FEASIBLE";
        case FeasibilityStatus::Infeasible: return "INFEASIBLE";
        case FeasibilityStatus::InfeasibleByCondition: return "INFEASIBLE_BY_CONDITION";
    }
    return "?";
}

// One pairwise linear condition: sum_s a[s]*q_s = rhs for groups (g, g2).
struct PairCoefficients {
    std::string g;
    std::string g2;
    std::vector<double> a;
    double rhs = 0.0;
};

struct FeasibilityResult {
    FeasibilityStatus status = FeasibilityStatus::Infeasible;
    // Satisfying policy when feasible; the gap-minimizing policy otherwise.
    std::optional<Policy> policy;
    // Minimal achievable max-abs outcome gap under the remaining constraints.
    std::optional<double> residual_disparity;
    std::vector<ScopeKey> keys;  // column order of coefficient vectors
    std::vector<PairCoefficients> coefficients;
    double budget = 1.0;
    double budget_usage = 0.0;
    bool budget_exceeded = false;
    std::vector<std::string> group_order;           // outcome-parity construction ordering
    std::map<std::string, double> group_rates;      // within-group rates of that construction
    std::map<std::string, std::vector<double>> tau_by_group;  // per-group effect audit per key
    std::vector<std::string> warnings;
};

namespace synth_detail {

// Per-scope linearization of the model: outcome_g(q) = baseline[g] + W[g].q,
// allocation rate_g(q) = M[g].q, budget(q) = key_mass.q.
struct ScopeSystem {
    Scope scope;
    std::vector<ScopeKey> keys;
    std::map<ScopeKey, int> index;
    std::vector<double> key_mass;
    std::vector<std::string> groups;
    std::vector<double> group_mass;
    std::vector<double> baseline;
    std::vector<double> ate;
    std::vector<std::vector<double>> outcome_w;  // [group][key]
    std::vector<std::vector<double>> alloc_w;    // [group][key]
};

inline ScopeSystem build_system(const PopulationModel& model, Scope scope) {
    ScopeSystem sys;
    sys.scope = scope;
    for (const Cell& c : model.cells) {
        const ScopeKey k = project(c, scope);
        if (!sys.index.count(k)) {
            sys.index[k] = 0;
            sys.keys.push_back(k);
        }
    }
    std::sort(sys.keys.begin(), sys.keys.end());
    for (std::size_t i = 0; i < sys.keys.size(); ++i) sys.index[sys.keys[i]] = static_cast<int>(i);
    sys.key_mass.assign(sys.keys.size(), 0.0);
    sys.groups = model.groups;
    const std::size_t n = sys.groups.size(), k = sys.keys.size();
    sys.group_mass.assign(n, 0.0);
    sys.baseline.assign(n, 0.0);
    sys.ate.assign(n, 0.0);
    sys.outcome_w.assign(n, std::vector<double>(k, 0.0));
    sys.alloc_w.assign(n, std::vector<double>(k, 0.0));
    std::map<std::string, std::size_t> gi;
    for (std::size_t i = 0; i < n; ++i) gi[sys.groups[i]] = i;
    for (const Cell& c : model.cells) sys.group_mass[gi[c.group]] += c.mass;
    for (const Cell& c : model.cells) {
        const std::size_t g = gi[c.group];
        const int s = sys.index[project(c, scope)];
        const double w = c.mass / sys.group_mass[g];
        sys.key_mass[s] += c.mass;
        sys.baseline[g] += w * c.p0;
        sys.ate[g] += w * c.tau();
        sys.outcome_w[g][s] += w * c.tau();
        sys.alloc_w[g][s] += w;
    }
    return sys;
}

// Applies the structural scope restriction implied by conditional-parity
// constraints: the policy must be measurable w.r.t. every conditioning level.
inline Scope restrict_scope(Scope scope, const std::vector<FairnessConstraint>& constraints,
                            std::vector<std::string>* warnings) {
    Scope eff = scope;
    for (const auto& c : constraints) {
        if (c.kind != ConstraintKind::CspAllocation && c.kind != ConstraintKind::CspOutcomes)
            continue;
        if (c.legit != Scope::L0 && c.legit != Scope::L0xL1)
            throw SynthesisError("conditional-parity constraints must condition on L0 or L0xL1");
        if (!refines(c.legit, eff)) {
            if (warnings)
                warnings->push_back(std::string("scope restricted from ") + scope_name(eff) +
                                    " to " + scope_name(c.legit) +
                                    " to keep the policy measurable w.r.t. the conditioning levels");
            eff = c.legit;
        }
    }
    return eff;
}

// A signed affine gap expression rhs + w.q that the epigraph must dominate.
struct GapTerm {
    std::vector<double> w;
    double rhs = 0.0;
    std::string label;
};

inline std::vector<GapTerm> outcome_gap_terms(const ScopeSystem& sys) {
    std::vector<GapTerm> terms;
    for (std::size_t i = 0; i < sys.groups.size(); ++i) {
        for (std::size_t j = i + 1; j < sys.groups.size(); ++j) {
            GapTerm t;
            t.rhs = sys.baseline[i] - sys.baseline[j];
            t.w.assign(sys.keys.size(), 0.0);
            for (std::size_t s = 0; s < sys.keys.size(); ++s)
                t.w[s] = sys.outcome_w[i][s] - sys.outcome_w[j][s];
            t.label = sys.groups[i] + " vs " + sys.groups[j];
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

// Conditional outcome gaps within each level of `legit`; pairs with a
// zero-mass conditioning stratum are skipped (the conditional is undefined).
inline std::vector<GapTerm> conditional_gap_terms(const PopulationModel& model,
                                                  const ScopeSystem& sys, Scope legit,
                                                  std::vector<std::string>* warnings) {
    std::vector<GapTerm> terms;
    const auto levels = metrics_detail::model_levels(model, legit);
    std::map<std::string, std::size_t> gi;
    for (std::size_t i = 0; i < sys.groups.size(); ++i) gi[sys.groups[i]] = i;
    for (const ScopeKey& lv : levels) {
        std::vector<double> lvl_mass(sys.groups.size(), 0.0);
        std::vector<double> base(sys.groups.size(), 0.0);
        std::vector<std::vector<double>> w(sys.groups.size(),
                                           std::vector<double>(sys.keys.size(), 0.0));
        for (const Cell& c : model.cells) {
            if (!(project(c, legit) == lv)) continue;
            const std::size_t g = gi[c.group];
            lvl_mass[g] += c.mass;
            base[g] += c.mass * c.p0;
            w[g][sys.index.at(project(c, sys.scope))] += c.mass * c.tau();
        }
        for (std::size_t g = 0; g < sys.groups.size(); ++g) {
            if (lvl_mass[g] <= 0.0) continue;
            base[g] /= lvl_mass[g];
            for (double& v : w[g]) v /= lvl_mass[g];
        }
        for (std::size_t i = 0; i < sys.groups.size(); ++i) {
            for (std::size_t j = i + 1; j < sys.groups.size(); ++j) {
                if (lvl_mass[i] <= 0.0 || lvl_mass[j] <= 0.0) {
                    if (warnings)
                        warnings->push_back("conditional outcome pair (" + sys.groups[i] + ", " +
                                            sys.groups[j] + ") undefined at " + lv.str());
                    continue;
                }
                GapTerm t;
                t.rhs = base[i] - base[j];
                t.w.assign(sys.keys.size(), 0.0);
                for (std::size_t s = 0; s < sys.keys.size(); ++s) t.w[s] = w[i][s] - w[j][s];
                t.label = sys.groups[i] + " vs " + sys.groups[j] + " at " + lv.str();
                terms.push_back(std::move(t));
            }
        }
    }
    return terms;
}

inline Policy policy_from(const ScopeSystem& sys, const std::vector<double>& q,
                          std::string label) {
    Policy p;
    p.scope = sys.scope;
    p.label = std::move(label);
    for (std::size_t s = 0; s < sys.keys.size(); ++s)
        p.table[sys.keys[s]] = std::clamp(q[s], 0.0, 1.0);
    return p;
}

// Lexicographic refinement shared by every synthesis entry point: having
// fixed the stage objective, minimize budget usage, then each q_s in key
// order. Keeps golden outputs deterministic. If a tie-break stage turns
// numerically infeasible (its pins sit on a degenerate face), refinement
// stops at the last solved point; the primary objectives are already pinned.
struct StageProblem {
    // Rows over the q variables only.
    std::vector<std::pair<std::vector<double>, double>> eq;
    std::vector<std::pair<std::vector<double>, double>> le;
    std::size_t k = 0;

    lp::LinearProgram to_lp(const std::vector<double>& objective) const {
        lp::LinearProgram prob;
        for (std::size_t s = 0; s < k; ++s) prob.add_variable(0.0, 1.0);
        prob.objective = objective;
        for (const auto& [a, b] : eq) prob.add_equality(a, b);
        for (const auto& [a, b] : le) prob.add_inequality(a, b);
        return prob;
    }
};

// Minimize budget then lexicographically smallest q over the stage rows.
// Returns nullopt when the rows are infeasible.
inline std::optional<std::vector<double>> lex_min(StageProblem stage,
                                                  const std::vector<double>& budget_row) {
    std::vector<double> obj = budget_row;
    lp::Result r = lp::solve(stage.to_lp(obj));
    if (r.status == lp::Status::Infeasible) return std::nullopt;
    if (r.status != lp::Status::FeasibleOptimal)
        throw SynthesisError("unexpected LP status in synthesis");
    double best_budget = 0.0;
    for (std::size_t s = 0; s < stage.k; ++s) best_budget += budget_row[s] * r.x[s];
    stage.le.push_back({budget_row, best_budget + 1e-11});
    std::vector<double> x = r.x;
    for (std::size_t s = 0; s < stage.k; ++s) {
        std::vector<double> unit(stage.k, 0.0);
        unit[s] = 1.0;
        lp::Result rs = lp::solve(stage.to_lp(unit));
        if (rs.status != lp::Status::FeasibleOptimal) break;
        x = rs.x;
        stage.le.push_back({unit, std::clamp(rs.x[s], 0.0, 1.0) + 1e-12});
    }
    return x;
}

}  // namespace synth_detail

struct MinDisparityOptions {
    bool budget_equality = false;
    std::vector<FairnessConstraint> hard_constraints;
    // Conditioning scopes whose per-level outcome gaps also enter the
    // minimized epigraph (used when relaxing conditional outcome parity).
    std::vector<Scope> epigraph_levels;
    // Minimize the maximum signed gap over pairs oriented so the group with
    // the higher baseline comes first, instead of the maximum absolute gap.
    // Pairs with equal baselines carry no orientation and are skipped.
    bool oriented_signed = false;
};

struct MinDisparityResult {
    Policy policy;
    double gap = 0.0;
    Scope scope = Scope::Global;  // effective scope after structural restriction
    double budget_usage = 0.0;
    std::vector<std::string> warnings;
};

// Epigraph LP: minimize the maximum absolute pairwise outcome gap subject to
// the budget and any hard fairness constraints. Ties among optimal policies
// are broken by minimal budget usage, then lexicographically smallest q.
inline MinDisparityResult min_disparity_policy(const PopulationModel& model, Scope scope,
                                               double budget,
                                               const MinDisparityOptions& opts = {}) {
    require_synthesis_ready(model);
    MinDisparityResult out;
    const Scope eff = synth_detail::restrict_scope(scope, opts.hard_constraints, &out.warnings);
    const auto sys = synth_detail::build_system(model, eff);
    out.scope = eff;
    const std::size_t k = sys.keys.size();

    std::vector<synth_detail::GapTerm> terms;
    if (opts.oriented_signed) {
        // Keep only the orientation where the baseline-advantaged group
        // leads; the term value itself (not its magnitude) is minimized.
        for (auto& t : synth_detail::outcome_gap_terms(sys)) {
            if (t.rhs > 1e-12) {
                terms.push_back(std::move(t));
            } else if (t.rhs < -1e-12) {
                for (double& v : t.w) v = -v;
                t.rhs = -t.rhs;
                terms.push_back(std::move(t));
            }
        }
    } else {
        terms = synth_detail::outcome_gap_terms(sys);
        for (Scope legit : opts.epigraph_levels) {
            const auto extra =
                synth_detail::conditional_gap_terms(model, sys, legit, &out.warnings);
            terms.insert(terms.end(), extra.begin(), extra.end());
        }
    }

    synth_detail::StageProblem hard_rows;
    hard_rows.k = k;
    if (opts.budget_equality)
        hard_rows.eq.push_back({sys.key_mass, budget});
    else
        hard_rows.le.push_back({sys.key_mass, budget});
    for (const auto& c : opts.hard_constraints) {
        if (c.kind == ConstraintKind::SpAllocation) {
            for (std::size_t i = 0; i < sys.groups.size(); ++i)
                for (std::size_t j = i + 1; j < sys.groups.size(); ++j) {
                    std::vector<double> a(k, 0.0);
                    for (std::size_t s = 0; s < k; ++s)
                        a[s] = sys.alloc_w[i][s] - sys.alloc_w[j][s];
                    hard_rows.eq.push_back({std::move(a), 0.0});
                }
        } else if (c.kind == ConstraintKind::SpOutcomes) {
            for (const auto& t : synth_detail::outcome_gap_terms(sys))
                hard_rows.eq.push_back({t.w, -t.rhs});
        } else if (c.kind == ConstraintKind::CspOutcomes) {
            for (const auto& t :
                 synth_detail::conditional_gap_terms(model, sys, c.legit, &out.warnings))
                hard_rows.eq.push_back({t.w, -t.rhs});
        }
        // CspAllocation is fully handled by the scope restriction above.
    }

    // Stage 1: minimize the gap variable d.
    lp::LinearProgram stage1;
    for (std::size_t s = 0; s < k; ++s) stage1.add_variable(0.0, 1.0);
    const int d = stage1.add_variable(opts.oriented_signed ? -2.0 : 0.0, 2.0, 1.0);
    auto widen = [&](std::vector<double> a, double dcoef) {
        a.push_back(dcoef);
        return a;
    };
    for (const auto& [a, b] : hard_rows.eq) stage1.add_equality(widen(a, 0.0), b);
    for (const auto& [a, b] : hard_rows.le) stage1.add_inequality(widen(a, 0.0), b);
    for (const auto& t : terms) {
        stage1.add_inequality(widen(t.w, -1.0), -t.rhs);
        if (opts.oriented_signed) continue;
        std::vector<double> neg(t.w.size());
        for (std::size_t s = 0; s < t.w.size(); ++s) neg[s] = -t.w[s];
        stage1.add_inequality(widen(neg, -1.0), t.rhs);
    }
    const lp::Result r1 = lp::solve(stage1);
    if (r1.status == lp::Status::Infeasible)
        throw SynthesisError("hard constraints are infeasible (phase-one residual " +
                             std::to_string(r1.phase1_residual) + ")");
    if (r1.status != lp::Status::FeasibleOptimal)
        throw SynthesisError("unexpected LP status in disparity minimization");
    const double dstar = terms.empty() ? 0.0 : r1.x[d];

    // Stages 2..: pin the gap, then minimize budget and lexicographic q.
    synth_detail::StageProblem stage = hard_rows;
    for (const auto& t : terms) {
        stage.le.push_back({t.w, dstar + 1e-11 - t.rhs});
        if (opts.oriented_signed) continue;
        std::vector<double> neg(t.w.size());
        for (std::size_t s = 0; s < t.w.size(); ++s) neg[s] = -t.w[s];
        stage.le.push_back({std::move(neg), dstar + 1e-11 + t.rhs});
    }
    auto q = synth_detail::lex_min(std::move(stage), sys.key_mass);
    if (!q) {
        // The pinned optimum sits on a degenerate face the refinement solver
        // cannot re-enter; keep the stage-1 minimizer without tie-breaking.
        q = std::vector<double>(r1.x.begin(), r1.x.begin() + k);
    }

    out.policy = synth_detail::policy_from(sys, *q, "min-disparity " + std::string(scope_name(eff)));
    double gap = 0.0;
    bool first = true;
    for (const auto& t : terms) {
        double v = t.rhs;
        for (std::size_t s = 0; s < k; ++s) v += t.w[s] * (*q)[s];
        if (!opts.oriented_signed) v = std::abs(v);
        gap = first ? v : std::max(gap, v);
        first = false;
    }
    out.gap = terms.empty() ? 0.0 : gap;
    out.budget_usage = budget_usage(model, out.policy);
    return out;
}

// General joint fairness-constraint feasibility at a chosen scope. Feasible
// results carry the satisfying policy; infeasible results carry the closest
// achievable disparity (outcome constraints relaxed into the epigraph, all
// other constraints kept hard).
inline FeasibilityResult joint_feasibility(const PopulationModel& model,
                                           const FeasibilitySpec& spec) {
    require_synthesis_ready(model);
    if (spec.budget < 0.0 || spec.budget > 1.0)
        throw SynthesisError("budget must lie in [0,1]");
    FeasibilityResult out;
    out.budget = spec.budget;
    const Scope eff = synth_detail::restrict_scope(spec.scope, spec.constraints, &out.warnings);
    const auto sys = synth_detail::build_system(model, eff);
    out.keys = sys.keys;
    const std::size_t k = sys.keys.size();

    synth_detail::StageProblem rows;
    rows.k = k;
    rows.le.push_back({sys.key_mass, spec.budget});
    for (const auto& c : spec.constraints) {
        if (c.kind == ConstraintKind::SpAllocation) {
            for (std::size_t i = 0; i < sys.groups.size(); ++i)
                for (std::size_t j = i + 1; j < sys.groups.size(); ++j) {
                    std::vector<double> a(k, 0.0);
                    for (std::size_t s = 0; s < k; ++s)
                        a[s] = sys.alloc_w[i][s] - sys.alloc_w[j][s];
                    rows.eq.push_back({std::move(a), 0.0});
                }
        } else if (c.kind == ConstraintKind::SpOutcomes) {
            for (std::size_t i = 0; i < sys.groups.size(); ++i)
                for (std::size_t j = i + 1; j < sys.groups.size(); ++j) {
                    PairCoefficients pc;
                    pc.g = sys.groups[i];
                    pc.g2 = sys.groups[j];
                    pc.a.assign(k, 0.0);
                    for (std::size_t s = 0; s < k; ++s)
                        pc.a[s] = sys.outcome_w[i][s] - sys.outcome_w[j][s];
                    pc.rhs = sys.baseline[j] - sys.baseline[i];
                    rows.eq.push_back({pc.a, pc.rhs});
                    out.coefficients.push_back(std::move(pc));
                }
        } else if (c.kind == ConstraintKind::CspOutcomes) {
            // Kept as explicit rows in addition to the scope restriction so
            // that feasible results re-audit clean even when the levels are
            // not well chosen.
            for (const auto& t :
                 synth_detail::conditional_gap_terms(model, sys, c.legit, &out.warnings))
                rows.eq.push_back({t.w, -t.rhs});
        }
    }

    const auto q = synth_detail::lex_min(rows, sys.key_mass);
    if (q) {
        out.status = FeasibilityStatus::Feasible;
        out.policy = synth_detail::policy_from(sys, *q, "joint " + std::string(scope_name(eff)));
        out.budget_usage = budget_usage(model, *out.policy);
        return out;
    }

    out.status = FeasibilityStatus::Infeasible;
    MinDisparityOptions relax;
    for (const auto& c : spec.constraints) {
        if (c.kind == ConstraintKind::SpAllocation || c.kind == ConstraintKind::CspAllocation)
            relax.hard_constraints.push_back(c);
        if (c.kind == ConstraintKind::CspOutcomes) relax.epigraph_levels.push_back(c.legit);
    }
    const auto best = min_disparity_policy(model, eff, spec.budget, relax);
    out.residual_disparity = best.gap;
    out.policy = best.policy;
    out.budget_usage = best.budget_usage;
    return out;
}

// Joint statistical parity in allocation and in outcomes with a constant
// policy: solves (ATE_g' - ATE_g) p = base_g - base_g' for all pairs over
// p in [0, B]. The constant policy gives allocation parity by construction.
inline FeasibilityResult prop1_solve(const PopulationModel& model, double budget = 1.0) {
    require_synthesis_ready(model);
    if (model.groups.size() < 2) throw SynthesisError("need at least 2 groups");
    FeasibilityResult out;
    out.budget = budget;
    out.keys = {ScopeKey{}};

    const auto stats = group_statistics(model);
    bool pinned = false, contradictory = false;
    double p = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
        for (std::size_t j = i + 1; j < stats.size(); ++j) {
            PairCoefficients pc;
            pc.g = stats[i].group;
            pc.g2 = stats[j].group;
            pc.a = {stats[j].ate - stats[i].ate};
            pc.rhs = stats[i].baseline - stats[j].baseline;
            out.coefficients.push_back(pc);
            if (std::abs(pc.a[0]) <= 1e-12) {
                if (std::abs(pc.rhs) > 1e-9) contradictory = true;
                continue;
            }
            const double req = pc.rhs / pc.a[0];
            if (pinned && std::abs(req - p) > 1e-9) contradictory = true;
            p = pinned ? p : req;
            pinned = true;
        }
    }

    const bool in_range = pinned ? (p >= -1e-9 && p <= budget + 1e-9) : true;
    if (!contradictory && in_range) {
        out.status = FeasibilityStatus::Feasible;
        const double q = std::clamp(pinned ? p : 0.0, 0.0, budget);
        out.policy = Policy::constant(q, "uniform parity policy");
        out.budget_usage = q;
        return out;
    }

    out.status = FeasibilityStatus::Infeasible;
    const auto best = min_disparity_policy(model, Scope::Global, budget);
    out.residual_disparity = best.gap;
    out.policy = best.policy;
    out.budget_usage = best.budget_usage;
    return out;
}

// Conditional statistical parity on the risk score plus statistical parity
// in outcomes: LP feasibility over per-level rates q_l. Holds (or not)
// regardless of whether L0 is well chosen; a warning notes the flag.
inline FeasibilityResult prop2_feasibility(const PopulationModel& model, double budget = 1.0) {
    FeasibilitySpec spec;
    spec.scope = Scope::L0;
    spec.budget = budget;
    spec.constraints = {{ConstraintKind::SpOutcomes, Scope::L0}};
    FeasibilityResult out = joint_feasibility(model, spec);
    if (!validate(model).l0_well_chosen)
        out.warnings.push_back(
            "L0 is not well chosen (baselines vary within a level); the parity condition "
            "itself does not require it");
    return out;
}

// Conditional statistical parity on the combined level L = (L0, L1) plus
// statistical parity in outcomes, in the aggregate-effect form
// sum_l q_l * tau_l * [P(L=l|g) - P(L=l|g')] = base_g' - base_g.
inline FeasibilityResult prop4_feasibility(const PopulationModel& model, double budget = 1.0) {
    require_synthesis_ready(model);
    FeasibilityResult out;
    out.budget = budget;
    const auto sys = synth_detail::build_system(model, Scope::L0xL1);
    out.keys = sys.keys;
    const std::size_t k = sys.keys.size();

    // Mass-weighted per-level effect; ambiguous (a group mixture) when the
    // combined level is not well chosen.
    std::vector<double> tau_level(k, 0.0);
    {
        std::vector<double> mass(k, 0.0);
        for (const Cell& c : model.cells) {
            const int s = sys.index.at(project(c, Scope::L0xL1));
            mass[s] += c.mass;
            tau_level[s] += c.mass * c.tau();
        }
        for (std::size_t s = 0; s < k; ++s)
            if (mass[s] > 0.0) tau_level[s] /= mass[s];
    }
    bool tau_uniform = true;
    for (std::size_t g = 0; g < sys.groups.size(); ++g) {
        std::vector<double> tg(k, 0.0);
        for (std::size_t s = 0; s < k; ++s) {
            tg[s] = sys.alloc_w[g][s] > 0.0 ? sys.outcome_w[g][s] / sys.alloc_w[g][s] : 0.0;
            if (sys.alloc_w[g][s] > 0.0 && std::abs(tg[s] - tau_level[s]) > 1e-9)
                tau_uniform = false;
        }
        out.tau_by_group[sys.groups[g]] = std::move(tg);
    }
    if (!tau_uniform)
        out.warnings.push_back(
            "effects vary within a combined level across groups; tau_l is a mass-weighted "
            "aggregate and the parity equation is approximate (see tau_by_group)");

    synth_detail::StageProblem rows;
    rows.k = k;
    rows.le.push_back({sys.key_mass, budget});
    for (std::size_t i = 0; i < sys.groups.size(); ++i) {
        for (std::size_t j = i + 1; j < sys.groups.size(); ++j) {
            PairCoefficients pc;
            pc.g = sys.groups[i];
            pc.g2 = sys.groups[j];
            pc.a.assign(k, 0.0);
            for (std::size_t s = 0; s < k; ++s)
                pc.a[s] = tau_level[s] * (sys.alloc_w[i][s] - sys.alloc_w[j][s]);
            pc.rhs = sys.baseline[j] - sys.baseline[i];
            rows.eq.push_back({pc.a, pc.rhs});
            out.coefficients.push_back(std::move(pc));
        }
    }

    const auto q = synth_detail::lex_min(rows, sys.key_mass);
    if (q) {
        out.status = FeasibilityStatus::Feasible;
        out.policy = synth_detail::policy_from(sys, *q, "combined-level parity policy");
        out.budget_usage = budget_usage(model, *out.policy);
        return out;
    }
    out.status = FeasibilityStatus::Infeasible;
    const auto best = min_disparity_policy(model, Scope::L0xL1, budget);
    out.residual_disparity = best.gap;
    out.policy = best.policy;
    out.budget_usage = best.budget_usage;
    return out;
}

// Outcome-parity construction with group-aware rates: orders groups by
// baseline outcome (highest first) and treats each lower group uniformly at
// r_i = (base_(0) - base_(i)) / ATE_(i), bringing every group up to the top
// baseline. Applicable iff ATE_(i) >= base_(0) - base_(i) for all i > 0.
inline FeasibilityResult prop7_construct(const PopulationModel& model, double budget = 1.0) {
    require_synthesis_ready(model);
    FeasibilityResult out;
    out.budget = budget;

    const auto stats = group_statistics(model);
    std::vector<std::size_t> order(stats.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (stats[a].baseline != stats[b].baseline) return stats[a].baseline > stats[b].baseline;
        return stats[a].group < stats[b].group;
    });
    for (std::size_t i : order) out.group_order.push_back(stats[i].group);

    const double top = stats[order[0]].baseline;
    bool condition = true;
    for (std::size_t r = 1; r < order.size(); ++r) {
        const auto& s = stats[order[r]];
        const double deficit = top - s.baseline;
        PairCoefficients pc;
        pc.g = stats[order[0]].group;
        pc.g2 = s.group;
        pc.a = {s.ate};
        pc.rhs = deficit;
        out.coefficients.push_back(pc);
        if (s.ate < deficit - 1e-12) condition = false;
    }

    if (condition) {
        out.status = FeasibilityStatus::Feasible;
        Policy policy;
        policy.scope = Scope::LxG;
        policy.label = "group-status outcome-parity policy";
        for (std::size_t r = 0; r < order.size(); ++r) {
            const auto& s = stats[order[r]];
            const double deficit = top - s.baseline;
            const double rate = (r == 0 || deficit <= 0.0) ? 0.0 : std::min(deficit / s.ate, 1.0);
            out.group_rates[s.group] = rate;
        }
        for (const Cell& c : model.cells)
            policy.table[project(c, Scope::LxG)] = out.group_rates.at(c.group);
        out.budget_usage = budget_usage(model, policy);
        out.budget_exceeded = out.budget_usage > budget + 1e-12;
        if (out.budget_exceeded)
            out.warnings.push_back("construction uses budget " + std::to_string(out.budget_usage) +
                                   " > B = " + std::to_string(budget) +
                                   "; rates are not scaled down");
        out.policy = std::move(policy);
        return out;
    }

    out.status = FeasibilityStatus::InfeasibleByCondition;
    out.warnings.push_back(
        "group effects cannot cover the baseline deficit; returning the disparity-minimizing "
        "group-aware policy instead");
    const auto best = min_disparity_policy(model, Scope::LxG, budget);
    out.residual_disparity = best.gap;
    out.policy = best.policy;
    out.budget_usage = best.budget_usage;
    return out;
}

}  // namespace fairalloc
