#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "feasibility.hpp"
#include "fixtures.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "policy.hpp"
#include "population.hpp"
#include "random.hpp"

namespace fairalloc {

namespace prop_detail {

inline std::uint64_t model_digest(const PopulationModel& model) {
    const std::string s = model_canonical_json(model);
    return fnv1a(s.data(), s.size());
}

// Brute-force check, independent of the LP path: does any policy on the
// scope's key grid reach pairwise outcome parity within `tol` under the
// budget? Capped at 3 free variables by the generator contract.
inline bool grid_parity_achievable(const PopulationModel& model, Scope scope, double budget,
                                   double step, double tol) {
    std::vector<ScopeKey> keys;
    {
        std::set<ScopeKey> ks;
        for (const Cell& c : model.cells) ks.insert(project(c, scope));
        keys.assign(ks.begin(), ks.end());
    }
    if (keys.size() > 3)
        throw std::logic_error("grid oracle supports at most 3 policy variables");
    std::map<ScopeKey, int> index;
    for (std::size_t i = 0; i < keys.size(); ++i) index[keys[i]] = static_cast<int>(i);

    std::vector<std::string> groups = model.groups;
    std::vector<double> gmass(groups.size(), 0.0), base(groups.size(), 0.0);
    std::vector<std::vector<double>> w(groups.size(), std::vector<double>(keys.size(), 0.0));
    std::vector<double> key_mass(keys.size(), 0.0);
    std::map<std::string, std::size_t> gi;
    for (std::size_t i = 0; i < groups.size(); ++i) gi[groups[i]] = i;
    for (const Cell& c : model.cells) gmass[gi[c.group]] += c.mass;
    for (const Cell& c : model.cells) {
        const std::size_t g = gi[c.group];
        const int s = index[project(c, scope)];
        base[g] += c.mass / gmass[g] * c.p0;
        w[g][s] += c.mass / gmass[g] * c.tau();
        key_mass[s] += c.mass;
    }

    const int n = static_cast<int>(std::llround(1.0 / step));
    std::vector<double> q(keys.size(), 0.0);
    std::vector<int> ticks(keys.size(), 0);
    while (true) {
        for (std::size_t s = 0; s < keys.size(); ++s) q[s] = ticks[s] * step;
        double used = 0.0;
        for (std::size_t s = 0; s < keys.size(); ++s) used += key_mass[s] * q[s];
        if (used <= budget + tol) {
            bool ok = true;
            for (std::size_t i = 0; i < groups.size() && ok; ++i) {
                double oi = base[i];
                for (std::size_t s = 0; s < keys.size(); ++s) oi += w[i][s] * q[s];
                for (std::size_t j = i + 1; j < groups.size() && ok; ++j) {
                    double oj = base[j];
                    for (std::size_t s = 0; s < keys.size(); ++s) oj += w[j][s] * q[s];
                    if (std::abs(oi - oj) > tol) ok = false;
                }
            }
            if (ok) return true;
        }
        std::size_t s = 0;
        while (s < ticks.size() && ticks[s] == n) ticks[s++] = 0;
        if (s == ticks.size()) return false;
        ++ticks[s];
    }
}

// --- constructed verification instances -------------------------------------
// Instances are built with a known verdict: a planted interior solution for
// the feasible half, and a parity requirement pushed outside the reachable
// range by a safe margin (>> the grid tolerance) for the infeasible half.

inline PopulationModel make_constant_policy_instance(Rng& rng, bool feasible) {
    const double m0 = rng.uniform(0.3, 0.7);
    const double tau_small = rng.uniform(0.02, 0.2);
    const double delta = rng.uniform(0.15, 0.3);
    const double tau_big = tau_small + delta;
    double base_big, base_small;  // baselines of the small-effect / big-effect group
    if (feasible) {
        const double pstar = rng.uniform(0.1, 0.9);
        base_small = rng.uniform(0.2, 0.4) + delta * pstar;
        base_big = base_small - delta * pstar;
    } else {
        const double preq = rng.uniform() < 0.5 ? 1.0 + rng.uniform(0.15, 0.6)
                                                : -rng.uniform(0.15, 0.6);
        base_big = rng.uniform(0.2, 0.3);
        base_small = base_big + delta * preq;
    }
    const bool swap = rng.uniform() < 0.5;
    Cell a, b;
    a.group = "g0";
    b.group = "g1";
    a.covariate = b.covariate = "x0";
    a.mass = m0;
    b.mass = 1.0 - m0;
    (swap ? b : a).p0 = base_small;
    (swap ? b : a).p1 = base_small + tau_small;
    (swap ? a : b).p0 = base_big;
    (swap ? a : b).p1 = base_big + tau_big;
    return PopulationModel::from_cells({a, b});
}

inline PopulationModel make_level_instance(Rng& rng, bool feasible, bool shared_tau, int levels) {
    const double ma = rng.uniform(0.3, 0.7);
    std::vector<double> pa(levels), pb(levels);
    double sa = 0.0, sb = 0.0;
    for (int l = 0; l < levels; ++l) {
        pa[l] = rng.uniform(0.1, 1.0);
        pb[l] = rng.uniform(0.1, 1.0);
        sa += pa[l];
        sb += pb[l];
    }
    for (int l = 0; l < levels; ++l) {
        pa[l] /= sa;
        pb[l] /= sb;
    }
    std::vector<double> ta(levels), tb(levels);
    for (int l = 0; l < levels; ++l) {
        ta[l] = rng.uniform(0.05, 0.25);
        tb[l] = shared_tau ? ta[l] : rng.uniform(0.05, 0.25);
    }
    std::vector<double> coef(levels);
    for (int l = 0; l < levels; ++l) coef[l] = ta[l] * pa[l] - tb[l] * pb[l];

    double required;  // target value of base_b - base_a
    if (feasible) {
        required = 0.0;
        for (int l = 0; l < levels; ++l) required += rng.uniform(0.1, 0.9) * coef[l];
    } else {
        double lo = 0.0, hi = 0.0;
        for (int l = 0; l < levels; ++l) {
            lo += std::min(coef[l], 0.0);
            hi += std::max(coef[l], 0.0);
        }
        required = rng.uniform() < 0.5 ? hi + rng.uniform(0.05, 0.12)
                                       : lo - rng.uniform(0.05, 0.12);
    }
    const double base_a = 0.5 - required / 2.0;
    const double base_b = 0.5 + required / 2.0;

    std::vector<Cell> cells;
    for (int l = 0; l < levels; ++l) {
        Cell a, b;
        a.group = "g0";
        b.group = "g1";
        a.covariate = b.covariate = "x" + std::to_string(l);
        a.l0 = b.l0 = l;
        a.mass = ma * pa[l];
        b.mass = (1.0 - ma) * pb[l];
        a.p0 = base_a;
        a.p1 = base_a + ta[l];
        b.p0 = base_b;
        b.p1 = base_b + tb[l];
        cells.push_back(a);
        cells.push_back(b);
    }
    return PopulationModel::from_cells(std::move(cells));
}

inline PopulationModel make_covered_deficit_instance(Rng& rng) {
    const int groups = rng.uniform_int(2, 3);
    const int levels = rng.uniform_int(1, 2);
    std::vector<double> gmass(groups);
    double sum = 0.0;
    for (double& m : gmass) {
        m = rng.uniform(0.2, 1.0);
        sum += m;
    }
    std::vector<Cell> cells;
    for (int g = 0; g < groups; ++g) {
        const double base = rng.uniform(0.25, 0.5);
        std::vector<double> lw(levels);
        double lsum = 0.0;
        for (double& v : lw) {
            v = rng.uniform(0.2, 1.0);
            lsum += v;
        }
        for (int l = 0; l < levels; ++l) {
            Cell c;
            c.group = "g" + std::to_string(g);
            c.covariate = "x" + std::to_string(l);
            c.l0 = l;
            c.mass = gmass[g] / sum * lw[l] / lsum;
            c.p0 = base;
            c.p1 = base + rng.uniform(0.35, 0.5);
            cells.push_back(std::move(c));
        }
    }
    return PopulationModel::from_cells(std::move(cells));
}

}  // namespace prop_detail

// Replication of the two-group, two-level analytic example: the base model
// is unsatisfiable (closest policy q=(0,1), residual 0.12) and the raised
// level-2 effect variant is satisfiable.
struct WorkedExampleReport {
    double rhs = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    bool base_infeasible = false;
    double base_residual = 0.0;
    double boundary_q1 = 0.0;
    double boundary_q2 = 0.0;
    bool variant_feasible = false;
    bool pass = false;
};

inline WorkedExampleReport replicate_worked_example() {
    WorkedExampleReport rep;
    const PopulationModel base = fixtures::worked_example();
    const FeasibilityResult r = prop4_feasibility(base, 1.0);
    if (r.coefficients.size() == 1 && r.coefficients[0].a.size() == 2) {
        rep.a1 = r.coefficients[0].a[0];
        rep.a2 = r.coefficients[0].a[1];
        rep.rhs = r.coefficients[0].rhs;
    }
    rep.base_infeasible = r.status == FeasibilityStatus::Infeasible;
    rep.base_residual = r.residual_disparity.value_or(std::nan(""));
    if (r.policy && r.policy->table.size() == 2) {
        auto it = r.policy->table.begin();
        rep.boundary_q1 = it->second;
        rep.boundary_q2 = std::next(it)->second;
    }
    const FeasibilityResult v = prop4_feasibility(fixtures::worked_example_feasible_variant(), 1.0);
    rep.variant_feasible = v.status == FeasibilityStatus::Feasible;
    rep.pass = rep.base_infeasible && rep.variant_feasible &&
               std::abs(rep.base_residual - 0.12) <= 1e-9 && std::abs(rep.rhs + 0.2) <= 1e-12 &&
               rep.a1 > 0.0 && rep.a2 < 0.0 && std::abs(rep.boundary_q1) <= 1e-9 &&
               std::abs(rep.boundary_q2 - 1.0) <= 1e-9;
    return rep;
}

// --- randomized proposition verification ------------------------------------

struct VerifyConfig {
    int levels = 2;       // risk levels for the level-based conditions (max 3)
    // Verification runs at the full budget: planted verdicts and the grid
    // oracle both quantify over the whole assignment-probability range.
    double budget = 1.0;
};

struct TrialRecord {
    std::uint64_t digest = 0;
    std::string verdict;
    double gap = 0.0;  // achieved max-abs outcome gap (feasible) or residual
    bool ok = true;
    std::string note;
};

struct VerificationRun {
    std::string subject;
    std::uint64_t seed = 0;
    int trials = 0;
    std::vector<TrialRecord> records;
    int failures = 0;
    std::vector<std::string> failing_instances;  // canonical model JSON

    bool pass() const { return failures == 0; }
};

// Checks one of the joint-parity conditions (1, 2, 4) or the group-status
// construction (7) on generated instances. Feasible verdicts are re-audited
// through the metrics module; infeasible verdicts are confirmed by an
// exhaustive policy grid. Record 0 is the matching canonical fixture; the
// remaining records alternate planted-feasible and planted-infeasible
// instances.
inline VerificationRun verify_proposition(const VerifyConfig& config, int prop, int trials,
                                          std::uint64_t seed) {
    if (prop != 1 && prop != 2 && prop != 4 && prop != 7)
        throw SynthesisError("verify_proposition supports propositions 1, 2, 4 and 7");
    if (trials < 1) throw SynthesisError("trials must be >= 1");
    if (config.budget != 1.0)
        throw SynthesisError("verification runs at the full budget; synthesize with a smaller "
                             "budget directly instead");
    const int levels = std::min(std::max(config.levels, 1), 3);

    VerificationRun run;
    run.subject = "prop" + std::to_string(prop);
    run.seed = seed;
    run.trials = trials;

    auto run_op = [&](const PopulationModel& m) {
        switch (prop) {
            case 1: return prop1_solve(m, config.budget);
            case 2: return prop2_feasibility(m, config.budget);
            case 4: return prop4_feasibility(m, config.budget);
            default: return prop7_construct(m, config.budget);
        }
    };
    const Scope scope = prop == 1   ? Scope::Global
                        : prop == 2 ? Scope::L0
                        : prop == 4 ? Scope::L0xL1
                                    : Scope::LxG;

    for (int t = -1; t < trials; ++t) {
        PopulationModel model;
        std::optional<bool> planted;
        if (t < 0) {
            model = prop == 1   ? fixtures::effect_contrast()
                    : prop == 2 ? fixtures::risk_level_skew()
                    : prop == 4 ? fixtures::worked_example()
                                : fixtures::modest_effect_contrast();
        } else {
            Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(t));
            const bool feasible = t % 2 == 0;
            planted = prop == 7 ? true : feasible;
            model = prop == 1 ? prop_detail::make_constant_policy_instance(rng, feasible)
                    : prop == 2
                        ? prop_detail::make_level_instance(rng, feasible, false, levels)
                    : prop == 4
                        ? prop_detail::make_level_instance(rng, feasible, true, levels)
                        : prop_detail::make_covered_deficit_instance(rng);
        }

        TrialRecord rec;
        rec.digest = prop_detail::model_digest(model);
        const FeasibilityResult res = run_op(model);
        rec.verdict = feasibility_status_name(res.status);

        if (res.status == FeasibilityStatus::Feasible) {
            const auto src = ProbabilitySource::from_model(model, std::nullopt, {}, res.policy);
            double gap = sp_outcomes(src, 1e-9).max_abs_gap;
            if (prop == 1) gap = std::max(gap, sp_allocation(src, 1e-9).max_abs_gap);
            if (prop == 2) gap = std::max(gap, csp_allocation(src, 1e-9, Scope::L0).max_abs_gap);
            if (prop == 4) gap = std::max(gap, csp_allocation(src, 1e-9, Scope::L0xL1).max_abs_gap);
            rec.gap = gap;
            if (gap > 1e-9) {
                rec.ok = false;
                rec.note = "re-audit gap " + std::to_string(gap) + " exceeds 1e-9";
            }
            if (prop != 7 && res.budget_usage > config.budget + 1e-9) {
                rec.ok = false;
                rec.note = "budget exceeded";
            }
            if (planted && !*planted) {
                rec.ok = false;
                rec.note = "planted-infeasible instance reported feasible";
            }
        } else {
            rec.gap = res.residual_disparity.value_or(0.0);
            if (prop != 7) {
                // The grid confirms that no policy on this scope reaches
                // parity. The construction condition of 7 is narrower than
                // policy existence, so it gets no grid check; its generator
                // plants the condition and the mismatch is caught below.
                const double step = prop == 1 ? 1e-3 : 1e-2;
                if (prop_detail::grid_parity_achievable(model, scope, config.budget, step, 1e-2)) {
                    rec.ok = false;
                    rec.note = "grid oracle found a satisfying policy";
                }
            }
            if (planted && *planted) {
                rec.ok = false;
                rec.note = "planted-feasible instance reported infeasible";
            }
        }
        if (!rec.ok) {
            ++run.failures;
            run.failing_instances.push_back(model_canonical_json(model));
        }
        run.records.push_back(std::move(rec));
    }
    return run;
}

// --- scope dominance ----------------------------------------------------------

struct DominanceReport {
    double coarse_gap = 0.0;  // optimal max-abs outcome gap
    double fine_gap = 0.0;
    // Optimal worst signed gap with the baseline-advantaged group first; NaN
    // when every pair of groups shares a baseline and no orientation exists.
    double signed_coarse_gap = std::nan("");
    double signed_fine_gap = std::nan("");
    bool dominance = false;
};

inline void require_dominance_pair(Scope coarse, Scope fine) {
    if (refines(fine, coarse)) return;
    if (coarse == Scope::LxXnoG && fine == Scope::LxG) return;  // direct comparison
    throw SynthesisError(std::string("dominance pair (") + scope_name(coarse) + ", " +
                         scope_name(fine) + ") is neither a refinement nor the "
                         "covariate-vs-group comparison");
}

// Compares the optimal disparity of two conditioning scopes at equal budget,
// both as the max-abs outcome gap and as the worst signed gap oriented by
// baseline advantage (the literal form of the ordering comparisons).
inline DominanceReport verify_dominance(const PopulationModel& model, Scope coarse, Scope fine,
                                        double budget, bool budget_equality = false) {
    require_dominance_pair(coarse, fine);
    MinDisparityOptions opts;
    opts.budget_equality = budget_equality;
    DominanceReport rep;
    rep.coarse_gap = min_disparity_policy(model, coarse, budget, opts).gap;
    rep.fine_gap = min_disparity_policy(model, fine, budget, opts).gap;
    rep.dominance = rep.fine_gap <= rep.coarse_gap + 1e-9;

    bool oriented = false;
    const auto stats = group_statistics(model);
    for (std::size_t i = 0; i < stats.size() && !oriented; ++i)
        for (std::size_t j = i + 1; j < stats.size() && !oriented; ++j)
            oriented = std::abs(stats[i].baseline - stats[j].baseline) > 1e-12;
    if (oriented) {
        MinDisparityOptions sopts = opts;
        sopts.oriented_signed = true;
        rep.signed_coarse_gap = min_disparity_policy(model, coarse, budget, sopts).gap;
        rep.signed_fine_gap = min_disparity_policy(model, fine, budget, sopts).gap;
        rep.dominance = rep.dominance && rep.signed_fine_gap <= rep.signed_coarse_gap + 1e-9;
    }
    return rep;
}

struct DominanceConfig {
    GeneratorShape shape{2, 2, 2, 2};
    double budget = 0.5;
};

struct DominanceTrial {
    std::uint64_t digest = 0;
    double coarse_gap = 0.0;
    double fine_gap = 0.0;
    double signed_coarse_gap = std::nan("");
    double signed_fine_gap = std::nan("");
    bool dominance = false;
    bool strict = false;
    std::string note;
};

struct DominanceRun {
    std::string pair;
    std::uint64_t seed = 0;
    int trials = 0;
    double min_gap = 1e-3;
    std::vector<DominanceTrial> records;
    int violations = 0;
    int strict_witnesses = 0;
    std::vector<PopulationModel> witnesses;
    std::vector<std::string> failing_instances;

    bool pass() const { return violations == 0; }
};

// Verifies fine_gap <= coarse_gap on generated instances and collects strict
// witnesses (fine_gap + min_gap < coarse_gap). Random instances keep effects
// constant per effect level, matching that level's defining property; the
// canonical witness fixtures are pre-seeded so the applicable pairs never
// come back empty.
inline DominanceRun search_strict_witness(const DominanceConfig& config, Scope coarse, Scope fine,
                                          int trials, std::uint64_t seed, double min_gap = 1e-3) {
    require_dominance_pair(coarse, fine);
    DominanceRun run;
    run.pair = std::string(scope_name(coarse)) + "->" + scope_name(fine);
    run.seed = seed;
    run.trials = trials;
    run.min_gap = min_gap;

    struct Seeded {
        PopulationModel model;
        double budget;
        bool budget_equality;
        std::string note;
    };
    std::vector<Seeded> entries;
    if (coarse == Scope::L0 && fine == Scope::L0xL1)
        entries.push_back({fixtures::effect_level_witness(), 0.5, true, "effect_level_witness"});
    if (coarse == Scope::L0xL1 && fine == Scope::LxXnoG)
        entries.push_back({fixtures::proxy_split_witness(), 0.2, false, "proxy_split_witness"});
    if (coarse == Scope::LxXnoG && fine == Scope::LxG)
        entries.push_back({fixtures::shared_cell_witness(), 0.5, false, "shared_cell_witness"});
    GeneratorConstraints cons;
    cons.force_l1_well_chosen = true;
    for (int t = 0; t < trials; ++t)
        entries.push_back({generate_random(Rng::derive(seed, static_cast<std::uint64_t>(t))
                                               .next_u64(),
                                           config.shape, cons),
                           config.budget, false, ""});

    for (const Seeded& e : entries) {
        DominanceTrial rec;
        rec.digest = prop_detail::model_digest(e.model);
        rec.note = e.note;
        const DominanceReport rep =
            verify_dominance(e.model, coarse, fine, e.budget, e.budget_equality);
        rec.coarse_gap = rep.coarse_gap;
        rec.fine_gap = rep.fine_gap;
        rec.signed_coarse_gap = rep.signed_coarse_gap;
        rec.signed_fine_gap = rep.signed_fine_gap;
        rec.dominance = rep.dominance;
        rec.strict = rep.fine_gap + min_gap < rep.coarse_gap;
        if (!rec.dominance) {
            ++run.violations;
            run.failing_instances.push_back(model_canonical_json(e.model));
        }
        if (rec.strict) {
            ++run.strict_witnesses;
            run.witnesses.push_back(e.model);
        }
        run.records.push_back(std::move(rec));
    }
    return run;
}

// --- run reports ----------------------------------------------------------------

inline json verification_run_to_json(const VerificationRun& run) {
    json records = json::array();
    for (const auto& r : run.records) {
        json e{{"digest", r.digest}, {"verdict", r.verdict}, {"gap", r.gap}, {"ok", r.ok}};
        if (!r.note.empty()) e["note"] = r.note;
        records.push_back(std::move(e));
    }
    return json{{"subject", run.subject}, {"seed", run.seed},
                {"trials", run.trials},   {"pass", run.pass()},
                {"failures", run.failures}, {"records", std::move(records)}};
}

inline json dominance_run_to_json(const DominanceRun& run) {
    json records = json::array();
    for (const auto& r : run.records) {
        json e{{"digest", r.digest},
               {"coarse_gap", r.coarse_gap},
               {"fine_gap", r.fine_gap},
               {"dominance", r.dominance},
               {"strict", r.strict}};
        if (!std::isnan(r.signed_coarse_gap)) {
            e["signed_coarse_gap"] = r.signed_coarse_gap;
            e["signed_fine_gap"] = r.signed_fine_gap;
        }
        if (!r.note.empty()) e["note"] = r.note;
        records.push_back(std::move(e));
    }
    return json{{"pair", run.pair},
                {"seed", run.seed},
                {"trials", run.trials},
                {"min_gap", run.min_gap},
                {"pass", run.pass()},
                {"violations", run.violations},
                {"strict_witnesses", run.strict_witnesses},
                {"records", std::move(records)}};
}

}  // namespace fairalloc
