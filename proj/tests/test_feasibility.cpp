#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fairalloc/fairalloc.hpp"

using namespace fairalloc;
using Catch::Approx;

namespace {

Cell mk(std::string g, std::string x, int l0, int l1, double mass, double p0, double p1) {
    Cell c;
    c.group = std::move(g);
    c.covariate = std::move(x);
    c.l0 = l0;
    c.l1 = l1;
    c.mass = mass;
    c.p0 = p0;
    c.p1 = p1;
    return c;
}

double q_at(const Policy& p, const ScopeKey& k) { return p.table.at(k); }

// Re-audits a feasible synthesis result against the requested definitions.
double reaudit_gap(const PopulationModel& m, const Policy& policy,
                   const std::vector<FairnessConstraint>& constraints) {
    const auto src = ProbabilitySource::from_model(m, std::nullopt, {}, policy);
    double gap = 0.0;
    for (const auto& c : constraints) {
        switch (c.kind) {
            case ConstraintKind::SpAllocation: gap = std::max(gap, sp_allocation(src, 1e-9).max_abs_gap); break;
            case ConstraintKind::CspAllocation:
                gap = std::max(gap, csp_allocation(src, 1e-9, c.legit).max_abs_gap);
                break;
            case ConstraintKind::SpOutcomes: gap = std::max(gap, sp_outcomes(src, 1e-9).max_abs_gap); break;
            case ConstraintKind::CspOutcomes:
                gap = std::max(gap, csp_outcomes(src, 1e-9, c.legit).max_abs_gap);
                break;
        }
    }
    return gap;
}

}  // namespace

TEST_CASE("constant-policy parity: the effect-contrast fixture solves at p = 0.5") {
    const auto res = prop1_solve(fixtures::effect_contrast(), 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    const double p = q_at(*res.policy, ScopeKey{});
    CHECK(p == Approx(0.5).margin(1e-9));
    const auto out = evaluate_outcomes(fixtures::effect_contrast(), *res.policy);
    CHECK(out.at("g0") == Approx(0.65).margin(1e-9));
    CHECK(out.at("g1") == Approx(0.65).margin(1e-9));
}

TEST_CASE("constant-policy parity fails when the advantaged group gains more") {
    const auto m = fixtures::effect_contrast_swapped();
    const auto res = prop1_solve(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::Infeasible);
    REQUIRE(res.residual_disparity.has_value());
    // Best over p in [0,1]: the gap 0.2 + 0.4 p is minimized at p = 0.
    CHECK(*res.residual_disparity == Approx(0.2).margin(1e-9));
    REQUIRE(res.policy.has_value());
    CHECK(q_at(*res.policy, ScopeKey{}) == Approx(0.0).margin(1e-9));
}

TEST_CASE("equal baselines and effects admit any p; minimal budget picks 0") {
    const auto m = PopulationModel::from_cells({mk("g0", "x0", 0, 0, 0.5, 0.4, 0.6),
                                                mk("g1", "x0", 0, 0, 0.5, 0.4, 0.6)});
    const auto res = prop1_solve(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(q_at(*res.policy, ScopeKey{}) == 0.0);
    CHECK(res.budget_usage == 0.0);
}

TEST_CASE("risk-level parity on the skewed fixture returns the zero policy") {
    const auto res = prop2_feasibility(fixtures::risk_level_skew(), 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    for (const auto& [k, q] : res.policy->table) CHECK(q == Approx(0.0).margin(1e-9));
    CHECK(res.budget_usage == Approx(0.0).margin(1e-9));
}

TEST_CASE("risk-level parity on the worked example is unsatisfiable") {
    // The combined level doubles as the risk score here, so the arithmetic
    // matches the combined-level condition: residual 0.12.
    const auto res = prop2_feasibility(fixtures::worked_example(), 1.0);
    REQUIRE(res.status == FeasibilityStatus::Infeasible);
    CHECK(*res.residual_disparity == Approx(0.12).margin(1e-9));
}

TEST_CASE("a pinned two-level plan is recovered exactly") {
    // Three groups make the pair equations rank-2, so q = (0.5, 0.25) is the
    // unique solution; the solver must return it.
    auto cells = std::vector<Cell>{
        mk("g0", "x1", 1, 0, 1.0 / 6, 0.4375, 0.4375 + 0.2),
        mk("g0", "x2", 2, 0, 1.0 / 6, 0.4375, 0.4375 + 0.1),
        mk("g1", "x1", 1, 0, 0.2, 0.44, 0.44 + 0.1),
        mk("g1", "x2", 2, 0, 2.0 / 15, 0.44, 0.44 + 0.3),
        mk("g2", "x1", 1, 0, 1.0 / 15, 0.43, 0.43 + 0.3),
        mk("g2", "x2", 2, 0, 4.0 / 15, 0.43, 0.43 + 0.2),
    };
    const auto m = PopulationModel::from_cells(std::move(cells));
    REQUIRE(validate(m).valid());
    const auto res = prop2_feasibility(m, 0.5);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(q_at(*res.policy, ScopeKey{.l0 = 1}) == Approx(0.5).margin(1e-7));
    CHECK(q_at(*res.policy, ScopeKey{.l0 = 2}) == Approx(0.25).margin(1e-7));
    CHECK(res.budget_usage <= 0.5 + 1e-9);
    CHECK(reaudit_gap(m, *res.policy,
                      {{ConstraintKind::CspAllocation, Scope::L0},
                       {ConstraintKind::SpOutcomes, Scope::L0}}) <= 1e-9);
}

TEST_CASE("combined-level condition on the worked example") {
    const auto res = prop4_feasibility(fixtures::worked_example(), 1.0);
    REQUIRE(res.status == FeasibilityStatus::Infeasible);
    REQUIRE(res.coefficients.size() == 1);
    CHECK(res.coefficients[0].a[0] == Approx(0.12).margin(1e-12));
    CHECK(res.coefficients[0].a[1] == Approx(-0.08).margin(1e-12));
    CHECK(res.coefficients[0].rhs == Approx(-0.2).margin(1e-12));
    CHECK(*res.residual_disparity == Approx(0.12).margin(1e-9));
    CHECK(q_at(*res.policy, ScopeKey{.l0 = 1, .l1 = 1}) == Approx(0.0).margin(1e-9));
    CHECK(q_at(*res.policy, ScopeKey{.l0 = 2, .l1 = 2}) == Approx(1.0).margin(1e-9));
}

TEST_CASE("raising the level-2 effect makes the worked example satisfiable") {
    const auto m = fixtures::worked_example_feasible_variant();
    const auto res = prop4_feasibility(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(q_at(*res.policy, ScopeKey{.l0 = 1, .l1 = 1}) == Approx(0.0).margin(1e-9));
    CHECK(q_at(*res.policy, ScopeKey{.l0 = 2, .l1 = 2}) == Approx(5.0 / 6.0).margin(1e-9));
    CHECK(reaudit_gap(m, *res.policy,
                      {{ConstraintKind::CspAllocation, Scope::L0xL1},
                       {ConstraintKind::SpOutcomes, Scope::L0}}) <= 1e-9);
}

TEST_CASE("equal level distributions with equal baselines solve at q = 0") {
    const auto m = PopulationModel::from_cells({
        mk("g0", "x1", 1, 0, 0.3, 0.5, 0.7),
        mk("g0", "x2", 2, 0, 0.2, 0.3, 0.4),
        mk("g1", "x1", 1, 0, 0.3, 0.5, 0.7),
        mk("g1", "x2", 2, 0, 0.2, 0.3, 0.4),
    });
    const auto res = prop4_feasibility(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    for (const auto& pc : res.coefficients)
        for (double a : pc.a) CHECK(a == Approx(0.0).margin(1e-12));
    for (const auto& [k, q] : res.policy->table) CHECK(q == Approx(0.0).margin(1e-9));
}

TEST_CASE("group-mixture effects trigger the aggregate-tau warning") {
    const auto m = PopulationModel::from_cells({
        mk("g0", "x1", 1, 0, 0.5, 0.5, 0.9),   // tau 0.4
        mk("g1", "x1", 1, 0, 0.5, 0.5, 0.6),   // tau 0.1 within the same level
    });
    const auto res = prop4_feasibility(m, 1.0);
    bool warned = false;
    for (const auto& w : res.warnings) warned = warned || w.find("aggregate") != std::string::npos;
    CHECK(warned);
    CHECK(res.tau_by_group.at("g0")[0] == Approx(0.4));
    CHECK(res.tau_by_group.at("g1")[0] == Approx(0.1));
}

TEST_CASE("coefficient audit trail matches recomputation from group statistics") {
    const auto m = fixtures::worked_example();
    const auto res = prop4_feasibility(m, 1.0);
    const auto stats = group_statistics(m);
    // tau per combined level from the cells, then a_l per the definition.
    std::map<std::pair<int, int>, double> tau, mass;
    for (const Cell& c : m.cells) {
        tau[{c.l0, c.l1}] += c.mass * c.tau();
        mass[{c.l0, c.l1}] += c.mass;
    }
    std::size_t idx = 0;
    for (const auto& [lv, num] : tau) {
        const double tl = num / mass[lv];
        const double expect =
            tl * (stats[0].l_marginal.at(lv) - stats[1].l_marginal.at(lv));
        CHECK(res.coefficients[0].a[idx] == Approx(expect).margin(1e-12));
        ++idx;
    }
    CHECK(res.coefficients[0].rhs ==
          Approx(stats[1].baseline - stats[0].baseline).margin(1e-12));
}

TEST_CASE("minimum-disparity policies on the effect-level fixture") {
    const auto m = fixtures::effect_level_witness();
    SECTION("risk scope, slack budget: q=0 is already flat") {
        const auto r = min_disparity_policy(m, Scope::L0, 0.5);
        CHECK(r.gap <= 1e-9);
        CHECK(r.budget_usage <= 1e-9);
    }
    SECTION("risk scope, budget must be spent: gap 0.12") {
        MinDisparityOptions opt;
        opt.budget_equality = true;
        const auto r = min_disparity_policy(m, Scope::L0, 0.5, opt);
        CHECK(r.gap == Approx(0.12).margin(1e-9));
        CHECK(q_at(r.policy, ScopeKey{.l0 = 0}) == Approx(0.5).margin(1e-9));
    }
    SECTION("combined scope, budget must be spent: gap 0") {
        MinDisparityOptions opt;
        opt.budget_equality = true;
        const auto r = min_disparity_policy(m, Scope::L0xL1, 0.5, opt);
        CHECK(r.gap <= 1e-9);
        CHECK(q_at(r.policy, ScopeKey{.l0 = 0, .l1 = 0}) == Approx(0.0).margin(1e-9));
        CHECK(q_at(r.policy, ScopeKey{.l0 = 0, .l1 = 1}) == Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("minimum-disparity policies on the shared-cell fixture") {
    const auto m = fixtures::shared_cell_witness();
    SECTION("group-blind covariate scope is stuck at the baseline gap") {
        for (double budget : {0.2, 0.5, 1.0}) {
            const auto r = min_disparity_policy(m, Scope::LxXnoG, budget);
            CHECK(r.gap == Approx(0.2).margin(1e-9));
        }
    }
    SECTION("group-aware scope closes the gap at budget 0.25") {
        const auto r = min_disparity_policy(m, Scope::LxG, 0.5);
        CHECK(r.gap <= 1e-9);
        CHECK(q_at(r.policy, ScopeKey{.l0 = 0, .l1 = 0, .group = "g"}) == Approx(0.0).margin(1e-9));
        CHECK(q_at(r.policy, ScopeKey{.l0 = 0, .l1 = 0, .group = "g'"}) ==
              Approx(0.5).margin(1e-9));
        CHECK(r.budget_usage == Approx(0.25).margin(1e-9));
    }
}

TEST_CASE("joint feasibility reproduces the specialized conditions") {
    SECTION("constant scope with both parities matches the closed form") {
        FeasibilitySpec spec;
        spec.scope = Scope::Global;
        spec.budget = 1.0;
        spec.constraints = {{ConstraintKind::SpAllocation, Scope::L0},
                            {ConstraintKind::SpOutcomes, Scope::L0}};
        const auto joint = joint_feasibility(fixtures::effect_contrast(), spec);
        const auto direct = prop1_solve(fixtures::effect_contrast(), 1.0);
        REQUIRE(joint.status == FeasibilityStatus::Feasible);
        CHECK(q_at(*joint.policy, ScopeKey{}) ==
              Approx(q_at(*direct.policy, ScopeKey{})).margin(1e-9));
    }
    SECTION("combined scope with outcome parity matches the level condition") {
        FeasibilitySpec spec;
        spec.scope = Scope::L0xL1;
        spec.budget = 1.0;
        spec.constraints = {{ConstraintKind::SpOutcomes, Scope::L0}};
        const auto joint = joint_feasibility(fixtures::worked_example(), spec);
        REQUIRE(joint.status == FeasibilityStatus::Infeasible);
        CHECK(*joint.residual_disparity == Approx(0.12).margin(1e-9));
    }
    SECTION("risk scope with outcome parity matches prop2 on the skew fixture") {
        FeasibilitySpec spec;
        spec.scope = Scope::L0;
        spec.budget = 1.0;
        spec.constraints = {{ConstraintKind::SpOutcomes, Scope::L0}};
        const auto joint = joint_feasibility(fixtures::risk_level_skew(), spec);
        const auto direct = prop2_feasibility(fixtures::risk_level_skew(), 1.0);
        REQUIRE(joint.status == direct.status);
        for (const auto& [k, q] : direct.policy->table)
            CHECK(q_at(*joint.policy, k) == Approx(q).margin(1e-9));
    }
}

TEST_CASE("zero budget with unequal baselines leaves the baseline gap") {
    FeasibilitySpec spec;
    spec.scope = Scope::L0xL1;
    spec.budget = 0.0;
    spec.constraints = {{ConstraintKind::SpOutcomes, Scope::L0}};
    const auto res = joint_feasibility(fixtures::effect_contrast(), spec);
    REQUIRE(res.status == FeasibilityStatus::Infeasible);
    CHECK(*res.residual_disparity == Approx(0.2).margin(1e-9));
}

TEST_CASE("scope finer than the conditioning levels is restricted with a warning") {
    FeasibilitySpec spec;
    spec.scope = Scope::LxG;
    spec.budget = 1.0;
    spec.constraints = {{ConstraintKind::CspAllocation, Scope::L0xL1}};
    const auto res = joint_feasibility(fixtures::effect_level_witness(), spec);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(res.policy->scope == Scope::L0xL1);
    REQUIRE_FALSE(res.warnings.empty());
}

TEST_CASE("conditional outcome parity rows keep feasible results honest") {
    // Not well-chosen: p0 differs across groups in the same level, so the
    // conditional outcome equality needs explicit rows, and they are
    // unsatisfiable here under any level-measurable policy.
    const auto m = PopulationModel::from_cells({
        mk("g0", "x1", 1, 0, 0.5, 0.7, 0.8),
        mk("g1", "x1", 1, 0, 0.5, 0.3, 0.4),
    });
    FeasibilitySpec spec;
    spec.scope = Scope::L0;
    spec.budget = 1.0;
    spec.constraints = {{ConstraintKind::CspOutcomes, Scope::L0}};
    const auto res = joint_feasibility(m, spec);
    REQUIRE(res.status == FeasibilityStatus::Infeasible);
    CHECK(*res.residual_disparity == Approx(0.4).margin(1e-9));
}

TEST_CASE("group-status construction on the modest-effect fixture") {
    const auto m = fixtures::modest_effect_contrast();
    const auto res = prop7_construct(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(res.group_order == std::vector<std::string>{"g0", "g1"});
    CHECK(res.group_rates.at("g0") == 0.0);
    CHECK(res.group_rates.at("g1") == Approx(0.8).margin(1e-12));
    const auto out = evaluate_outcomes(m, *res.policy);
    CHECK(out.at("g0") == Approx(0.6).margin(1e-12));
    CHECK(out.at("g1") == Approx(0.6).margin(1e-12));
    CHECK(res.budget_usage == Approx(0.4).margin(1e-12));
    CHECK_FALSE(res.budget_exceeded);
}

TEST_CASE("group-status construction on the strong-effect fixture") {
    const auto res = prop7_construct(fixtures::effect_contrast(), 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(res.group_rates.at("g1") == Approx(0.4).margin(1e-12));
    const auto out = evaluate_outcomes(fixtures::effect_contrast(), *res.policy);
    CHECK(out.at("g0") == Approx(0.6).margin(1e-12));
    CHECK(out.at("g1") == Approx(0.6).margin(1e-12));
}

TEST_CASE("equal baselines need no treatment for outcome parity") {
    const auto m = PopulationModel::from_cells({mk("g0", "x0", 0, 0, 0.5, 0.4, 0.6),
                                                mk("g1", "x0", 0, 0, 0.5, 0.4, 0.7)});
    const auto res = prop7_construct(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    for (const auto& [g, r] : res.group_rates) CHECK(r == 0.0);
    CHECK(res.budget_usage == 0.0);
}

TEST_CASE("insufficient effects fail the construction condition") {
    const auto m = PopulationModel::from_cells({mk("g0", "x0", 0, 0, 0.5, 0.7, 0.75),
                                                mk("g1", "x0", 0, 0, 0.5, 0.3, 0.4)});
    const auto res = prop7_construct(m, 1.0);
    REQUIRE(res.status == FeasibilityStatus::InfeasibleByCondition);
    REQUIRE(res.residual_disparity.has_value());
    // Best group-aware policy: treat g1 fully, shrinking the gap to 0.3.
    CHECK(*res.residual_disparity == Approx(0.3).margin(1e-9));
}

TEST_CASE("construction exceeding the budget is flagged, not scaled") {
    const auto res = prop7_construct(fixtures::modest_effect_contrast(), 0.1);
    REQUIRE(res.status == FeasibilityStatus::Feasible);
    CHECK(res.budget_exceeded);
    CHECK(res.budget_usage == Approx(0.4).margin(1e-12));
}

TEST_CASE("zero group effect with a positive deficit is honestly unattainable") {
    const auto m = PopulationModel::from_cells({mk("g0", "x0", 0, 0, 0.5, 0.6, 0.7),
                                                mk("g1", "x0", 0, 0, 0.5, 0.4, 0.4)});
    const auto res = prop7_construct(m, 1.0);
    CHECK(res.status == FeasibilityStatus::InfeasibleByCondition);
}

TEST_CASE("feasible synthesis results re-audit clean across operations") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        GeneratorConstraints cons;
        cons.force_l1_well_chosen = true;
        const auto m = generate_random(seed, {2, 2, 1, 1}, cons);
        const auto r1 = prop1_solve(m, 1.0);
        if (r1.status == FeasibilityStatus::Feasible)
            CHECK(reaudit_gap(m, *r1.policy,
                              {{ConstraintKind::SpAllocation, Scope::L0},
                               {ConstraintKind::SpOutcomes, Scope::L0}}) <= 1e-9);
        const auto r2 = prop2_feasibility(m, 1.0);
        if (r2.status == FeasibilityStatus::Feasible)
            CHECK(reaudit_gap(m, *r2.policy,
                              {{ConstraintKind::CspAllocation, Scope::L0},
                               {ConstraintKind::SpOutcomes, Scope::L0}}) <= 1e-9);
        const auto r4 = prop4_feasibility(m, 1.0);
        if (r4.status == FeasibilityStatus::Feasible)
            CHECK(reaudit_gap(m, *r4.policy,
                              {{ConstraintKind::CspAllocation, Scope::L0xL1},
                               {ConstraintKind::SpOutcomes, Scope::L0}}) <= 1e-9);
        const auto r7 = prop7_construct(m, 1.0);
        if (r7.status == FeasibilityStatus::Feasible)
            CHECK(reaudit_gap(m, *r7.policy, {{ConstraintKind::SpOutcomes, Scope::L0}}) <= 1e-9);
    }
}

TEST_CASE("the closed-form p agrees with a fine grid on the minimizer") {
    Rng seed_rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(seed_rng.next_u64());
        const auto m = prop_detail::make_constant_policy_instance(rng, true);
        const auto res = prop1_solve(m, 1.0);
        REQUIRE(res.status == FeasibilityStatus::Feasible);
        // Grid argmin of the max pairwise gap over p in {0, 1e-3, ..., 1}.
        const auto stats = group_statistics(m);
        double best_p = 0.0, best_gap = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 1000; ++i) {
            const double p = i * 1e-3;
            double gap = 0.0;
            for (std::size_t a = 0; a < stats.size(); ++a)
                for (std::size_t b = a + 1; b < stats.size(); ++b)
                    gap = std::max(gap, std::abs(stats[a].baseline + p * stats[a].ate -
                                                 stats[b].baseline - p * stats[b].ate));
            if (gap < best_gap) {
                best_gap = gap;
                best_p = p;
            }
        }
        CHECK(std::abs(res.policy->table.begin()->second - best_p) <= 2e-3);
    }
}

TEST_CASE("minimum-disparity optima agree with an exhaustive policy grid") {
    // The LP optimum must never beat the true optimum by more than rounding
    // and must be within one grid step's Lipschitz error of the grid optimum.
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto m = generate_random(seed, {2, 3, 1, 1});
        const double budget = 0.4 + 0.2 * (seed % 3);
        const auto r = min_disparity_policy(m, Scope::L0, budget);

        const auto stats = group_statistics(m);
        std::map<int, std::array<double, 2>> w;  // level -> per-group tau mass
        std::map<int, double> level_mass;
        for (const Cell& c : m.cells) {
            const std::size_t g = c.group == m.groups[0] ? 0 : 1;
            w[c.l0][g] += c.mass / m.group_mass(c.group) * c.tau();
            level_mass[c.l0] += c.mass;
        }
        std::vector<int> levels;
        for (const auto& [l, unused] : w) levels.push_back(l);
        REQUIRE(levels.size() == 3);
        double grid_best = std::numeric_limits<double>::infinity();
        const double step = 0.01;
        for (int i = 0; i <= 100; ++i) {
            for (int j = 0; j <= 100; ++j) {
                for (int k = 0; k <= 100; ++k) {
                    const double q[3] = {i * step, j * step, k * step};
                    double used = 0.0, d0 = 0.0, d1 = 0.0;
                    for (int t = 0; t < 3; ++t) {
                        used += level_mass[levels[t]] * q[t];
                        d0 += w[levels[t]][0] * q[t];
                        d1 += w[levels[t]][1] * q[t];
                    }
                    if (used > budget + 1e-12) continue;
                    grid_best = std::min(
                        grid_best, std::abs(stats[0].baseline + d0 - stats[1].baseline - d1));
                }
            }
        }
        CHECK(r.gap <= grid_best + 1e-9);
        CHECK(grid_best <= r.gap + 0.03);  // grid resolution slack
    }
}

TEST_CASE("oriented-signed disparity minimization can overshoot past parity") {
    const auto m = fixtures::shared_cell_witness();
    MinDisparityOptions opts;
    opts.oriented_signed = true;
    const auto blind = min_disparity_policy(m, Scope::LxXnoG, 0.5, opts);
    CHECK(blind.gap == Approx(0.2).margin(1e-9));
    const auto aware = min_disparity_policy(m, Scope::LxG, 0.5, opts);
    CHECK(aware.gap == Approx(-0.2).margin(1e-9));
}

TEST_CASE("optimal disparity never increases along the refinement chain") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto m = generate_random(seed, {2, 2, 2, 2});
        const double budget = 0.3 + 0.4 * (seed % 3) / 2.0;
        double prev = std::numeric_limits<double>::infinity();
        for (Scope s : {Scope::L0, Scope::L0xL1, Scope::LxXnoG, Scope::Full}) {
            const double gap = min_disparity_policy(m, s, budget).gap;
            CHECK(gap <= prev + 1e-9);
            prev = gap;
        }
    }
}

TEST_CASE("invalid models are rejected by synthesis entry points") {
    auto bad = PopulationModel::from_cells({mk("g0", "x0", 0, 0, 0.5, 0.5, 0.2),
                                            mk("g1", "x0", 0, 0, 0.5, 0.4, 0.5)});
    CHECK_THROWS_AS(prop1_solve(bad, 1.0), ModelError);
    CHECK_THROWS_AS(min_disparity_policy(bad, Scope::L0, 1.0), ModelError);
    FeasibilitySpec spec;
    spec.constraints = {{ConstraintKind::SpOutcomes, Scope::L0}};
    CHECK_THROWS_AS(joint_feasibility(bad, spec), ModelError);
    spec.budget = 1.5;
    CHECK_THROWS_AS(joint_feasibility(fixtures::effect_contrast(), spec), SynthesisError);
}
