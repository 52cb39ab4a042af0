#pragma once

#include <string>
#include <vector>

#include "population.hpp"

// Small canonical models used across tests, the verification harness and the
// documentation. Each is hand-constructed so its synthesis verdicts can be
// checked by hand.
namespace fairalloc::fixtures {

namespace detail {

inline Cell cell(std::string g, std::string x, int l0, int l1, double mass, double p0, double p1) {
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

}  // namespace detail

// Two groups with equal baselines and effects but skewed risk-level
// distributions: P(L0=1|g0)=0.5 vs P(L0=1|g1)=0.8.
inline PopulationModel risk_level_skew() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g0", "x1", 1, 0, 0.25, 0.5, 0.6),
        cell("g0", "x2", 2, 0, 0.25, 0.5, 0.6),
        cell("g1", "x1", 1, 0, 0.40, 0.5, 0.6),
        cell("g1", "x2", 2, 0, 0.10, 0.5, 0.6),
    });
}

// One cell per group: g0 has the higher baseline (0.6 vs 0.4), g1 the much
// larger effect (0.5 vs 0.1). A constant policy with p=0.5 equalizes
// outcomes at 0.65.
inline PopulationModel effect_contrast() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g0", "x0", 0, 0, 0.5, 0.6, 0.7),
        cell("g1", "x0", 0, 0, 0.5, 0.4, 0.9),
    });
}

// effect_contrast with the effects swapped: the advantaged group also has
// the larger effect, so joint allocation/outcome parity is unattainable.
inline PopulationModel effect_contrast_swapped() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g0", "x0", 0, 0, 0.5, 0.6, 1.0),
        cell("g1", "x0", 0, 0, 0.5, 0.4, 0.5),
    });
}

// Two groups, two combined levels; baselines 0.6 and 0.4, per-level effects
// 0.3 and 0.2. The combined-level parity equation has coefficients
// a = (0.12, -0.08) against a required -0.2, so it is unsatisfiable; the
// closest policy is q = (0, 1). The level-1 treated rate is 1.05, which
// validation reports as out of range; synthesis still runs on this model.
inline PopulationModel worked_example() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g", "x1", 1, 1, 0.35, 0.75, 1.05),
        cell("g", "x2", 2, 2, 0.15, 0.25, 0.45),
        cell("g'", "x1", 1, 1, 0.15, 0.75, 1.05),
        cell("g'", "x2", 2, 2, 0.35, 0.25, 0.45),
    });
}

// worked_example with the level-2 effect raised to 0.6 (a2 = -0.24), which
// makes the parity equation solvable, e.g. q = (0, 5/6).
inline PopulationModel worked_example_feasible_variant() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g", "x1", 1, 1, 0.35, 0.75, 1.05),
        cell("g", "x2", 2, 2, 0.15, 0.25, 0.85),
        cell("g'", "x1", 1, 1, 0.15, 0.75, 1.05),
        cell("g'", "x2", 2, 2, 0.35, 0.25, 0.85),
    });
}

// Like effect_contrast but with a modest effect (0.25) for g1: the
// group-status construction needs rate 0.8 to close the 0.2 baseline gap.
inline PopulationModel modest_effect_contrast() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g0", "x0", 0, 0, 0.5, 0.6, 0.7),
        cell("g1", "x0", 0, 0, 0.5, 0.4, 0.65),
    });
}

// Single risk level, two effect levels (tau 0.4 vs 0.0) with opposite level
// distributions across groups. Under a forced-equal-budget comparison at
// B=0.5, a risk-only policy is stuck at gap 0.12 while the combined-level
// policy reaches 0.
inline PopulationModel effect_level_witness() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g", "a", 0, 0, 0.1, 0.5, 0.9),
        cell("g", "b", 0, 1, 0.4, 0.5, 0.5),
        cell("g'", "a", 0, 0, 0.4, 0.5, 0.9),
        cell("g'", "b", 0, 1, 0.1, 0.5, 0.5),
    });
}

// Both groups share one covariate cell, so any group-blind policy moves
// them together (gap stuck at 0.2); a group-aware policy closes the gap at
// budget 0.25.
inline PopulationModel shared_cell_witness() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g", "x", 0, 0, 0.5, 0.6, 1.0),
        cell("g'", "x", 0, 0, 0.5, 0.4, 0.8),
    });
}

// One combined level split across two covariate cells whose group mixtures
// differ (x1 is 80% g, x2 is 80% g'). A level-only policy cannot move the
// 0.1 baseline gap at all; targeting x2 under budget 0.2 shrinks it to
// 0.004. Witnesses the value of covariates beyond the levels.
inline PopulationModel proxy_split_witness() {
    using detail::cell;
    return PopulationModel::from_cells({
        cell("g", "x1", 0, 0, 0.4, 0.55, 0.95),
        cell("g", "x2", 0, 0, 0.1, 0.55, 0.95),
        cell("g'", "x1", 0, 0, 0.1, 0.45, 0.85),
        cell("g'", "x2", 0, 0, 0.4, 0.45, 0.85),
    });
}

}  // namespace fairalloc::fixtures
