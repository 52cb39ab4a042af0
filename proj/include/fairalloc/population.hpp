#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fraction.hpp"
#include "random.hpp"

namespace fairalloc {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One stratum of the discrete population: a (group, covariate) pair with its
// risk level, effect level, probability mass and potential-outcome rates.
// p0 = P(Y=1 | no treatment), p1 = P(Y=1 | treatment); tau = p1 - p0.
struct Cell {
    std::string group;
    std::string covariate;
    int l0 = 0;
    int l1 = 0;
    double mass = 0.0;
    double p0 = 0.0;
    double p1 = 0.0;

    // Exact values when the cell was built from integer counts.
    std::optional<Fraction> mass_exact;
    std::optional<Fraction> p0_exact;
    std::optional<Fraction> p1_exact;

    // Cleared by from_records when a treatment arm had no observations.
    bool p0_estimable = true;
    bool p1_estimable = true;

    double tau() const { return p1 - p0; }

    std::string describe() const { return "(" + group + ", " + covariate + ")"; }
};

// Discrete joint distribution over (group, covariate cell) with per-cell
// baseline and treated outcome probabilities. Immutable after construction.
struct PopulationModel {
    std::vector<Cell> cells;
    std::vector<std::string> groups;
    std::vector<int> l0_levels;
    std::vector<int> l1_levels;

    // Canonical construction: sorts cells and derives the group/level lists.
    static PopulationModel from_cells(std::vector<Cell> cells) {
        PopulationModel m;
        std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
            return std::tie(a.group, a.covariate) < std::tie(b.group, b.covariate);
        });
        std::set<std::string> gs;
        std::set<int> l0s, l1s;
        for (const Cell& c : cells) {
            gs.insert(c.group);
            l0s.insert(c.l0);
            l1s.insert(c.l1);
        }
        m.cells = std::move(cells);
        m.groups.assign(gs.begin(), gs.end());
        m.l0_levels.assign(l0s.begin(), l0s.end());
        m.l1_levels.assign(l1s.begin(), l1s.end());
        return m;
    }

    double group_mass(const std::string& g) const {
        double s = 0.0;
        for (const Cell& c : cells)
            if (c.group == g) s += c.mass;
        return s;
    }

    bool all_exact() const {
        for (const Cell& c : cells)
            if (!c.mass_exact || !c.p0_exact || !c.p1_exact) return false;
        return !cells.empty();
    }
};

struct Violation {
    std::string message;
    bool blocks_synthesis = false;
};

// Result of validate(). Validation never throws; it reports.
struct ValidationReport {
    std::vector<Violation> violations;
    bool l0_well_chosen = false;
    bool l1_well_chosen = false;

    bool valid() const { return violations.empty(); }

    // Violations that make the model unusable for policy synthesis (mass
    // structure, negative effects, NaNs). Out-of-range outcome probabilities
    // are reported but do not block: the linear synthesis algebra is still
    // well defined and audit inputs may legitimately carry them.
    std::vector<std::string> synthesis_blockers() const {
        std::vector<std::string> out;
        for (const Violation& v : violations)
            if (v.blocks_synthesis) out.push_back(v.message);
        return out;
    }
};

namespace detail {

inline bool finite(double x) { return std::isfinite(x); }

}  // namespace detail

inline ValidationReport validate(const PopulationModel& model) {
    ValidationReport rep;
    auto blocker = [&](const std::string& msg) { rep.violations.push_back({msg, true}); };
    auto soft = [&](const std::string& msg) { rep.violations.push_back({msg, false}); };

    if (model.cells.empty()) {
        blocker("model has no cells");
        return rep;
    }

    double total = 0.0;
    std::set<std::pair<std::string, std::string>> seen;
    for (const Cell& c : model.cells) {
        if (!detail::finite(c.mass) || !detail::finite(c.p0) || !detail::finite(c.p1))
            blocker("non-finite field at cell " + c.describe());
        if (c.mass < 0.0) blocker("negative mass at cell " + c.describe());
        if (c.p0 < 0.0 || c.p0 > 1.0) blocker("p0 outside [0,1] at cell " + c.describe());
        if (c.p1 < 0.0 || c.p1 > 1.0) soft("p1 outside [0,1] at cell " + c.describe());
        if (detail::finite(c.p0) && detail::finite(c.p1) && c.tau() < -1e-12)
            blocker("negative CATE at cell " + c.describe());
        if (!seen.insert({c.group, c.covariate}).second)
            blocker("duplicate (group, covariate) pair " + c.describe());
        if (std::find(model.groups.begin(), model.groups.end(), c.group) == model.groups.end())
            blocker("cell " + c.describe() + " references undeclared group");
        total += c.mass;
    }
    if (std::abs(total - 1.0) > 1e-9)
        blocker("cell masses sum to " + std::to_string(total) + ", expected 1");

    for (const std::string& g : model.groups)
        if (model.group_mass(g) <= 0.0) blocker("group " + g + " has zero mass");

    // Well-chosen flags: computed, never enforced.
    rep.l0_well_chosen = true;
    rep.l1_well_chosen = true;
    std::map<int, double> p0_by_l0;
    std::map<int, double> tau_by_l1;
    for (const Cell& c : model.cells) {
        if (c.mass <= 0.0) continue;
        auto [it0, new0] = p0_by_l0.try_emplace(c.l0, c.p0);
        if (!new0 && std::abs(it0->second - c.p0) > 1e-9) rep.l0_well_chosen = false;
        auto [it1, new1] = tau_by_l1.try_emplace(c.l1, c.tau());
        if (!new1 && std::abs(it1->second - c.tau()) > 1e-9) rep.l1_well_chosen = false;
    }
    return rep;
}

// Throws ModelError when the model cannot back a synthesis operation.
inline void require_synthesis_ready(const PopulationModel& model) {
    const auto blockers = validate(model).synthesis_blockers();
    if (!blockers.empty()) throw ModelError("invalid model: " + blockers.front());
    for (const Cell& c : model.cells)
        if (!c.p0_estimable || !c.p1_estimable)
            throw ModelError("invalid model: cell " + c.describe() + " has an unestimable arm");
}

// Per-group aggregates; all quantities are mass-weighted sums over cells.
struct GroupStats {
    std::string group;
    double mass = 0.0;      // P(G=g)
    double baseline = 0.0;  // P(Y0=1 | G=g)
    double ate = 0.0;       // E[Y1-Y0 | G=g]
    std::map<int, double> l0_marginal;                 // P(L0=l | G=g)
    std::map<int, double> l1_marginal;                 // P(L1=l | G=g)
    std::map<std::pair<int, int>, double> l_marginal;  // P(L=(l0,l1) | G=g)
};

inline std::vector<GroupStats> group_statistics(const PopulationModel& model) {
    bool masses_exact = !model.cells.empty();
    bool outcomes_exact = !model.cells.empty();
    for (const Cell& c : model.cells) {
        masses_exact = masses_exact && c.mass_exact.has_value();
        outcomes_exact = outcomes_exact && c.p0_exact.has_value() && c.p1_exact.has_value();
    }
    outcomes_exact = outcomes_exact && masses_exact;

    std::vector<GroupStats> out;
    for (const std::string& g : model.groups) {
        GroupStats s;
        s.group = g;
        if (masses_exact) {
            // Rational path so that count-ingested models reproduce direct
            // frequency counting bit-for-bit.
            Fraction gm(0, 1);
            for (const Cell& c : model.cells)
                if (c.group == g) gm = gm + *c.mass_exact;
            s.mass = gm.value();
            Fraction base(0, 1), ate(0, 1);
            std::map<int, Fraction> m0, m1;
            std::map<std::pair<int, int>, Fraction> ml;
            for (const Cell& c : model.cells) {
                if (c.group != g || gm.num == 0) continue;
                const Fraction w = *c.mass_exact / gm;
                if (outcomes_exact) {
                    base = base + w * *c.p0_exact;
                    ate = ate + w * (*c.p1_exact - *c.p0_exact);
                }
                m0[c.l0] = (m0.count(c.l0) ? m0[c.l0] : Fraction(0, 1)) + w;
                m1[c.l1] = (m1.count(c.l1) ? m1[c.l1] : Fraction(0, 1)) + w;
                const auto key = std::make_pair(c.l0, c.l1);
                ml[key] = (ml.count(key) ? ml[key] : Fraction(0, 1)) + w;
            }
            for (const auto& [k, v] : m0) s.l0_marginal[k] = v.value();
            for (const auto& [k, v] : m1) s.l1_marginal[k] = v.value();
            for (const auto& [k, v] : ml) s.l_marginal[k] = v.value();
            if (outcomes_exact) {
                s.baseline = base.value();
                s.ate = ate.value();
            }
        }
        if (!masses_exact || !outcomes_exact) {
            double gm = 0.0;
            for (const Cell& c : model.cells)
                if (c.group == g) gm += c.mass;
            if (!masses_exact) s.mass = gm;
            double base = 0.0, ate = 0.0;
            for (const Cell& c : model.cells) {
                if (c.group != g || gm <= 0.0) continue;
                const double w = c.mass / gm;
                base += w * c.p0;
                ate += w * c.tau();
                if (!masses_exact) {
                    s.l0_marginal[c.l0] += w;
                    s.l1_marginal[c.l1] += w;
                    s.l_marginal[{c.l0, c.l1}] += w;
                }
            }
            s.baseline = base;
            s.ate = ate;
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Historical allocation data.

struct AllocationRecord {
    std::string id;
    std::string group;
    int l0 = 0;
    std::optional<int> l1;
    std::string recommended;  // pi(X)
    std::string received;     // mu(X)
    std::optional<int> outcome;
    std::vector<std::pair<std::string, std::string>> features;  // (column, value)
};

struct Dataset {
    std::vector<AllocationRecord> records;
    std::vector<std::string> treatments;

    std::vector<std::string> group_list() const {
        std::set<std::string> gs;
        for (const auto& r : records) gs.insert(r.group);
        return {gs.begin(), gs.end()};
    }
};

inline void require_dataset(const Dataset& data) {
    if (data.records.empty()) throw ModelError("dataset empty");
    if (data.treatments.size() < 2) throw ModelError("dataset declares fewer than 2 treatments");
    std::set<std::string> ts(data.treatments.begin(), data.treatments.end());
    for (const auto& r : data.records) {
        if (!ts.count(r.recommended))
            throw ModelError("record " + r.id + ": recommended treatment '" + r.recommended +
                             "' not in declared treatment set");
        if (!ts.count(r.received))
            throw ModelError("record " + r.id + ": received treatment '" + r.received +
                             "' not in declared treatment set");
        if (r.outcome && *r.outcome != 0 && *r.outcome != 1)
            throw ModelError("record " + r.id + ": outcome must be 0 or 1");
    }
}

// ---------------------------------------------------------------------------
// Empirical model estimation.

struct EstimationOptions {
    // Synthesis mode enforces a binary {0,1} treatment set, clamps negative
    // empirical effects to zero and drops strata with an unestimable arm.
    // Audit mode keeps everything and only flags.
    bool synthesis = false;
};

struct EstimationResult {
    PopulationModel model;
    std::vector<std::string> flagged;  // strata with a missing treatment arm
    std::vector<std::string> warnings;
};

// Builds the empirical joint distribution from records. Identification
// assumes unconfoundedness within each (group, covariate) stratum: the
// received treatment is as-good-as-random inside a stratum.
inline EstimationResult from_records(const Dataset& data, const EstimationOptions& opts = {}) {
    require_dataset(data);

    std::size_t missing_outcomes = 0;
    for (const auto& r : data.records)
        if (!r.outcome) ++missing_outcomes;
    if (missing_outcomes > 0)
        throw ModelError("from_records requires the outcome column on every record (" +
                         std::to_string(missing_outcomes) + " missing)");

    const bool binary = data.treatments.size() == 2 &&
                        std::count(data.treatments.begin(), data.treatments.end(), "0") == 1 &&
                        std::count(data.treatments.begin(), data.treatments.end(), "1") == 1;
    EstimationResult res;
    if (!binary) {
        if (opts.synthesis)
            throw ModelError("synthesis estimation requires the binary treatment set {0,1}");
        res.warnings.push_back(
            "non-binary treatment set: only arms '0' and '1' inform p0/p1 estimates");
    }

    struct Arm {
        std::int64_t n = 0;
        std::int64_t positives = 0;
    };
    struct Stratum {
        std::int64_t n = 0;
        int l0 = 0;
        int l1 = 0;
        Arm control, treated;
    };
    auto stratum_covariate = [](const AllocationRecord& r) {
        std::ostringstream os;
        os << "l0=" << r.l0 << "|l1=" << (r.l1 ? std::to_string(*r.l1) : "-");
        for (const auto& [k, v] : r.features) os << "|" << k << "=" << v;
        return os.str();
    };

    std::map<std::pair<std::string, std::string>, Stratum> strata;
    for (const auto& r : data.records) {
        Stratum& s = strata[{r.group, stratum_covariate(r)}];
        s.n += 1;
        s.l0 = r.l0;
        s.l1 = r.l1.value_or(0);
        if (r.received == "0") {
            s.control.n += 1;
            s.control.positives += *r.outcome;
        } else if (r.received == "1") {
            s.treated.n += 1;
            s.treated.positives += *r.outcome;
        }
    }

    const std::int64_t total = static_cast<std::int64_t>(data.records.size());
    std::vector<Cell> cells;
    std::int64_t kept = 0;
    for (const auto& [key, s] : strata) {
        Cell c;
        c.group = key.first;
        c.covariate = key.second;
        c.l0 = s.l0;
        c.l1 = s.l1;
        c.mass_exact = Fraction(s.n, total);
        c.mass = c.mass_exact->value();
        c.p0_estimable = s.control.n > 0;
        c.p1_estimable = s.treated.n > 0;
        if (c.p0_estimable) {
            c.p0_exact = Fraction(s.control.positives, s.control.n);
            c.p0 = c.p0_exact->value();
        } else {
            c.p0 = std::nan("");
            res.flagged.push_back("stratum " + c.describe() + ": p0 unestimable (no received=0 records)");
        }
        if (c.p1_estimable) {
            c.p1_exact = Fraction(s.treated.positives, s.treated.n);
            c.p1 = c.p1_exact->value();
        } else {
            c.p1 = std::nan("");
            res.flagged.push_back("stratum " + c.describe() + ": p1 unestimable (no received=1 records)");
        }
        if (opts.synthesis) {
            if (!c.p0_estimable || !c.p1_estimable) continue;  // excluded from synthesis
            if (c.tau() < 0.0) {
                res.warnings.push_back("stratum " + c.describe() + ": negative empirical effect " +
                                       std::to_string(c.tau()) + " clamped to 0 for synthesis");
                c.p1 = c.p0;
                c.p1_exact = c.p0_exact;
            }
        }
        kept += s.n;
        cells.push_back(std::move(c));
    }

    if (cells.empty()) throw ModelError("all strata unestimable; nothing to estimate");
    if (opts.synthesis && kept != total) {
        res.warnings.push_back("dropped " + std::to_string(total - kept) +
                               " records in unestimable strata; masses renormalized");
        for (Cell& c : cells) {
            c.mass_exact = Fraction(c.mass_exact->num * total / c.mass_exact->den, kept);
            c.mass = c.mass_exact->value();
        }
    }

    res.model = PopulationModel::from_cells(std::move(cells));
    return res;
}

// ---------------------------------------------------------------------------
// Random instance generation.

struct GeneratorShape {
    int groups = 2;
    int l0 = 2;
    int l1 = 1;
    int covariates = 1;  // covariate cells per (l0, l1) level pair
};

struct GeneratorConstraints {
    bool force_l0_well_chosen = false;
    bool force_l1_well_chosen = false;
};

// Deterministic random model: one cell per (group, l0, l1, covariate slot),
// covariate labels shared across groups so non-group scopes can align cells.
inline PopulationModel generate_random(std::uint64_t seed, const GeneratorShape& shape,
                                       const GeneratorConstraints& cons = {}) {
    if (shape.groups < 1 || shape.l0 < 1 || shape.l1 < 1 || shape.covariates < 1)
        throw ModelError("generator shape counts must be >= 1");
    Rng rng(seed);

    std::vector<double> p0_level(shape.l0);
    for (double& p : p0_level) p = rng.uniform(0.1, 0.6);
    std::vector<double> tau_level(shape.l1);
    for (double& t : tau_level) t = rng.uniform(0.0, 0.35);

    std::vector<Cell> cells;
    std::vector<double> raw;
    for (int g = 0; g < shape.groups; ++g) {
        for (int a = 0; a < shape.l0; ++a) {
            for (int b = 0; b < shape.l1; ++b) {
                for (int x = 0; x < shape.covariates; ++x) {
                    Cell c;
                    c.group = "g" + std::to_string(g);
                    c.covariate = "x" + std::to_string(a) + "_" + std::to_string(b) + "_" + std::to_string(x);
                    c.l0 = a;
                    c.l1 = b;
                    c.p0 = cons.force_l0_well_chosen ? p0_level[a] : rng.uniform(0.1, 0.6);
                    const double tau =
                        cons.force_l1_well_chosen ? tau_level[b] : rng.uniform(0.0, 0.35);
                    c.p1 = c.p0 + tau;
                    raw.push_back(rng.uniform(0.05, 1.0));
                    cells.push_back(std::move(c));
                }
            }
        }
    }
    double sum = 0.0;
    for (double r : raw) sum += r;
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i].mass = raw[i] / sum;
    return PopulationModel::from_cells(std::move(cells));
}

}  // namespace fairalloc
