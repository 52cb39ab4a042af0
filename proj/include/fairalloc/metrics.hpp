#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "policy.hpp"
#include "population.hpp"

namespace fairalloc {

enum class MetricBackend { Dataset, Model };

// Where probabilities come from: empirical frequencies over historical
// records, or analytic probabilities from a population model with policies.
class ProbabilitySource {
public:
    static ProbabilitySource from_dataset(Dataset data) {
        require_dataset(data);
        ProbabilitySource src;
        src.dataset_ = std::move(data);
        return src;
    }

    // `recommend` backs Definitions 1-2, the kernel Definitions 3-6, and the
    // allocation policy Definitions 7-8. When `allocate` is omitted it is
    // derived by composing `recommend` with the kernel (identity by default).
    static ProbabilitySource from_model(PopulationModel model, std::optional<Policy> recommend,
                                        std::optional<FaithfulnessKernel> kernel = {},
                                        std::optional<Policy> allocate = {}) {
        ProbabilitySource src;
        if (recommend) recommend->check_valid();
        if (kernel) kernel->check_valid();
        if (allocate) allocate->check_valid();
        src.model_ = std::move(model);
        src.recommend_ = std::move(recommend);
        src.kernel_ = kernel ? std::move(*kernel) : FaithfulnessKernel::identity();
        if (allocate)
            src.allocate_ = std::move(allocate);
        else if (src.recommend_)
            src.allocate_ = compose_allocation(*src.model_, *src.recommend_, src.kernel_);
        return src;
    }

    MetricBackend backend() const { return dataset_ ? MetricBackend::Dataset : MetricBackend::Model; }

    const Dataset& dataset() const {
        if (!dataset_) throw ModelError("probability source has no dataset backend");
        return *dataset_;
    }
    const PopulationModel& model() const {
        if (!model_) throw ModelError("probability source has no model backend");
        return *model_;
    }
    const Policy& recommend() const {
        if (!recommend_) throw ModelError("model source has no recommendation policy");
        return *recommend_;
    }
    const FaithfulnessKernel& kernel() const { return kernel_; }
    const Policy& allocate() const {
        if (!allocate_) throw ModelError("model source has no allocation policy");
        return *allocate_;
    }
    bool has_recommend() const { return recommend_.has_value(); }
    bool has_allocate() const { return allocate_.has_value(); }

private:
    ProbabilitySource() = default;
    std::optional<Dataset> dataset_;
    std::optional<PopulationModel> model_;
    std::optional<Policy> recommend_;
    FaithfulnessKernel kernel_ = FaithfulnessKernel::identity();
    std::optional<Policy> allocate_;
};

// One conditioning context of a definition: a treatment (and received
// treatment for faithfulness) and/or a legitimate-feature level, with the
// per-group conditional probability. NaN marks an undefined conditional.
struct DisparitySlice {
    std::string treatment;
    std::string received;
    std::optional<ScopeKey> level;
    std::vector<double> prob;

    std::string context() const {
        std::string s;
        auto add = [&](const std::string& piece) {
            if (!piece.empty()) s += (s.empty() ? "" : ", ") + piece;
        };
        if (!treatment.empty()) add("t=" + treatment);
        if (!received.empty()) add("t'=" + received);
        if (level) add(level->str());
        return s.empty() ? "overall" : s;
    }
};

struct UndefinedPair {
    std::string g;
    std::string g2;
    std::string context;
};

// Pairwise violation report for one fairness definition. The difference
// matrix D[i][j] = prob[i] - prob[j] is antisymmetric by construction.
struct DisparityReport {
    int definition = 0;
    std::string name;
    std::string legit;  // "", "L0" or "L0xL1"
    double eps = 1e-9;
    std::vector<std::string> groups;
    std::vector<DisparitySlice> slices;
    double max_abs_gap = 0.0;
    bool satisfied = true;
    std::vector<UndefinedPair> undefined;
    std::vector<std::string> warnings;

    std::vector<std::vector<double>> matrix(const DisparitySlice& s) const {
        const std::size_t n = groups.size();
        std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = s.prob[i] - s.prob[j];
        return d;
    }
};

namespace metrics_detail {

inline void finalize(DisparityReport& rep) {
    rep.max_abs_gap = 0.0;
    rep.undefined.clear();
    for (const DisparitySlice& s : rep.slices) {
        for (std::size_t i = 0; i < rep.groups.size(); ++i) {
            for (std::size_t j = i + 1; j < rep.groups.size(); ++j) {
                if (std::isnan(s.prob[i]) || std::isnan(s.prob[j])) {
                    rep.undefined.push_back({rep.groups[i], rep.groups[j], s.context()});
                } else {
                    rep.max_abs_gap = std::max(rep.max_abs_gap, std::abs(s.prob[i] - s.prob[j]));
                }
            }
        }
    }
    rep.satisfied = rep.max_abs_gap <= rep.eps;
    for (const UndefinedPair& u : rep.undefined)
        rep.warnings.push_back("undefined pair (" + u.g + ", " + u.g2 + ") at " + u.context +
                               ": zero conditioning mass");
}

inline void require_legit(Scope legit) {
    if (legit != Scope::L0 && legit != Scope::L0xL1)
        throw ModelError("legitimate-feature conditioning must be L0 or L0xL1");
}

// --- dataset backend -------------------------------------------------------

inline ScopeKey record_level(const AllocationRecord& r, Scope legit) {
    ScopeKey k;
    k.l0 = r.l0;
    if (legit == Scope::L0xL1) {
        if (!r.l1)
            throw ModelError("record " + r.id + " lacks l1; cannot condition on L0xL1");
        k.l1 = *r.l1;
    }
    return k;
}

inline std::vector<ScopeKey> dataset_levels(const Dataset& data, Scope legit) {
    std::set<ScopeKey> ks;
    for (const auto& r : data.records) ks.insert(record_level(r, legit));
    return {ks.begin(), ks.end()};
}

// Empirical conditional frequency per group. `cond` selects the conditioning
// event, `hit` the numerator event within it.
template <typename Cond, typename Hit>
std::vector<double> count_ratio(const Dataset& data, const std::vector<std::string>& groups,
                                Cond cond, Hit hit) {
    std::vector<double> out(groups.size(), std::nan(""));
    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::int64_t den = 0, num = 0;
        for (const auto& r : data.records) {
            if (r.group != groups[i] || !cond(r)) continue;
            ++den;
            if (hit(r)) ++num;
        }
        if (den > 0) out[i] = static_cast<double>(num) / static_cast<double>(den);
    }
    return out;
}

// --- model backend ---------------------------------------------------------

inline std::vector<ScopeKey> model_levels(const PopulationModel& model, Scope legit) {
    std::set<ScopeKey> ks;
    for (const Cell& c : model.cells) ks.insert(project(c, legit));
    return {ks.begin(), ks.end()};
}

// Mass-weighted conditional expectation of `value` over cells passing `cond`.
template <typename Cond, typename Value>
std::vector<double> cell_ratio(const PopulationModel& model, Cond cond, Value value) {
    std::vector<double> out(model.groups.size(), std::nan(""));
    for (std::size_t i = 0; i < model.groups.size(); ++i) {
        double den = 0.0, num = 0.0;
        for (const Cell& c : model.cells) {
            if (c.group != model.groups[i] || !cond(c)) continue;
            den += c.mass;
            num += c.mass * value(c);
        }
        if (den > 0.0) out[i] = num / den;
    }
    return out;
}

// P(pi = t | cell) for the binary recommendation policy.
inline double recommend_prob(const Policy& pi, const Cell& c, const std::string& t) {
    const double q = pi.q_for(c);
    return t == "1" ? q : 1.0 - q;
}

}  // namespace metrics_detail

// Definition 1: statistical parity in enrollments.
// P(pi(X)=t | G=g) equal across groups for every treatment t.
inline DisparityReport sp_enrollment(const ProbabilitySource& src, double eps = 1e-9) {
    DisparityReport rep;
    rep.definition = 1;
    rep.name = "statistical parity in enrollments";
    rep.eps = eps;
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        for (const std::string& t : d.treatments) {
            DisparitySlice s;
            s.treatment = t;
            s.prob = metrics_detail::count_ratio(
                d, rep.groups, [](const AllocationRecord&) { return true; },
                [&](const AllocationRecord& r) { return r.recommended == t; });
            rep.slices.push_back(std::move(s));
        }
    } else {
        const PopulationModel& m = src.model();
        const Policy& pi = src.recommend();
        rep.groups = m.groups;
        for (const std::string& t : {std::string("0"), std::string("1")}) {
            DisparitySlice s;
            s.treatment = t;
            s.prob = metrics_detail::cell_ratio(
                m, [](const Cell&) { return true; },
                [&](const Cell& c) { return metrics_detail::recommend_prob(pi, c, t); });
            rep.slices.push_back(std::move(s));
        }
    }
    metrics_detail::finalize(rep);
    return rep;
}

// Definition 2: conditional statistical parity in enrollments, within each
// level of the legitimate feature(s).
inline DisparityReport csp_enrollment(const ProbabilitySource& src, double eps, Scope legit) {
    metrics_detail::require_legit(legit);
    DisparityReport rep;
    rep.definition = 2;
    rep.name = "conditional statistical parity in enrollments";
    rep.legit = scope_name(legit);
    rep.eps = eps;
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        for (const ScopeKey& lv : metrics_detail::dataset_levels(d, legit)) {
            for (const std::string& t : d.treatments) {
                DisparitySlice s;
                s.treatment = t;
                s.level = lv;
                s.prob = metrics_detail::count_ratio(
                    d, rep.groups,
                    [&](const AllocationRecord& r) { return metrics_detail::record_level(r, legit) == lv; },
                    [&](const AllocationRecord& r) { return r.recommended == t; });
                rep.slices.push_back(std::move(s));
            }
        }
    } else {
        const PopulationModel& m = src.model();
        const Policy& pi = src.recommend();
        rep.groups = m.groups;
        for (const ScopeKey& lv : metrics_detail::model_levels(m, legit)) {
            for (const std::string& t : {std::string("0"), std::string("1")}) {
                DisparitySlice s;
                s.treatment = t;
                s.level = lv;
                s.prob = metrics_detail::cell_ratio(
                    m, [&](const Cell& c) { return project(c, legit) == lv; },
                    [&](const Cell& c) { return metrics_detail::recommend_prob(pi, c, t); });
                rep.slices.push_back(std::move(s));
            }
        }
    }
    metrics_detail::finalize(rep);
    return rep;
}

namespace metrics_detail {

// Shared core of Definitions 3 and 4: P(mu=t' | G=g, pi=t [, L=lv]).
inline void faithfulness_slices(const ProbabilitySource& src, DisparityReport& rep,
                                const std::optional<Scope>& legit) {
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        std::vector<ScopeKey> levels =
            legit ? dataset_levels(d, *legit) : std::vector<ScopeKey>{ScopeKey{}};
        for (const ScopeKey& lv : levels) {
            for (const std::string& t : d.treatments) {
                for (const std::string& t2 : d.treatments) {
                    DisparitySlice s;
                    s.treatment = t;
                    s.received = t2;
                    if (legit) s.level = lv;
                    s.prob = count_ratio(
                        d, rep.groups,
                        [&](const AllocationRecord& r) {
                            return r.recommended == t &&
                                   (!legit || record_level(r, *legit) == lv);
                        },
                        [&](const AllocationRecord& r) { return r.received == t2; });
                    rep.slices.push_back(std::move(s));
                }
            }
        }
    } else {
        const PopulationModel& m = src.model();
        const Policy& pi = src.recommend();
        const FaithfulnessKernel& k = src.kernel();
        rep.groups = m.groups;
        std::vector<ScopeKey> levels =
            legit ? model_levels(m, *legit) : std::vector<ScopeKey>{ScopeKey{}};
        for (const ScopeKey& lv : levels) {
            for (const std::string& t : {std::string("0"), std::string("1")}) {
                for (const std::string& t2 : {std::string("0"), std::string("1")}) {
                    DisparitySlice s;
                    s.treatment = t;
                    s.received = t2;
                    if (legit) s.level = lv;
                    s.prob.assign(m.groups.size(), std::nan(""));
                    for (std::size_t i = 0; i < m.groups.size(); ++i) {
                        double den = 0.0, num = 0.0;
                        for (const Cell& c : m.cells) {
                            if (c.group != m.groups[i]) continue;
                            if (legit && !(project(c, *legit) == lv)) continue;
                            const double w = c.mass * recommend_prob(pi, c, t);
                            den += w;
                            num += w * k.prob(c, t, t2);
                        }
                        if (den > 1e-15) s.prob[i] = num / den;
                    }
                    rep.slices.push_back(std::move(s));
                }
            }
        }
    }
}

}  // namespace metrics_detail

// Definition 3: equalized faithfulness in allocation.
// P(mu(X)=t' | G=g, pi(X)=t) equal across groups for all (t, t').
inline DisparityReport equalized_faithfulness(const ProbabilitySource& src, double eps = 1e-9) {
    DisparityReport rep;
    rep.definition = 3;
    rep.name = "equalized faithfulness in allocation";
    rep.eps = eps;
    metrics_detail::faithfulness_slices(src, rep, std::nullopt);
    metrics_detail::finalize(rep);
    return rep;
}

// Definition 4: conditional equalized faithfulness in allocation.
inline DisparityReport conditional_equalized_faithfulness(const ProbabilitySource& src, double eps,
                                                          Scope legit) {
    metrics_detail::require_legit(legit);
    DisparityReport rep;
    rep.definition = 4;
    rep.name = "conditional equalized faithfulness in allocation";
    rep.legit = scope_name(legit);
    rep.eps = eps;
    metrics_detail::faithfulness_slices(src, rep, legit);
    metrics_detail::finalize(rep);
    return rep;
}

// Definition 5: statistical parity in allocation.
// P(mu(X)=t | G=g) equal across groups for every treatment t.
inline DisparityReport sp_allocation(const ProbabilitySource& src, double eps = 1e-9) {
    DisparityReport rep;
    rep.definition = 5;
    rep.name = "statistical parity in allocation";
    rep.eps = eps;
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        for (const std::string& t : d.treatments) {
            DisparitySlice s;
            s.treatment = t;
            s.prob = metrics_detail::count_ratio(
                d, rep.groups, [](const AllocationRecord&) { return true; },
                [&](const AllocationRecord& r) { return r.received == t; });
            rep.slices.push_back(std::move(s));
        }
    } else {
        const PopulationModel& m = src.model();
        const Policy& mu = src.allocate();
        rep.groups = m.groups;
        for (const std::string& t : {std::string("0"), std::string("1")}) {
            DisparitySlice s;
            s.treatment = t;
            s.prob = metrics_detail::cell_ratio(
                m, [](const Cell&) { return true; },
                [&](const Cell& c) { return metrics_detail::recommend_prob(mu, c, t); });
            rep.slices.push_back(std::move(s));
        }
    }
    metrics_detail::finalize(rep);
    return rep;
}

// Definition 6: conditional statistical parity in allocation.
inline DisparityReport csp_allocation(const ProbabilitySource& src, double eps, Scope legit) {
    metrics_detail::require_legit(legit);
    DisparityReport rep;
    rep.definition = 6;
    rep.name = "conditional statistical parity in allocation";
    rep.legit = scope_name(legit);
    rep.eps = eps;
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        for (const ScopeKey& lv : metrics_detail::dataset_levels(d, legit)) {
            for (const std::string& t : d.treatments) {
                DisparitySlice s;
                s.treatment = t;
                s.level = lv;
                s.prob = metrics_detail::count_ratio(
                    d, rep.groups,
                    [&](const AllocationRecord& r) { return metrics_detail::record_level(r, legit) == lv; },
                    [&](const AllocationRecord& r) { return r.received == t; });
                rep.slices.push_back(std::move(s));
            }
        }
    } else {
        const PopulationModel& m = src.model();
        const Policy& mu = src.allocate();
        rep.groups = m.groups;
        for (const ScopeKey& lv : metrics_detail::model_levels(m, legit)) {
            for (const std::string& t : {std::string("0"), std::string("1")}) {
                DisparitySlice s;
                s.treatment = t;
                s.level = lv;
                s.prob = metrics_detail::cell_ratio(
                    m, [&](const Cell& c) { return project(c, legit) == lv; },
                    [&](const Cell& c) { return metrics_detail::recommend_prob(mu, c, t); });
                rep.slices.push_back(std::move(s));
            }
        }
    }
    metrics_detail::finalize(rep);
    return rep;
}

// Definition 7: statistical parity in outcomes.
// P(Y(mu(X))=1 | G=g) equal across groups.
inline DisparityReport sp_outcomes(const ProbabilitySource& src, double eps = 1e-9) {
    DisparityReport rep;
    rep.definition = 7;
    rep.name = "statistical parity in outcomes";
    rep.eps = eps;
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        bool any = false;
        for (const auto& r : d.records) any = any || r.outcome.has_value();
        if (!any) throw ModelError("no record carries an outcome; cannot audit outcomes");
        DisparitySlice s;
        s.prob = metrics_detail::count_ratio(
            d, rep.groups, [](const AllocationRecord& r) { return r.outcome.has_value(); },
            [](const AllocationRecord& r) { return *r.outcome == 1; });
        rep.slices.push_back(std::move(s));
    } else {
        const PopulationModel& m = src.model();
        const auto outcomes = evaluate_outcomes(m, src.allocate());
        rep.groups = m.groups;
        DisparitySlice s;
        for (const std::string& g : m.groups) s.prob.push_back(outcomes.at(g));
        rep.slices.push_back(std::move(s));
    }
    metrics_detail::finalize(rep);
    return rep;
}

// Definition 8: conditional statistical parity in outcomes.
inline DisparityReport csp_outcomes(const ProbabilitySource& src, double eps, Scope legit) {
    metrics_detail::require_legit(legit);
    DisparityReport rep;
    rep.definition = 8;
    rep.name = "conditional statistical parity in outcomes";
    rep.legit = scope_name(legit);
    rep.eps = eps;
    if (src.backend() == MetricBackend::Dataset) {
        const Dataset& d = src.dataset();
        rep.groups = d.group_list();
        bool any = false;
        for (const auto& r : d.records) any = any || r.outcome.has_value();
        if (!any) throw ModelError("no record carries an outcome; cannot audit outcomes");
        for (const ScopeKey& lv : metrics_detail::dataset_levels(d, legit)) {
            DisparitySlice s;
            s.level = lv;
            s.prob = metrics_detail::count_ratio(
                d, rep.groups,
                [&](const AllocationRecord& r) {
                    return r.outcome.has_value() && metrics_detail::record_level(r, legit) == lv;
                },
                [](const AllocationRecord& r) { return *r.outcome == 1; });
            rep.slices.push_back(std::move(s));
        }
    } else {
        const PopulationModel& m = src.model();
        const Policy& mu = src.allocate();
        rep.groups = m.groups;
        for (const ScopeKey& lv : metrics_detail::model_levels(m, legit)) {
            DisparitySlice s;
            s.level = lv;
            s.prob = metrics_detail::cell_ratio(
                m, [&](const Cell& c) { return project(c, legit) == lv; },
                [&](const Cell& c) { return c.p0 + mu.q_for(c) * c.tau(); });
            rep.slices.push_back(std::move(s));
        }
    }
    metrics_detail::finalize(rep);
    return rep;
}

struct AuditSummary {
    std::vector<DisparityReport> reports;
    std::vector<std::string> skipped;  // definitions that lacked inputs, with reason
    bool all_satisfied = true;
};

// Runs every definition the source can support, in pipeline order
// (enrollment, allocation, outcomes).
inline AuditSummary audit_all(const ProbabilitySource& src, double eps, Scope legit) {
    metrics_detail::require_legit(legit);
    AuditSummary out;
    auto attempt = [&](int def, auto&& fn) {
        try {
            out.reports.push_back(fn());
        } catch (const ModelError& e) {
            out.skipped.push_back("definition " + std::to_string(def) + ": " + e.what());
        }
    };
    attempt(1, [&] { return sp_enrollment(src, eps); });
    attempt(2, [&] { return csp_enrollment(src, eps, legit); });
    attempt(3, [&] { return equalized_faithfulness(src, eps); });
    attempt(4, [&] { return conditional_equalized_faithfulness(src, eps, legit); });
    attempt(5, [&] { return sp_allocation(src, eps); });
    attempt(6, [&] { return csp_allocation(src, eps, legit); });
    attempt(7, [&] { return sp_outcomes(src, eps); });
    attempt(8, [&] { return csp_outcomes(src, eps, legit); });
    for (const auto& rep : out.reports) out.all_satisfied = out.all_satisfied && rep.satisfied;
    return out;
}

}  // namespace fairalloc
