#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "population.hpp"

namespace fairalloc {

// Information a policy may condition on, ordered by refinement:
// Global < L0 < L0xL1 < {LxXnoG, LxG} < Full. LxXnoG and LxG are
// incomparable; Full (group + covariate) pins down the cell entirely.
enum class Scope { Global, L0, L0xL1, LxXnoG, LxG, Full };

inline const char* scope_name(Scope s) {
    switch (s) {
        case Scope::Global: return "GLOBAL";
        case Scope::L0: return "L0";
        case Scope::L0xL1: return "L0xL1";
        case Scope::LxXnoG: return "LxXnoG";
        case Scope::LxG: return "LxG";
        case Scope::Full: return "FULL";
    }
    return "?";
}

inline std::optional<Scope> scope_from_name(const std::string& name) {
    for (Scope s : {Scope::Global, Scope::L0, Scope::L0xL1, Scope::LxXnoG, Scope::LxG, Scope::Full})
        if (name == scope_name(s)) return s;
    return std::nullopt;
}

// True when a `fine`-scope table can express any `coarse`-scope policy.
inline bool refines(Scope fine, Scope coarse) {
    if (fine == coarse) return true;
    switch (coarse) {
        case Scope::Global: return true;
        case Scope::L0: return fine != Scope::Global;
        case Scope::L0xL1:
            return fine == Scope::LxXnoG || fine == Scope::LxG || fine == Scope::Full;
        case Scope::LxXnoG: return fine == Scope::Full;
        case Scope::LxG: return fine == Scope::Full;
        case Scope::Full: return false;
    }
    return false;
}

// Projection of a cell onto a conditioning scope. Unused fields stay empty.
struct ScopeKey {
    std::optional<int> l0;
    std::optional<int> l1;
    std::optional<std::string> group;
    std::optional<std::string> covariate;

    friend bool operator==(const ScopeKey&, const ScopeKey&) = default;
    friend bool operator<(const ScopeKey& a, const ScopeKey& b) {
        return std::tie(a.l0, a.l1, a.group, a.covariate) <
               std::tie(b.l0, b.l1, b.group, b.covariate);
    }

    std::string str() const {
        std::ostringstream os;
        bool first = true;
        auto put = [&](const char* name, const std::string& v) {
            os << (first ? "" : ",") << name << "=" << v;
            first = false;
        };
        if (l0) put("l0", std::to_string(*l0));
        if (l1) put("l1", std::to_string(*l1));
        if (group) put("group", *group);
        if (covariate) put("covariate", *covariate);
        if (first) os << "*";
        return os.str();
    }
};

inline ScopeKey project(const Cell& c, Scope s) {
    ScopeKey k;
    switch (s) {
        case Scope::Global: break;
        case Scope::L0: k.l0 = c.l0; break;
        case Scope::L0xL1: k.l0 = c.l0; k.l1 = c.l1; break;
        case Scope::LxXnoG: k.l0 = c.l0; k.l1 = c.l1; k.covariate = c.covariate; break;
        case Scope::LxG: k.l0 = c.l0; k.l1 = c.l1; k.group = c.group; break;
        case Scope::Full: k.group = c.group; k.covariate = c.covariate; break;
    }
    return k;
}

class CoverageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Randomized binary assignment rule: for each scope key, the probability q of
// assigning treatment 1. Deterministic rules are the q in {0,1} special case.
struct Policy {
    Scope scope = Scope::Global;
    std::map<ScopeKey, double> table;
    std::string label;

    static Policy constant(double q, std::string label = {}) {
        Policy p;
        p.scope = Scope::Global;
        p.table[ScopeKey{}] = q;
        p.label = std::move(label);
        return p;
    }

    double q_for(const Cell& c) const {
        const auto it = table.find(project(c, scope));
        if (it == table.end())
            throw CoverageError("policy '" + label + "' does not cover scope key " +
                                project(c, scope).str());
        return it->second;
    }

    void check_valid() const {
        for (const auto& [k, q] : table)
            if (!(q >= 0.0 && q <= 1.0))
                throw ModelError("policy probability " + std::to_string(q) + " at key " + k.str() +
                                 " outside [0,1]");
    }
};

// Population treatment probability P(mu(X)=1) under the policy.
inline double budget_usage(const PopulationModel& model, const Policy& policy) {
    double s = 0.0;
    for (const Cell& c : model.cells) s += c.mass * policy.q_for(c);
    return s;
}

// Per-group allocation rates P(mu=1 | G=g), plus rates conditional on the
// combined legitimate level (l0, l1).
struct AllocationRates {
    std::map<std::string, double> by_group;
    std::map<std::pair<std::string, std::pair<int, int>>, double> by_group_level;
};

inline AllocationRates allocation_rates(const PopulationModel& model, const Policy& policy) {
    AllocationRates out;
    std::map<std::string, double> gmass;
    std::map<std::pair<std::string, std::pair<int, int>>, double> lmass;
    for (const Cell& c : model.cells) {
        const double q = policy.q_for(c);
        gmass[c.group] += c.mass;
        out.by_group[c.group] += c.mass * q;
        const auto key = std::make_pair(c.group, std::make_pair(c.l0, c.l1));
        lmass[key] += c.mass;
        out.by_group_level[key] += c.mass * q;
    }
    for (auto& [g, v] : out.by_group) v /= gmass[g];
    for (auto& [k, v] : out.by_group_level)
        if (lmass[k] > 0.0) v /= lmass[k];
    return out;
}

// Per-group outcome probability P(Y(mu(X))=1 | G=g) = E[p0 + q*tau | G=g].
inline std::map<std::string, double> evaluate_outcomes(const PopulationModel& model,
                                                       const Policy& policy) {
    std::map<std::string, double> out;
    std::map<std::string, double> gmass;
    for (const Cell& c : model.cells) {
        gmass[c.group] += c.mass;
        out[c.group] += c.mass * (c.p0 + policy.q_for(c) * c.tau());
    }
    for (auto& [g, v] : out) v /= gmass[g];
    return out;
}

// Re-expresses a policy on a finer scope without changing its behavior.
inline Policy lift(const Policy& policy, Scope finer, const PopulationModel& model) {
    if (!refines(finer, policy.scope))
        throw ModelError(std::string("cannot lift: ") + scope_name(finer) +
                         " does not refine " + scope_name(policy.scope));
    Policy out;
    out.scope = finer;
    out.label = policy.label;
    for (const Cell& c : model.cells) out.table[project(c, finer)] = policy.q_for(c);
    return out;
}

// Conditional distribution of the received treatment given the recommended
// one: P(mu = t' | key, pi = t). Captures drift between enrollment and
// allocation when auditing a model against historical faithfulness.
struct FaithfulnessKernel {
    Scope scope = Scope::Full;
    // (key, recommended) -> distribution over received treatments.
    std::map<std::pair<ScopeKey, std::string>, std::map<std::string, double>> entries;

    static FaithfulnessKernel identity() { return FaithfulnessKernel{}; }

    bool is_identity() const { return entries.empty(); }

    double prob(const Cell& c, const std::string& recommended, const std::string& received) const {
        if (is_identity()) return recommended == received ? 1.0 : 0.0;
        const auto it = entries.find({project(c, scope), recommended});
        if (it == entries.end())
            throw CoverageError("faithfulness kernel does not cover key " +
                                project(c, scope).str() + " with recommendation " + recommended);
        const auto jt = it->second.find(received);
        return jt == it->second.end() ? 0.0 : jt->second;
    }

    void check_valid() const {
        for (const auto& [key, dist] : entries) {
            double s = 0.0;
            for (const auto& [t, p] : dist) {
                if (!(p >= 0.0 && p <= 1.0))
                    throw ModelError("kernel probability outside [0,1] at key " + key.first.str());
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw ModelError("kernel distribution at key " + key.first.str() +
                                 " sums to " + std::to_string(s));
        }
    }
};

// Allocation policy induced by recommending via `recommend` and then passing
// through the faithfulness kernel: q(c) = sum_t P(pi=t|c) * K(c, t -> 1).
inline Policy compose_allocation(const PopulationModel& model, const Policy& recommend,
                                 const FaithfulnessKernel& kernel) {
    Policy out;
    out.scope = Scope::Full;
    out.label = recommend.label.empty() ? "derived allocation" : recommend.label + " * kernel";
    for (const Cell& c : model.cells) {
        const double q = recommend.q_for(c);
        out.table[project(c, Scope::Full)] =
            q * kernel.prob(c, "1", "1") + (1.0 - q) * kernel.prob(c, "0", "1");
    }
    return out;
}

}  // namespace fairalloc
