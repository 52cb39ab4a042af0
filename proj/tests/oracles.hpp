#pragma once

// Test-side oracles, deliberately independent of the library's computation
// paths: brute-force conditional-frequency counting over raw records, vertex
// enumeration for small LPs, and a random dataset generator.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fairalloc/fairalloc.hpp"

namespace oracles {

using fairalloc::AllocationRecord;
using fairalloc::Dataset;
using fairalloc::Rng;
using fairalloc::Scope;
using fairalloc::ScopeKey;

// (context key, group) -> conditional probability; absent value = undefined.
struct SliceId {
    std::string treatment;
    std::string received;
    std::optional<ScopeKey> level;

    friend bool operator<(const SliceId& a, const SliceId& b) {
        const std::string la = a.level ? a.level->str() : "";
        const std::string lb = b.level ? b.level->str() : "";
        return std::tie(a.treatment, a.received, la) < std::tie(b.treatment, b.received, lb);
    }
};
using OracleTable = std::map<std::pair<SliceId, std::string>, std::optional<double>>;

inline ScopeKey level_of(const AllocationRecord& r, Scope legit) {
    ScopeKey k;
    k.l0 = r.l0;
    if (legit == Scope::L0xL1) k.l1 = r.l1.value();
    return k;
}

inline std::vector<ScopeKey> levels_of(const Dataset& d, Scope legit) {
    std::set<ScopeKey> out;
    for (const auto& r : d.records) out.insert(level_of(r, legit));
    return {out.begin(), out.end()};
}

// Counts P(hit | group, cond) by walking the raw records once per query.
template <typename Cond, typename Hit>
std::optional<double> count(const Dataset& d, const std::string& g, Cond cond, Hit hit) {
    long long den = 0, num = 0;
    for (const auto& r : d.records) {
        if (r.group != g || !cond(r)) continue;
        ++den;
        if (hit(r)) ++num;
    }
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

// Brute-force table for fairness definition `def` (1..8) on a dataset.
inline OracleTable definition_table(const Dataset& d, int def, Scope legit) {
    OracleTable out;
    std::set<std::string> gset;
    for (const auto& r : d.records) gset.insert(r.group);
    const std::vector<std::string> groups(gset.begin(), gset.end());
    const bool conditional = def % 2 == 0;
    const std::vector<ScopeKey> levels = conditional ? levels_of(d, legit) : std::vector<ScopeKey>{};

    auto emit = [&](const SliceId& id, auto cond, auto hit) {
        for (const auto& g : groups) out[{id, g}] = count(d, g, cond, hit);
    };

    auto per_level = [&](auto body) {
        if (!conditional) {
            body(std::optional<ScopeKey>{});
        } else {
            for (const auto& lv : levels) body(std::optional<ScopeKey>{lv});
        }
    };

    if (def == 1 || def == 2) {
        per_level([&](const std::optional<ScopeKey>& lv) {
            for (const auto& t : d.treatments) {
                emit({t, "", lv},
                     [&](const AllocationRecord& r) { return !lv || level_of(r, legit) == *lv; },
                     [&](const AllocationRecord& r) { return r.recommended == t; });
            }
        });
    } else if (def == 3 || def == 4) {
        per_level([&](const std::optional<ScopeKey>& lv) {
            for (const auto& t : d.treatments) {
                for (const auto& t2 : d.treatments) {
                    emit({t, t2, lv},
                         [&](const AllocationRecord& r) {
                             return r.recommended == t && (!lv || level_of(r, legit) == *lv);
                         },
                         [&](const AllocationRecord& r) { return r.received == t2; });
                }
            }
        });
    } else if (def == 5 || def == 6) {
        per_level([&](const std::optional<ScopeKey>& lv) {
            for (const auto& t : d.treatments) {
                emit({t, "", lv},
                     [&](const AllocationRecord& r) { return !lv || level_of(r, legit) == *lv; },
                     [&](const AllocationRecord& r) { return r.received == t; });
            }
        });
    } else {
        per_level([&](const std::optional<ScopeKey>& lv) {
            emit({"", "", lv},
                 [&](const AllocationRecord& r) {
                     return r.outcome.has_value() && (!lv || level_of(r, legit) == *lv);
                 },
                 [&](const AllocationRecord& r) { return *r.outcome == 1; });
        });
    }
    return out;
}

// Flattens a library report into the oracle's table shape for comparison.
inline OracleTable report_table(const fairalloc::DisparityReport& rep) {
    OracleTable out;
    for (const auto& s : rep.slices) {
        SliceId id{s.treatment, s.received, s.level};
        for (std::size_t i = 0; i < rep.groups.size(); ++i) {
            out[{id, rep.groups[i]}] =
                std::isnan(s.prob[i]) ? std::nullopt : std::optional<double>(s.prob[i]);
        }
    }
    return out;
}

// Max absolute deviation between two tables; infinity on shape mismatch.
inline double table_distance(const OracleTable& a, const OracleTable& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (const auto& [key, va] : a) {
        const auto it = b.find(key);
        if (it == b.end()) return std::numeric_limits<double>::infinity();
        const auto& vb = it->second;
        if (va.has_value() != vb.has_value()) return std::numeric_limits<double>::infinity();
        if (va) worst = std::max(worst, std::abs(*va - *vb));
    }
    return worst;
}

// Random audit dataset: 2-3 groups, sparse levels (to exercise undefined
// pairs), sometimes a third treatment arm, sometimes missing outcomes.
inline Dataset random_dataset(Rng& rng, int max_rows) {
    Dataset d;
    const int groups = rng.uniform_int(2, 3);
    const int l0_levels = rng.uniform_int(2, 4);
    const int l1_levels = rng.uniform_int(1, 2);
    const bool third_arm = rng.uniform() < 0.25;
    d.treatments = {"0", "1"};
    if (third_arm) d.treatments.push_back("2");
    const int rows = rng.uniform_int(std::min(40, max_rows), max_rows);
    for (int i = 0; i < rows; ++i) {
        AllocationRecord r;
        r.id = "r" + std::to_string(i);
        // Skewed group draw so small strata (and empty ones per level) occur.
        const double u = rng.uniform();
        r.group = "g" + std::to_string(std::min(static_cast<int>(u * u * groups), groups - 1));
        r.l0 = rng.uniform_int(0, l0_levels - 1);
        r.l1 = rng.uniform_int(0, l1_levels - 1);
        r.recommended = d.treatments[rng.uniform_int(0, static_cast<int>(d.treatments.size()) - 1)];
        r.received = rng.uniform() < 0.8
                         ? r.recommended
                         : d.treatments[rng.uniform_int(0, static_cast<int>(d.treatments.size()) - 1)];
        if (rng.uniform() < 0.9) r.outcome = rng.uniform() < 0.5 ? 1 : 0;
        d.records.push_back(std::move(r));
    }
    return d;
}

// --- LP vertex enumeration ---------------------------------------------------

// Solves a dense n x n system by Gaussian elimination; nullopt if singular.
inline std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> m,
                                                       std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-11) return std::nullopt;
        std::swap(m[piv], m[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / m[i][i];
    return x;
}

// Independent optimum for small LPs: enumerate all vertices (n-subsets of
// tight constraints), keep feasible ones, return the best objective.
inline std::optional<double> vertex_enumeration_optimum(const fairalloc::lp::LinearProgram& p) {
    const int n = p.num_vars;
    struct Plane {
        std::vector<double> a;
        double b;
    };
    std::vector<Plane> planes;
    for (const auto& c : p.equalities) planes.push_back({c.a, c.b});
    for (const auto& c : p.inequalities) planes.push_back({c.a, c.b});
    for (int j = 0; j < n; ++j) {
        std::vector<double> lo(n, 0.0), hi(n, 0.0);
        lo[j] = 1.0;
        planes.push_back({lo, p.lower[j]});
        if (std::isfinite(p.upper[j])) {
            hi[j] = 1.0;
            planes.push_back({hi, p.upper[j]});
        }
    }

    std::optional<double> best;
    std::vector<int> pick(n);
    const int m = static_cast<int>(planes.size());
    auto feasible = [&](const std::vector<double>& x) {
        for (const auto& c : p.equalities) {
            double v = -c.b;
            for (int j = 0; j < n; ++j) v += c.a[j] * x[j];
            if (std::abs(v) > 1e-7) return false;
        }
        for (const auto& c : p.inequalities) {
            double v = -c.b;
            for (int j = 0; j < n; ++j) v += c.a[j] * x[j];
            if (v > 1e-7) return false;
        }
        for (int j = 0; j < n; ++j) {
            if (x[j] < p.lower[j] - 1e-7) return false;
            if (std::isfinite(p.upper[j]) && x[j] > p.upper[j] + 1e-7) return false;
        }
        return true;
    };
    // Iterate over combinations of n planes.
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    if (m < n) return std::nullopt;
    while (true) {
        std::vector<std::vector<double>> a;
        std::vector<double> b;
        for (int i : idx) {
            a.push_back(planes[i].a);
            b.push_back(planes[i].b);
        }
        if (const auto x = solve_square(a, b); x && feasible(*x)) {
            double obj = 0.0;
            for (int j = 0; j < n; ++j) obj += p.objective[j] * (*x)[j];
            if (!best || obj < *best) best = obj;
        }
        int i = n - 1;
        while (i >= 0 && idx[i] == m - n + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int k = i + 1; k < n; ++k) idx[k] = idx[k - 1] + 1;
    }
    return best;
}

}  // namespace oracles
