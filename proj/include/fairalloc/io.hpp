#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feasibility.hpp"
#include "metrics.hpp"
#include "policy.hpp"
#include "population.hpp"

namespace fairalloc {

using nlohmann::json;

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace io_detail {

inline const json& need(const json& j, const char* field, const std::string& where) {
    const auto it = j.find(field);
    if (it == j.end()) throw ParseError(where + ": missing field '" + field + "'");
    return *it;
}

inline double need_number(const json& j, const char* field, const std::string& where) {
    const json& v = need(j, field, where);
    if (!v.is_number()) throw ParseError(where + ": field '" + field + "' must be a number");
    return v.get<double>();
}

inline int need_int(const json& j, const char* field, const std::string& where) {
    const json& v = need(j, field, where);
    if (!v.is_number_integer()) throw ParseError(where + ": field '" + field + "' must be an integer");
    return v.get<int>();
}

inline std::string need_string(const json& j, const char* field, const std::string& where) {
    const json& v = need(j, field, where);
    if (!v.is_string()) throw ParseError(where + ": field '" + field + "' must be a string");
    return v.get<std::string>();
}

}  // namespace io_detail

// --- population model -------------------------------------------------------

inline json model_to_json(const PopulationModel& model) {
    json cells = json::array();
    for (const Cell& c : model.cells) {
        cells.push_back({{"group", c.group},
                         {"covariate", c.covariate},
                         {"l0", c.l0},
                         {"l1", c.l1},
                         {"mass", c.mass},
                         {"p0", c.p0},
                         {"p1", c.p1}});
    }
    return json{{"treatments", json::array({"0", "1"})}, {"cells", std::move(cells)}};
}

inline PopulationModel model_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("population: document must be an object");
    if (j.contains("treatments")) {
        const json& ts = j["treatments"];
        if (ts != json::array({"0", "1"}))
            throw ParseError("population: models use the binary treatment set [\"0\",\"1\"]");
    }
    const json& cells = io_detail::need(j, "cells", "population");
    if (!cells.is_array() || cells.empty())
        throw ParseError("population: 'cells' must be a non-empty array");
    std::vector<Cell> out;
    int idx = 0;
    for (const json& cj : cells) {
        const std::string where = "population cell " + std::to_string(idx++);
        Cell c;
        c.group = io_detail::need_string(cj, "group", where);
        c.covariate = io_detail::need_string(cj, "covariate", where);
        c.l0 = io_detail::need_int(cj, "l0", where);
        c.l1 = io_detail::need_int(cj, "l1", where);
        c.mass = io_detail::need_number(cj, "mass", where);
        c.p0 = io_detail::need_number(cj, "p0", where);
        c.p1 = io_detail::need_number(cj, "p1", where);
        out.push_back(std::move(c));
    }
    return PopulationModel::from_cells(std::move(out));
}

// Canonical serialization (sorted keys, shortest round-trip numbers); the
// digest of this string identifies an instance in verification reports.
inline std::string model_canonical_json(const PopulationModel& model) {
    return model_to_json(model).dump();
}

// --- policies ---------------------------------------------------------------

inline json scope_key_to_json(const ScopeKey& k) {
    json j = json::object();
    if (k.l0) j["l0"] = *k.l0;
    if (k.l1) j["l1"] = *k.l1;
    if (k.group) j["group"] = *k.group;
    if (k.covariate) j["covariate"] = *k.covariate;
    return j;
}

inline ScopeKey scope_key_from_json(const json& j, Scope scope, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": key must be an object");
    ScopeKey k;
    const bool wants_l0 = scope != Scope::Global && scope != Scope::Full;
    const bool wants_l1 = scope == Scope::L0xL1 || scope == Scope::LxXnoG || scope == Scope::LxG;
    if (wants_l0) k.l0 = io_detail::need_int(j, "l0", where);
    if (wants_l1) k.l1 = io_detail::need_int(j, "l1", where);
    if (scope == Scope::LxG || scope == Scope::Full)
        k.group = io_detail::need_string(j, "group", where);
    if (scope == Scope::LxXnoG || scope == Scope::Full)
        k.covariate = io_detail::need_string(j, "covariate", where);
    return k;
}

inline json policy_to_json(const Policy& p) {
    json table = json::array();
    for (const auto& [k, q] : p.table)
        table.push_back({{"key", scope_key_to_json(k)}, {"q", q}});
    json j{{"scope", scope_name(p.scope)}, {"table", std::move(table)}};
    if (!p.label.empty()) j["label"] = p.label;
    return j;
}

inline Policy policy_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("policy: document must be an object");
    Policy p;
    const std::string sname = io_detail::need_string(j, "scope", "policy");
    const auto scope = scope_from_name(sname);
    if (!scope) throw ParseError("policy: unknown scope '" + sname + "'");
    p.scope = *scope;
    if (j.contains("label") && j["label"].is_string()) p.label = j["label"].get<std::string>();
    const json& table = io_detail::need(j, "table", "policy");
    if (!table.is_array()) throw ParseError("policy: 'table' must be an array");
    int idx = 0;
    for (const json& e : table) {
        const std::string where = "policy entry " + std::to_string(idx++);
        const ScopeKey k = scope_key_from_json(io_detail::need(e, "key", where), p.scope, where);
        const double q = io_detail::need_number(e, "q", where);
        if (q < 0.0 || q > 1.0) throw ParseError(where + ": q outside [0,1]");
        if (p.table.count(k)) throw ParseError(where + ": duplicate key " + k.str());
        p.table[k] = q;
    }
    return p;
}

inline json kernel_to_json(const FaithfulnessKernel& k) {
    json entries = json::array();
    for (const auto& [key, dist] : k.entries) {
        json d = json::object();
        for (const auto& [t, pr] : dist) d[t] = pr;
        entries.push_back({{"key", scope_key_to_json(key.first)},
                           {"recommended", key.second},
                           {"dist", std::move(d)}});
    }
    return json{{"scope", scope_name(k.scope)}, {"entries", std::move(entries)}};
}

inline FaithfulnessKernel kernel_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("kernel: document must be an object");
    FaithfulnessKernel k;
    const std::string sname = io_detail::need_string(j, "scope", "kernel");
    const auto scope = scope_from_name(sname);
    if (!scope) throw ParseError("kernel: unknown scope '" + sname + "'");
    k.scope = *scope;
    const json& entries = io_detail::need(j, "entries", "kernel");
    if (!entries.is_array()) throw ParseError("kernel: 'entries' must be an array");
    int idx = 0;
    for (const json& e : entries) {
        const std::string where = "kernel entry " + std::to_string(idx++);
        const ScopeKey key = scope_key_from_json(io_detail::need(e, "key", where), k.scope, where);
        const std::string rec = io_detail::need_string(e, "recommended", where);
        const json& dist = io_detail::need(e, "dist", where);
        if (!dist.is_object()) throw ParseError(where + ": 'dist' must be an object");
        std::map<std::string, double> d;
        for (const auto& [t, pr] : dist.items()) {
            if (!pr.is_number()) throw ParseError(where + ": probability must be a number");
            d[t] = pr.get<double>();
        }
        k.entries[{key, rec}] = std::move(d);
    }
    try {
        k.check_valid();
    } catch (const ModelError& e) {
        throw ParseError(std::string("kernel: ") + e.what());
    }
    return k;
}

// --- records CSV -------------------------------------------------------------

namespace io_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace io_detail

// Header: id,group,l0,l1,recommended,received,outcome[,feat_*...]
// l1 and outcome may be empty. Values must not contain commas or quotes.
inline Dataset read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("records: empty file");
    const auto header = io_detail::split_csv_line(line);
    const std::vector<std::string> fixed = {"id",          "group",    "l0",     "l1",
                                            "recommended", "received", "outcome"};
    if (header.size() < fixed.size())
        throw ParseError("records: header must start with id,group,l0,l1,recommended,received,outcome");
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (header[i] != fixed[i])
            throw ParseError("records: header column " + std::to_string(i + 1) + " must be '" +
                             fixed[i] + "', got '" + header[i] + "'");
    for (std::size_t i = fixed.size(); i < header.size(); ++i)
        if (header[i].rfind("feat_", 0) != 0)
            throw ParseError("records: extra column '" + header[i] + "' must be named feat_*");

    Dataset data;
    std::set<std::string> treatments;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = io_detail::split_csv_line(line);
        const std::string where = "records line " + std::to_string(line_no);
        if (f.size() != header.size())
            throw ParseError(where + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(f.size()));
        AllocationRecord r;
        r.id = f[0];
        r.group = f[1];
        if (r.group.empty()) throw ParseError(where + ": empty group");
        try {
            r.l0 = std::stoi(f[2]);
        } catch (...) {
            throw ParseError(where + ": l0 must be an integer, got '" + f[2] + "'");
        }
        if (!f[3].empty()) {
            try {
                r.l1 = std::stoi(f[3]);
            } catch (...) {
                throw ParseError(where + ": l1 must be an integer or empty, got '" + f[3] + "'");
            }
        }
        r.recommended = f[4];
        r.received = f[5];
        if (r.recommended.empty() || r.received.empty())
            throw ParseError(where + ": recommended and received are required");
        if (!f[6].empty()) {
            if (f[6] != "0" && f[6] != "1")
                throw ParseError(where + ": outcome must be 0, 1 or empty");
            r.outcome = f[6] == "1" ? 1 : 0;
        }
        for (std::size_t i = fixed.size(); i < header.size(); ++i)
            r.features.emplace_back(header[i], f[i]);
        treatments.insert(r.recommended);
        treatments.insert(r.received);
        data.records.push_back(std::move(r));
    }
    if (data.records.empty()) throw ParseError("records: dataset empty (no data rows)");
    if (treatments.size() < 2) {
        // A single observed arm still implies the binary set when labeled 0/1.
        if (treatments.count("0") || treatments.count("1")) {
            treatments.insert("0");
            treatments.insert("1");
        } else {
            throw ParseError("records: fewer than 2 distinct treatments observed");
        }
    }
    data.treatments.assign(treatments.begin(), treatments.end());
    return data;
}

inline Dataset read_records_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open records file: " + path);
    return read_records_csv(in);
}

// --- disparity reports --------------------------------------------------------

inline json report_to_json(const DisparityReport& rep) {
    json pairs = json::array();
    for (const DisparitySlice& s : rep.slices) {
        for (std::size_t i = 0; i < rep.groups.size(); ++i) {
            for (std::size_t j = i + 1; j < rep.groups.size(); ++j) {
                if (std::isnan(s.prob[i]) || std::isnan(s.prob[j])) continue;
                pairs.push_back({{"g", rep.groups[i]},
                                 {"g2", rep.groups[j]},
                                 {"context", s.context()},
                                 {"p_g", s.prob[i]},
                                 {"p_g2", s.prob[j]},
                                 {"diff", s.prob[i] - s.prob[j]}});
            }
        }
    }
    json undef = json::array();
    for (const UndefinedPair& u : rep.undefined)
        undef.push_back({{"g", u.g}, {"g2", u.g2}, {"context", u.context}});
    return json{{"definition", rep.definition},
                {"name", rep.name},
                {"legit", rep.legit},
                {"eps", rep.eps},
                {"groups", rep.groups},
                {"gap", rep.max_abs_gap},
                {"satisfied", rep.satisfied},
                {"pairs", std::move(pairs)},
                {"undefined", std::move(undef)},
                {"warnings", rep.warnings}};
}

inline json audit_to_json(const AuditSummary& audit) {
    json reports = json::array();
    for (const auto& rep : audit.reports) reports.push_back(report_to_json(rep));
    return json{{"all_satisfied", audit.all_satisfied},
                {"reports", std::move(reports)},
                {"skipped", audit.skipped}};
}

// Markdown audit in pipeline order: enrollment, allocation, outcomes.
inline std::string audit_to_markdown(const AuditSummary& audit) {
    std::ostringstream os;
    os << "# Fairness audit\n\n";
    os << (audit.all_satisfied ? "All computed definitions satisfied.\n\n"
                               : "At least one definition violated.\n\n");
    for (const auto& rep : audit.reports) {
        os << "## Definition " << rep.definition << ": " << rep.name;
        if (!rep.legit.empty()) os << " (conditioning on " << rep.legit << ")";
        os << "\n\n";
        os << (rep.satisfied ? "satisfied" : "violated") << " at eps = " << rep.eps
           << " (max |gap| = " << rep.max_abs_gap << ")\n\n";
        os << "| context | pair | difference |\n|---|---|---|\n";
        for (const DisparitySlice& s : rep.slices) {
            for (std::size_t i = 0; i < rep.groups.size(); ++i) {
                for (std::size_t j = i + 1; j < rep.groups.size(); ++j) {
                    os << "| " << s.context() << " | " << rep.groups[i] << " vs " << rep.groups[j]
                       << " | ";
                    if (std::isnan(s.prob[i]) || std::isnan(s.prob[j]))
                        os << "undefined";
                    else
                        os << (s.prob[i] - s.prob[j]);
                    os << " |\n";
                }
            }
        }
        os << "\n";
    }
    if (!audit.skipped.empty()) {
        os << "## Skipped\n\n";
        for (const auto& s : audit.skipped) os << "- " << s << "\n";
    }
    return os.str();
}

// --- feasibility --------------------------------------------------------------

inline const char* constraint_kind_name(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::SpAllocation: return "sp-allocation";
        case ConstraintKind::CspAllocation: return "csp-allocation";
        case ConstraintKind::SpOutcomes: return "sp-outcomes";
        case ConstraintKind::CspOutcomes: return "csp-outcomes";
    }
    return "?";
}

inline std::optional<ConstraintKind> constraint_kind_from_name(const std::string& s) {
    for (ConstraintKind k : {ConstraintKind::SpAllocation, ConstraintKind::CspAllocation,
                             ConstraintKind::SpOutcomes, ConstraintKind::CspOutcomes})
        if (s == constraint_kind_name(k)) return k;
    return std::nullopt;
}

inline json spec_to_json(const FeasibilitySpec& spec) {
    json cons = json::array();
    for (const auto& c : spec.constraints) {
        json e{{"kind", constraint_kind_name(c.kind)}};
        if (c.kind == ConstraintKind::CspAllocation || c.kind == ConstraintKind::CspOutcomes)
            e["legit"] = scope_name(c.legit);
        cons.push_back(std::move(e));
    }
    return json{{"constraints", std::move(cons)},
                {"budget", spec.budget},
                {"scope", scope_name(spec.scope)},
                {"tolerance", spec.tolerance}};
}

inline FeasibilitySpec spec_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("feasibility spec: document must be an object");
    FeasibilitySpec spec;
    const std::string sname = io_detail::need_string(j, "scope", "feasibility spec");
    const auto scope = scope_from_name(sname);
    if (!scope) throw ParseError("feasibility spec: unknown scope '" + sname + "'");
    spec.scope = *scope;
    spec.budget = io_detail::need_number(j, "budget", "feasibility spec");
    if (j.contains("tolerance")) spec.tolerance = j["tolerance"].get<double>();
    const json& cons = io_detail::need(j, "constraints", "feasibility spec");
    if (!cons.is_array()) throw ParseError("feasibility spec: 'constraints' must be an array");
    for (const json& e : cons) {
        FairnessConstraint c;
        const std::string kname = io_detail::need_string(e, "kind", "constraint");
        const auto kind = constraint_kind_from_name(kname);
        if (!kind) throw ParseError("constraint: unknown kind '" + kname + "'");
        c.kind = *kind;
        if (c.kind == ConstraintKind::CspAllocation || c.kind == ConstraintKind::CspOutcomes) {
            const std::string lname = io_detail::need_string(e, "legit", "constraint");
            const auto legit = scope_from_name(lname);
            if (!legit || (*legit != Scope::L0 && *legit != Scope::L0xL1))
                throw ParseError("constraint: legit must be L0 or L0xL1");
            c.legit = *legit;
        }
        spec.constraints.push_back(c);
    }
    return spec;
}

inline json feasibility_to_json(const FeasibilityResult& res) {
    json keys = json::array();
    for (const auto& k : res.keys) keys.push_back(scope_key_to_json(k));
    json coeffs = json::array();
    for (const auto& pc : res.coefficients)
        coeffs.push_back({{"g", pc.g}, {"g2", pc.g2}, {"a", pc.a}, {"rhs", pc.rhs}});
    json j{{"status", feasibility_status_name(res.status)},
           {"budget", res.budget},
           {"budget_usage", res.budget_usage},
           {"budget_exceeded", res.budget_exceeded},
           {"keys", std::move(keys)},
           {"coefficients", std::move(coeffs)},
           {"warnings", res.warnings}};
    j["policy"] = res.policy ? policy_to_json(*res.policy) : json();
    j["residual_disparity"] = res.residual_disparity ? json(*res.residual_disparity) : json();
    if (!res.group_order.empty()) j["group_order"] = res.group_order;
    if (!res.group_rates.empty()) {
        json rates = json::object();
        for (const auto& [g, r] : res.group_rates) rates[g] = r;
        j["group_rates"] = std::move(rates);
    }
    if (!res.tau_by_group.empty()) {
        json taus = json::object();
        for (const auto& [g, v] : res.tau_by_group) taus[g] = v;
        j["tau_by_group"] = std::move(taus);
    }
    return j;
}

// --- file helpers --------------------------------------------------------------

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << text;
}

}  // namespace fairalloc
