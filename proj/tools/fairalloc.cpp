// Command-line front end: audits, policy synthesis, compatibility checks,
// randomized verification runs and instance generation.
//
// Exit codes: 0 success / feasible / satisfied; 2 infeasible or fairness
// violated (a clean analytic verdict); 3 input error; 4 internal or oracle
// failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairalloc/fairalloc.hpp"

namespace {

using namespace fairalloc;

constexpr int kExitOk = 0;
constexpr int kExitVerdictNo = 2;
constexpr int kExitInputError = 3;
constexpr int kExitInternal = 4;

Scope parse_scope_arg(const std::string& s) {
    if (s == "global") return Scope::Global;
    if (s == "l0") return Scope::L0;
    if (s == "l0l1") return Scope::L0xL1;
    if (s == "lx") return Scope::LxXnoG;
    if (s == "lg") return Scope::LxG;
    throw ParseError("unknown scope '" + s + "' (expected global|l0|l0l1|lx|lg)");
}

Scope parse_legit_arg(const std::string& s) {
    if (s == "l0") return Scope::L0;
    if (s == "l0l1") return Scope::L0xL1;
    throw ParseError("unknown conditioning '" + s + "' (expected l0|l0l1)");
}

std::vector<FairnessConstraint> parse_constraints_arg(const std::string& list) {
    std::vector<FairnessConstraint> out;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        if (tok == "sp-alloc")
            out.push_back({ConstraintKind::SpAllocation, Scope::L0});
        else if (tok == "sp-outcome")
            out.push_back({ConstraintKind::SpOutcomes, Scope::L0});
        else if (tok == "csp-alloc-l0")
            out.push_back({ConstraintKind::CspAllocation, Scope::L0});
        else if (tok == "csp-alloc-l0l1")
            out.push_back({ConstraintKind::CspAllocation, Scope::L0xL1});
        else if (tok == "csp-outcome-l0")
            out.push_back({ConstraintKind::CspOutcomes, Scope::L0});
        else if (tok == "csp-outcome-l0l1")
            out.push_back({ConstraintKind::CspOutcomes, Scope::L0xL1});
        else
            throw ParseError("unknown constraint '" + tok +
                             "' (expected sp-alloc, sp-outcome, csp-alloc-l0, csp-alloc-l0l1, "
                             "csp-outcome-l0, csp-outcome-l0l1)");
    }
    if (out.empty()) throw ParseError("constraint list is empty");
    return out;
}

std::uint64_t default_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("FAIRALLOC_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ParseError("FAIRALLOC_SEED must be an unsigned integer");
        }
    }
    return 7;
}

PopulationModel load_model_checked(const std::string& path, bool for_synthesis) {
    const PopulationModel model = model_from_json(load_json_file(path));
    const ValidationReport rep = validate(model);
    for (const Violation& v : rep.violations) {
        if (v.blocks_synthesis) {
            std::ostringstream os;
            os << path << ": " << v.message;
            throw ParseError(os.str());
        }
        std::cerr << "warning: " << path << ": " << v.message << "\n";
    }
    if (for_synthesis) require_synthesis_ready(model);
    return model;
}

void emit(const json& j, const std::optional<std::string>& out_path, bool also_stdout) {
    const std::string text = j.dump(2) + "\n";
    if (out_path) write_text_file(*out_path, text);
    if (also_stdout || !out_path) std::cout << text;
}

void dump_failing_instances(const std::vector<std::string>& instances, const std::string& stem) {
    int idx = 0;
    for (const std::string& payload : instances) {
        const std::uint64_t digest = fnv1a(payload.data(), payload.size());
        std::ostringstream name;
        name << stem << "_" << std::hex << digest << "_" << std::dec << idx++ << ".json";
        write_text_file(name.str(), payload + "\n");
        std::cerr << "wrote failing instance " << name.str() << "\n";
    }
}

int run_audit(const std::optional<std::string>& records, const std::optional<std::string>& model,
              const std::optional<std::string>& policy, const std::optional<std::string>& kernel,
              const std::string& legit, double eps, const std::string& out,
              const std::optional<std::string>& md) {
    if (records.has_value() == model.has_value())
        throw ParseError("audit needs exactly one of --records or --model");
    const Scope legit_scope = parse_legit_arg(legit);

    std::optional<ProbabilitySource> src;
    if (records) {
        src = ProbabilitySource::from_dataset(read_records_csv_file(*records));
    } else {
        const PopulationModel m = load_model_checked(*model, false);
        std::optional<Policy> recommend;
        std::optional<FaithfulnessKernel> k;
        if (policy) recommend = policy_from_json(load_json_file(*policy));
        if (kernel) k = kernel_from_json(load_json_file(*kernel));
        src = ProbabilitySource::from_model(m, std::move(recommend), std::move(k));
    }

    const AuditSummary audit = audit_all(*src, eps, legit_scope);
    emit(audit_to_json(audit), out, false);
    if (md) write_text_file(*md, audit_to_markdown(audit));
    for (const auto& s : audit.skipped) std::cerr << "skipped " << s << "\n";
    return audit.all_satisfied ? kExitOk : kExitVerdictNo;
}

int run_synthesize(const std::string& model_path, const std::string& scope,
                   const std::string& constraints, double budget, const std::string& out) {
    FeasibilitySpec spec;
    spec.scope = parse_scope_arg(scope);
    spec.budget = budget;
    spec.constraints = parse_constraints_arg(constraints);
    const PopulationModel model = load_model_checked(model_path, true);
    const FeasibilityResult res = joint_feasibility(model, spec);
    json j = feasibility_to_json(res);
    j["spec"] = spec_to_json(spec);
    emit(j, out, false);
    return res.status == FeasibilityStatus::Feasible ? kExitOk : kExitVerdictNo;
}

int run_check_compat(const std::string& model_path, int prop, double budget,
                     const std::optional<std::string>& out) {
    const PopulationModel model = load_model_checked(model_path, true);
    FeasibilityResult res;
    switch (prop) {
        case 1: res = prop1_solve(model, budget); break;
        case 2: res = prop2_feasibility(model, budget); break;
        case 4: res = prop4_feasibility(model, budget); break;
        case 7: res = prop7_construct(model, budget); break;
        default: throw ParseError("--prop must be one of 1, 2, 4, 7");
    }
    json j = feasibility_to_json(res);
    j["prop"] = prop;
    emit(j, out, true);
    return res.status == FeasibilityStatus::Feasible ? kExitOk : kExitVerdictNo;
}

int run_verify(const std::optional<int>& prop, const std::optional<std::string>& dominance,
               int trials, const std::optional<std::uint64_t>& seed_flag,
               const std::optional<std::string>& out) {
    const std::uint64_t seed = default_seed(seed_flag);
    if (prop.has_value() == dominance.has_value())
        throw ParseError("verify needs exactly one of --prop or --dominance");
    if (prop) {
        if (*prop != 1 && *prop != 2 && *prop != 4 && *prop != 7)
            throw ParseError("--prop must be one of 1, 2, 4, 7");
        const VerificationRun run = verify_proposition(VerifyConfig{}, *prop, trials, seed);
        emit(verification_run_to_json(run), out, true);
        dump_failing_instances(run.failing_instances, "failing_" + run.subject);
        return run.pass() ? kExitOk : kExitInternal;
    }
    const auto dash = dominance->find('-');
    if (dash == std::string::npos)
        throw ParseError("--dominance expects PAIR like l0-l0l1, l0l1-lx or lx-lg");
    const Scope coarse = parse_scope_arg(dominance->substr(0, dash));
    const Scope fine = parse_scope_arg(dominance->substr(dash + 1));
    const DominanceRun run = search_strict_witness(DominanceConfig{}, coarse, fine, trials, seed);
    emit(dominance_run_to_json(run), out, true);
    dump_failing_instances(run.failing_instances, "failing_dominance");
    return run.pass() ? kExitOk : kExitInternal;
}

int run_generate(const std::optional<std::uint64_t>& seed_flag, int groups, int l0, int l1,
                 int covariates, bool well_chosen, const std::string& out) {
    GeneratorShape shape;
    shape.groups = groups;
    shape.l0 = l0;
    shape.l1 = l1;
    shape.covariates = covariates;
    GeneratorConstraints cons;
    cons.force_l0_well_chosen = well_chosen;
    cons.force_l1_well_chosen = well_chosen;
    const PopulationModel model = generate_random(default_seed(seed_flag), shape, cons);
    emit(model_to_json(model), out, false);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audit contextual resource-allocation systems against eight group-fairness "
                 "definitions and synthesize randomized allocation policies"};
    app.require_subcommand(1);

    // audit
    auto* audit = app.add_subcommand("audit", "Compute the disparity report set");
    std::optional<std::string> a_records, a_model, a_policy, a_kernel, a_md;
    std::string a_legit, a_out;
    double a_eps = 1e-9;
    audit->add_option("--records", a_records, "Historical records CSV");
    audit->add_option("--model", a_model, "Population model JSON");
    audit->add_option("--policy", a_policy, "Recommendation policy JSON (model backend)");
    audit->add_option("--kernel", a_kernel, "Faithfulness kernel JSON (model backend)");
    audit->add_option("--legit", a_legit, "Conditioning levels: l0|l0l1")->required();
    audit->add_option("--eps", a_eps, "Disparity tolerance")->required();
    audit->add_option("--out", a_out, "Report JSON output path")->required();
    audit->add_option("--md", a_md, "Markdown report output path");

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "Find a policy meeting fairness constraints");
    std::string s_model, s_scope, s_constraints, s_out;
    double s_budget = 1.0;
    synth->add_option("--model", s_model, "Population model JSON")->required();
    synth->add_option("--scope", s_scope, "Policy scope: global|l0|l0l1|lx|lg")->required();
    synth->add_option("--budget", s_budget, "Maximum population treatment probability")->required();
    synth->add_option("--constraints", s_constraints, "Comma list, e.g. sp-alloc,sp-outcome")
        ->required();
    synth->add_option("--out", s_out, "Result JSON output path")->required();

    // check-compat
    auto* compat = app.add_subcommand("check-compat", "Run one joint-satisfiability condition");
    std::string c_model;
    int c_prop = 0;
    double c_budget = 1.0;
    std::optional<std::string> c_out;
    compat->add_option("--model", c_model, "Population model JSON")->required();
    compat->add_option("--prop", c_prop, "Condition id: 1|2|4|7")->required();
    compat->add_option("--budget", c_budget, "Maximum population treatment probability")
        ->required();
    compat->add_option("--out", c_out, "Result JSON output path");

    // verify
    auto* verify = app.add_subcommand("verify", "Randomized verification against oracles");
    std::optional<int> v_prop;
    std::optional<std::string> v_dominance, v_out;
    int v_trials = 100;
    std::optional<std::uint64_t> v_seed;
    verify->add_option("--prop", v_prop, "Condition id: 1|2|4|7");
    verify->add_option("--dominance", v_dominance, "Scope pair, e.g. l0-l0l1, l0l1-lx, lx-lg");
    verify->add_option("--trials", v_trials, "Number of generated instances");
    verify->add_option("--seed", v_seed, "Seed (default: FAIRALLOC_SEED or 7)");
    verify->add_option("--out", v_out, "Run report JSON output path");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a random population model");
    std::optional<std::uint64_t> g_seed;
    int g_groups = 2, g_l0 = 2, g_l1 = 1, g_covariates = 1;
    bool g_well_chosen = false;
    std::string g_out;
    gen->add_option("--seed", g_seed, "Seed (default: FAIRALLOC_SEED or 7)");
    gen->add_option("--groups", g_groups, "Number of groups");
    gen->add_option("--l0", g_l0, "Number of risk levels");
    gen->add_option("--l1", g_l1, "Number of effect levels");
    gen->add_option("--covariates", g_covariates, "Covariate cells per level pair");
    gen->add_flag("--well-chosen", g_well_chosen, "Force well-chosen L0 and L1");
    gen->add_option("--out", g_out, "Model JSON output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInputError;
    }

    try {
        if (app.got_subcommand(audit))
            return run_audit(a_records, a_model, a_policy, a_kernel, a_legit, a_eps, a_out, a_md);
        if (app.got_subcommand(synth))
            return run_synthesize(s_model, s_scope, s_constraints, s_budget, s_out);
        if (app.got_subcommand(compat)) return run_check_compat(c_model, c_prop, c_budget, c_out);
        if (app.got_subcommand(verify)) return run_verify(v_prop, v_dominance, v_trials, v_seed, v_out);
        if (app.got_subcommand(gen))
            return run_generate(g_seed, g_groups, g_l0, g_l1, g_covariates, g_well_chosen, g_out);
        std::cerr << "error: no subcommand selected\n";
        return kExitInputError;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const CoverageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const SynthesisError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
