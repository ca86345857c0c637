#include "aclab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "aclab/chainfork.hpp"
#include "aclab/counterexamples.hpp"
#include "aclab/metrics.hpp"
#include "aclab/random_instances.hpp"

namespace aclab {

std::string relation_name(Relation r) {
    switch (r) {
        case Relation::leq: return "leq";
        case Relation::geq: return "geq";
        case Relation::eq_within: return "eq_within";
    }
    return "?";
}

void TheoremCheck::decide() {
    bool ok = false;
    switch (relation) {
        case Relation::leq: ok = actual_value <= bound_value + tolerance; break;
        case Relation::geq: ok = actual_value >= bound_value - tolerance; break;
        case Relation::eq_within: ok = std::abs(actual_value - bound_value) <= tolerance; break;
    }
    pass = ok && side_failures.empty() && std::isfinite(actual_value) && std::isfinite(bound_value);
}

json check_to_json(const TheoremCheck& c) {
    return {{"name", c.name},
            {"params", c.params},
            {"bound_value", c.bound_value},
            {"actual_value", c.actual_value},
            {"relation", relation_name(c.relation)},
            {"tolerance", c.tolerance},
            {"pass", c.pass},
            {"side_failures", c.side_failures},
            {"witnesses", c.witnesses}};
}

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names{
        "ac_value_bias_bound", "ac_value_bias_tight", "ac_optgap_bound",  "ac_optgap_tight",
        "weak_olc_failure",    "strong_olc_bound",    "strong_olc_tight", "nstep_comparison",
        "closedloop_strong_bound", "bounded_ov_bound", "bounded_ov_tight", "nstep_worstcase",
        "shortcut_free_bound", "eps_det_implies_weak_olc", "nstep_lemma_bound"};
    return names;
}

namespace {

double param(const Params& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}
int iparam(const Params& p, const std::string& key, int fallback) {
    return static_cast<int>(std::lround(param(p, key, fallback)));
}
std::uint64_t uparam(const Params& p, const std::string& key) {
    const double x = param(p, key, 0.0);
    if (x < 0.0) throw ConstraintError(key + " >= 0");
    return static_cast<std::uint64_t>(std::llround(x));
}

void side(TheoremCheck& c, bool ok, const std::string& what) {
    if (!ok) c.side_failures.push_back(what);
}

// ---- random bound instances -------------------------------------------------------

// family 0: Dirichlet MDPs; family 1: eps-deterministic MDPs (param eps, h = 2 + index mod 3 unless given).
RandomInstance make_instance(const Params& p) {
    const std::uint64_t seed = derive_seed(uparam(p, "seed"), uparam(p, "index"));
    const int family = iparam(p, "family", 0);
    if (family == 0) return random_instance(seed);
    if (family == 1) {
        const int h = iparam(p, "h", 2 + static_cast<int>(uparam(p, "index") % 3));
        const double eps = param(p, "eps", 0.1);
        if (!(eps >= 0.0 && eps <= 1.0)) throw ConstraintError("eps in [0,1]");
        if (h < 1) throw ConstraintError("h >= 1");
        return random_eps_det_instance(seed, eps, h);
    }
    throw ConstraintError("family in {0,1}");
}

struct Prepared {
    RandomInstance inst;
    OptimalSolution opt;
    DataDist star;   // optimal-policy data with the instance's mu
    DataDist mixed;  // beta * star + (1 - beta) * instance data
    double beta = 0.5;
};

Prepared prepare(const Params& p) {
    Prepared pr;
    pr.inst = make_instance(p);
    pr.opt = solve_optimal(pr.inst.mdp);
    pr.beta = param(p, "beta", 0.5);
    if (!(pr.beta > 0.0 && pr.beta < 1.0)) throw ConstraintError("beta in (0,1)");
    pr.star = single_source(policy_source(pr.opt.policy, pr.inst.mdp.num_actions), pr.inst.data.start_dist);
    pr.mixed = mix_in(pr.inst.data, pr.star.components.front().source, pr.beta);
    return pr;
}

void describe(TheoremCheck& c, const RandomInstance& inst) {
    c.witnesses["instance_seed"] = inst.seed;
    c.witnesses["num_states"] = inst.mdp.num_states;
    c.witnesses["num_actions"] = inst.mdp.num_actions;
    c.witnesses["gamma"] = inst.mdp.gamma;
    c.witnesses["h"] = inst.h;
}

// max_s (a(s) - b(s)) over `states`, with the arg.
std::pair<double, int> max_gap(const std::vector<int>& states, const ValueTable& a, const ValueTable& b) {
    double best = -std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int s : states) {
        const double d = a.at(s) - b.at(s);
        if (d > best) {
            best = d;
            arg = s;
        }
    }
    return {best, arg};
}

double strong_eps_of(const Mdp& m, const DataModel& a, const DataModel& b) {
    return std::max(olc_report(m, a).strong_eps, olc_report(m, b).strong_eps);
}

TheoremCheck ac_value_bias_bound(const Params& p) {
    TheoremCheck c;
    const RandomInstance inst = make_instance(p);
    describe(c, inst);
    const DataModel model = build_data_model(inst.mdp, inst.data, inst.h);
    const ValueTable vhat = behavior_chunk_value(inst.mdp, model);
    const ValueTable vtrue = eval_behavior_chunk_policy(inst.mdp, model);
    const double eps = olc_report(inst.mdp, model).weak_eps;
    double worst = 0.0;
    int arg = -1;
    for (int s : model.supported) {
        const double d = std::abs(vhat.at(s) - vtrue.at(s));
        if (d >= worst) {
            worst = d;
            arg = s;
        }
    }
    c.actual_value = worst;
    c.bound_value = value_bias_formula(inst.mdp.gamma, inst.h, eps);
    c.witnesses["weak_eps"] = eps;
    c.witnesses["state"] = arg;
    return c;
}

TheoremCheck ac_optgap_bound(const Params& p) {
    TheoremCheck c;
    const Prepared pr = prepare(p);
    const Mdp& m = pr.inst.mdp;
    describe(c, pr.inst);
    const DataModel model = build_data_model(m, pr.star, pr.inst.h);
    const double eps = olc_report(m, model).weak_eps;
    const ValueTable clone = eval_behavior_chunk_policy(m, model);
    const ChunkSolution ac = solve_optimal_ac(m, pr.inst.h);
    const auto [gap, arg] = max_gap(model.supported, pr.opt.v, clone);
    for (int s : model.supported) side(c, ac.v.at(s) >= clone.at(s) - 1e-9, "V*_ac >= V~_ac at state " + std::to_string(s));
    c.actual_value = gap;
    c.bound_value = value_bias_formula(m.gamma, pr.inst.h, eps);
    c.witnesses["weak_eps_star"] = eps;
    c.witnesses["state"] = arg;
    return c;
}

// Shared by the strong-OLC, closed-loop and n-step comparison checks.
struct StrongSetup {
    Prepared pr;
    DataModel model_mixed, model_star;
    double eps = 0.0;
    ChunkSolution plus;
};

StrongSetup strong_setup(const Params& p) {
    StrongSetup st;
    st.pr = prepare(p);
    const Mdp& m = st.pr.inst.mdp;
    st.model_mixed = build_data_model(m, st.pr.mixed, st.pr.inst.h);
    st.model_star = build_data_model(m, st.pr.star, st.pr.inst.h);
    st.eps = strong_eps_of(m, st.model_mixed, st.model_star);
    st.plus = chunk_q_optimality(m, st.model_mixed);
    return st;
}

TheoremCheck strong_olc_bound(const Params& p) {
    TheoremCheck c;
    const StrongSetup st = strong_setup(p);
    const Mdp& m = st.pr.inst.mdp;
    describe(c, st.pr.inst);
    const ValueTable vplus = eval_ac_policy_openloop(m, st.plus.policy);
    const auto [gap, arg] = max_gap(st.model_star.supported, st.pr.opt.v, vplus);
    c.actual_value = gap;
    c.bound_value = strong_three_term(m.gamma, st.pr.inst.h, st.eps);
    c.witnesses["strong_eps"] = st.eps;
    c.witnesses["state"] = arg;
    return c;
}

TheoremCheck closedloop_strong_bound(const Params& p) {
    TheoremCheck c;
    const StrongSetup st = strong_setup(p);
    const Mdp& m = st.pr.inst.mdp;
    describe(c, st.pr.inst);
    const ClosedLoopResult cl = eval_closedloop_first(m, st.plus.policy);
    const auto [gap, arg] = max_gap(st.model_star.supported, st.pr.opt.v, cl.v);
    c.actual_value = gap;
    c.bound_value = strong_three_term(m.gamma, st.pr.inst.h, st.eps) / (1.0 - m.gamma);
    c.witnesses["strong_eps"] = st.eps;
    c.witnesses["state"] = arg;
    return c;
}

TheoremCheck nstep_comparison(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::geq;
    const StrongSetup st = strong_setup(p);
    const Mdp& m = st.pr.inst.mdp;
    describe(c, st.pr.inst);
    const int n = iparam(p, "n", st.pr.inst.h);
    if (n < 1) throw ConstraintError("n >= 1");
    const DataModel model_n = build_data_model(m, st.pr.mixed, n);
    const NStepSolution ns = nstep_uncorrected_q(m, model_n);
    const SuboptimalityReport sub = data_suboptimality(m, model_n, st.pr.opt.q, st.pr.opt.v.v);
    const ValueTable vplus = eval_ac_policy_openloop(m, st.plus.policy);
    double worst = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int s : st.model_star.supported) {
        const double d = vplus.at(s) - ns.v.at(s);
        if (d < worst) {
            worst = d;
            arg = s;
        }
    }
    c.actual_value = worst;
    c.bound_value = sub.delta_n / (1.0 - std::pow(m.gamma, n)) - strong_three_term(m.gamma, st.pr.inst.h, st.eps);
    c.witnesses["strong_eps"] = st.eps;
    c.witnesses["delta_n"] = sub.delta_n;
    c.witnesses["n"] = n;
    c.witnesses["state"] = arg;
    return c;
}

TheoremCheck nstep_lemma_bound(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::geq;
    const RandomInstance inst = make_instance(p);
    const Mdp& m = inst.mdp;
    describe(c, inst);
    const int n = iparam(p, "n", inst.h);
    if (n < 1) throw ConstraintError("n >= 1");
    const OptimalSolution opt = solve_optimal(m);
    const DataModel model_n = build_data_model(m, inst.data, n);
    const NStepSolution ns = nstep_uncorrected_q(m, model_n);
    const SuboptimalityReport sub = data_suboptimality(m, model_n, opt.q, opt.v.v);
    double worst = std::numeric_limits<double>::infinity();
    int ws = -1, wa = -1;
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            const size_t i = static_cast<size_t>(s) * m.num_actions + a;
            if (!ns.q_defined[i]) continue;
            const double d = opt.q[i] - ns.q[i];
            if (d < worst) {
                worst = d;
                ws = s;
                wa = a;
            }
        }
    c.actual_value = worst;
    c.bound_value = sub.delta_n / (1.0 - std::pow(m.gamma, n));
    c.witnesses["delta_n"] = sub.delta_n;
    c.witnesses["n"] = n;
    c.witnesses["state"] = ws;
    c.witnesses["action"] = wa;
    return c;
}

TheoremCheck bounded_ov_bound(const Params& p) {
    TheoremCheck c;
    const Prepared pr = prepare(p);
    const Mdp& m = pr.inst.mdp;
    describe(c, pr.inst);
    const DataModel model = build_data_model(m, pr.mixed, pr.inst.h);
    const DataModel model_star = build_data_model(m, pr.star, pr.inst.h);
    const VariabilityReport ov = optimality_variability(m, pr.mixed, model, pr.opt.v.v);
    const ChunkSolution plus = chunk_q_optimality(m, model);
    const ClosedLoopResult cl = eval_closedloop_first(m, plus.policy);
    const auto [gap, arg] = max_gap(model_star.supported, pr.opt.v, cl.v);
    c.actual_value = gap;
    c.bound_value = bounded_ov_formula(m.gamma, pr.inst.h, ov.local_theta, ov.global_theta);
    c.witnesses["local_theta"] = ov.local_theta;
    c.witnesses["global_theta"] = ov.global_theta;
    c.witnesses["state"] = arg;
    return c;
}

struct ShortcutSetup {
    Prepared pr;
    DataDist dcirc, mixed;
};

ShortcutSetup shortcut_setup(const Params& p) {
    ShortcutSetup st;
    st.pr = prepare(p);
    const Mdp& m = st.pr.inst.mdp;
    Rng rng(derive_seed(st.pr.inst.seed, 1));
    const int per_state = iparam(p, "chunks_per_state", 3);
    if (per_state < 1) throw ConstraintError("chunks_per_state >= 1");
    st.dcirc = single_source(random_open_loop_table(m.num_states, m.num_actions, st.pr.inst.h, per_state, rng),
                             st.pr.inst.data.start_dist);
    st.mixed = mix_in(st.dcirc, st.pr.star.components.front().source, st.pr.beta);
    return st;
}

TheoremCheck shortcut_free_bound(const Params& p) {
    TheoremCheck c;
    const ShortcutSetup st = shortcut_setup(p);
    const Mdp& m = st.pr.inst.mdp;
    const int h = st.pr.inst.h;
    describe(c, st.pr.inst);
    const DataModel model = build_data_model(m, st.mixed, h);
    const DataModel model_star = build_data_model(m, st.pr.star, h);
    const double alpha = open_loop_mix_alpha(m, st.pr.star, st.dcirc, st.pr.beta, h, model.supported);
    const double theta = stochastic_shortcut_theta(m, h, st.pr.opt.v.v);
    const ChunkSolution plus = chunk_q_optimality(m, model);
    const ClosedLoopResult cl = eval_closedloop_first(m, plus.policy);
    const auto [gap, arg] = max_gap(model_star.supported, st.pr.opt.v, cl.v);
    c.actual_value = gap;
    c.bound_value = shortcut_free_formula(m.gamma, h, alpha, theta);
    c.witnesses["alpha"] = alpha;
    c.witnesses["theta"] = theta;
    c.witnesses["beta"] = st.pr.beta;
    c.witnesses["state"] = arg;
    return c;
}

TheoremCheck eps_det_implies_weak_olc(const Params& p) {
    TheoremCheck c;
    const double eps = param(p, "eps", 0.1);
    const int h = iparam(p, "h", 3);
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConstraintError("eps in [0,1]");
    if (h < 1) throw ConstraintError("h >= 1");
    const RandomInstance inst = random_eps_det_instance(derive_seed(uparam(p, "seed"), uparam(p, "index")), eps, h);
    describe(c, inst);
    c.actual_value = weak_olc(inst.mdp, inst.data, h);
    c.bound_value = 3.0 * (1.0 - std::pow(1.0 - eps, h - 1));
    c.witnesses["measured_mdp_eps"] = eps_deterministic_eps(inst.mdp);
    return c;
}

// ---- tightness checks -------------------------------------------------------------------

void gen_witness(TheoremCheck& c, const GenOutput& g) {
    c.witnesses["generator"] = g.name;
    c.witnesses["generator_params"] = g.params;
    c.witnesses["formulas"] = g.formulas;
    c.witnesses["start_state"] = g.start_state;
}

TheoremCheck ac_value_bias_tight(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::eq_within;
    GenOutput g = generate("value_bias", p);
    gen_witness(c, g);
    const DataModel model = build_data_model(g.mdp, g.data.at("D"), g.h);
    const double vhat = behavior_chunk_value(g.mdp, model).at(g.start_state);
    const double vtrue = eval_behavior_chunk_policy(g.mdp, model, {g.start_state}).at(g.start_state);
    const double eps = olc_report(g.mdp, model).weak_eps;
    c.actual_value = std::abs(vhat - vtrue);
    c.bound_value = g.expected.at("bias");
    c.witnesses["nominal_minus_actual"] = vhat - vtrue;
    c.witnesses["weak_eps"] = eps;
    side(c, std::abs(vhat - vtrue - g.expected.at("signed_bias")) <= c.tolerance, "sign of the bias");
    side(c, std::abs(eps - g.expected.at("weak_eps")) <= c.tolerance, "measured weak eps equals eps");
    return c;
}

TheoremCheck ac_optgap_tight(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::eq_within;
    GenOutput g = generate("ac_optgap", p);
    gen_witness(c, g);
    const double vstar = solve_optimal(g.mdp).v.at(g.start_state);
    const double vac = solve_optimal_ac(g.mdp, g.h).v.at(g.start_state);
    const double eps = weak_olc(g.mdp, g.data.at("D_star"), g.h);
    c.actual_value = vstar - vac;
    c.bound_value = g.expected.at("gap");
    c.witnesses["weak_eps_star"] = eps;
    side(c, std::abs(eps - g.expected.at("weak_eps")) <= c.tolerance, "measured weak eps of D_star equals eps");
    return c;
}

TheoremCheck weak_olc_failure(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::eq_within;
    GenOutput g = generate("lottery", p);
    gen_witness(c, g);
    const int s0 = g.start_state;
    const DataModel model = build_data_model(g.mdp, g.data.at("D"), g.h);
    const ChunkSolution plus = chunk_q_optimality(g.mdp, model);
    const double vplus = eval_ac_policy_openloop(g.mdp, plus.policy, {s0}).at(s0);
    const double vstar = solve_optimal(g.mdp).v.at(s0);
    const double vstar_ac = solve_optimal_ac(g.mdp, g.h).v.at(s0);
    const double eps = olc_report(g.mdp, model).weak_eps;
    c.actual_value = vstar - vplus;
    c.bound_value = g.expected.at("gap");
    c.witnesses["weak_eps"] = eps;
    c.witnesses["plus_chunk"] = plus.policy.chunk(s0);
    side(c, eps <= g.expected.at("weak_eps_max") + c.tolerance, "measured weak eps <= eps");
    side(c, plus.policy.choice[static_cast<size_t>(s0)] == 0, "pi+_ac picks the all-zero chunk");
    side(c, std::abs(vstar_ac - vstar) <= c.tolerance, "V*_ac equals V* at the start state");
    return c;
}

TheoremCheck strong_olc_tight(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::eq_within;
    GenOutput g = generate("strong_worstcase", p);
    gen_witness(c, g);
    const int s0 = g.start_state;
    const DataModel model = build_data_model(g.mdp, g.data.at("D"), g.h);
    const ChunkSolution plus = chunk_q_optimality(g.mdp, model);
    const double vplus = eval_ac_policy_openloop(g.mdp, plus.policy, {s0}).at(s0);
    const double vstar = solve_optimal(g.mdp).v.at(s0);
    const double eps = olc_report(g.mdp, model).strong_eps;
    c.actual_value = vstar - vplus;
    c.bound_value = g.expected.at("gap");
    c.witnesses["strong_eps"] = eps;
    c.witnesses["three_term"] = g.expected.at("three_term");
    c.witnesses["plus_chunk"] = plus.policy.chunk(s0);
    side(c, std::abs(eps - g.expected.at("strong_eps")) <= c.tolerance, "measured strong eps of D equals eps");
    const Chunk ones(static_cast<size_t>(g.h), 1);
    side(c, plus.policy.chunk(s0) == ones, "pi+_ac picks the all-one chunk");
    return c;
}

TheoremCheck bounded_ov_tight(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::eq_within;
    GenOutput g = generate("castle_flower", p);
    gen_witness(c, g);
    const int s0 = g.start_state;
    const DataModel model = build_data_model(g.mdp, g.data.at("D"), g.h);
    const OptimalSolution opt = solve_optimal(g.mdp);
    const ChunkSolution plus = chunk_q_optimality(g.mdp, model);
    const double vbullet = eval_closedloop_first(g.mdp, plus.policy, {s0}).v.at(s0);
    const double vplus = eval_ac_policy_openloop(g.mdp, plus.policy, {s0}).at(s0);
    const VariabilityReport ov = optimality_variability(g.mdp, g.data.at("D"), model, opt.v.v);
    c.actual_value = opt.v.at(s0) - vbullet;
    c.bound_value = g.expected.at("closedloop_gap");
    c.witnesses["local_theta"] = ov.local_theta;
    c.witnesses["global_theta"] = ov.global_theta;
    c.witnesses["ac_gap"] = opt.v.at(s0) - vplus;
    side(c, std::abs(ov.local_theta - g.expected.at("local_theta")) <= c.tolerance, "local theta equals theta_L");
    side(c, std::abs(ov.global_theta - g.expected.at("global_theta")) <= c.tolerance, "global theta equals theta_G");
    side(c, opt.v.at(s0) - vplus >= g.expected.at("ac_gap_lower") - c.tolerance, "V* - V+_ac >= c/(1-gamma)");
    return c;
}

TheoremCheck nstep_worstcase(const Params& p) {
    TheoremCheck c;
    c.relation = Relation::eq_within;
    GenOutput g = generate("nstep_worstcase", p);
    gen_witness(c, g);
    const int s0 = g.start_state;
    const int n = g.h;
    const DataModel model = build_data_model(g.mdp, g.data.at("D"), n);
    const ChunkSolution plus = chunk_q_optimality(g.mdp, model);
    const double vplus = eval_ac_policy_openloop(g.mdp, plus.policy, {s0}).at(s0);
    const NStepSolution ns = nstep_uncorrected_q(g.mdp, model);
    const OptimalSolution opt = solve_optimal(g.mdp);
    const SuboptimalityReport sub = data_suboptimality(g.mdp, model, opt.q, opt.v.v);
    c.actual_value = vplus - ns.v.at(s0);
    c.bound_value = g.expected.at("vac_minus_vn");
    c.witnesses["vstar_minus_vplus"] = opt.v.at(s0) - vplus;
    c.witnesses["pi_n_action"] = ns.policy.first_action(s0);
    c.witnesses["delta_tilde_n"] = sub.delta_tilde_n;
    side(c, std::abs(opt.v.at(s0) - vplus) <= c.tolerance, "V* equals V+_ac");
    side(c, ns.policy.first_action(s0) == 0, "pi+_n picks action 0");
    side(c, std::abs(sub.delta_tilde_n - g.expected.at("delta_tilde_measured")) <= c.tolerance,
         "measured delta~_n equals delta~/(1-gamma)");
    return c;
}

using CheckFn = TheoremCheck (*)(const Params&);

CheckFn lookup(const std::string& name) {
    static const std::map<std::string, CheckFn> table{
        {"ac_value_bias_bound", ac_value_bias_bound},
        {"ac_value_bias_tight", ac_value_bias_tight},
        {"ac_optgap_bound", ac_optgap_bound},
        {"ac_optgap_tight", ac_optgap_tight},
        {"weak_olc_failure", weak_olc_failure},
        {"strong_olc_bound", strong_olc_bound},
        {"strong_olc_tight", strong_olc_tight},
        {"nstep_comparison", nstep_comparison},
        {"closedloop_strong_bound", closedloop_strong_bound},
        {"bounded_ov_bound", bounded_ov_bound},
        {"bounded_ov_tight", bounded_ov_tight},
        {"nstep_worstcase", nstep_worstcase},
        {"shortcut_free_bound", shortcut_free_bound},
        {"eps_det_implies_weak_olc", eps_det_implies_weak_olc},
        {"nstep_lemma_bound", nstep_lemma_bound},
    };
    auto it = table.find(name);
    if (it == table.end()) throw Error("unknown check: " + name);
    return it->second;
}

}  // namespace

TheoremCheck verify(const std::string& name, const Params& params) {
    const CheckFn fn = lookup(name);
    TheoremCheck c = fn(params);
    c.name = name;
    c.params = params;
    c.tolerance = param(params, "tol", c.tolerance);
    c.decide();
    return c;
}

json check_instance(const std::string& name, const Params& params) {
    lookup(name);
    if (name.size() > 6 && name.compare(name.size() - 6, 6, "_tight") == 0) return json::object();
    json out;
    if (name == "eps_det_implies_weak_olc") {
        const RandomInstance inst = random_eps_det_instance(derive_seed(uparam(params, "seed"), uparam(params, "index")),
                                                            param(params, "eps", 0.1), iparam(params, "h", 3));
        return {{"mdp", mdp_to_json(inst.mdp)}, {"data", data_to_json(inst.data)}, {"h", inst.h}};
    }
    if (name == "weak_olc_failure" || name == "nstep_worstcase") return json::object();
    if (name == "shortcut_free_bound") {
        const ShortcutSetup st = shortcut_setup(params);
        return {{"mdp", mdp_to_json(st.pr.inst.mdp)}, {"data", data_to_json(st.mixed)}, {"h", st.pr.inst.h}};
    }
    const Prepared pr = prepare(params);
    out["mdp"] = mdp_to_json(pr.inst.mdp);
    out["data"] = data_to_json(pr.inst.data);
    out["data_mixed"] = data_to_json(pr.mixed);
    out["h"] = pr.inst.h;
    return out;
}

// ---- sweeps -----------------------------------------------------------------------------

json row_to_json(const ResultRow& r) {
    json j{{"cell", r.cell}, {"check", r.check}, {"params", r.params}, {"metrics", r.metrics}, {"pass", r.pass}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

ResultRow row_from_json(const json& j) {
    ResultRow r;
    try {
        r.cell = j.at("cell").get<long>();
        r.check = j.at("check").get<std::string>();
        r.params = j.at("params").get<Params>();
        r.metrics = j.at("metrics").get<std::map<std::string, double>>();
        r.pass = j.at("pass").get<bool>();
        if (j.contains("error")) r.error = j.at("error").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed result row: ") + e.what());
    }
    return r;
}

namespace {

std::vector<double> parse_axis(const std::string& key, const json& v) {
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& x : v) {
            if (!x.is_number()) throw Error("grid axis '" + key + "' must hold numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }
    if (v.is_object() && v.contains("range")) {
        const auto r = v.at("range");
        if (!r.is_array() || r.size() < 2 || r.size() > 3) throw Error("grid axis '" + key + "': range needs [start, stop(, step)]");
        const double a = r[0].get<double>(), b = r[1].get<double>(), step = r.size() == 3 ? r[2].get<double>() : 1.0;
        if (!(step > 0.0)) throw Error("grid axis '" + key + "': range step must be positive");
        for (long i = 0;; ++i) {
            const double x = a + static_cast<double>(i) * step;
            if (x >= b - 1e-12 * std::max(1.0, std::abs(b))) break;
            out.push_back(x);
        }
        return out;
    }
    throw Error("grid axis '" + key + "' must be an array or {\"range\": [...]}");
}

SweepRun parse_run(const json& j) {
    if (!j.is_object()) throw Error("sweep run must be an object");
    SweepRun run;
    if (!j.contains("check") || !j.at("check").is_string()) throw Error("sweep run needs a string 'check'");
    run.check = j.at("check").get<std::string>();
    if (run.check != "dqc") lookup(run.check);
    for (const auto& [k, v] : j.items())
        if (k != "check" && k != "grid" && k != "params") throw Error("unknown sweep run key '" + k + "'");
    if (j.contains("grid")) {
        if (!j.at("grid").is_object()) throw Error("'grid' must be an object");
        for (const auto& [k, v] : j.at("grid").items()) run.grid.emplace_back(k, parse_axis(k, v));
    }
    if (j.contains("params")) {
        if (!j.at("params").is_object()) throw Error("'params' must be an object");
        for (const auto& [k, v] : j.at("params").items()) {
            if (!v.is_number()) throw Error("param '" + k + "' must be a number");
            run.fixed[k] = v.get<double>();
        }
    }
    return run;
}

}  // namespace

SweepConfig parse_sweep_config(const json& j) {
    if (!j.is_object()) throw Error("sweep config must be a JSON object");
    SweepConfig cfg;
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw Error("'seed' must be a nonnegative integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("runs")) {
        if (!j.at("runs").is_array()) throw Error("'runs' must be an array");
        for (const auto& r : j.at("runs")) cfg.runs.push_back(parse_run(r));
        for (const auto& [k, v] : j.items())
            if (k != "runs" && k != "seed") throw Error("unknown sweep config key '" + k + "'");
    } else {
        json single = j;
        single.erase("seed");
        cfg.runs.push_back(parse_run(single));
    }
    return cfg;
}

std::vector<SweepCell> expand_cells(const SweepConfig& cfg) {
    std::vector<SweepCell> cells;
    long index = 0;
    for (const auto& run : cfg.runs) {
        if (run.grid.empty()) continue;
        bool empty_axis = false;
        for (const auto& ax : run.grid) empty_axis = empty_axis || ax.second.empty();
        if (empty_axis) continue;
        std::vector<size_t> pos(run.grid.size(), 0);
        while (true) {
            SweepCell c;
            c.index = index++;
            c.check = run.check;
            c.params = run.fixed;
            if (!c.params.count("seed")) c.params["seed"] = static_cast<double>(cfg.seed);
            for (size_t a = 0; a < run.grid.size(); ++a) c.params[run.grid[a].first] = run.grid[a].second[pos[a]];
            cells.push_back(std::move(c));
            size_t a = run.grid.size();
            while (a > 0) {
                --a;
                if (++pos[a] < run.grid[a].second.size()) break;
                pos[a] = 0;
                if (a == 0) goto next_run;
            }
        }
    next_run:;
    }
    return cells;
}

namespace {

AgentConfig agent_config_from_params(const Params& p) {
    AgentConfig c;
    c.h = iparam(p, "h", c.h);
    c.h_a = iparam(p, "h_a", c.h_a);
    c.n = iparam(p, "n", c.n);
    c.kappa_b = param(p, "kappa_b", c.kappa_b);
    c.kappa_d = param(p, "kappa_d", c.kappa_d);
    c.N = iparam(p, "N", c.N);
    c.target_rate = param(p, "target_rate", c.target_rate);
    c.learn_rate = param(p, "learn_rate", c.learn_rate);
    c.batch_size = iparam(p, "batch_size", c.batch_size);
    const int v = iparam(p, "variant", 0);
    if (v < 0 || v > static_cast<int>(Variant::DQC_NAIVE)) throw ConstraintError("variant code in 0..5");
    c.variant = static_cast<Variant>(v);
    c.seed = uparam(p, "seed");
    c.mode = iparam(p, "sampled", 0) != 0 ? TrainMode::sampled : TrainMode::population;
    c.dataset_size = iparam(p, "dataset_size", c.dataset_size);
    c.tolerance = param(p, "tolerance", c.tolerance);
    c.mc_rollouts = iparam(p, "mc_rollouts", 0);
    c.validate();
    return c;
}

}  // namespace

ResultRow run_cell(const SweepCell& cell) {
    ResultRow row;
    row.cell = cell.index;
    row.check = cell.check;
    row.params = cell.params;
    try {
        if (cell.check == "dqc") {
            const ChainFork cf = make_chainfork();
            AgentConfig cfg = agent_config_from_params(cell.params);
            cfg.eval_state = cf.start_state;
            const long iters = std::lround(param(cell.params, "iters", 100000));
            const RunResult r = run_variant(cf.mdp, cf.data, cfg, iters);
            row.metrics["eval_value"] = r.report.eval_value;
            row.metrics["iterations"] = static_cast<double>(r.report.iterations);
            row.metrics["converged"] = r.report.converged ? 1.0 : 0.0;
            row.metrics["final_residual"] = r.report.curve.empty() ? 0.0 : r.report.curve.back().residual;
            if (cfg.mc_rollouts > 0) {
                row.metrics["mc_mean"] = r.report.mc.mean;
                row.metrics["mc_std_error"] = r.report.mc.std_error;
            }
            row.pass = true;
        } else {
            const TheoremCheck c = verify(cell.check, cell.params);
            row.metrics["bound"] = c.bound_value;
            row.metrics["actual"] = c.actual_value;
            row.metrics["tolerance"] = c.tolerance;
            row.pass = c.pass;
            if (!c.side_failures.empty()) {
                std::string msg;
                for (const auto& f : c.side_failures) msg += (msg.empty() ? "" : "; ") + f;
                row.error = "side condition failed: " + msg;
            }
        }
    } catch (const std::exception& e) {
        row.metrics.clear();
        row.pass = false;
        row.error = e.what();
    }
    return row;
}

std::vector<ResultRow> load_rows_jsonl(const std::string& path) {
    std::vector<ResultRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            break;  // torn final line from an interrupted run
        }
        rows.push_back(row_from_json(j));
    }
    return rows;
}

std::vector<ResultRow> sweep(const SweepConfig& cfg, const SweepOptions& opt) {
    const std::vector<SweepCell> cells = expand_cells(cfg);
    std::vector<ResultRow> rows;
    if (!opt.out_path.empty()) {
        rows = load_rows_jsonl(opt.out_path);
        for (size_t i = 0; i < rows.size(); ++i)
            if (i >= cells.size() || rows[i].cell != cells[i].index || rows[i].check != cells[i].check)
                throw Error("existing results in '" + opt.out_path + "' do not match this sweep config");
        // Rewrite the kept prefix so a torn trailing line is dropped.
        std::string text;
        for (const auto& r : rows) text += row_to_json(r).dump() + "\n";
        write_text_file(opt.out_path, text);
        for (const auto& r : rows)
            if (opt.on_row) opt.on_row(r);
    }
    std::ofstream out;
    if (!opt.out_path.empty()) out.open(opt.out_path, std::ios::app | std::ios::binary);

    const int workers = std::max(1, opt.workers);
    const size_t block = static_cast<size_t>(workers) * 4;
    for (size_t start = rows.size(); start < cells.size(); start += block) {
        const size_t stop = std::min(cells.size(), start + block);
        std::vector<ResultRow> batch(stop - start);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (long i = 0; i < static_cast<long>(batch.size()); ++i) batch[static_cast<size_t>(i)] = run_cell(cells[start + static_cast<size_t>(i)]);
        for (auto& r : batch) {
            if (!r.pass && !opt.violation_dir.empty() && r.check != "dqc") {
                json dump{{"row", row_to_json(r)}};
                try {
                    dump["check"] = check_to_json(verify(r.check, r.params));
                    dump["instance"] = check_instance(r.check, r.params);
                } catch (const std::exception& e) {
                    dump["dump_error"] = e.what();
                }
                write_text_file((std::filesystem::path(opt.violation_dir) / ("cell_" + std::to_string(r.cell) + ".json")).string(),
                                dump.dump(2) + "\n");
            }
            if (out.is_open()) {
                out << row_to_json(r).dump() << '\n';
                out.flush();
            }
            if (opt.on_row) opt.on_row(r);
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

namespace {
std::string params_string(const Params& p) {
    std::string s;
    for (const auto& [k, v] : p) s += (s.empty() ? "" : ";") + k + "=" + format_number(v);
    return s;
}

// Long-format metric list of one row; "pass" is always present.
std::vector<std::pair<std::string, double>> long_metrics(const ResultRow& r) {
    std::vector<std::pair<std::string, double>> out(r.metrics.begin(), r.metrics.end());
    out.emplace_back("pass", r.pass ? 1.0 : 0.0);
    return out;
}
}  // namespace

std::string export_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "cell,check,params,metric,value\n";
    for (const auto& r : rows)
        for (const auto& [k, v] : long_metrics(r)) os << r.cell << ',' << r.check << ',' << params_string(r.params) << ',' << k << ',' << format_number(v) << '\n';
    return os.str();
}

std::string export_json(const std::vector<ResultRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        for (const auto& [k, v] : long_metrics(r)) {
            json e{{"cell", r.cell}, {"check", r.check}, {"params", r.params}, {"metric", k}, {"value", v}};
            if (!r.error.empty()) e["error"] = r.error;
            arr.push_back(std::move(e));
        }
    return json{{"format", "long"}, {"rows", arr}}.dump(1) + "\n";
}

std::vector<ResultRow> rows_from_export_json(const json& j) {
    std::vector<ResultRow> rows;
    try {
        for (const auto& e : j.at("rows")) {
            const long cell = e.at("cell").get<long>();
            if (rows.empty() || rows.back().cell != cell) {
                ResultRow r;
                r.cell = cell;
                r.check = e.at("check").get<std::string>();
                r.params = e.at("params").get<Params>();
                if (e.contains("error")) r.error = e.at("error").get<std::string>();
                rows.push_back(std::move(r));
            }
            const auto metric = e.at("metric").get<std::string>();
            const double v = e.at("value").get<double>();
            if (metric == "pass") rows.back().pass = v != 0.0;
            else rows.back().metrics[metric] = v;
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed results export: ") + e.what());
    }
    return rows;
}

}  // namespace aclab
