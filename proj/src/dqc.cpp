#include "aclab/dqc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aclab {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::DQC: return "DQC";
        case Variant::QC: return "QC";
        case Variant::NS: return "NS";
        case Variant::OS: return "OS";
        case Variant::QC_NS: return "QC_NS";
        case Variant::DQC_NAIVE: return "DQC_NAIVE";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::DQC, Variant::QC, Variant::NS, Variant::OS, Variant::QC_NS, Variant::DQC_NAIVE})
        if (variant_name(v) == name) return v;
    throw Error("unknown variant: " + name);
}

void AgentConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw ConstraintError(std::string("agent config: ") + what);
    };
    need(h >= 1 && h_a >= 1 && h_a <= h, "1 <= h_a <= h");
    need(n >= 1, "n >= 1");
    need(kappa_b >= 0.5 && kappa_b < 1.0, "kappa_b in [0.5,1)");
    need(kappa_d >= 0.5 && kappa_d < 1.0, "kappa_d in [0.5,1)");
    need(N >= 1, "N >= 1");
    need(target_rate > 0.0 && target_rate <= 1.0, "target_rate in (0,1]");
    need(learn_rate > 0.0, "learn_rate > 0");
    need(batch_size >= 1, "batch_size >= 1");
    need(dataset_size >= 1, "dataset_size >= 1");
    need(tolerance > 0.0, "tolerance > 0");
    need(mc_rollouts >= 0, "mc_rollouts >= 0");
    need(eval_every >= 0, "eval_every >= 0");
    switch (variant) {
        case Variant::QC: need(h == h_a, "QC requires h == h_a"); break;
        case Variant::NS: need(h_a == 1, "NS requires h_a == 1"); break;
        case Variant::OS: need(h_a == 1, "OS requires h_a == 1"); break;
        default: break;
    }
}

VariantLayout layout_of(const AgentConfig& cfg) {
    cfg.validate();
    VariantLayout l;
    switch (cfg.variant) {
        case Variant::DQC: l = {cfg.h, cfg.h, cfg.h_a, cfg.h_a, true}; break;
        case Variant::QC: l = {cfg.h, cfg.h, cfg.h, cfg.h, false}; break;
        case Variant::QC_NS: l = {cfg.n, cfg.h_a, cfg.h_a, cfg.h_a, false}; break;
        case Variant::NS: l = {cfg.n, 1, 1, 1, false}; break;
        case Variant::OS: l = {1, 1, 1, 1, false}; break;
        case Variant::DQC_NAIVE: l = {cfg.h, cfg.h, cfg.h, cfg.h_a, false}; break;
    }
    return l;
}

// ---- data ---------------------------------------------------------------------

Dataset sample_dataset(const Mdp& m, const DataModel& model, int count, std::uint64_t seed) {
    if (model.supported.empty()) throw SupportError("sample_dataset: empty support");
    Rng rng(seed);
    Dataset out;
    out.reserve(static_cast<size_t>(count));
    std::vector<int> full;
    for (int i = 0; i < count; ++i) {
        const int s = model.supported[static_cast<size_t>(uniform01(rng) * static_cast<double>(model.supported.size()))];
        const TrajChunkDist& d = model.dist(s);
        double u = uniform01(rng), acc = 0.0;
        auto it = d.entries.begin();
        for (; it != d.entries.end(); ++it) {
            acc += it->second.prob;
            if (u < acc) break;
        }
        if (it == d.entries.end()) it = std::prev(d.entries.end());
        const ChunkEntry& e = it->second;
        u = uniform01(rng);
        acc = 0.0;
        auto pit = e.paths.begin();
        for (; pit != e.paths.end(); ++pit) {
            acc += pit->second;
            if (u < acc) break;
        }
        if (pit == e.paths.end()) pit = std::prev(e.paths.end());
        Transition t;
        t.state = s;
        t.actions = d.chunk(it->first);
        full.assign(1, s);
        full.insert(full.end(), pit->first.begin(), pit->first.end());
        t.ret = chunk_return(m, full, t.actions);
        t.next = full.back();
        out.push_back(std::move(t));
    }
    return out;
}

namespace {
ChunkCode prefix_code(const Chunk& c, int len, int num_actions) {
    return encode_chunk(Chunk(c.begin(), c.begin() + len), num_actions);
}
}  // namespace

BehaviorEstimate estimate_behavior(const Dataset& data, int num_states, int num_actions, int len) {
    BehaviorEstimate b;
    b.len = len;
    b.dist.assign(static_cast<size_t>(num_states), {});
    b.seen.assign(static_cast<size_t>(num_states), 0);
    std::vector<double> total(static_cast<size_t>(num_states), 0.0);
    for (const auto& t : data) {
        if (static_cast<int>(t.actions.size()) < len) throw Error("estimate_behavior: chunk shorter than prefix");
        b.dist[static_cast<size_t>(t.state)][prefix_code(t.actions, len, num_actions)] += 1.0;
        total[static_cast<size_t>(t.state)] += 1.0;
    }
    for (int s = 0; s < num_states; ++s) {
        if (total[static_cast<size_t>(s)] == 0.0) continue;
        b.seen[static_cast<size_t>(s)] = 1;
        for (auto& [c, p] : b.dist[static_cast<size_t>(s)]) p /= total[static_cast<size_t>(s)];
    }
    return b;
}

BehaviorEstimate exact_behavior(const DataModel& model, int len) {
    BehaviorEstimate b;
    b.len = len;
    b.dist.assign(model.dists.size(), {});
    b.seen.assign(model.dists.size(), 0);
    for (int s : model.supported) {
        for (const auto& [c, p] : prefix_marginal(model.dist(s), len))
            if (p > kSupportEps) b.dist[static_cast<size_t>(s)][c] = p;
        b.seen[static_cast<size_t>(s)] = 1;
    }
    return b;
}

PopulationModel build_population(const Mdp& m, const DataDist& data, const AgentConfig& cfg) {
    PopulationModel pop;
    pop.lay = layout_of(cfg);
    pop.num_actions = m.num_actions;
    // Every state the data visits at any step gets a policy, so partial-chunk execution stays defined.
    const DataModel visit = build_data_model(m, data, 1);
    const DataModel model = build_data_model_from(m, data, pop.lay.target_len, visit.supported);
    pop.supported = model.supported;
    pop.keys.assign(static_cast<size_t>(m.num_states), {});
    const ChunkCode key_div = ipow(static_cast<std::uint64_t>(m.num_actions), pop.lay.target_len - pop.lay.key_len);
    const ChunkCode pre_div = ipow(static_cast<std::uint64_t>(m.num_actions), pop.lay.key_len - pop.lay.policy_len);
    for (int s : model.supported) {
        std::map<ChunkCode, PopulationModel::Key> acc;
        std::map<ChunkCode, std::map<int, double>> nexts;
        for (const auto& o : model.outcomes[static_cast<size_t>(s)]) {
            const ChunkCode key = o.code / key_div;
            auto& k = acc[key];
            k.code = key;
            k.prefix = key / pre_div;
            k.prob += o.prob;
            k.mean_return += o.prob * o.mean_return;
            for (auto [sp, p] : o.next) nexts[key][sp] += o.prob * p;
        }
        auto& row = pop.keys[static_cast<size_t>(s)];
        for (auto& [code, k] : acc) {
            k.mean_return /= k.prob;
            for (auto [sp, p] : nexts[code]) k.next.emplace_back(sp, p / k.prob);
            row.push_back(k);
        }
    }
    // Behavior prefixes come from the same horizon-T model so they match the critic keys.
    pop.behavior.len = pop.lay.policy_len;
    pop.behavior.dist.assign(static_cast<size_t>(m.num_states), {});
    pop.behavior.seen.assign(static_cast<size_t>(m.num_states), 0);
    for (int s : pop.supported) {
        for (const auto& k : pop.keys[static_cast<size_t>(s)]) pop.behavior.dist[static_cast<size_t>(s)][k.prefix] += k.prob;
        pop.behavior.seen[static_cast<size_t>(s)] = 1;
    }
    return pop;
}

// ---- agent state ----------------------------------------------------------------

namespace {

ChunkQTable empty_table(int num_states, int num_actions, int len) {
    ChunkQTable t;
    t.h = len;
    t.num_actions = num_actions;
    t.q.assign(static_cast<size_t>(num_states), {});
    return t;
}

ValueTable empty_values(int num_states) {
    ValueTable v;
    v.v.assign(static_cast<size_t>(num_states), 0.0);
    v.defined.assign(static_cast<size_t>(num_states), 0);
    return v;
}

AgentState blank(int num_states, int num_actions, const VariantLayout& lay) {
    AgentState st;
    st.q_chunk = empty_table(num_states, num_actions, lay.key_len);
    st.q_partial = empty_table(num_states, num_actions, lay.policy_len);
    st.v = empty_values(num_states);
    return st;
}

void finish_init(AgentState& st) {
    st.q_chunk_bar = st.q_chunk;
    st.q_partial_bar = st.q_partial;
    st.v_bar = st.v;
}

double smooth_table(ChunkQTable& bar, const ChunkQTable& live, double lam) {
    double change = 0.0;
    for (size_t s = 0; s < live.q.size(); ++s)
        for (const auto& [c, x] : live.q[s]) {
            double& b = bar.q[s][c];
            const double nb = lam == 1.0 ? x : lam * x + (1.0 - lam) * b;
            change = std::max(change, std::abs(nb - b));
            b = nb;
        }
    return change;
}

double smooth_values(ValueTable& bar, const ValueTable& live, double lam) {
    double change = 0.0;
    for (size_t s = 0; s < live.v.size(); ++s) {
        if (!live.defined[s]) continue;
        const double nb = lam == 1.0 ? live.v[s] : lam * live.v[s] + (1.0 - lam) * bar.v[s];
        change = std::max(change, std::abs(nb - bar.v[s]));
        bar.v[s] = nb;
        bar.defined[s] = 1;
    }
    return change;
}

double smooth_all(AgentState& st, double lam) {
    double c = smooth_table(st.q_chunk_bar, st.q_chunk, lam);
    c = std::max(c, smooth_table(st.q_partial_bar, st.q_partial, lam));
    return std::max(c, smooth_values(st.v_bar, st.v, lam));
}

double bar_value(const AgentState& st, int s) {
    return st.v_bar.defined[static_cast<size_t>(s)] ? st.v_bar.v[static_cast<size_t>(s)] : 0.0;
}

}  // namespace

AgentState init_agent(int num_states, int num_actions, const VariantLayout& lay, const PopulationModel& pop) {
    AgentState st = blank(num_states, num_actions, lay);
    for (int s : pop.supported) {
        for (const auto& k : pop.keys[static_cast<size_t>(s)]) {
            st.q_chunk.q[static_cast<size_t>(s)][k.code] = 0.0;
            st.q_partial.q[static_cast<size_t>(s)][k.prefix] = 0.0;
        }
        st.v.defined[static_cast<size_t>(s)] = 1;
    }
    st.behavior = pop.behavior;
    finish_init(st);
    return st;
}

AgentState init_agent(int num_states, int num_actions, const VariantLayout& lay, const Dataset& data) {
    AgentState st = blank(num_states, num_actions, lay);
    for (const auto& t : data) {
        if (static_cast<int>(t.actions.size()) < lay.target_len)
            throw Error("init_agent: dataset chunks shorter than the target horizon");
        st.q_chunk.q[static_cast<size_t>(t.state)][prefix_code(t.actions, lay.key_len, num_actions)] = 0.0;
        st.q_partial.q[static_cast<size_t>(t.state)][prefix_code(t.actions, lay.policy_len, num_actions)] = 0.0;
        st.v.defined[static_cast<size_t>(t.state)] = 1;
    }
    st.behavior = estimate_behavior(data, num_states, num_actions, lay.policy_len);
    finish_init(st);
    return st;
}

double agent_update(AgentState& st, const Mdp& m, const PopulationModel& pop, const AgentConfig& cfg) {
    const VariantLayout& lay = pop.lay;
    const double disc = std::pow(m.gamma, lay.target_len);
    double change = 0.0;
    auto assign = [&change](double& slot, double x) {
        change = std::max(change, std::abs(x - slot));
        slot = x;
    };

    for (int s : pop.supported) {
        auto& row = st.q_chunk.q[static_cast<size_t>(s)];
        for (const auto& k : pop.keys[static_cast<size_t>(s)]) {
            double boot = 0.0;
            for (auto [sp, p] : k.next) boot += p * bar_value(st, sp);
            assign(row[k.code], k.mean_return + disc * boot);
        }
    }

    std::vector<WeightedValue> buf;
    for (int s : pop.supported) {
        const auto& keys = pop.keys[static_cast<size_t>(s)];
        auto& part = st.q_partial.q[static_cast<size_t>(s)];
        if (!lay.distill) {
            for (const auto& k : keys) assign(part[k.code], st.q_chunk.q[static_cast<size_t>(s)].at(k.code));
            continue;
        }
        const auto& qbar = st.q_chunk_bar.q[static_cast<size_t>(s)];
        for (auto it = keys.begin(); it != keys.end();) {
            const ChunkCode pre = it->prefix;
            buf.clear();
            for (; it != keys.end() && it->prefix == pre; ++it) buf.push_back({qbar.at(it->code), it->prob});
            assign(part[pre], implicit_stat(buf, StatKind::expectile, cfg.kappa_d));
        }
    }

    for (int s : pop.supported) {
        buf.clear();
        const auto& pbar = st.q_partial_bar.q[static_cast<size_t>(s)];
        for (const auto& [pre, p] : pop.behavior.dist[static_cast<size_t>(s)]) buf.push_back({pbar.at(pre), p});
        assign(st.v.v[static_cast<size_t>(s)], implicit_stat(buf, StatKind::quantile, cfg.kappa_b));
    }

    change = std::max(change, smooth_all(st, cfg.target_rate));
    ++st.updates;
    return change;
}

double agent_update(AgentState& st, const Mdp& m, const Dataset& batch, const AgentConfig& cfg) {
    const VariantLayout lay = layout_of(cfg);
    const double disc = std::pow(m.gamma, lay.target_len);
    const double lr = cfg.learn_rate;
    const int A = m.num_actions;
    double change = 0.0;
    auto step = [&change](double& slot, double delta) {
        change = std::max(change, std::abs(delta));
        slot += delta;
    };

    for (const auto& t : batch) {
        double& q = st.q_chunk.q[static_cast<size_t>(t.state)].at(prefix_code(t.actions, lay.key_len, A));
        step(q, lr * (t.ret + disc * bar_value(st, t.next) - q));
    }
    for (const auto& t : batch) {
        const ChunkCode key = prefix_code(t.actions, lay.key_len, A);
        const ChunkCode pre = prefix_code(t.actions, lay.policy_len, A);
        double& qp = st.q_partial.q[static_cast<size_t>(t.state)].at(pre);
        if (!lay.distill) {
            step(qp, st.q_chunk.q[static_cast<size_t>(t.state)].at(key) - qp);
            continue;
        }
        const double u = st.q_chunk_bar.q[static_cast<size_t>(t.state)].at(key) - qp;
        step(qp, lr * (u < 0.0 ? 1.0 - cfg.kappa_d : cfg.kappa_d) * u);
    }
    for (const auto& t : batch) {
        const ChunkCode pre = prefix_code(t.actions, lay.policy_len, A);
        double& v = st.v.v[static_cast<size_t>(t.state)];
        const double u = st.q_partial_bar.q[static_cast<size_t>(t.state)].at(pre) - v;
        step(v, lr * (u < 0.0 ? cfg.kappa_b - 1.0 : cfg.kappa_b));
    }
    change = std::max(change, smooth_all(st, cfg.target_rate));
    ++st.updates;
    return change;
}

// ---- extraction ---------------------------------------------------------------------

namespace {
ChunkCode best_of(const std::map<ChunkCode, double>& q, const std::vector<ChunkCode>& cands) {
    double best = -std::numeric_limits<double>::infinity();
    for (ChunkCode c : cands) best = std::max(best, q.at(c));
    ChunkCode pick = std::numeric_limits<ChunkCode>::max();
    for (ChunkCode c : cands)
        if (q.at(c) >= best - kTieTol) pick = std::min(pick, c);
    return pick;
}
}  // namespace

ChunkCode extract_action(const AgentState& st, int s, const AgentConfig& cfg, Rng& rng) {
    if (!st.behavior.defined(s)) throw SupportError("extract_action: behavior undefined at state " + std::to_string(s));
    const auto& beh = st.behavior.dist[static_cast<size_t>(s)];
    std::vector<ChunkCode> codes;
    Dist probs;
    for (const auto& [c, p] : beh) {
        codes.push_back(c);
        probs.push_back(p);
    }
    std::vector<ChunkCode> cands;
    cands.reserve(static_cast<size_t>(cfg.N));
    for (int i = 0; i < cfg.N; ++i) cands.push_back(codes[static_cast<size_t>(sample_index(probs, rng))]);
    return best_of(st.q_partial.q[static_cast<size_t>(s)], cands);
}

ChunkCode extract_action_exact(const AgentState& st, int s) {
    if (!st.behavior.defined(s)) throw SupportError("extract_action_exact: behavior undefined at state " + std::to_string(s));
    std::vector<ChunkCode> cands;
    for (const auto& [c, p] : st.behavior.dist[static_cast<size_t>(s)])
        if (p > kSupportEps) cands.push_back(c);
    if (cands.empty()) throw SupportError("extract_action_exact: empty behavior support");
    return best_of(st.q_partial.q[static_cast<size_t>(s)], cands);
}

// ---- driver -------------------------------------------------------------------------------

namespace {

// Extracted policy (chunks of length exec_len) and its exact open-loop value from the eval state.
std::pair<AcPolicy, ValueTable> extract_and_evaluate(const AgentState& st, const Mdp& m, const AgentConfig& cfg,
                                                     const VariantLayout& lay) {
    AcPolicy pol;
    pol.h = lay.exec_len;
    pol.num_actions = m.num_actions;
    pol.choice.assign(static_cast<size_t>(m.num_states), -1);
    pol.ties.assign(static_cast<size_t>(m.num_states), {});
    const ChunkCode exec_div = ipow(static_cast<std::uint64_t>(m.num_actions), lay.policy_len - lay.exec_len);
    Rng pick_rng(cfg.seed + 1);
    for (int s = 0; s < m.num_states; ++s) {
        if (!st.behavior.defined(s)) continue;
        const ChunkCode c = cfg.best_of_n_eval ? extract_action(st, s, cfg, pick_rng) : extract_action_exact(st, s);
        pol.choice[static_cast<size_t>(s)] = static_cast<std::int64_t>(c / exec_div);
        pol.ties[static_cast<size_t>(s)] = {c / exec_div};
    }
    ValueTable v = eval_ac_policy_openloop(m, pol, {cfg.eval_state});
    return {std::move(pol), std::move(v)};
}

}  // namespace

RunResult run_variant(const Mdp& m, const DataDist& data, const AgentConfig& cfg, long iters) {
    const VariantLayout lay = layout_of(cfg);
    RunResult res;
    AgentState& st = res.state;
    RunReport& rep = res.report;

    auto record = [&](long iter, double residual) {
        CurvePoint pt{iter, residual, std::nullopt};
        if (cfg.eval_every > 0 && iter % cfg.eval_every == 0) {
            try {
                pt.eval_value = extract_and_evaluate(st, m, cfg, lay).second.at(cfg.eval_state);
            } catch (const Error&) {
                // A sampled-mode policy can still reach states without data early in training.
            }
        }
        rep.curve.push_back(pt);
        rep.iterations = iter;
    };

    if (cfg.mode == TrainMode::population) {
        const PopulationModel pop = build_population(m, data, cfg);
        st = init_agent(m.num_states, m.num_actions, lay, pop);
        for (long it = 0; it < iters; ++it) {
            const double r = agent_update(st, m, pop, cfg);
            record(it + 1, r);
            if (r < cfg.tolerance) {
                rep.converged = true;
                break;
            }
        }
    } else {
        const DataModel visit = build_data_model(m, data, 1);
        const DataModel model = build_data_model_from(m, data, lay.target_len, visit.supported);
        const Dataset ds = sample_dataset(m, model, cfg.dataset_size, cfg.seed);
        st = init_agent(m.num_states, m.num_actions, lay, ds);
        Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        Dataset batch(static_cast<size_t>(cfg.batch_size));
        for (long it = 0; it < iters; ++it) {
            for (auto& t : batch) t = ds[static_cast<size_t>(uniform01(rng) * static_cast<double>(ds.size()))];
            record(it + 1, agent_update(st, m, batch, cfg));
        }
    }

    auto [pol, value] = extract_and_evaluate(st, m, cfg, lay);
    rep.policy = std::move(pol);
    rep.value = std::move(value);
    rep.eval_value = rep.value.at(cfg.eval_state);
    if (cfg.mc_rollouts > 0)
        rep.mc = monte_carlo_value(m, cfg.eval_state,
                                   chunk_openloop_rollout_policy(rep.policy.choice, m.num_actions, lay.exec_len),
                                   cfg.mc_rollouts, cfg.seed);
    return res;
}

}  // namespace aclab
