#include <doctest.h>

#include <cmath>

#include "aclab/chainfork.hpp"
#include "aclab/dqc.hpp"
#include "aclab/io.hpp"
#include "aclab/metrics.hpp"
#include "oracles.hpp"

using namespace aclab;

namespace {

AgentConfig population_cfg(Variant v, int h, int h_a) {
    AgentConfig c;
    c.variant = v;
    c.h = h;
    c.h_a = h_a;
    c.n = h;
    c.target_rate = 1.0;
    return c;
}

double table_diff(const ChunkQTable& a, const ChunkQTable& b) {
    REQUIRE(a.q.size() == b.q.size());
    double d = 0.0;
    for (size_t s = 0; s < a.q.size(); ++s) {
        REQUIRE(a.q[s].size() == b.q[s].size());
        for (const auto& [c, x] : a.q[s]) d = std::max(d, std::abs(x - b.q[s].at(c)));
    }
    return d;
}

Dist behavior_row(const BehaviorEstimate& b, int s, int width) {
    Dist d(static_cast<size_t>(width), 0.0);
    for (const auto& [c, p] : b.dist[static_cast<size_t>(s)]) d[c] = p;
    return d;
}

// One state, self loop, a reward per action.
Mdp bandit(const std::vector<double>& rewards) {
    const int A = static_cast<int>(rewards.size());
    Mdp m(1, A, 0.9);
    for (int a = 0; a < A; ++a) {
        m.set_transition(0, a, {{0, 1.0}});
        m.r(0, a) = rewards[static_cast<size_t>(a)];
    }
    return m;
}

}  // namespace

TEST_CASE("ChainFork has the closed-form optimum and matches the stored fixture") {
    const ChainFork cf = make_chainfork();
    const double gamma = cf.mdp.gamma;
    const OptimalSolution opt = solve_optimal(cf.mdp);
    CHECK(opt.v.at(cf.start_state) == doctest::Approx(std::pow(gamma, 5) / (1 - gamma)).epsilon(1e-10));

    const json fx = read_json_file(std::string(ACLAB_FIXTURE_DIR) + "/chainfork.json");
    const Mdp m = mdp_from_json(fx.at("mdp"));
    CHECK(mdp_to_json(m) == mdp_to_json(cf.mdp));
    CHECK(data_to_json(data_from_json(fx.at("data"), m.num_states, m.num_actions)) == data_to_json(cf.data));
    for (int s = 0; s < m.num_states; ++s) {
        CHECK(opt.v.at(s) == doctest::Approx(fx.at("vstar").at(s).get<double>()).epsilon(1e-10));
        for (int a = 0; a < m.num_actions; ++a)
            CHECK(opt.q[static_cast<size_t>(s * m.num_actions + a)] ==
                  doctest::Approx(fx.at("qstar").at(s).at(a).get<double>()).epsilon(1e-10));
    }
}

TEST_CASE("estimate_behavior: point masses on deterministic data") {
    Mdp m(4, 2, 0.9);
    for (int s = 0; s < 4; ++s) {
        m.set_transition(s, 0, {{(s + 1) % 4, 1.0}});
        m.set_transition(s, 1, {{s, 1.0}});
    }
    const DataDist d = single_source(BehaviorSource::deterministic({0, 1, 0, 0}, 2), point_mass(4, 0));
    const DataModel model = build_data_model(m, d, 2);
    const Dataset ds = sample_dataset(m, model, 500, 3);
    const BehaviorEstimate b = estimate_behavior(ds, 4, 2, 2);
    for (int s : model.supported) {
        REQUIRE(b.defined(s));
        REQUIRE(b.dist[static_cast<size_t>(s)].size() == 1);
        CHECK(b.dist[static_cast<size_t>(s)].begin()->second == 1.0);
        CHECK(b.dist[static_cast<size_t>(s)].begin()->first == model.dist(s).entries.begin()->first);
    }
    CHECK_FALSE(b.defined(3));
}

TEST_CASE("estimate_behavior converges to the exact prefix law on ChainFork") {
    const ChainFork cf = make_chainfork();
    const DataModel model = build_data_model(cf.mdp, cf.data, 4);
    const Dataset ds = sample_dataset(cf.mdp, model, 100000, 11);
    for (int len : {1, 2}) {
        const BehaviorEstimate est = estimate_behavior(ds, cf.mdp.num_states, 2, len);
        const BehaviorEstimate ex = exact_behavior(model, len);
        const int width = 1 << len;
        for (int s : model.supported) CHECK(tv_distance(behavior_row(est, s, width), behavior_row(ex, s, width)) < 0.02);
    }
}

TEST_CASE("population DQC: kappa_d = 0.5 distills the probability-weighted mean") {
    const ChainFork cf = make_chainfork();
    AgentConfig cfg = population_cfg(Variant::DQC, 4, 1);
    cfg.kappa_d = 0.5;
    const RunResult r = run_variant(cf.mdp, cf.data, cfg, 100000);
    REQUIRE(r.report.converged);
    const PopulationModel pop = build_population(cf.mdp, cf.data, cfg);
    for (int s : pop.supported) {
        std::map<ChunkCode, std::pair<double, double>> acc;  // prefix -> (sum p q, sum p)
        for (const auto& k : pop.keys[static_cast<size_t>(s)]) {
            acc[k.prefix].first += k.prob * r.state.q_chunk.at(s, k.code);
            acc[k.prefix].second += k.prob;
        }
        for (const auto& [pre, pq] : acc)
            CHECK(r.state.q_partial.at(s, pre) == doctest::Approx(pq.first / pq.second).epsilon(1e-9));
    }
}

TEST_CASE("population DQC: kappa_b near 1 backs up the max over the behavior support") {
    const ChainFork cf = make_chainfork();
    AgentConfig cfg = population_cfg(Variant::DQC, 4, 1);
    cfg.kappa_b = 0.999;
    const RunResult r = run_variant(cf.mdp, cf.data, cfg, 100000);
    REQUIRE(r.report.converged);
    for (int s = 0; s < cf.mdp.num_states; ++s) {
        if (!r.state.behavior.defined(s)) continue;
        double best = -1e300;
        for (const auto& [pre, p] : r.state.behavior.dist[static_cast<size_t>(s)]) best = std::max(best, r.state.q_partial.at(s, pre));
        CHECK(r.state.v.at(s) == doctest::Approx(best).epsilon(1e-9));
    }
    CHECK(r.report.eval_value == doctest::Approx(solve_optimal(cf.mdp).v.at(0)).epsilon(1e-9));
}

TEST_CASE("population DQC: distilled values are monotone in kappa_d") {
    const ChainFork cf = make_chainfork();
    std::optional<AgentState> prev;
    for (double kd : {0.5, 0.7, 0.9, 0.99}) {
        AgentConfig cfg = population_cfg(Variant::DQC, 4, 1);
        cfg.kappa_d = kd;
        RunResult r = run_variant(cf.mdp, cf.data, cfg, 100000);
        REQUIRE(r.report.converged);
        if (prev) {
            for (size_t s = 0; s < r.state.q_partial.q.size(); ++s)
                for (const auto& [c, x] : r.state.q_partial.q[s]) CHECK(x >= prev->q_partial.q[s].at(c) - 1e-9);
            for (size_t s = 0; s < r.state.v.v.size(); ++s) CHECK(r.state.v.v[s] >= prev->v.v[s] - 1e-9);
        }
        prev = std::move(r.state);
    }
}

TEST_CASE("target_rate = 1 makes every target equal its live table after an update") {
    const ChainFork cf = make_chainfork();
    const AgentConfig cfg = population_cfg(Variant::DQC, 4, 2);
    const PopulationModel pop = build_population(cf.mdp, cf.data, cfg);
    AgentState st = init_agent(cf.mdp.num_states, 2, pop.lay, pop);
    for (int i = 0; i < 3; ++i) {
        agent_update(st, cf.mdp, pop, cfg);
        CHECK(table_diff(st.q_chunk, st.q_chunk_bar) == 0.0);
        CHECK(table_diff(st.q_partial, st.q_partial_bar) == 0.0);
        for (int s : pop.supported) CHECK(st.v.at(s) == st.v_bar.at(s));
    }
}

TEST_CASE("degenerate settings reproduce the simpler variants") {
    const ChainFork cf = make_chainfork();
    for (double lam : {1.0, 0.05}) {
        AgentConfig dqc = population_cfg(Variant::DQC, 4, 4);
        dqc.kappa_d = 0.5;
        dqc.target_rate = lam;
        AgentConfig qc = dqc;
        qc.variant = Variant::QC;
        // Distillation reads the target table, so the two agree at the fixed point rather than per iterate.
        const RunResult a = run_variant(cf.mdp, cf.data, dqc, 1000000), b = run_variant(cf.mdp, cf.data, qc, 1000000);
        REQUIRE(a.report.converged);
        REQUIRE(b.report.converged);
        CHECK(table_diff(a.state.q_chunk, b.state.q_chunk) < 1e-9);
        CHECK(table_diff(a.state.q_partial, b.state.q_partial) < 1e-9);
        CHECK(a.report.eval_value == doctest::Approx(b.report.eval_value).epsilon(1e-12));
        CHECK(a.report.policy.choice == b.report.policy.choice);

        AgentConfig ns = population_cfg(Variant::NS, 1, 1);
        ns.n = 1;
        ns.target_rate = lam;
        AgentConfig os = ns;
        os.variant = Variant::OS;
        const RunResult c = run_variant(cf.mdp, cf.data, ns, 300), d = run_variant(cf.mdp, cf.data, os, 300);
        CHECK(table_diff(c.state.q_chunk, d.state.q_chunk) == 0.0);
        CHECK(c.report.eval_value == d.report.eval_value);
    }
}

TEST_CASE("one-step critic with kappa_b near 1 recovers the optimal policy under full coverage") {
    {
        const Mdp m = bandit({0.2, 0.9, 0.5});
        const DataDist d = single_source(BehaviorSource::markov({Dist{1.0 / 3, 1.0 / 3, 1.0 / 3}}), point_mass(1, 0));
        AgentConfig cfg = population_cfg(Variant::OS, 1, 1);
        cfg.kappa_b = 0.95;
        const RunResult r = run_variant(m, d, cfg, 100000);
        CHECK(r.report.policy.first_action(0) == 1);
        CHECK(r.report.eval_value == doctest::Approx(9.0).epsilon(1e-9));
    }
    for (unsigned seed = 0; seed < 5; ++seed) {
        const Mdp m = oracle::random_mdp(seed, 5, 3, 0.8);
        const DataDist d = single_source(BehaviorSource::markov(std::vector<Dist>(5, Dist{1.0 / 3, 1.0 / 3, 1.0 / 3})),
                                         Dist(5, 0.2));
        AgentConfig cfg = population_cfg(Variant::OS, 1, 1);
        cfg.kappa_b = 0.95;
        const RunResult r = run_variant(m, d, cfg, 100000);
        const OptimalSolution opt = solve_optimal(m);
        CHECK(r.report.eval_value == doctest::Approx(opt.v.at(0)).epsilon(1e-8));
        CHECK(oracle::max_abs_diff(r.state.v.v, opt.v.v) < 1e-8);
    }
}

TEST_CASE("extract_action: point mass behavior and best-of-N agreement frequency") {
    const ChainFork cf = make_chainfork();
    AgentConfig cfg = population_cfg(Variant::DQC, 4, 1);
    const RunResult r = run_variant(cf.mdp, cf.data, cfg, 100000);
    const int s2 = 2;
    const ChunkCode best = extract_action_exact(r.state, s2);
    const double p_best = r.state.behavior.dist[s2].at(best);
    REQUIRE(p_best < 1.0);

    AgentState point = r.state;
    point.behavior.dist[s2] = {{1 - best, 1.0}};
    cfg.N = 1;
    Rng rng(5);
    for (int i = 0; i < 50; ++i) CHECK(extract_action(point, s2, cfg, rng) == 1 - best);

    for (int N : {1, 2, 4}) {
        cfg.N = N;
        const int draws = 20000;
        int hits = 0;
        for (int i = 0; i < draws; ++i) hits += extract_action(r.state, s2, cfg, rng) == best;
        const double expect = 1.0 - std::pow(1.0 - p_best, N);
        const double se = std::sqrt(expect * (1 - expect) / draws);
        CHECK(std::abs(hits / static_cast<double>(draws) - expect) <= 4.0 * se + 1e-12);
    }
    cfg.N = 64;
    for (int i = 0; i < 20; ++i) CHECK(extract_action(r.state, s2, cfg, rng) == best);
    AgentState empty = r.state;
    empty.behavior.seen[s2] = 0;
    CHECK_THROWS_AS(extract_action(empty, s2, cfg, rng), SupportError);
}

TEST_CASE("sampled training is deterministic for a fixed seed") {
    const ChainFork cf = make_chainfork();
    AgentConfig cfg = population_cfg(Variant::DQC, 4, 1);
    cfg.mode = TrainMode::sampled;
    cfg.dataset_size = 3000;
    cfg.target_rate = 0.05;
    cfg.seed = 17;
    cfg.eval_every = 50;
    const RunResult a = run_variant(cf.mdp, cf.data, cfg, 200), b = run_variant(cf.mdp, cf.data, cfg, 200);
    REQUIRE(a.report.curve.size() == b.report.curve.size());
    for (size_t i = 0; i < a.report.curve.size(); ++i) {
        CHECK(a.report.curve[i].residual == b.report.curve[i].residual);
        CHECK(a.report.curve[i].eval_value == b.report.curve[i].eval_value);
    }
    CHECK(table_diff(a.state.q_chunk, b.state.q_chunk) == 0.0);
    CHECK(a.state.v.v == b.state.v.v);
    CHECK(a.report.curve[49].eval_value.has_value());
    CHECK_FALSE(a.report.curve[48].eval_value.has_value());

    cfg.seed = 18;
    const RunResult c = run_variant(cf.mdp, cf.data, cfg, 200);
    CHECK(c.state.v.v != a.state.v.v);
}

TEST_CASE("agent config validation") {
    AgentConfig c;
    CHECK_NOTHROW(c.validate());
    c.h_a = 5;
    CHECK_THROWS_AS(c.validate(), ConstraintError);
    c = AgentConfig{};
    c.variant = Variant::QC;
    CHECK_THROWS_AS(c.validate(), ConstraintError);
    c = AgentConfig{};
    c.kappa_b = 1.0;
    CHECK_THROWS_AS(c.validate(), ConstraintError);
    CHECK(parse_variant("QC_NS") == Variant::QC_NS);
    CHECK_THROWS_AS(parse_variant("SAC"), Error);
}
