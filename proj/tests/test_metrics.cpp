#include <doctest.h>

#include <cmath>
#include <functional>

#include "aclab/counterexamples.hpp"
#include "aclab/metrics.hpp"
#include "aclab/random_instances.hpp"
#include "aclab/solvers.hpp"
#include "oracles.hpp"

using namespace aclab;

namespace {

Mdp det_ring(int S, int A) {
    Mdp m(S, A, 0.9);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            m.set_transition(s, a, {{(s * 2 + a + 1) % S, 1.0}});
            m.r(s, a) = 0.1 * ((s + a) % 5);
        }
    return m;
}

double max_tv_for(const std::vector<TvTerm>& terms, int state, ChunkCode chunk) {
    double best = -1.0;
    for (const auto& t : terms)
        if (t.state == state && t.chunk && *t.chunk == chunk) best = std::max(best, t.tv);
    return best;
}

}  // namespace

TEST_CASE("tv_distance examples") {
    CHECK(tv_distance({0.2, 0.8}, {0.2, 0.8}) == 0.0);
    CHECK(tv_distance({1.0, 0.0}, {0.0, 1.0}) == 1.0);
    CHECK(tv_distance({0.5, 0.5}, {0.75, 0.25}) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(tv_distance({1.0}, {0.5, 0.5}), Error);
}

TEST_CASE("tv_distance is a metric on random triples") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Dist p = dirichlet_ones(5, rng), q = dirichlet_ones(5, rng), r = dirichlet_ones(5, rng);
        CHECK(tv_distance(p, q) == tv_distance(q, p));
        CHECK(tv_distance(p, p) < 1e-12);
        CHECK(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15);
        CHECK(tv_distance(p, q) >= 0.0);
        CHECK(tv_distance(p, q) <= 1.0);
    }
}

TEST_CASE("OLC on a deterministic MDP is zero for any data") {
    const Mdp m = det_ring(5, 3);
    Rng rng(3);
    for (int h = 1; h <= 4; ++h) {
        const DataDist d = single_source(random_phase_cycled(5, 3, h, rng), Dist(5, 0.2));
        CHECK(weak_olc(m, d, h) < 1e-12);
        CHECK(strong_olc(m, d, h) < 1e-12);
    }
}

TEST_CASE("value-bias generator: measured weak eps equals the target") {
    for (double gamma : {0.5, 0.9})
        for (double eps : {0.1, 0.3, 0.5}) {
            const GenOutput g = gen_value_bias(gamma, 2, eps);
            const ConsistencyReport r = olc_report(g.mdp, g.data.at("D"), 2);
            CHECK(r.weak_eps == doctest::Approx(eps).epsilon(1e-9));
            for (const auto& t : r.weak_terms) CHECK((t.tv >= 0.0 && t.tv <= r.weak_eps));
        }
}

TEST_CASE("eps-deterministic MDP (eps = 0.1, h = 3) has weak eps at most 0.57") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RandomInstance inst = random_eps_det_instance(seed, 0.1, 3);
        CHECK(eps_deterministic_eps(inst.mdp) <= 0.1 + 1e-12);
        CHECK(weak_olc(inst.mdp, inst.data, 3) <= 0.57 + 1e-12);
    }
}

TEST_CASE("strong worst case: per-chunk strong terms at X_0") {
    const double gamma = 0.9;
    for (int h : {2, 3, 4}) {
        const double eps = 0.25 * (1 - std::pow(gamma, h - 1));
        const double c1 = 0.2 * eps, c4 = 0.5 * eps;
        const GenOutput g = gen_strong_worstcase(gamma, h, eps, c1, 0.5 * eps * gamma, 0.25 * eps, c4);
        const int A = g.mdp.num_actions, X0 = g.state("X_0");
        const auto code = [&](int first, int second, int rest) {
            Chunk c(static_cast<size_t>(h), rest);
            c[0] = first;
            c[1] = second;
            return encode_chunk(c, A);
        };
        const ConsistencyReport top = olc_report(g.mdp, g.data.at("D_top"), h);
        const ConsistencyReport bottom = olc_report(g.mdp, g.data.at("D_bottom"), h);
        // a-bullet = (0,2,0,...): its step-1 term carries the full eps.
        double bullet1 = -1.0;
        for (const auto& t : top.strong_terms)
            if (t.state == X0 && t.chunk && *t.chunk == code(0, 2, 0) && t.hprime == 1) bullet1 = t.tv;
        CHECK(bullet1 == doctest::Approx(eps).epsilon(1e-9));
        CHECK(max_tv_for(top.strong_terms, X0, code(0, 0, 0)) == doctest::Approx(eps).epsilon(1e-9));
        // a-circle = (1,0,1,...): every term equals c4 < eps.
        int circle_terms = 0;
        for (const auto& t : bottom.strong_terms)
            if (t.state == X0 && t.chunk && *t.chunk == code(1, 0, 1)) {
                ++circle_terms;
                CHECK(t.tv == doctest::Approx(c4).epsilon(1e-9));
            }
        CHECK(circle_terms == h);
        CHECK(max_tv_for(bottom.strong_terms, X0, code(1, 1, 1)) == doctest::Approx(eps).epsilon(1e-9));
        CHECK(olc_report(g.mdp, g.data.at("D"), h).strong_eps == doctest::Approx(eps).epsilon(1e-9));
    }
}

TEST_CASE("data_suboptimality: optimal data has zero gap") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RandomInstance inst = random_instance(seed);
        const OptimalSolution opt = solve_optimal(inst.mdp);
        const DataDist d = single_source(policy_source(opt.policy, inst.mdp.num_actions), inst.data.start_dist);
        for (int n : {1, 2, 3}) {
            const SuboptimalityReport r = data_suboptimality(inst.mdp, build_data_model(inst.mdp, d, n), opt.q, opt.v.v);
            CHECK(std::abs(r.delta_tilde_n) < 1e-9);
            CHECK(std::abs(r.delta_n) < 1e-9);
        }
    }
}

TEST_CASE("data_suboptimality: delta_n <= delta_tilde_n and witnesses match the gaps") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RandomInstance inst = random_instance(seed);
        const OptimalSolution opt = solve_optimal(inst.mdp);
        const DataModel model = build_data_model(inst.mdp, inst.data, inst.h);
        const SuboptimalityReport r = data_suboptimality(inst.mdp, model, opt.q, opt.v.v);
        CHECK(r.delta_n <= r.delta_tilde_n);
        CHECK(r.min_witness.gap == r.delta_n);
        CHECK(r.max_witness.gap == r.delta_tilde_n);
        CHECK(r.delta_n >= -1e-9);  // Q* dominates every data return
    }
}

TEST_CASE("n-step worst case: measured delta-tilde equals delta-tilde/(1-gamma)") {
    for (double gamma : {0.8, 0.9, 0.95})
        for (int n : {2, 3, 4}) {
            const double dt = 0.5 * (gamma - std::pow(gamma, n));
            const GenOutput g = gen_nstep_worstcase(gamma, n, dt, 0.5 * dt / (1 - gamma));
            const OptimalSolution opt = solve_optimal(g.mdp);
            const SuboptimalityReport r = data_suboptimality(g.mdp, build_data_model(g.mdp, g.data.at("D"), n), opt.q, opt.v.v);
            CHECK(r.delta_tilde_n == doctest::Approx(dt / (1 - gamma)).epsilon(1e-9));
        }
}

TEST_CASE("optimality variability: zero for deterministic systems, targets on the castle/flower") {
    const Mdp m = det_ring(5, 2);
    const OptimalSolution opt = solve_optimal(m);
    DataDist d;
    d.start_dist = Dist(5, 0.2);
    d.components = {{0.5, BehaviorSource::deterministic({0, 1, 0, 1, 0}, 2)}, {0.5, BehaviorSource::deterministic({1, 1, 0, 0, 1}, 2)}};
    const VariabilityReport z = optimality_variability(m, d, build_data_model(m, d, 3), opt.v.v);
    CHECK(z.local_theta < 1e-12);
    CHECK(z.global_theta < 1e-12);

    for (double gamma : {0.8, 0.9, 0.95})
        for (int h : {2, 3, 4}) {
            const GenOutput g = generate("castle_flower", {{"gamma", gamma}, {"h", h}});
            const OptimalSolution o = solve_optimal(g.mdp);
            const VariabilityReport r = optimality_variability(g.mdp, g.data.at("D"), build_data_model(g.mdp, g.data.at("D"), h), o.v.v);
            CHECK(r.local_theta == doctest::Approx(g.expected.at("local_theta")).epsilon(1e-9));
            CHECK(r.global_theta == doctest::Approx(g.expected.at("global_theta")).epsilon(1e-9));
        }
}

TEST_CASE("stochastic shortcut theta") {
    Mdp loop(1, 2, 0.9);
    loop.set_all_actions(0, {{0, 1.0}}, 0.5);
    CHECK(std::abs(stochastic_shortcut_theta(loop, 3, solve_optimal(loop).v.v)) < 1e-9);

    // Exhaustive path check on random 4-state MDPs.
    for (unsigned seed = 0; seed < 20; ++seed) {
        const Mdp m = oracle::random_mdp(seed, 4, 2, 0.9);
        const auto vstar = solve_optimal(m).v.v;
        const int h = 2 + static_cast<int>(seed % 2);
        double best = -1e300;
        std::function<void(int, int, int, double)> walk = [&](int s0, int s, int k, double ret) {
            if (k == h) {
                best = std::max(best, ret + std::pow(m.gamma, h) * vstar[static_cast<size_t>(s)] - vstar[static_cast<size_t>(s0)]);
                return;
            }
            for (int a = 0; a < m.num_actions; ++a)
                for (int t = 0; t < m.num_states; ++t)
                    if (m.T(s, a)[static_cast<size_t>(t)] > kSupportEps) walk(s0, t, k + 1, ret + std::pow(m.gamma, k) * m.r(s, a));
        };
        for (int s0 = 0; s0 < 4; ++s0) walk(s0, s0, 0, 0.0);
        CHECK(stochastic_shortcut_theta(m, h, vstar) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("eps_deterministic examples") {
    CHECK(eps_deterministic_eps(det_ring(4, 2)) == 0.0);
    Mdp u(2, 1, 0.9);
    u.set_all_actions(0, {{0, 0.5}, {1, 0.5}}, 0.0);
    u.set_all_actions(1, {{0, 0.5}, {1, 0.5}}, 0.0);
    CHECK(eps_deterministic_eps(u) == doctest::Approx(0.5));
    CHECK(eps_deterministic(u).f == std::vector<int>{0, 0});
    Mdp r(3, 1, 0.9);
    r.set_all_actions(0, {{0, 0.9}, {1, 0.1}}, 0.0);
    r.set_all_actions(1, {{2, 0.8}, {1, 0.2}}, 0.0);
    r.set_all_actions(2, {{1, 0.95}, {0, 0.05}}, 0.0);
    CHECK(eps_deterministic_eps(r) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(eps_deterministic(r).f == std::vector<int>{0, 2, 1});
}

TEST_CASE("open_loop_mix_alpha") {
    const Mdp m = det_ring(4, 2);
    const Dist mu(4, 0.25);
    const DataDist star = single_source(BehaviorSource::deterministic({0, 0, 0, 0}, 2), mu);
    const DataDist other = single_source(BehaviorSource::deterministic({1, 1, 1, 1}, 2), mu);
    const std::vector<int> all{0, 1, 2, 3};
    CHECK(open_loop_mix_alpha(m, star, other, 0.5, 2, all) == 0.0);
    // Full overlap at beta = 1/2: alpha/(1-alpha) = 1.
    CHECK(open_loop_mix_alpha(m, star, star, 0.5, 2, all) == doctest::Approx(0.5).epsilon(1e-15));

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const RandomInstance inst = random_instance(seed);
        const OptimalSolution opt = solve_optimal(inst.mdp);
        const DataDist ds = single_source(policy_source(opt.policy, inst.mdp.num_actions), inst.data.start_dist);
        Rng rng(seed);
        const DataDist dc = single_source(random_open_loop_table(inst.mdp.num_states, inst.mdp.num_actions, inst.h, 3, rng),
                                          inst.data.start_dist);
        const double beta = 0.3 + 0.1 * static_cast<double>(seed % 5);
        std::vector<int> states(static_cast<size_t>(inst.mdp.num_states));
        for (int s = 0; s < inst.mdp.num_states; ++s) states[static_cast<size_t>(s)] = s;
        const double alpha = open_loop_mix_alpha(inst.mdp, ds, dc, beta, inst.h, states);
        double pmax = 0.0;
        for (int s : states) pmax = std::max(pmax, open_loop_overlap(inst.mdp, ds, dc, inst.h, s));
        if (pmax == 0.0) {
            CHECK(alpha == 0.0);
            continue;
        }
        CHECK(pmax == doctest::Approx(alpha * beta / ((1 - alpha) * (1 - beta))).epsilon(1e-12));
    }
}

TEST_CASE("serial and parallel OLC reports agree bit-for-bit") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const RandomInstance inst = random_instance(seed);
        const DataModel model = build_data_model(inst.mdp, inst.data, inst.h);
        const ConsistencyReport a = olc_report(inst.mdp, model, Exec::serial), b = olc_report(inst.mdp, model, Exec::parallel);
        CHECK(a.weak_eps == b.weak_eps);
        CHECK(a.strong_eps == b.strong_eps);
        CHECK(a.weak_terms.size() == b.weak_terms.size());
    }
}
