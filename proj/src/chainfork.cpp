#include "aclab/chainfork.hpp"

namespace aclab {

ChainFork make_chainfork() {
    enum { S0, S1, S2, P1, P2, R, G, T, S };
    constexpr int A = 2;
    ChainFork cf;
    cf.state_names = {"S0", "S1", "S2", "P1", "P2", "R", "G", "T"};
    cf.start_state = S0;

    Mdp m(S, A, 0.99);
    m.set_transition(S0, 0, {{S0, 1.0}});
    m.set_transition(S0, 1, {{S1, 1.0}});
    m.set_transition(S1, 0, {{S0, 1.0}});
    m.set_transition(S1, 1, {{S2, 1.0}});
    m.set_transition(S2, 0, {{P1, 1.0}});
    m.set_transition(S2, 1, {{R, 1.0}});
    m.set_transition(P1, 0, {{S0, 1.0}});
    m.set_transition(P1, 1, {{P2, 1.0}});
    m.set_transition(P2, 0, {{S0, 1.0}});
    m.set_transition(P2, 1, {{G, 1.0}});
    m.set_all_actions(R, {{G, 0.5}, {T, 0.5}}, 0.0);
    m.set_all_actions(G, {{G, 1.0}}, 1.0);
    m.set_all_actions(T, {{T, 1.0}}, 0.0);
    m.init_dist = point_mass(S, S0);
    cf.mdp = m;

    auto act1 = [](double p) { return Dist{1.0 - p, p}; };
    std::vector<Dist> opt(S, act1(1.0));
    opt[S2] = act1(0.0);

    std::vector<std::vector<Dist>> noisy(2, std::vector<Dist>(S, act1(0.5)));
    noisy[0][S0] = noisy[0][S1] = act1(0.5);
    noisy[1][S0] = noisy[1][S1] = act1(0.4);
    noisy[0][S2] = noisy[1][S2] = act1(0.8);

    cf.data.components = {{0.25, BehaviorSource::markov(opt)}, {0.75, BehaviorSource::phase_cycled(noisy)}};
    cf.data.start_dist = Dist(S, 1.0 / static_cast<double>(S));
    return cf;
}

}  // namespace aclab
