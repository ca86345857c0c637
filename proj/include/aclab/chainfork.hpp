#pragma once

#include <string>
#include <vector>

#include "aclab/chunk_dist.hpp"

namespace aclab {

// Eight-state corridor with a fork: a three-step safe path to the rewarding sink G
// and a two-step coin flip between G and the empty sink T.
// States: S0, S1, S2 (fork), P1, P2, R, G, T = 0..7; A = 2, gamma = 0.99.
// Data mixes an optimal behavior (weight 0.25) with a noisy two-phase behavior that
// prefers the risky branch at the fork.
struct ChainFork {
    Mdp mdp;
    DataDist data;
    std::vector<std::string> state_names;
    int start_state = 0;
};

ChainFork make_chainfork();

}  // namespace aclab
