#pragma once

#include <cstdint>
#include <vector>

#include "aclab/chunk_dist.hpp"

namespace aclab {

// Deterministic per-index seed derivation (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct InstanceOptions {
    int s_min = 3, s_max = 6;
    int a_min = 2, a_max = 3;
    int h_min = 2, h_max = 4;
    std::vector<double> gammas{0.8, 0.9, 0.95};
    int components = 2;  // random phase-cycled behavior sources in the mixture
};

struct RandomInstance {
    std::uint64_t seed = 0;
    Mdp mdp;
    int h = 2;
    DataDist data;  // uniform mu, so every state is supported
};

Dist dirichlet_ones(int n, Rng& rng);

// Rows from a symmetric Dirichlet(1), rewards uniform on [0,1], uniform init.
Mdp random_mdp(int S, int A, double gamma, Rng& rng);
// T = (1 - eps) delta_f + eps T~ with f uniform and T~ rows Dirichlet(1).
Mdp random_eps_det_mdp(int S, int A, double gamma, double eps, Rng& rng);
BehaviorSource random_phase_cycled(int S, int A, int phases, Rng& rng);
// Chunk table without overrides (open-loop behavior): `per_state` distinct chunks per state.
BehaviorSource random_open_loop_table(int S, int A, int h, int per_state, Rng& rng);

RandomInstance random_instance(std::uint64_t seed, const InstanceOptions& opt = {});
RandomInstance random_eps_det_instance(std::uint64_t seed, double eps, int h, const InstanceOptions& opt = {});

// Deterministic behavior that follows `policy` at every state.
BehaviorSource policy_source(const std::vector<int>& policy, int num_actions);
// Adds `d_star` with weight beta and rescales the existing components by 1 - beta.
DataDist mix_in(const DataDist& data, const BehaviorSource& d_star, double beta);

}  // namespace aclab
