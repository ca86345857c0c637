#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aclab {

// Probabilities strictly above this count as in-support everywhere.
inline constexpr double kSupportEps = 1e-12;
inline constexpr double kNormTol = 1e-9;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CapacityError : Error {
    using Error::Error;
};
struct SupportError : Error {
    using Error::Error;
};
struct ConstraintError : Error {
    using Error::Error;
};

// DiscreteDist: probabilities indexed by outcome.
using Dist = std::vector<double>;
using Chunk = std::vector<int>;
using ChunkCode = std::uint64_t;
using Rng = std::mt19937_64;

double dist_sum(const Dist& d);
bool dist_normalized(const Dist& d, double tol = kNormTol);
Dist point_mass(int n, int i);
std::vector<int> dist_support(const Dist& d);
// Inverse-CDF draw using the top 53 bits of one engine output.
int sample_index(const Dist& d, Rng& rng);
double uniform01(Rng& rng);

ChunkCode encode_chunk(const Chunk& c, int num_actions);
Chunk decode_chunk(ChunkCode code, int num_actions, int h);
std::uint64_t ipow(std::uint64_t base, int exp);

struct Mdp {
    int num_states = 0;
    int num_actions = 0;
    double gamma = 0.0;
    std::vector<Dist> transition;  // row index s * num_actions + a
    std::vector<double> reward;    // index s * num_actions + a
    Dist init_dist;

    Mdp() = default;
    Mdp(int S, int A, double g);

    const Dist& T(int s, int a) const { return transition[static_cast<size_t>(s) * num_actions + a]; }
    Dist& T(int s, int a) { return transition[static_cast<size_t>(s) * num_actions + a]; }
    double r(int s, int a) const { return reward[static_cast<size_t>(s) * num_actions + a]; }
    double& r(int s, int a) { return reward[static_cast<size_t>(s) * num_actions + a]; }
    void set_transition(int s, int a, std::initializer_list<std::pair<int, double>> next);
    void set_all_actions(int s, std::initializer_list<std::pair<int, double>> next, double rew);
    double vmax() const { return 1.0 / (1.0 - gamma); }
};

// Nonzero successors of each (s, a), built once per consumer.
struct SparseKernel {
    int num_actions = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;
    explicit SparseKernel(const Mdp& m);
    const std::vector<std::pair<int, double>>& next(int s, int a) const {
        return rows[static_cast<size_t>(s) * num_actions + a];
    }
};

struct Horizons {
    int h = 1;
    int h_a = 1;
    int n = 1;
    double gamma = 0.0;
    Horizons(int h_, int h_a_, int n_, double gamma_);
    double H() const { return 1.0 / (1.0 - gamma); }
    double Hbar() const;
    double Hbar_n() const;
};

struct ValidationIssue {
    std::string field;
    int state = -1;
    int action = -1;
    double value = 0.0;  // offending value or residual
    std::string message;
};

std::vector<ValidationIssue> validate_mdp(const Mdp& m);
void require_valid(const Mdp& m);

// T(s_{t+h'} | s_t, a_{t:t+h'}) for h' = prefix.size().
Dist open_loop_state_dist(const Mdp& m, int s0, const Chunk& prefix);
Dist step_dist(const Mdp& m, const Dist& d, int action);

// Sum_{k<h} gamma^k r(path[k], chunk[k]); path holds h or h+1 states.
double chunk_return(const Mdp& m, const std::vector<int>& path, const Chunk& chunk);

struct Trajectory {
    std::vector<int> states;   // length steps + 1
    std::vector<int> actions;  // length steps
    std::vector<double> rewards;
    double discounted_return = 0.0;
};

// A rollout policy sees the trajectory so far and returns the next action.
using RolloutPolicy = std::function<int(const Trajectory&, Rng&)>;

Trajectory sample_rollout(const Mdp& m, int s0, const RolloutPolicy& policy, int steps, std::uint64_t seed);

RolloutPolicy markov_rollout_policy(std::vector<Dist> policy);
RolloutPolicy deterministic_rollout_policy(std::vector<int> actions);
// Executes the chunk chosen at each chunk boundary open loop.
RolloutPolicy chunk_openloop_rollout_policy(std::vector<std::int64_t> choice, int num_actions, int h);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int rollouts = 0;
};
// Mean discounted return over independent seeded rollouts truncated where gamma^steps < trunc_tol.
McEstimate monte_carlo_value(const Mdp& m, int s0, const RolloutPolicy& policy, int rollouts,
                             std::uint64_t seed, double trunc_tol = 1e-10);

}  // namespace aclab
