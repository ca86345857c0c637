#pragma once

#include <functional>
#include <map>
#include <vector>

#include "aclab/chunk_dist.hpp"

namespace aclab {

// Entries within this of the max are reported as ties; the smallest code wins.
inline constexpr double kTieTol = 1e-10;

struct SolveOptions {
    double tolerance = 1e-12;
    long max_iters = 1'000'000;
    double init_value = 0.0;
};

struct SolveReport {
    long iterations = 0;
    double residual = 0.0;
    std::vector<double> history;
};

struct ValueTable {
    std::vector<double> v;
    std::vector<char> defined;
    SolveReport report;

    double at(int s) const;
};

struct AcPolicy {
    int h = 1;
    int num_actions = 0;
    std::vector<std::int64_t> choice;           // -1 where undefined
    std::vector<std::vector<ChunkCode>> ties;   // full argmax set per state

    bool defined(int s) const { return choice.at(static_cast<size_t>(s)) >= 0; }
    Chunk chunk(int s) const;
    int first_action(int s) const;
};

struct ChunkQTable {
    int h = 1;
    int num_actions = 0;
    std::vector<std::map<ChunkCode, double>> q;  // per state, only where defined
    SolveReport report;

    double at(int s, ChunkCode c) const;
};

struct OptimalSolution {
    std::vector<double> q;  // s * A + a
    ValueTable v;
    std::vector<int> policy;
    std::vector<std::vector<int>> ties;
};

struct ChunkSolution {
    ChunkQTable q;
    AcPolicy policy;
    ValueTable v;
};

struct NStepSolution {
    int n = 1;
    std::vector<double> q;       // s * A + a
    std::vector<char> q_defined;
    AcPolicy policy;             // length-1 chunks
    ValueTable v;
};

// Contraction driver shared by every solver: x <- op(x) on the masked entries.
SolveReport fixed_point(const std::function<void(const std::vector<double>&, std::vector<double>&)>& op,
                        std::vector<double>& x, const std::vector<char>& mask, const SolveOptions& opt);

double sup_residual(const std::vector<double>& a, const std::vector<double>& b, const std::vector<char>& mask);

// Operators, exposed for independent residual checks. `out` must already hold num_states
// entries; the data backups write only the supported ones.
void optimal_backup(const Mdp& m, const std::vector<double>& v, std::vector<double>& out);
void behavior_backup(const Mdp& m, const DataModel& model, const std::vector<double>& v, std::vector<double>& out);
void chunk_opt_backup(const Mdp& m, const DataModel& model, const std::vector<double>& v, std::vector<double>& out);
void nstep_backup(const Mdp& m, const DataModel& model_n, const std::vector<double>& v, std::vector<double>& out);

OptimalSolution solve_optimal(const Mdp& m, const SolveOptions& opt = {});
ValueTable behavior_chunk_value(const Mdp& m, const DataModel& model, const SolveOptions& opt = {});
ChunkSolution chunk_q_optimality(const Mdp& m, const DataModel& model, const SolveOptions& opt = {});
NStepSolution nstep_uncorrected_q(const Mdp& m, const DataModel& model_n, const SolveOptions& opt = {});

// Open-loop law of one chunk from one state.
ChunkOutcome open_loop_outcome(const Mdp& m, int s, const Chunk& c);
ChunkSolution solve_optimal_ac(const Mdp& m, int h, const SolveOptions& opt = {});

// Values over the closure of `starts` under the policy's own execution; every
// reached state must have the policy defined. Empty starts = every defined state.
ValueTable eval_ac_policy_openloop(const Mdp& m, const AcPolicy& pol, std::vector<int> starts = {},
                                   const SolveOptions& opt = {});
// True value of cloning P_D(chunk | s) and executing chunks open loop.
ValueTable eval_behavior_chunk_policy(const Mdp& m, const DataModel& model, std::vector<int> starts = {},
                                      const SolveOptions& opt = {});

struct ClosedLoopResult {
    std::vector<int> policy;  // first action of each defined chunk, -1 elsewhere
    ValueTable v;
};
ClosedLoopResult eval_closedloop_first(const Mdp& m, const AcPolicy& pol, std::vector<int> starts = {},
                                       const SolveOptions& opt = {});

// Stochastic Markov policy (empty row = undefined).
ValueTable eval_markov_policy(const Mdp& m, const std::vector<Dist>& pol, std::vector<int> starts = {},
                              const SolveOptions& opt = {});
ValueTable eval_deterministic_policy(const Mdp& m, const std::vector<int>& pol, std::vector<int> starts = {},
                                     const SolveOptions& opt = {});

enum class StatKind { expectile, quantile };
struct WeightedValue {
    double value;
    double weight;
};
double implicit_stat(const std::vector<WeightedValue>& dist, StatKind kind, double kappa);

// Largest ratio of successive residuals over the last `window` iterations.
double observed_contraction(const SolveReport& rep, int window = 10);

}  // namespace aclab
