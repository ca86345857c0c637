#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aclab/solvers.hpp"

namespace aclab {

enum class Variant { DQC, QC, NS, OS, QC_NS, DQC_NAIVE };
enum class TrainMode { population, sampled };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct AgentConfig {
    int h = 4;                 // critic chunk length
    int h_a = 1;               // policy chunk length
    int n = 4;                 // n-step length for NS / QC_NS
    double kappa_b = 0.9;      // quantile level of the value backup
    double kappa_d = 0.8;      // expectile level of the distillation
    int N = 32;                // best-of-N samples
    double target_rate = 5e-3; // lambda
    double learn_rate = 0.1;   // sampled mode step size
    int batch_size = 64;
    Variant variant = Variant::DQC;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::population;
    int dataset_size = 100'000;  // sampled mode
    double tolerance = 1e-12;    // population mode stops once a full update moves no entry more than this
    int eval_state = 0;
    int mc_rollouts = 0;
    bool best_of_n_eval = false;  // extract with sampling instead of the exact argmax
    long eval_every = 0;          // evaluate the extracted policy every this many updates (0 = only at the end)

    void validate() const;
};

// How a variant maps onto the shared tabular machinery.
struct VariantLayout {
    int target_len = 1;  // reward steps before bootstrapping
    int key_len = 1;     // critic key length (Q_phi)
    int policy_len = 1;  // extraction key length (Q^P_psi and behavior prefixes)
    int exec_len = 1;    // actions executed before re-planning
    bool distill = false;
};
VariantLayout layout_of(const AgentConfig& cfg);

// Count-based or exact conditional law of length-`len` action prefixes per state.
struct BehaviorEstimate {
    int len = 1;
    std::vector<std::map<ChunkCode, double>> dist;
    std::vector<char> seen;

    bool defined(int s) const { return s >= 0 && static_cast<size_t>(s) < seen.size() && seen[static_cast<size_t>(s)]; }
};

struct Transition {
    int state = 0;
    Chunk actions;
    double ret = 0.0;  // discounted reward over the chunk
    int next = 0;
};
using Dataset = std::vector<Transition>;

// States uniform over the model's supported set, then (chunk, path) from P_D(. | s).
Dataset sample_dataset(const Mdp& m, const DataModel& model, int count, std::uint64_t seed);
BehaviorEstimate estimate_behavior(const Dataset& data, int num_states, int num_actions, int len);
BehaviorEstimate exact_behavior(const DataModel& model, int len);

struct AgentState {
    ChunkQTable q_chunk, q_partial;
    ValueTable v;
    ChunkQTable q_chunk_bar, q_partial_bar;
    ValueTable v_bar;
    BehaviorEstimate behavior;
    long updates = 0;
};

// Exact per-state summary of the data at the variant's target horizon, keyed by critic key.
struct PopulationModel {
    struct Key {
        ChunkCode code = 0;
        ChunkCode prefix = 0;  // policy-length prefix
        double prob = 0.0;
        double mean_return = 0.0;
        std::vector<std::pair<int, double>> next;
    };
    int num_actions = 0;
    VariantLayout lay;
    std::vector<int> supported;
    std::vector<std::vector<Key>> keys;  // per state
    BehaviorEstimate behavior;
};
PopulationModel build_population(const Mdp& m, const DataDist& data, const AgentConfig& cfg);

AgentState init_agent(int num_states, int num_actions, const VariantLayout& lay, const PopulationModel& pop);
AgentState init_agent(int num_states, int num_actions, const VariantLayout& lay, const Dataset& data);

// One expected update in the order Q_phi -> Q^P_psi -> V_xi, then target smoothing.
// Returns the largest change of any live or target entry.
double agent_update(AgentState& st, const Mdp& m, const PopulationModel& pop, const AgentConfig& cfg);
double agent_update(AgentState& st, const Mdp& m, const Dataset& batch, const AgentConfig& cfg);

ChunkCode extract_action(const AgentState& st, int s, const AgentConfig& cfg, Rng& rng);
ChunkCode extract_action_exact(const AgentState& st, int s);

struct CurvePoint {
    long iter = 0;
    double residual = 0.0;
    std::optional<double> eval_value;  // set on evaluation iterations
};

struct RunReport {
    AcPolicy policy;       // executed chunks (length exec_len)
    ValueTable value;      // exact value of executing `policy`
    double eval_value = 0.0;
    McEstimate mc;
    std::vector<CurvePoint> curve;
    long iterations = 0;
    bool converged = false;
};

struct RunResult {
    AgentState state;
    RunReport report;
};

RunResult run_variant(const Mdp& m, const DataDist& data, const AgentConfig& cfg, long iters);

}  // namespace aclab
