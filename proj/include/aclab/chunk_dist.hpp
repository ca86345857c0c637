#pragma once

#include <map>
#include <optional>
#include <vector>

#include "aclab/mdp.hpp"

namespace aclab {

inline constexpr std::size_t kDefaultEnumCap = 10'000'000;

// Within-chunk override: once the executed prefix equals `prefix` and the
// current state is `state`, the next action is drawn from `actions`.
struct ActionOverride {
    Chunk prefix;
    int state = 0;
    Dist actions;
};

struct ChunkTableEntry {
    Chunk chunk;
    double prob = 0.0;
    std::vector<ActionOverride> overrides;
};

struct BehaviorSource {
    enum class Kind { phase_cycled_markov, chunk_table };
    Kind kind = Kind::phase_cycled_markov;
    // phase_cycled_markov: [phase][state] -> action distribution (empty = undefined).
    std::vector<std::vector<Dist>> phase_policy;
    // chunk_table: [state] -> entries; a new chunk is drawn every chunk-length steps.
    std::vector<std::vector<ChunkTableEntry>> table;

    int cycle_length() const;

    static BehaviorSource markov(std::vector<Dist> policy);
    static BehaviorSource deterministic(const std::vector<int>& actions, int num_actions);
    static BehaviorSource phase_cycled(std::vector<std::vector<Dist>> per_phase);
    static BehaviorSource chunks(std::vector<std::vector<ChunkTableEntry>> table);
};

struct DataComponent {
    double weight = 1.0;
    BehaviorSource source;
};

struct DataDist {
    std::vector<DataComponent> components;
    Dist start_dist;  // mu

    void validate(int num_states, int num_actions) const;
};

DataDist single_source(BehaviorSource src, Dist start_dist);

struct ChunkEntry {
    double prob = 0.0;                          // P(a_{t:t+h} | s_t)
    std::map<std::vector<int>, double> paths;   // s_{t+1..t+h} -> P(path | s_t, chunk)
};

struct TrajChunkDist {
    int start_state = 0;
    int horizon = 0;
    int num_states = 0;
    int num_actions = 0;
    std::map<ChunkCode, ChunkEntry> entries;

    Chunk chunk(ChunkCode code) const { return decode_chunk(code, num_actions, horizon); }
    const ChunkEntry& at(ChunkCode code) const;
    std::size_t pair_count() const;
};

struct BuildOptions {
    std::size_t enum_cap = kDefaultEnumCap;
};

// Exact P_D(. | s_t) for the mixture, every component starting at phase 0 at s0.
TrajChunkDist build_traj_dist(const Mdp& m, const DataDist& data, int s0, int h, const BuildOptions& opt = {});
TrajChunkDist build_component_traj_dist(const Mdp& m, const BehaviorSource& src, int s0, int h,
                                        const BuildOptions& opt = {});

// Same chunk marginal, paths replaced by open-loop dynamics.
TrajChunkDist open_loop_replay_dist(const Mdp& m, const TrajChunkDist& d);

// k in 1..h-1: joint of (s_{t+k}, a_{t+k}); index s * A + a.
Dist marginal_state_action_at(const TrajChunkDist& d, int k);
// k in 1..h: marginal of s_{t+k}.
Dist marginal_state_at(const TrajChunkDist& d, int k);
Dist conditional_state_at(const TrajChunkDist& d, ChunkCode chunk, int k);
Dist conditional_state_at(const TrajChunkDist& d, const Chunk& chunk, int k);

std::vector<ChunkCode> support_chunks(const TrajChunkDist& d);
std::vector<ChunkCode> support_prefixes(const TrajChunkDist& d, int k);
// P(a_{t:t+k} | s_t) keyed by prefix code.
std::map<ChunkCode, double> prefix_marginal(const TrajChunkDist& d, int k);

// Solver-facing summary of one chunk: expected chunk return and the law of s_{t+h}.
struct ChunkOutcome {
    ChunkCode code = 0;
    double prob = 0.0;
    double mean_return = 0.0;
    std::vector<std::pair<int, double>> next;
};
std::vector<ChunkOutcome> summarize(const Mdp& m, const TrajChunkDist& d);

enum class Exec { serial, parallel };

// Per-state distributions over the closure of supp(mu) under h-step data transitions.
struct DataModel {
    int h = 0;
    std::vector<int> supported;                       // sorted
    std::vector<std::optional<TrajChunkDist>> dists;  // indexed by state
    std::vector<std::vector<ChunkOutcome>> outcomes;  // indexed by state

    bool is_supported(int s) const { return s >= 0 && static_cast<size_t>(s) < dists.size() && dists[static_cast<size_t>(s)].has_value(); }
    const TrajChunkDist& dist(int s) const;
};

DataModel build_data_model(const Mdp& m, const DataDist& data, int h, Exec exec = Exec::parallel,
                           const BuildOptions& opt = {});
// Variant whose closure starts from explicit states rather than supp(mu).
DataModel build_data_model_from(const Mdp& m, const DataDist& data, int h, const std::vector<int>& roots,
                                Exec exec = Exec::parallel, const BuildOptions& opt = {});

}  // namespace aclab
