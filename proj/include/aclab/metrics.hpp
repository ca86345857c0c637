#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aclab/chunk_dist.hpp"

namespace aclab {

double tv_distance(const Dist& p, const Dist& q);

struct TvTerm {
    int state = 0;
    int hprime = 0;
    std::optional<ChunkCode> chunk;
    double tv = 0.0;
};

struct ConsistencyReport {
    double weak_eps = 0.0;
    double strong_eps = 0.0;
    std::vector<TvTerm> weak_terms;
    std::vector<TvTerm> strong_terms;
    std::vector<int> states;
};

// Both OLC families over every supported start state of the model.
ConsistencyReport olc_report(const Mdp& m, const DataModel& model, Exec exec = Exec::parallel);
ConsistencyReport olc_report(const Mdp& m, const DataDist& data, int h, Exec exec = Exec::parallel);
double weak_olc(const Mdp& m, const DataDist& data, int h);
double strong_olc(const Mdp& m, const DataDist& data, int h);
// Terms for a single start state.
void olc_terms_at(const Mdp& m, const TrajChunkDist& d, std::vector<TvTerm>& weak, std::vector<TvTerm>& strong);

struct SuboptWitness {
    int state = 0;
    int action = 0;
    double gap = 0.0;
};

struct SuboptimalityReport {
    double delta_n = 0.0;
    double delta_tilde_n = 0.0;
    SuboptWitness min_witness;
    SuboptWitness max_witness;
    std::vector<SuboptWitness> terms;
};

// qstar is indexed s * A + a. The model must have horizon n.
SuboptimalityReport data_suboptimality(const Mdp& m, const DataModel& model_n, const std::vector<double>& qstar,
                                       const std::vector<double>& vstar);

struct VariabilityWitness {
    int component = -1;  // -1 for the whole mixture
    int state = 0;
    ChunkCode key = 0;   // first action (local) or chunk code (global)
    double spread = 0.0;
};

struct VariabilityReport {
    double local_theta = 0.0;
    double global_theta = 0.0;
    double shortcut_theta = 0.0;
    VariabilityWitness local_witness;
    VariabilityWitness global_witness;
};

// Spread of R_{t:t+h} + gamma^h V*(s_{t+h}) over the data support, per component
// conditioned on (s, a) and over the mixture conditioned on (s, chunk).
VariabilityReport optimality_variability(const Mdp& m, const DataDist& data, const DataModel& model,
                                         const std::vector<double>& vstar);

// max over positive-probability h-paths of V*(s_{t+h}) + R_{t:t+h} - V*(s_t).
double stochastic_shortcut_theta(const Mdp& m, int h, const std::vector<double>& vstar);

struct EpsDeterministic {
    double eps = 0.0;
    std::vector<int> f;  // argmax next state per (s, a), lowest index on ties
};
EpsDeterministic eps_deterministic(const Mdp& m);
double eps_deterministic_eps(const Mdp& m);

// Smallest alpha with P_{D°}[chunk in supp(D*) | s] <= alpha beta / ((1-alpha)(1-beta)) on all states.
double open_loop_mix_alpha(const Mdp& m, const DataDist& dstar, const DataDist& dcirc, double beta, int h,
                           const std::vector<int>& states);
// Per-state overlap probability used by the alpha computation.
double open_loop_overlap(const Mdp& m, const DataDist& dstar, const DataDist& dcirc, int h, int s);

}  // namespace aclab
