#include "aclab/mdp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace aclab {

double dist_sum(const Dist& d) { return std::accumulate(d.begin(), d.end(), 0.0); }

bool dist_normalized(const Dist& d, double tol) {
    for (double p : d)
        if (!(p >= 0.0)) return false;
    return std::abs(dist_sum(d) - 1.0) <= tol;
}

Dist point_mass(int n, int i) {
    Dist d(static_cast<size_t>(n), 0.0);
    d.at(static_cast<size_t>(i)) = 1.0;
    return d;
}

std::vector<int> dist_support(const Dist& d) {
    std::vector<int> out;
    for (size_t i = 0; i < d.size(); ++i)
        if (d[i] > kSupportEps) out.push_back(static_cast<int>(i));
    return out;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int sample_index(const Dist& d, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int last = -1;
    for (size_t i = 0; i < d.size(); ++i) {
        if (d[i] <= 0.0) continue;
        acc += d[i];
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    if (last < 0) throw Error("sample_index: empty distribution");
    return last;
}

std::uint64_t ipow(std::uint64_t base, int exp) {
    std::uint64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

ChunkCode encode_chunk(const Chunk& c, int num_actions) {
    ChunkCode code = 0;
    for (int a : c) {
        if (a < 0 || a >= num_actions) throw Error("encode_chunk: action index out of range");
        code = code * static_cast<ChunkCode>(num_actions) + static_cast<ChunkCode>(a);
    }
    return code;
}

Chunk decode_chunk(ChunkCode code, int num_actions, int h) {
    Chunk c(static_cast<size_t>(h));
    for (int k = h - 1; k >= 0; --k) {
        c[static_cast<size_t>(k)] = static_cast<int>(code % static_cast<ChunkCode>(num_actions));
        code /= static_cast<ChunkCode>(num_actions);
    }
    return c;
}

Mdp::Mdp(int S, int A, double g)
    : num_states(S),
      num_actions(A),
      gamma(g),
      transition(static_cast<size_t>(S) * A, Dist(static_cast<size_t>(S), 0.0)),
      reward(static_cast<size_t>(S) * A, 0.0),
      init_dist(static_cast<size_t>(S), S > 0 ? 1.0 / S : 0.0) {}

void Mdp::set_transition(int s, int a, std::initializer_list<std::pair<int, double>> next) {
    Dist& row = T(s, a);
    std::fill(row.begin(), row.end(), 0.0);
    for (auto [sp, p] : next) row.at(static_cast<size_t>(sp)) += p;
}

void Mdp::set_all_actions(int s, std::initializer_list<std::pair<int, double>> next, double rew) {
    for (int a = 0; a < num_actions; ++a) {
        set_transition(s, a, next);
        r(s, a) = rew;
    }
}

SparseKernel::SparseKernel(const Mdp& m) : num_actions(m.num_actions), rows(m.transition.size()) {
    for (size_t i = 0; i < m.transition.size(); ++i)
        for (size_t sp = 0; sp < m.transition[i].size(); ++sp)
            if (m.transition[i][sp] > kSupportEps) rows[i].emplace_back(static_cast<int>(sp), m.transition[i][sp]);
}

Horizons::Horizons(int h_, int h_a_, int n_, double gamma_) : h(h_), h_a(h_a_), n(n_), gamma(gamma_) {
    if (h < 1 || h_a < 1 || h_a > h) throw Error("Horizons: require 1 <= h_a <= h");
    if (n < 1) throw Error("Horizons: require n >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("Horizons: require 0 <= gamma < 1");
}
double Horizons::Hbar() const { return 1.0 / (1.0 - std::pow(gamma, h)); }
double Horizons::Hbar_n() const { return 1.0 / (1.0 - std::pow(gamma, n)); }

std::vector<ValidationIssue> validate_mdp(const Mdp& m) {
    std::vector<ValidationIssue> out;
    if (m.num_states <= 0 || m.num_actions <= 0) {
        out.push_back({"shape", -1, -1, 0.0, "num_states and num_actions must be positive"});
        return out;
    }
    const size_t rows = static_cast<size_t>(m.num_states) * m.num_actions;
    if (m.transition.size() != rows || m.reward.size() != rows) {
        out.push_back({"shape", -1, -1, 0.0, "transition/reward tables do not match num_states x num_actions"});
        return out;
    }
    if (!(m.gamma >= 0.0 && m.gamma < 1.0)) out.push_back({"gamma", -1, -1, m.gamma, "gamma must lie in [0,1)"});
    for (int s = 0; s < m.num_states; ++s) {
        for (int a = 0; a < m.num_actions; ++a) {
            const Dist& row = m.T(s, a);
            if (row.size() != static_cast<size_t>(m.num_states)) {
                out.push_back({"transition", s, a, 0.0, "row length differs from num_states"});
                continue;
            }
            for (double p : row)
                if (!(p >= 0.0)) out.push_back({"transition", s, a, p, "negative or NaN probability"});
            const double resid = 1.0 - dist_sum(row);
            if (std::abs(resid) > kNormTol) out.push_back({"transition", s, a, resid, "row does not sum to 1"});
            const double rw = m.r(s, a);
            if (!(rw >= 0.0 && rw <= 1.0)) out.push_back({"reward", s, a, rw, "reward outside [0,1]"});
        }
    }
    if (m.init_dist.size() != static_cast<size_t>(m.num_states)) {
        out.push_back({"init_dist", -1, -1, 0.0, "length differs from num_states"});
    } else if (!dist_normalized(m.init_dist)) {
        out.push_back({"init_dist", -1, -1, 1.0 - dist_sum(m.init_dist), "init_dist does not sum to 1"});
    }
    return out;
}

void require_valid(const Mdp& m) {
    auto issues = validate_mdp(m);
    if (issues.empty()) return;
    std::ostringstream os;
    os << "invalid MDP:";
    for (const auto& i : issues) os << " [" << i.field << " s=" << i.state << " a=" << i.action << ": " << i.message << " (" << i.value << ")]";
    throw Error(os.str());
}

Dist step_dist(const Mdp& m, const Dist& d, int action) {
    if (action < 0 || action >= m.num_actions) throw Error("open-loop step: action index out of range");
    Dist out(static_cast<size_t>(m.num_states), 0.0);
    for (int s = 0; s < m.num_states; ++s) {
        const double p = d[static_cast<size_t>(s)];
        if (p == 0.0) continue;
        const Dist& row = m.T(s, action);
        for (int sp = 0; sp < m.num_states; ++sp) out[static_cast<size_t>(sp)] += p * row[static_cast<size_t>(sp)];
    }
    return out;
}

Dist open_loop_state_dist(const Mdp& m, int s0, const Chunk& prefix) {
    if (s0 < 0 || s0 >= m.num_states) throw Error("open_loop_state_dist: state out of range");
    Dist d = point_mass(m.num_states, s0);
    for (int a : prefix) d = step_dist(m, d, a);
    return d;
}

double chunk_return(const Mdp& m, const std::vector<int>& path, const Chunk& chunk) {
    if (path.size() != chunk.size() && path.size() != chunk.size() + 1)
        throw Error("chunk_return: path must hold h or h+1 states for a length-h chunk");
    double g = 1.0, total = 0.0;
    for (size_t k = 0; k < chunk.size(); ++k) {
        total += g * m.r(path[k], chunk[k]);
        g *= m.gamma;
    }
    return total;
}

Trajectory sample_rollout(const Mdp& m, int s0, const RolloutPolicy& policy, int steps, std::uint64_t seed) {
    Rng rng(seed);
    Trajectory tr;
    tr.states.reserve(static_cast<size_t>(steps) + 1);
    tr.states.push_back(s0);
    double g = 1.0;
    for (int t = 0; t < steps; ++t) {
        const int s = tr.states.back();
        const int a = policy(tr, rng);
        if (a < 0 || a >= m.num_actions) throw Error("sample_rollout: policy undefined at reachable state " + std::to_string(s));
        const double rw = m.r(s, a);
        tr.actions.push_back(a);
        tr.rewards.push_back(rw);
        tr.discounted_return += g * rw;
        g *= m.gamma;
        tr.states.push_back(sample_index(m.T(s, a), rng));
    }
    return tr;
}

RolloutPolicy markov_rollout_policy(std::vector<Dist> policy) {
    return [pol = std::move(policy)](const Trajectory& tr, Rng& rng) {
        const Dist& d = pol.at(static_cast<size_t>(tr.states.back()));
        if (d.empty()) return -1;
        return sample_index(d, rng);
    };
}

RolloutPolicy deterministic_rollout_policy(std::vector<int> actions) {
    return [acts = std::move(actions)](const Trajectory& tr, Rng&) { return acts.at(static_cast<size_t>(tr.states.back())); };
}

RolloutPolicy chunk_openloop_rollout_policy(std::vector<std::int64_t> choice, int num_actions, int h) {
    return [ch = std::move(choice), num_actions, h](const Trajectory& tr, Rng&) {
        const size_t t = tr.actions.size();
        const size_t k = t % static_cast<size_t>(h);
        const int s0 = tr.states[t - k];
        const std::int64_t code = ch.at(static_cast<size_t>(s0));
        if (code < 0) return -1;
        return decode_chunk(static_cast<ChunkCode>(code), num_actions, h)[k];
    };
}

McEstimate monte_carlo_value(const Mdp& m, int s0, const RolloutPolicy& policy, int rollouts, std::uint64_t seed,
                             double trunc_tol) {
    int steps = 1;
    if (m.gamma > 0.0) steps = static_cast<int>(std::ceil(std::log(trunc_tol * (1.0 - m.gamma)) / std::log(m.gamma)));
    std::seed_seq seq{seed};
    std::vector<std::uint64_t> seeds(static_cast<size_t>(rollouts));
    seq.generate(reinterpret_cast<std::uint32_t*>(seeds.data()),
                 reinterpret_cast<std::uint32_t*>(seeds.data()) + 2 * seeds.size());
    std::vector<double> returns(static_cast<size_t>(rollouts));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rollouts; ++i)
        returns[static_cast<size_t>(i)] = sample_rollout(m, s0, policy, steps, seeds[static_cast<size_t>(i)]).discounted_return;
    McEstimate est;
    est.rollouts = rollouts;
    double sum = 0.0;
    for (double x : returns) sum += x;
    est.mean = sum / rollouts;
    double ss = 0.0;
    for (double x : returns) ss += (x - est.mean) * (x - est.mean);
    est.std_error = rollouts > 1 ? std::sqrt(ss / (rollouts - 1) / rollouts) : 0.0;
    return est;
}

}  // namespace aclab
