#include "aclab/chunk_dist.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <string>

namespace aclab {

int BehaviorSource::cycle_length() const {
    if (kind == Kind::phase_cycled_markov) return static_cast<int>(phase_policy.size());
    for (const auto& row : table)
        if (!row.empty()) return static_cast<int>(row.front().chunk.size());
    return 0;
}

BehaviorSource BehaviorSource::markov(std::vector<Dist> policy) {
    BehaviorSource b;
    b.kind = Kind::phase_cycled_markov;
    b.phase_policy.push_back(std::move(policy));
    return b;
}

BehaviorSource BehaviorSource::deterministic(const std::vector<int>& actions, int num_actions) {
    std::vector<Dist> pol;
    pol.reserve(actions.size());
    for (int a : actions) pol.push_back(a < 0 ? Dist{} : point_mass(num_actions, a));
    return markov(std::move(pol));
}

BehaviorSource BehaviorSource::phase_cycled(std::vector<std::vector<Dist>> per_phase) {
    BehaviorSource b;
    b.kind = Kind::phase_cycled_markov;
    b.phase_policy = std::move(per_phase);
    return b;
}

BehaviorSource BehaviorSource::chunks(std::vector<std::vector<ChunkTableEntry>> table) {
    BehaviorSource b;
    b.kind = Kind::chunk_table;
    b.table = std::move(table);
    return b;
}

void DataDist::validate(int num_states, int num_actions) const {
    if (components.empty()) throw Error("DataDist: no components");
    double wsum = 0.0;
    for (const auto& c : components) {
        if (!(c.weight >= 0.0)) throw Error("DataDist: negative component weight");
        wsum += c.weight;
        const auto& src = c.source;
        if (src.kind == BehaviorSource::Kind::phase_cycled_markov) {
            if (src.phase_policy.empty()) throw Error("DataDist: phase policy has no phases");
            for (const auto& phase : src.phase_policy) {
                if (phase.size() != static_cast<size_t>(num_states)) throw Error("DataDist: phase policy row count != num_states");
                for (const auto& d : phase) {
                    if (d.empty()) continue;
                    if (d.size() != static_cast<size_t>(num_actions) || !dist_normalized(d))
                        throw Error("DataDist: phase policy entry is not a distribution over actions");
                }
            }
        } else {
            if (src.table.size() != static_cast<size_t>(num_states)) throw Error("DataDist: chunk table row count != num_states");
            const int L = src.cycle_length();
            if (L < 1) throw Error("DataDist: chunk table is empty");
            for (const auto& row : src.table) {
                double p = 0.0;
                for (const auto& e : row) {
                    if (static_cast<int>(e.chunk.size()) != L) throw Error("DataDist: chunk table mixes chunk lengths");
                    for (int a : e.chunk)
                        if (a < 0 || a >= num_actions) throw Error("DataDist: chunk action out of range");
                    for (const auto& o : e.overrides)
                        if (o.actions.size() != static_cast<size_t>(num_actions) || !dist_normalized(o.actions) ||
                            o.prefix.size() >= static_cast<size_t>(L))
                            throw Error("DataDist: malformed override");
                    p += e.prob;
                }
                if (!row.empty() && std::abs(p - 1.0) > kNormTol) throw Error("DataDist: chunk table row does not sum to 1");
            }
        }
    }
    if (std::abs(wsum - 1.0) > kNormTol) throw Error("DataDist: component weights do not sum to 1");
    if (start_dist.size() != static_cast<size_t>(num_states) || !dist_normalized(start_dist))
        throw Error("DataDist: start_dist is not a distribution over states");
}

DataDist single_source(BehaviorSource src, Dist start_dist) {
    DataDist d;
    d.components.push_back({1.0, std::move(src)});
    d.start_dist = std::move(start_dist);
    return d;
}

const ChunkEntry& TrajChunkDist::at(ChunkCode code) const {
    auto it = entries.find(code);
    if (it == entries.end() || !(it->second.prob > kSupportEps))
        throw SupportError("chunk not in support of P_D(. | s_t) at state " + std::to_string(start_state));
    return it->second;
}

std::size_t TrajChunkDist::pair_count() const {
    std::size_t n = 0;
    for (const auto& [c, e] : entries) n += e.paths.size();
    return n;
}

namespace {

using Joint = std::map<ChunkCode, std::map<std::vector<int>, double>>;

class Enumerator {
public:
    Enumerator(const Mdp& m, const SparseKernel& K, const BehaviorSource& src, int h, double weight, Joint& out,
               std::size_t cap)
        : m_(m), K_(K), src_(src), h_(h), L_(src.cycle_length()), w_(weight), out_(out), cap_(cap) {
        if (L_ < 1) throw Error("behavior source has no cycle");
        actions_.reserve(static_cast<size_t>(h));
        path_.reserve(static_cast<size_t>(h));
    }

    void run(int s0) { step(0, s0, w_, nullptr); }

private:
    void step(int k, int s, double prob, const ChunkTableEntry* entry) {
        if (k == h_) {
            out_[encode_chunk(actions_, m_.num_actions)][path_] += prob;
            if (++leaves_ > cap_)
                throw CapacityError("trajectory enumeration exceeds cap of " + std::to_string(cap_) + " (chunk, path) pairs");
            return;
        }
        const int j = k % L_;
        if (src_.kind == BehaviorSource::Kind::phase_cycled_markov) {
            const Dist& d = src_.phase_policy[static_cast<size_t>(j)][static_cast<size_t>(s)];
            if (d.empty()) throw SupportError("behavior undefined at state " + std::to_string(s) + " phase " + std::to_string(j));
            for (int a = 0; a < m_.num_actions; ++a)
                if (d[static_cast<size_t>(a)] > 0.0) act(k, s, a, prob * d[static_cast<size_t>(a)], nullptr);
            return;
        }
        if (j == 0) {
            const auto& row = src_.table[static_cast<size_t>(s)];
            if (row.empty()) throw SupportError("chunk table undefined at state " + std::to_string(s));
            for (const auto& e : row)
                if (e.prob > 0.0) choose(k, s, prob * e.prob, &e);
            return;
        }
        choose(k, s, prob, entry);
    }

    void choose(int k, int s, double prob, const ChunkTableEntry* e) {
        const int j = k % L_;
        for (const auto& o : e->overrides) {
            if (o.state != s || static_cast<int>(o.prefix.size()) != j) continue;
            if (!std::equal(o.prefix.begin(), o.prefix.end(), actions_.end() - j)) continue;
            for (int a = 0; a < m_.num_actions; ++a)
                if (o.actions[static_cast<size_t>(a)] > 0.0) act(k, s, a, prob * o.actions[static_cast<size_t>(a)], e);
            return;
        }
        act(k, s, e->chunk[static_cast<size_t>(j)], prob, e);
    }

    void act(int k, int s, int a, double prob, const ChunkTableEntry* e) {
        actions_.push_back(a);
        for (auto [sp, p] : K_.next(s, a)) {
            path_.push_back(sp);
            step(k + 1, sp, prob * p, e);
            path_.pop_back();
        }
        actions_.pop_back();
    }

    const Mdp& m_;
    const SparseKernel& K_;
    const BehaviorSource& src_;
    int h_;
    int L_;
    double w_;
    Joint& out_;
    std::size_t cap_;
    std::size_t leaves_ = 0;
    Chunk actions_;
    std::vector<int> path_;
};

TrajChunkDist from_joint(const Joint& joint, int s0, int h, int S, int A) {
    TrajChunkDist d;
    d.start_state = s0;
    d.horizon = h;
    d.num_states = S;
    d.num_actions = A;
    for (const auto& [code, paths] : joint) {
        double p = 0.0;
        for (const auto& [path, q] : paths) p += q;
        if (!(p > 0.0)) continue;
        ChunkEntry e;
        e.prob = p;
        for (const auto& [path, q] : paths) e.paths.emplace(path, q / p);
        d.entries.emplace(code, std::move(e));
    }
    return d;
}

void check_start(const Mdp& m, int s0, int h) {
    if (s0 < 0 || s0 >= m.num_states) throw Error("build_traj_dist: start state out of range");
    if (h < 1) throw Error("build_traj_dist: horizon must be >= 1");
}

}  // namespace

TrajChunkDist build_component_traj_dist(const Mdp& m, const BehaviorSource& src, int s0, int h, const BuildOptions& opt) {
    check_start(m, s0, h);
    SparseKernel K(m);
    Joint joint;
    Enumerator(m, K, src, h, 1.0, joint, opt.enum_cap).run(s0);
    return from_joint(joint, s0, h, m.num_states, m.num_actions);
}

TrajChunkDist build_traj_dist(const Mdp& m, const DataDist& data, int s0, int h, const BuildOptions& opt) {
    check_start(m, s0, h);
    SparseKernel K(m);
    Joint joint;
    for (const auto& c : data.components) {
        if (c.weight <= 0.0) continue;
        Enumerator(m, K, c.source, h, c.weight, joint, opt.enum_cap).run(s0);
    }
    return from_joint(joint, s0, h, m.num_states, m.num_actions);
}

namespace {
void openloop_paths(const SparseKernel& K, const Chunk& c, size_t k, int s, double p, std::vector<int>& path,
                    std::map<std::vector<int>, double>& out) {
    if (k == c.size()) {
        out[path] += p;
        return;
    }
    for (auto [sp, q] : K.next(s, c[k])) {
        path.push_back(sp);
        openloop_paths(K, c, k + 1, sp, p * q, path, out);
        path.pop_back();
    }
}
}  // namespace

TrajChunkDist open_loop_replay_dist(const Mdp& m, const TrajChunkDist& d) {
    SparseKernel K(m);
    TrajChunkDist out = d;
    for (auto& [code, e] : out.entries) {
        e.paths.clear();
        std::vector<int> path;
        openloop_paths(K, d.chunk(code), 0, d.start_state, 1.0, path, e.paths);
    }
    return out;
}

Dist marginal_state_action_at(const TrajChunkDist& d, int k) {
    if (k < 1 || k > d.horizon - 1) throw Error("marginal_state_action_at: k must lie in 1..h-1");
    Dist out(static_cast<size_t>(d.num_states) * d.num_actions, 0.0);
    for (const auto& [code, e] : d.entries) {
        const int a = d.chunk(code)[static_cast<size_t>(k)];
        for (const auto& [path, q] : e.paths)
            out[static_cast<size_t>(path[static_cast<size_t>(k - 1)]) * d.num_actions + a] += e.prob * q;
    }
    return out;
}

Dist marginal_state_at(const TrajChunkDist& d, int k) {
    if (k < 1 || k > d.horizon) throw Error("marginal_state_at: k must lie in 1..h");
    Dist out(static_cast<size_t>(d.num_states), 0.0);
    for (const auto& [code, e] : d.entries)
        for (const auto& [path, q] : e.paths) out[static_cast<size_t>(path[static_cast<size_t>(k - 1)])] += e.prob * q;
    return out;
}

Dist conditional_state_at(const TrajChunkDist& d, ChunkCode chunk, int k) {
    if (k < 1 || k > d.horizon) throw Error("conditional_state_at: k must lie in 1..h");
    const ChunkEntry& e = d.at(chunk);
    Dist out(static_cast<size_t>(d.num_states), 0.0);
    for (const auto& [path, q] : e.paths) out[static_cast<size_t>(path[static_cast<size_t>(k - 1)])] += q;
    return out;
}

Dist conditional_state_at(const TrajChunkDist& d, const Chunk& chunk, int k) {
    if (static_cast<int>(chunk.size()) != d.horizon) throw Error("conditional_state_at: chunk length differs from horizon");
    return conditional_state_at(d, encode_chunk(chunk, d.num_actions), k);
}

std::vector<ChunkCode> support_chunks(const TrajChunkDist& d) {
    std::vector<ChunkCode> out;
    for (const auto& [code, e] : d.entries)
        if (e.prob > kSupportEps) out.push_back(code);
    return out;
}

std::map<ChunkCode, double> prefix_marginal(const TrajChunkDist& d, int k) {
    if (k < 0 || k > d.horizon) throw Error("prefix_marginal: k must lie in 0..h");
    const ChunkCode div = ipow(static_cast<std::uint64_t>(d.num_actions), d.horizon - k);
    std::map<ChunkCode, double> out;
    for (const auto& [code, e] : d.entries) out[code / div] += e.prob;
    return out;
}

std::vector<ChunkCode> support_prefixes(const TrajChunkDist& d, int k) {
    std::vector<ChunkCode> out;
    for (const auto& [code, p] : prefix_marginal(d, k))
        if (p > kSupportEps) out.push_back(code);
    return out;
}

std::vector<ChunkOutcome> summarize(const Mdp& m, const TrajChunkDist& d) {
    std::vector<ChunkOutcome> out;
    out.reserve(d.entries.size());
    std::vector<int> full;
    for (const auto& [code, e] : d.entries) {
        if (!(e.prob > kSupportEps)) continue;
        const Chunk c = d.chunk(code);
        ChunkOutcome o;
        o.code = code;
        o.prob = e.prob;
        std::map<int, double> next;
        for (const auto& [path, q] : e.paths) {
            full.assign(1, d.start_state);
            full.insert(full.end(), path.begin(), path.end());
            o.mean_return += q * chunk_return(m, full, c);
            next[path.back()] += q;
        }
        o.next.assign(next.begin(), next.end());
        out.push_back(std::move(o));
    }
    return out;
}

const TrajChunkDist& DataModel::dist(int s) const {
    if (!is_supported(s)) throw SupportError("state " + std::to_string(s) + " is outside the data support");
    return *dists[static_cast<size_t>(s)];
}

DataModel build_data_model_from(const Mdp& m, const DataDist& data, int h, const std::vector<int>& roots, Exec exec,
                                const BuildOptions& opt) {
    data.validate(m.num_states, m.num_actions);
    DataModel dm;
    dm.h = h;
    dm.dists.resize(static_cast<size_t>(m.num_states));
    dm.outcomes.resize(static_cast<size_t>(m.num_states));
    std::vector<char> seen(static_cast<size_t>(m.num_states), 0);
    std::vector<int> frontier;
    for (int s : roots)
        if (!seen[static_cast<size_t>(s)]) {
            seen[static_cast<size_t>(s)] = 1;
            frontier.push_back(s);
        }
    std::sort(frontier.begin(), frontier.end());
    while (!frontier.empty()) {
        const int n = static_cast<int>(frontier.size());
        std::vector<std::exception_ptr> errs(static_cast<size_t>(n));
        auto work = [&](int i) {
            const int s = frontier[static_cast<size_t>(i)];
            try {
                dm.dists[static_cast<size_t>(s)] = build_traj_dist(m, data, s, h, opt);
                dm.outcomes[static_cast<size_t>(s)] = summarize(m, *dm.dists[static_cast<size_t>(s)]);
            } catch (...) {
                errs[static_cast<size_t>(i)] = std::current_exception();
            }
        };
        if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
            for (int i = 0; i < n; ++i) work(i);
        } else {
            for (int i = 0; i < n; ++i) work(i);
        }
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
        std::set<int> next;
        for (int s : frontier)
            for (const auto& o : dm.outcomes[static_cast<size_t>(s)])
                for (auto [sp, p] : o.next)
                    if (!seen[static_cast<size_t>(sp)]) next.insert(sp);
        frontier.assign(next.begin(), next.end());
        for (int s : frontier) seen[static_cast<size_t>(s)] = 1;
    }
    for (int s = 0; s < m.num_states; ++s)
        if (dm.dists[static_cast<size_t>(s)]) dm.supported.push_back(s);
    return dm;
}

DataModel build_data_model(const Mdp& m, const DataDist& data, int h, Exec exec, const BuildOptions& opt) {
    return build_data_model_from(m, data, h, dist_support(data.start_dist), exec, opt);
}

}  // namespace aclab
