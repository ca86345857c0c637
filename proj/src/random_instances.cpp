#include "aclab/random_instances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aclab {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {
int uniform_int(int lo, int hi, Rng& rng) {
    return lo + static_cast<int>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}
}  // namespace

Dist dirichlet_ones(int n, Rng& rng) {
    // Normalized unit exponentials are Dirichlet(1, ..., 1).
    Dist d(static_cast<size_t>(n));
    double total = 0.0;
    for (auto& x : d) {
        x = -std::log(1.0 - uniform01(rng));
        total += x;
    }
    for (auto& x : d) x /= total;
    return d;
}

Mdp random_mdp(int S, int A, double gamma, Rng& rng) {
    Mdp m(S, A, gamma);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            m.T(s, a) = dirichlet_ones(S, rng);
            m.r(s, a) = uniform01(rng);
        }
    m.init_dist = Dist(static_cast<size_t>(S), 1.0 / static_cast<double>(S));
    return m;
}

Mdp random_eps_det_mdp(int S, int A, double gamma, double eps, Rng& rng) {
    Mdp m(S, A, gamma);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int f = uniform_int(0, S - 1, rng);
            Dist row = dirichlet_ones(S, rng);
            for (auto& x : row) x *= eps;
            row[static_cast<size_t>(f)] += 1.0 - eps;
            m.T(s, a) = row;
            m.r(s, a) = uniform01(rng);
        }
    m.init_dist = Dist(static_cast<size_t>(S), 1.0 / static_cast<double>(S));
    return m;
}

BehaviorSource random_phase_cycled(int S, int A, int phases, Rng& rng) {
    std::vector<std::vector<Dist>> pp(static_cast<size_t>(phases), std::vector<Dist>(static_cast<size_t>(S)));
    for (auto& phase : pp)
        for (auto& row : phase) row = dirichlet_ones(A, rng);
    return BehaviorSource::phase_cycled(std::move(pp));
}

BehaviorSource random_open_loop_table(int S, int A, int h, int per_state, Rng& rng) {
    const auto total = static_cast<int>(std::min<std::uint64_t>(ipow(static_cast<std::uint64_t>(A), h), 1'000'000));
    per_state = std::clamp(per_state, 1, total);
    std::vector<std::vector<ChunkTableEntry>> table(static_cast<size_t>(S));
    for (auto& row : table) {
        std::vector<ChunkCode> codes;
        while (static_cast<int>(codes.size()) < per_state) {
            const auto c = static_cast<ChunkCode>(uniform_int(0, total - 1, rng));
            if (std::find(codes.begin(), codes.end(), c) == codes.end()) codes.push_back(c);
        }
        std::sort(codes.begin(), codes.end());
        const Dist w = dirichlet_ones(per_state, rng);
        for (int i = 0; i < per_state; ++i)
            row.push_back({decode_chunk(codes[static_cast<size_t>(i)], A, h), w[static_cast<size_t>(i)], {}});
    }
    return BehaviorSource::chunks(std::move(table));
}

namespace {
RandomInstance finish(std::uint64_t seed, Mdp m, int h, int components, Rng& rng) {
    RandomInstance inst;
    inst.seed = seed;
    inst.h = h;
    const int S = m.num_states, A = m.num_actions;
    const Dist w = dirichlet_ones(components, rng);
    for (int i = 0; i < components; ++i)
        inst.data.components.push_back({w[static_cast<size_t>(i)], random_phase_cycled(S, A, h, rng)});
    inst.data.start_dist = Dist(static_cast<size_t>(S), 1.0 / static_cast<double>(S));
    inst.mdp = std::move(m);
    return inst;
}
}  // namespace

RandomInstance random_instance(std::uint64_t seed, const InstanceOptions& opt) {
    Rng rng(seed);
    const int S = uniform_int(opt.s_min, opt.s_max, rng);
    const int A = uniform_int(opt.a_min, opt.a_max, rng);
    const int h = uniform_int(opt.h_min, opt.h_max, rng);
    const double gamma = opt.gammas[static_cast<size_t>(uniform_int(0, static_cast<int>(opt.gammas.size()) - 1, rng))];
    Mdp m = random_mdp(S, A, gamma, rng);
    return finish(seed, std::move(m), h, opt.components, rng);
}

RandomInstance random_eps_det_instance(std::uint64_t seed, double eps, int h, const InstanceOptions& opt) {
    Rng rng(seed);
    const int S = uniform_int(opt.s_min, opt.s_max, rng);
    const int A = uniform_int(opt.a_min, opt.a_max, rng);
    const double gamma = opt.gammas[static_cast<size_t>(uniform_int(0, static_cast<int>(opt.gammas.size()) - 1, rng))];
    Mdp m = random_eps_det_mdp(S, A, gamma, eps, rng);
    return finish(seed, std::move(m), h, opt.components, rng);
}

BehaviorSource policy_source(const std::vector<int>& policy, int num_actions) {
    return BehaviorSource::deterministic(policy, num_actions);
}

DataDist mix_in(const DataDist& data, const BehaviorSource& d_star, double beta) {
    DataDist out;
    out.start_dist = data.start_dist;
    out.components.push_back({beta, d_star});
    for (const auto& c : data.components) out.components.push_back({(1.0 - beta) * c.weight, c.source});
    return out;
}

}  // namespace aclab
