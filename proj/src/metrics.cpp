#include "aclab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace aclab {

double tv_distance(const Dist& p, const Dist& q) {
    if (p.size() != q.size()) throw Error("tv_distance: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return std::min(1.0, 0.5 * s);
}

void olc_terms_at(const Mdp& m, const TrajChunkDist& d, std::vector<TvTerm>& weak, std::vector<TvTerm>& strong) {
    const TrajChunkDist replay = open_loop_replay_dist(m, d);
    const int h = d.horizon;
    for (int k = 1; k < h; ++k)
        weak.push_back({d.start_state, k, std::nullopt,
                        tv_distance(marginal_state_action_at(replay, k), marginal_state_action_at(d, k))});
    weak.push_back({d.start_state, h, std::nullopt, tv_distance(marginal_state_at(replay, h), marginal_state_at(d, h))});

    for (ChunkCode code : support_chunks(d)) {
        const Chunk c = d.chunk(code);
        Dist open = point_mass(m.num_states, d.start_state);
        for (int k = 1; k <= h; ++k) {
            open = step_dist(m, open, c[static_cast<size_t>(k - 1)]);
            strong.push_back({d.start_state, k, code, tv_distance(open, conditional_state_at(d, code, k))});
        }
    }
}

ConsistencyReport olc_report(const Mdp& m, const DataModel& model, Exec exec) {
    const int n = static_cast<int>(model.supported.size());
    std::vector<std::vector<TvTerm>> weak(static_cast<size_t>(n)), strong(static_cast<size_t>(n));
    std::vector<std::exception_ptr> errs(static_cast<size_t>(n));
    auto work = [&](int i) {
        try {
            olc_terms_at(m, model.dist(model.supported[static_cast<size_t>(i)]), weak[static_cast<size_t>(i)],
                         strong[static_cast<size_t>(i)]);
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
    ConsistencyReport rep;
    rep.states = model.supported;
    for (int i = 0; i < n; ++i) {
        for (auto& t : weak[static_cast<size_t>(i)]) {
            rep.weak_eps = std::max(rep.weak_eps, t.tv);
            rep.weak_terms.push_back(t);
        }
        for (auto& t : strong[static_cast<size_t>(i)]) {
            rep.strong_eps = std::max(rep.strong_eps, t.tv);
            rep.strong_terms.push_back(t);
        }
    }
    return rep;
}

ConsistencyReport olc_report(const Mdp& m, const DataDist& data, int h, Exec exec) {
    return olc_report(m, build_data_model(m, data, h, exec), exec);
}

double weak_olc(const Mdp& m, const DataDist& data, int h) { return olc_report(m, data, h).weak_eps; }
double strong_olc(const Mdp& m, const DataDist& data, int h) { return olc_report(m, data, h).strong_eps; }

SuboptimalityReport data_suboptimality(const Mdp& m, const DataModel& model_n, const std::vector<double>& qstar,
                                       const std::vector<double>& vstar) {
    const int n = model_n.h;
    const double gn = std::pow(m.gamma, n);
    const ChunkCode div = ipow(static_cast<std::uint64_t>(m.num_actions), n - 1);
    SuboptimalityReport rep;
    rep.delta_n = std::numeric_limits<double>::infinity();
    rep.delta_tilde_n = -std::numeric_limits<double>::infinity();
    for (int s : model_n.supported) {
        std::vector<double> pa(static_cast<size_t>(m.num_actions), 0.0), val(static_cast<size_t>(m.num_actions), 0.0);
        for (const auto& o : model_n.outcomes[static_cast<size_t>(s)]) {
            const int a = static_cast<int>(o.code / div);
            double boot = 0.0;
            for (auto [sp, p] : o.next) boot += p * vstar[static_cast<size_t>(sp)];
            pa[static_cast<size_t>(a)] += o.prob;
            val[static_cast<size_t>(a)] += o.prob * (o.mean_return + gn * boot);
        }
        for (int a = 0; a < m.num_actions; ++a) {
            if (!(pa[static_cast<size_t>(a)] > kSupportEps)) continue;
            const double gap = qstar[static_cast<size_t>(s) * m.num_actions + a] - val[static_cast<size_t>(a)] / pa[static_cast<size_t>(a)];
            SuboptWitness w{s, a, gap};
            rep.terms.push_back(w);
            if (gap < rep.delta_n) {
                rep.delta_n = gap;
                rep.min_witness = w;
            }
            if (gap > rep.delta_tilde_n) {
                rep.delta_tilde_n = gap;
                rep.max_witness = w;
            }
        }
    }
    if (rep.terms.empty()) throw SupportError("data_suboptimality: empty support");
    return rep;
}

namespace {
struct Spread {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double x) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    double width() const { return hi >= lo ? hi - lo : 0.0; }
};

double path_value(const Mdp& m, const TrajChunkDist& d, const Chunk& c, const std::vector<int>& path,
                  const std::vector<double>& vstar, std::vector<int>& buf) {
    buf.assign(1, d.start_state);
    buf.insert(buf.end(), path.begin(), path.end());
    return chunk_return(m, buf, c) + std::pow(m.gamma, d.horizon) * vstar[static_cast<size_t>(path.back())];
}
}  // namespace

VariabilityReport optimality_variability(const Mdp& m, const DataDist& data, const DataModel& model,
                                         const std::vector<double>& vstar) {
    VariabilityReport rep;
    const int h = model.h;
    const ChunkCode div = ipow(static_cast<std::uint64_t>(m.num_actions), h - 1);
    std::vector<int> buf;
    bool any = false;
    for (int s : model.supported) {
        const TrajChunkDist& d = model.dist(s);
        for (const auto& [code, e] : d.entries) {
            if (!(e.prob > kSupportEps)) continue;
            const Chunk c = d.chunk(code);
            Spread sp;
            for (const auto& [path, q] : e.paths)
                if (q > kSupportEps) sp.add(path_value(m, d, c, path, vstar, buf));
            if (!any || sp.width() > rep.global_theta) {
                rep.global_theta = sp.width();
                rep.global_witness = {-1, s, code, sp.width()};
            }
            any = true;
        }
        for (size_t i = 0; i < data.components.size(); ++i) {
            if (data.components[i].weight <= 0.0) continue;
            const TrajChunkDist di = build_component_traj_dist(m, data.components[i].source, s, h);
            std::vector<Spread> per_action(static_cast<size_t>(m.num_actions));
            std::vector<double> pa(static_cast<size_t>(m.num_actions), 0.0);
            for (const auto& [code, e] : di.entries) {
                const Chunk c = di.chunk(code);
                const size_t a = static_cast<size_t>(code / div);
                pa[a] += e.prob;
                for (const auto& [path, q] : e.paths)
                    if (e.prob * q > kSupportEps) per_action[a].add(path_value(m, di, c, path, vstar, buf));
            }
            for (int a = 0; a < m.num_actions; ++a) {
                if (!(pa[static_cast<size_t>(a)] > kSupportEps)) continue;
                const double w = per_action[static_cast<size_t>(a)].width();
                if (rep.local_witness.component < 0 || w > rep.local_theta) {
                    rep.local_theta = w;
                    rep.local_witness = {static_cast<int>(i), s, static_cast<ChunkCode>(a), w};
                }
            }
        }
    }
    if (!any) throw SupportError("optimality_variability: empty support");
    rep.shortcut_theta = stochastic_shortcut_theta(m, h, vstar);
    return rep;
}

double stochastic_shortcut_theta(const Mdp& m, int h, const std::vector<double>& vstar) {
    SparseKernel K(m);
    // f_j(s) = max over j-step paths from s of discounted reward + gamma^j V*(end).
    std::vector<double> f(vstar.begin(), vstar.end()), g(f.size());
    for (int j = 1; j <= h; ++j) {
        for (int s = 0; s < m.num_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < m.num_actions; ++a) {
                double nb = -std::numeric_limits<double>::infinity();
                for (auto [sp, p] : K.next(s, a)) nb = std::max(nb, f[static_cast<size_t>(sp)]);
                best = std::max(best, m.r(s, a) + m.gamma * nb);
            }
            g[static_cast<size_t>(s)] = best;
        }
        std::swap(f, g);
    }
    double theta = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < m.num_states; ++s) theta = std::max(theta, f[static_cast<size_t>(s)] - vstar[static_cast<size_t>(s)]);
    return theta;
}

EpsDeterministic eps_deterministic(const Mdp& m) {
    EpsDeterministic out;
    double min_max = 1.0;
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            const Dist& row = m.T(s, a);
            const auto it = std::max_element(row.begin(), row.end());
            out.f.push_back(static_cast<int>(it - row.begin()));
            min_max = std::min(min_max, *it);
        }
    out.eps = 1.0 - min_max;
    return out;
}

double eps_deterministic_eps(const Mdp& m) { return eps_deterministic(m).eps; }

double open_loop_overlap(const Mdp& m, const DataDist& dstar, const DataDist& dcirc, int h, int s) {
    const TrajChunkDist ds = build_traj_dist(m, dstar, s, h);
    const TrajChunkDist dc = build_traj_dist(m, dcirc, s, h);
    double p = 0.0;
    for (const auto& [code, e] : dc.entries) {
        auto it = ds.entries.find(code);
        if (it != ds.entries.end() && it->second.prob > kSupportEps) p += e.prob;
    }
    return p;
}

double open_loop_mix_alpha(const Mdp& m, const DataDist& dstar, const DataDist& dcirc, double beta, int h,
                           const std::vector<int>& states) {
    if (!(beta >= 0.0 && beta < 1.0)) throw Error("open_loop_mix_alpha: beta must lie in [0,1)");
    double pmax = 0.0;
    for (int s : states) pmax = std::max(pmax, open_loop_overlap(m, dstar, dcirc, h, s));
    if (pmax <= kSupportEps) return 0.0;
    if (beta == 0.0) return 1.0;
    const double r = pmax * (1.0 - beta) / beta;
    return r / (1.0 + r);
}

}  // namespace aclab
