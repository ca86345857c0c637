#include "aclab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace aclab {

double ValueTable::at(int s) const {
    if (!defined.at(static_cast<size_t>(s))) throw SupportError("value undefined at state " + std::to_string(s));
    return v[static_cast<size_t>(s)];
}

Chunk AcPolicy::chunk(int s) const {
    if (!defined(s)) throw SupportError("policy undefined at state " + std::to_string(s));
    return decode_chunk(static_cast<ChunkCode>(choice[static_cast<size_t>(s)]), num_actions, h);
}

int AcPolicy::first_action(int s) const { return chunk(s).front(); }

double ChunkQTable::at(int s, ChunkCode c) const {
    const auto& row = q.at(static_cast<size_t>(s));
    auto it = row.find(c);
    if (it == row.end()) throw SupportError("chunk Q undefined at state " + std::to_string(s));
    return it->second;
}

double sup_residual(const std::vector<double>& a, const std::vector<double>& b, const std::vector<char>& mask) {
    double r = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        if (mask[i]) r = std::max(r, std::abs(a[i] - b[i]));
    return r;
}

SolveReport fixed_point(const std::function<void(const std::vector<double>&, std::vector<double>&)>& op,
                        std::vector<double>& x, const std::vector<char>& mask, const SolveOptions& opt) {
    if (!(opt.tolerance > 0.0)) throw Error("SolveOptions: tolerance must be positive");
    SolveReport rep;
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        if (mask[i]) x[i] = opt.init_value;
    for (long it = 0; it < opt.max_iters; ++it) {
        y = x;
        op(x, y);
        for (size_t i = 0; i < x.size(); ++i)
            if (!mask[i]) y[i] = x[i];
        const double res = sup_residual(x, y, mask);
        x.swap(y);
        rep.iterations = it + 1;
        rep.residual = res;
        rep.history.push_back(res);
        if (res < opt.tolerance) return rep;
    }
    throw Error("fixed-point iteration did not converge within max_iters");
}

double observed_contraction(const SolveReport& rep, int window) {
    const auto& h = rep.history;
    double worst = 0.0;
    const size_t n = h.size();
    const size_t start = n > static_cast<size_t>(window) + 1 ? n - static_cast<size_t>(window) - 1 : 0;
    for (size_t i = start + 1; i < n; ++i)
        if (h[i - 1] > 1e-14) worst = std::max(worst, h[i] / h[i - 1]);
    return worst;
}

// ---- one-step optimality --------------------------------------------------

void optimal_backup(const Mdp& m, const std::vector<double>& v, std::vector<double>& out) {
    for (int s = 0; s < m.num_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.num_actions; ++a) {
            const Dist& row = m.T(s, a);
            double q = m.r(s, a);
            double ev = 0.0;
            for (int sp = 0; sp < m.num_states; ++sp) ev += row[static_cast<size_t>(sp)] * v[static_cast<size_t>(sp)];
            q += m.gamma * ev;
            best = std::max(best, q);
        }
        out[static_cast<size_t>(s)] = best;
    }
}

OptimalSolution solve_optimal(const Mdp& m, const SolveOptions& opt) {
    require_valid(m);
    OptimalSolution sol;
    sol.v.v.assign(static_cast<size_t>(m.num_states), 0.0);
    sol.v.defined.assign(static_cast<size_t>(m.num_states), 1);
    sol.v.report = fixed_point([&](const auto& x, auto& y) { optimal_backup(m, x, y); }, sol.v.v, sol.v.defined, opt);
    sol.q.assign(static_cast<size_t>(m.num_states) * m.num_actions, 0.0);
    sol.policy.assign(static_cast<size_t>(m.num_states), 0);
    sol.ties.resize(static_cast<size_t>(m.num_states));
    for (int s = 0; s < m.num_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.num_actions; ++a) {
            const Dist& row = m.T(s, a);
            double ev = 0.0;
            for (int sp = 0; sp < m.num_states; ++sp) ev += row[static_cast<size_t>(sp)] * sol.v.v[static_cast<size_t>(sp)];
            const double q = m.r(s, a) + m.gamma * ev;
            sol.q[static_cast<size_t>(s) * m.num_actions + a] = q;
            best = std::max(best, q);
        }
        for (int a = 0; a < m.num_actions; ++a)
            if (sol.q[static_cast<size_t>(s) * m.num_actions + a] >= best - kTieTol) sol.ties[static_cast<size_t>(s)].push_back(a);
        sol.policy[static_cast<size_t>(s)] = sol.ties[static_cast<size_t>(s)].front();
    }
    return sol;
}

// ---- data-driven chunk backups ---------------------------------------------

namespace {

std::vector<char> support_mask(const Mdp& m, const DataModel& model) {
    std::vector<char> mask(static_cast<size_t>(m.num_states), 0);
    for (int s : model.supported) mask[static_cast<size_t>(s)] = 1;
    return mask;
}

double bootstrap(const std::vector<std::pair<int, double>>& next, const std::vector<double>& v) {
    double b = 0.0;
    for (auto [sp, p] : next) b += p * v[static_cast<size_t>(sp)];
    return b;
}

void require_closed(const DataModel& model) {
    for (int s : model.supported)
        for (const auto& o : model.outcomes[static_cast<size_t>(s)]) {
            for (auto [sp, p] : o.next)
                if (!model.is_supported(sp))
                    throw SupportError("data successor " + std::to_string(sp) + " of state " + std::to_string(s) +
                                       " lies outside the supported set");
        }
    for (int s : model.supported)
        if (model.outcomes[static_cast<size_t>(s)].empty())
            throw SupportError("empty chunk support at reachable state " + std::to_string(s));
}

// Per (s, first action): probability, mean n-step return and law of s_{t+n}.
struct FirstActionModel {
    double prob = 0.0;
    double mean_return = 0.0;
    std::vector<std::pair<int, double>> next;
};

std::vector<std::vector<FirstActionModel>> first_action_models(const Mdp& m, const DataModel& model) {
    const ChunkCode div = ipow(static_cast<std::uint64_t>(m.num_actions), model.h - 1);
    std::vector<std::vector<FirstActionModel>> out(static_cast<size_t>(m.num_states));
    for (int s : model.supported) {
        auto& row = out[static_cast<size_t>(s)];
        row.assign(static_cast<size_t>(m.num_actions), {});
        std::vector<std::map<int, double>> nxt(static_cast<size_t>(m.num_actions));
        for (const auto& o : model.outcomes[static_cast<size_t>(s)]) {
            const size_t a = static_cast<size_t>(o.code / div);
            row[a].prob += o.prob;
            row[a].mean_return += o.prob * o.mean_return;
            for (auto [sp, p] : o.next) nxt[a][sp] += o.prob * p;
        }
        for (size_t a = 0; a < row.size(); ++a) {
            if (!(row[a].prob > kSupportEps)) {
                row[a] = {};
                continue;
            }
            row[a].mean_return /= row[a].prob;
            for (auto [sp, p] : nxt[a]) row[a].next.emplace_back(sp, p / row[a].prob);
        }
    }
    return out;
}

AcPolicy greedy_chunk_policy(const Mdp& m, int h, const std::vector<std::map<ChunkCode, double>>& q) {
    AcPolicy pol;
    pol.h = h;
    pol.num_actions = m.num_actions;
    pol.choice.assign(static_cast<size_t>(m.num_states), -1);
    pol.ties.resize(static_cast<size_t>(m.num_states));
    for (int s = 0; s < m.num_states; ++s) {
        const auto& row = q[static_cast<size_t>(s)];
        if (row.empty()) continue;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [c, val] : row) best = std::max(best, val);
        for (const auto& [c, val] : row)
            if (val >= best - kTieTol) pol.ties[static_cast<size_t>(s)].push_back(c);
        pol.choice[static_cast<size_t>(s)] = static_cast<std::int64_t>(pol.ties[static_cast<size_t>(s)].front());
    }
    return pol;
}

}  // namespace

void behavior_backup(const Mdp& m, const DataModel& model, const std::vector<double>& v, std::vector<double>& out) {
    const double gh = std::pow(m.gamma, model.h);
    for (int s : model.supported) {
        double acc = 0.0;
        for (const auto& o : model.outcomes[static_cast<size_t>(s)]) acc += o.prob * (o.mean_return + gh * bootstrap(o.next, v));
        out[static_cast<size_t>(s)] = acc;
    }
}

void chunk_opt_backup(const Mdp& m, const DataModel& model, const std::vector<double>& v, std::vector<double>& out) {
    const double gh = std::pow(m.gamma, model.h);
    for (int s : model.supported) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& o : model.outcomes[static_cast<size_t>(s)]) best = std::max(best, o.mean_return + gh * bootstrap(o.next, v));
        out[static_cast<size_t>(s)] = best;
    }
}

void nstep_backup(const Mdp& m, const DataModel& model_n, const std::vector<double>& v, std::vector<double>& out) {
    // The first-action grouping equals the max over per-action conditional means.
    const double gn = std::pow(m.gamma, model_n.h);
    const ChunkCode div = ipow(static_cast<std::uint64_t>(m.num_actions), model_n.h - 1);
    std::vector<double> num(static_cast<size_t>(m.num_actions)), den(static_cast<size_t>(m.num_actions));
    for (int s : model_n.supported) {
        std::fill(num.begin(), num.end(), 0.0);
        std::fill(den.begin(), den.end(), 0.0);
        for (const auto& o : model_n.outcomes[static_cast<size_t>(s)]) {
            const size_t a = static_cast<size_t>(o.code / div);
            num[a] += o.prob * (o.mean_return + gn * bootstrap(o.next, v));
            den[a] += o.prob;
        }
        double best = -std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < num.size(); ++a)
            if (den[a] > kSupportEps) best = std::max(best, num[a] / den[a]);
        out[static_cast<size_t>(s)] = best;
    }
}

ValueTable behavior_chunk_value(const Mdp& m, const DataModel& model, const SolveOptions& opt) {
    require_closed(model);
    ValueTable vt;
    vt.v.assign(static_cast<size_t>(m.num_states), 0.0);
    vt.defined = support_mask(m, model);
    vt.report = fixed_point([&](const auto& x, auto& y) { behavior_backup(m, model, x, y); }, vt.v, vt.defined, opt);
    return vt;
}

ChunkSolution chunk_q_optimality(const Mdp& m, const DataModel& model, const SolveOptions& opt) {
    require_closed(model);
    ChunkSolution sol;
    sol.v.v.assign(static_cast<size_t>(m.num_states), 0.0);
    sol.v.defined = support_mask(m, model);
    sol.v.report = fixed_point([&](const auto& x, auto& y) { chunk_opt_backup(m, model, x, y); }, sol.v.v, sol.v.defined, opt);
    const double gh = std::pow(m.gamma, model.h);
    sol.q.h = model.h;
    sol.q.num_actions = m.num_actions;
    sol.q.q.resize(static_cast<size_t>(m.num_states));
    sol.q.report = sol.v.report;
    for (int s : model.supported)
        for (const auto& o : model.outcomes[static_cast<size_t>(s)])
            sol.q.q[static_cast<size_t>(s)][o.code] = o.mean_return + gh * bootstrap(o.next, sol.v.v);
    sol.policy = greedy_chunk_policy(m, model.h, sol.q.q);
    return sol;
}

NStepSolution nstep_uncorrected_q(const Mdp& m, const DataModel& model_n, const SolveOptions& opt) {
    require_closed(model_n);
    NStepSolution sol;
    sol.n = model_n.h;
    sol.v.v.assign(static_cast<size_t>(m.num_states), 0.0);
    sol.v.defined = support_mask(m, model_n);
    sol.v.report = fixed_point([&](const auto& x, auto& y) { nstep_backup(m, model_n, x, y); }, sol.v.v, sol.v.defined, opt);
    const double gn = std::pow(m.gamma, model_n.h);
    const auto fam = first_action_models(m, model_n);
    sol.q.assign(static_cast<size_t>(m.num_states) * m.num_actions, 0.0);
    sol.q_defined.assign(sol.q.size(), 0);
    std::vector<std::map<ChunkCode, double>> qmap(static_cast<size_t>(m.num_states));
    for (int s : model_n.supported)
        for (int a = 0; a < m.num_actions; ++a) {
            const auto& f = fam[static_cast<size_t>(s)][static_cast<size_t>(a)];
            if (!(f.prob > kSupportEps)) continue;
            const size_t i = static_cast<size_t>(s) * m.num_actions + a;
            sol.q[i] = f.mean_return + gn * bootstrap(f.next, sol.v.v);
            sol.q_defined[i] = 1;
            qmap[static_cast<size_t>(s)][static_cast<ChunkCode>(a)] = sol.q[i];
        }
    sol.policy = greedy_chunk_policy(m, 1, qmap);
    return sol;
}

// ---- open-loop chunk dynamics -----------------------------------------------

ChunkOutcome open_loop_outcome(const Mdp& m, int s, const Chunk& c) {
    ChunkOutcome o;
    o.code = encode_chunk(c, m.num_actions);
    o.prob = 1.0;
    Dist d = point_mass(m.num_states, s);
    double g = 1.0;
    for (int a : c) {
        double rr = 0.0;
        for (int x = 0; x < m.num_states; ++x) rr += d[static_cast<size_t>(x)] * m.r(x, a);
        o.mean_return += g * rr;
        g *= m.gamma;
        d = step_dist(m, d, a);
    }
    for (int x = 0; x < m.num_states; ++x)
        if (d[static_cast<size_t>(x)] > kSupportEps) o.next.emplace_back(x, d[static_cast<size_t>(x)]);
    return o;
}

ChunkSolution solve_optimal_ac(const Mdp& m, int h, const SolveOptions& opt) {
    require_valid(m);
    const std::uint64_t nc = ipow(static_cast<std::uint64_t>(m.num_actions), h);
    if (nc * static_cast<std::uint64_t>(m.num_states) > kDefaultEnumCap)
        throw CapacityError("solve_optimal_ac: chunk space exceeds enumeration cap");
    std::vector<std::vector<ChunkOutcome>> outs(static_cast<size_t>(m.num_states));
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < m.num_states; ++s) {
        auto& row = outs[static_cast<size_t>(s)];
        row.reserve(nc);
        for (ChunkCode c = 0; c < nc; ++c) row.push_back(open_loop_outcome(m, s, decode_chunk(c, m.num_actions, h)));
    }
    const double gh = std::pow(m.gamma, h);
    auto q_of = [&](const ChunkOutcome& o, const std::vector<double>& v) { return o.mean_return + gh * bootstrap(o.next, v); };
    ChunkSolution sol;
    sol.v.v.assign(static_cast<size_t>(m.num_states), 0.0);
    sol.v.defined.assign(static_cast<size_t>(m.num_states), 1);
    sol.v.report = fixed_point(
        [&](const auto& x, auto& y) {
            for (int s = 0; s < m.num_states; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (const auto& o : outs[static_cast<size_t>(s)]) best = std::max(best, q_of(o, x));
                y[static_cast<size_t>(s)] = best;
            }
        },
        sol.v.v, sol.v.defined, opt);
    sol.q.h = h;
    sol.q.num_actions = m.num_actions;
    sol.q.q.resize(static_cast<size_t>(m.num_states));
    sol.q.report = sol.v.report;
    for (int s = 0; s < m.num_states; ++s)
        for (const auto& o : outs[static_cast<size_t>(s)]) sol.q.q[static_cast<size_t>(s)][o.code] = q_of(o, sol.v.v);
    sol.policy = greedy_chunk_policy(m, h, sol.q.q);
    return sol;
}

// ---- policy evaluation -------------------------------------------------------

namespace {

// Evaluates V(s) = sum_k w_k (R_k + g_k * E_k[V]) over the closure of `starts`.
struct LinearModel {
    std::vector<std::vector<ChunkOutcome>> rows;  // outcome prob = weight
    std::vector<char> defined;
    double discount = 0.0;
};

ValueTable solve_linear(const Mdp& m, const std::function<bool(int, std::vector<ChunkOutcome>&)>& row_of,
                        std::vector<int> starts, double discount, const SolveOptions& opt, const char* what) {
    LinearModel lm;
    lm.rows.resize(static_cast<size_t>(m.num_states));
    lm.defined.assign(static_cast<size_t>(m.num_states), 0);
    std::vector<char> seen(static_cast<size_t>(m.num_states), 0);
    if (starts.empty())
        for (int s = 0; s < m.num_states; ++s) starts.push_back(s);
    std::vector<int> stack;
    for (int s : starts)
        if (!seen[static_cast<size_t>(s)]) {
            seen[static_cast<size_t>(s)] = 1;
            stack.push_back(s);
        }
    while (!stack.empty()) {
        const int s = stack.back();
        stack.pop_back();
        auto& row = lm.rows[static_cast<size_t>(s)];
        if (!row_of(s, row)) throw SupportError(std::string(what) + ": policy undefined at reachable state " + std::to_string(s));
        lm.defined[static_cast<size_t>(s)] = 1;
        for (const auto& o : row)
            for (auto [sp, p] : o.next)
                if (!seen[static_cast<size_t>(sp)]) {
                    seen[static_cast<size_t>(sp)] = 1;
                    stack.push_back(sp);
                }
    }
    ValueTable vt;
    vt.v.assign(static_cast<size_t>(m.num_states), 0.0);
    vt.defined = lm.defined;
    vt.report = fixed_point(
        [&](const auto& x, auto& y) {
            for (int s = 0; s < m.num_states; ++s) {
                if (!lm.defined[static_cast<size_t>(s)]) continue;
                double acc = 0.0;
                for (const auto& o : lm.rows[static_cast<size_t>(s)]) acc += o.prob * (o.mean_return + discount * bootstrap(o.next, x));
                y[static_cast<size_t>(s)] = acc;
            }
        },
        vt.v, vt.defined, opt);
    return vt;
}

}  // namespace

ValueTable eval_ac_policy_openloop(const Mdp& m, const AcPolicy& pol, std::vector<int> starts, const SolveOptions& opt) {
    if (starts.empty())
        for (int s = 0; s < m.num_states; ++s)
            if (pol.defined(s)) starts.push_back(s);
    return solve_linear(
        m,
        [&](int s, std::vector<ChunkOutcome>& row) {
            if (!pol.defined(s)) return false;
            row.push_back(open_loop_outcome(m, s, pol.chunk(s)));
            return true;
        },
        std::move(starts), std::pow(m.gamma, pol.h), opt, "eval_ac_policy_openloop");
}

ValueTable eval_behavior_chunk_policy(const Mdp& m, const DataModel& model, std::vector<int> starts, const SolveOptions& opt) {
    if (starts.empty()) starts = model.supported;
    return solve_linear(
        m,
        [&](int s, std::vector<ChunkOutcome>& row) {
            if (!model.is_supported(s)) return false;
            const TrajChunkDist& d = model.dist(s);
            for (ChunkCode c : support_chunks(d)) {
                ChunkOutcome o = open_loop_outcome(m, s, d.chunk(c));
                o.prob = d.entries.at(c).prob;
                row.push_back(std::move(o));
            }
            return true;
        },
        std::move(starts), std::pow(m.gamma, model.h), opt, "eval_behavior_chunk_policy");
}

ValueTable eval_markov_policy(const Mdp& m, const std::vector<Dist>& pol, std::vector<int> starts, const SolveOptions& opt) {
    if (starts.empty())
        for (int s = 0; s < m.num_states; ++s)
            if (!pol.at(static_cast<size_t>(s)).empty()) starts.push_back(s);
    return solve_linear(
        m,
        [&](int s, std::vector<ChunkOutcome>& row) {
            const Dist& d = pol.at(static_cast<size_t>(s));
            if (d.empty()) return false;
            for (int a = 0; a < m.num_actions; ++a) {
                if (!(d[static_cast<size_t>(a)] > 0.0)) continue;
                ChunkOutcome o = open_loop_outcome(m, s, Chunk{a});
                o.prob = d[static_cast<size_t>(a)];
                row.push_back(std::move(o));
            }
            return true;
        },
        std::move(starts), m.gamma, opt, "eval_markov_policy");
}

ValueTable eval_deterministic_policy(const Mdp& m, const std::vector<int>& pol, std::vector<int> starts, const SolveOptions& opt) {
    std::vector<Dist> p(static_cast<size_t>(m.num_states));
    for (int s = 0; s < m.num_states; ++s)
        if (pol.at(static_cast<size_t>(s)) >= 0) p[static_cast<size_t>(s)] = point_mass(m.num_actions, pol[static_cast<size_t>(s)]);
    return eval_markov_policy(m, p, std::move(starts), opt);
}

ClosedLoopResult eval_closedloop_first(const Mdp& m, const AcPolicy& pol, std::vector<int> starts, const SolveOptions& opt) {
    ClosedLoopResult res;
    res.policy.assign(static_cast<size_t>(m.num_states), -1);
    for (int s = 0; s < m.num_states; ++s)
        if (pol.defined(s)) res.policy[static_cast<size_t>(s)] = pol.first_action(s);
    try {
        res.v = eval_deterministic_policy(m, res.policy, std::move(starts), opt);
    } catch (const SupportError& e) {
        throw SupportError(std::string("eval_closedloop_first: ") + e.what());
    }
    return res;
}

// ---- implicit statistics -------------------------------------------------------

double implicit_stat(const std::vector<WeightedValue>& dist, StatKind kind, double kappa) {
    if (dist.empty()) throw Error("implicit_stat: empty distribution");
    if (!(kappa >= 0.5 && kappa < 1.0)) throw Error("implicit_stat: kappa must lie in [0.5, 1)");
    std::vector<WeightedValue> d;
    double wsum = 0.0;
    for (const auto& x : dist)
        if (x.weight > 0.0) {
            d.push_back(x);
            wsum += x.weight;
        }
    if (d.empty()) throw Error("implicit_stat: no positive weights");
    std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
    if (kind == StatKind::quantile) {
        double cdf = 0.0;
        for (size_t i = 0; i < d.size(); ++i) {
            cdf += d[i].weight / wsum;
            if (cdf >= kappa) return d[i].value;
        }
        return d.back().value;
    }
    // Root of g(v) = kappa E[(X-v)+] - (1-kappa) E[(v-X)+], decreasing in v.
    auto g = [&](double v) {
        double up = 0.0, dn = 0.0;
        for (const auto& x : d) {
            if (x.value > v) up += x.weight * (x.value - v);
            else dn += x.weight * (v - x.value);
        }
        return (kappa * up - (1.0 - kappa) * dn) / wsum;
    };
    double lo = d.front().value, hi = d.back().value;
    if (hi - lo <= 0.0) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace aclab
