// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "aclab/chainfork.hpp"
#include "aclab/counterexamples.hpp"
#include "aclab/harness.hpp"
#include "aclab/random_instances.hpp"

using namespace aclab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kTightTol = 1e-9;
const double kGammas[] = {0.8, 0.9, 0.95};
const int kHs[] = {2, 3, 4};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failures for one criterion; `notes` are printed under its summary line.
struct Tally {
    long checks = 0;
    long failures = 0;
    double worst_err = 0.0;
    double slowest = 0.0;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (!ok) {
            ++failures;
            if (notes.size() < 5) notes.push_back(what);
        }
    }
};

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

std::string cell(const Params& p) {
    std::ostringstream os;
    for (const auto& [k, v] : p) os << k << '=' << v << ' ';
    return os.str();
}

// A tightness cell: the check passes (side conditions included), matches the inline closed form and runs in < 1 s.
void tight(Tally& t, const std::string& name, const Params& p, double closed_form) {
    const auto t0 = Clock::now();
    try {
        const TheoremCheck c = verify(name, p);
        const double dt = seconds_since(t0);
        const double err = std::abs(c.actual_value - closed_form);
        t.worst_err = std::max(t.worst_err, err);
        t.slowest = std::max(t.slowest, dt);
        std::string why = name + " " + cell(p);
        for (const auto& s : c.side_failures) why += "[" + s + "] ";
        t.expect(c.pass, why + "check failed, actual " + fmt(c.actual_value) + " bound " + fmt(c.bound_value));
        t.expect(err <= kTightTol, why + "differs from closed form by " + fmt(err));
        t.expect(dt < 1.0, why + "took " + fmt(dt) + " s");
    } catch (const std::exception& e) {
        t.expect(false, name + " " + cell(p) + "threw: " + e.what());
    }
}

double bias_closed_form(double g, int h, double eps) { return g * eps / ((1 - g) * (1 - (1 - eps) * std::pow(g, h))); }

void crit_1a(Tally& t) {
    for (double g : kGammas)
        for (int h : kHs)
            for (double eps : {0.1, 0.3, 0.5})
                for (double flip : {0.0, 1.0})
                    tight(t, "ac_value_bias_tight", {{"gamma", g}, {"h", h}, {"eps", eps}, {"flip", flip}},
                          bias_closed_form(g, h, eps));
}

void crit_1b(Tally& t) {
    for (double g : kGammas)
        for (int h : kHs)
            for (double eps : {0.1, 0.3, 0.5})
                tight(t, "ac_optgap_tight", {{"gamma", g}, {"h", h}, {"eps", eps}}, bias_closed_form(g, h, eps));
}

void crit_1c(Tally& t) {
    for (double g : kGammas)
        for (int h : kHs)
            for (double c : {0.1, 0.3}) tight(t, "weak_olc_failure", {{"gamma", g}, {"h", h}, {"c", c}}, c * g / (1 - g));
}

void crit_1d(Tally& t) {
    for (double g : kGammas)
        for (int h : kHs) {
            const double eps = 0.25 * (1 - std::pow(g, h - 1));
            tight(t, "strong_olc_tight", {{"gamma", g}, {"h", h}}, strong_two_term(g, h, eps, 0.2 * eps, 0.5 * eps * g));
            // c1, c2 -> 0: the gap must rise monotonically toward the three-term bound.
            const double three = strong_three_term(g, h, eps);
            double prev = -1.0;
            for (double s : {0.8, 0.4, 0.1, 0.01}) {
                const Params p{{"gamma", g}, {"h", h}, {"eps", eps}, {"c1", s * 0.2 * eps}, {"c2", s * 0.5 * eps * g}};
                tight(t, "strong_olc_tight", p, strong_two_term(g, h, eps, s * 0.2 * eps, s * 0.5 * eps * g));
                const double gap = verify("strong_olc_tight", p).actual_value;
                t.expect(gap > prev, "strong gap not increasing at " + cell(p));
                t.expect(gap <= three + kTightTol, "strong gap above the three-term bound at " + cell(p));
                prev = gap;
            }
            t.expect(three - prev <= 0.05 * three,
                     "gap " + fmt(prev) + " not within 5% of the three-term bound " + fmt(three) + " at gamma=" + fmt(g) + " h=" + std::to_string(h));
        }
}

void crit_1e(Tally& t) {
    for (double g : kGammas)
        for (int n : kHs) {
            const double dt = 0.5 * (g - std::pow(g, n));
            for (double frac : {0.1, 0.5, 0.9}) {
                const double sigma = frac * dt / (1 - g);
                tight(t, "nstep_worstcase", {{"gamma", g}, {"n", n}, {"delta_tilde", dt}, {"sigma", sigma}}, dt / (1 - g) - sigma);
            }
        }
}

void crit_1f(Tally& t) {
    for (double g : kGammas)
        for (int h : kHs) {
            const double gh = std::pow(g, h);
            const double tl = 0.08 * (1 - gh), tg = 0.04 * (1 - gh);
            const double bov = tl / (1 - g) + (tg + gh * std::min(tl, tg)) / ((1 - g) * (1 - gh));
            for (double c : {0.0, 0.05, 0.1})
                for (double frac : {0.25, 0.75}) {
                    const double sigma = frac * std::min(tl, tg) / (1 - g);
                    const Params p{{"gamma", g}, {"h", h}, {"c", c}, {"sigma", sigma}};
                    // The ac-gap lower bound is a side condition of the check.
                    tight(t, "bounded_ov_tight", p, bov - sigma);
                }
        }
}

std::vector<ResultRow> run_sweep(const std::string& check, long count, Params fixed = {}) {
    SweepConfig cfg;
    cfg.seed = 20240601;
    SweepRun run;
    run.check = check;
    std::vector<double> idx;
    for (long i = 0; i < count; ++i) idx.push_back(static_cast<double>(i));
    run.grid = {{"index", idx}};
    run.fixed = std::move(fixed);
    cfg.runs.push_back(run);
    SweepOptions opt;
    opt.workers = omp_get_max_threads();
    return sweep(cfg, opt);
}

void crit_2(Tally& t) {
    const auto t0 = Clock::now();
    for (const char* name : {"ac_value_bias_bound", "strong_olc_bound", "closedloop_strong_bound", "bounded_ov_bound",
                             "shortcut_free_bound", "nstep_comparison", "nstep_lemma_bound"}) {
        const auto rows = run_sweep(name, 200);
        t.expect(rows.size() == 200, std::string(name) + ": expected 200 rows");
        for (const auto& r : rows) {
            ++t.checks;
            if (!r.pass) {
                ++t.failures;
                if (t.notes.size() < 5)
                    t.notes.push_back(std::string(name) + " cell " + std::to_string(r.cell) + (r.error.empty() ? "" : ": " + r.error));
            }
        }
    }
    const double dt = seconds_since(t0);
    t.slowest = dt;
    t.expect(dt <= 300.0, "sweep took " + fmt(dt) + " s");
}

void crit_3(Tally& t) {
    for (double eps : {0.05, 0.1, 0.2})
        for (int h : kHs) {
            const auto rows = run_sweep("eps_det_implies_weak_olc", 100, {{"eps", eps}, {"h", h}});
            t.expect(rows.size() == 100, "expected 100 rows");
            for (const auto& r : rows) {
                const double bound = 3 * (1 - std::pow(1 - eps, h - 1));
                t.expect(r.pass, "eps=" + fmt(eps) + " h=" + std::to_string(h) + " cell " + std::to_string(r.cell) + " " + r.error);
                if (r.metrics.count("bound"))
                    t.expect(std::abs(r.metrics.at("bound") - bound) < 1e-12, "bound mismatch at cell " + std::to_string(r.cell));
            }
        }
}

void crit_4(Tally& t) {
    Rng rng(4242);
    for (int i = 0; i < 1000; ++i) {
        const int k = 1 + static_cast<int>(rng() % 12);
        std::vector<WeightedValue> d;
        double total = 0.0, pmin = 1.0, vmax = -1e300;
        for (int j = 0; j < k; ++j) d.push_back({20.0 * uniform01(rng) - 10.0, 0.05 + uniform01(rng)});
        for (const auto& x : d) total += x.weight;
        double mean = 0.0;
        for (auto& x : d) {
            x.weight /= total;
            mean += x.weight * x.value;
            pmin = std::min(pmin, x.weight);
            vmax = std::max(vmax, x.value);
        }
        const double e = implicit_stat(d, StatKind::expectile, 0.5);
        t.worst_err = std::max(t.worst_err, std::abs(e - mean));
        t.expect(std::abs(e - mean) <= 1e-12, "expectile(0.5) != mean on distribution " + std::to_string(i));
        // Open interval (1 - p_min, 1), intersected with the valid range [0.5, 1).
        // At kappa = 1 - p_min exactly the CDF quantile is the second-largest value.
        const double lo = std::max(0.5, 1 - pmin);
        const double kappa = lo + (0.01 + 0.98 * uniform01(rng)) * (1 - lo);
        t.expect(implicit_stat(d, StatKind::quantile, kappa) == vmax, "quantile != max on distribution " + std::to_string(i));
    }
}

double residual(const std::vector<double>& a, const std::vector<double>& b, const std::vector<char>& mask) {
    double r = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        if (mask[i]) r = std::max(r, std::abs(a[i] - b[i]));
    return r;
}

void crit_5(Tally& t) {
    std::vector<RandomInstance> insts;
    for (std::uint64_t i = 0; i < 20; ++i) insts.push_back(random_instance(derive_seed(5150, i)));

    for (size_t i = 0; i < insts.size(); ++i) {
        const auto& in = insts[i];
        const Mdp& m = in.mdp;
        const DataModel model = build_data_model(m, in.data, in.h);
        std::vector<double> out(static_cast<size_t>(m.num_states), 0.0);
        const std::string tag = "instance " + std::to_string(i) + ": ";

        const OptimalSolution opt = solve_optimal(m);
        optimal_backup(m, opt.v.v, out);
        double r = residual(out, opt.v.v, opt.v.defined);
        t.worst_err = std::max(t.worst_err, r);
        t.expect(r < 1e-11, tag + "optimal residual " + fmt(r));

        const ValueTable vb = behavior_chunk_value(m, model);
        behavior_backup(m, model, vb.v, out);
        r = residual(out, vb.v, vb.defined);
        t.worst_err = std::max(t.worst_err, r);
        t.expect(r < 1e-11, tag + "behavior residual " + fmt(r));

        const ChunkSolution plus = chunk_q_optimality(m, model);
        chunk_opt_backup(m, model, plus.v.v, out);
        r = residual(out, plus.v.v, plus.v.defined);
        t.worst_err = std::max(t.worst_err, r);
        t.expect(r < 1e-11, tag + "chunk-optimal residual " + fmt(r));

        const NStepSolution ns = nstep_uncorrected_q(m, model);
        nstep_backup(m, model, ns.v.v, out);
        r = residual(out, ns.v.v, ns.v.defined);
        t.worst_err = std::max(t.worst_err, r);
        t.expect(r < 1e-11, tag + "n-step residual " + fmt(r));
    }

    std::vector<std::string> mc_fail(insts.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(insts.size()); ++i) {
        const auto& in = insts[static_cast<size_t>(i)];
        const ChunkSolution plus = chunk_q_optimality(in.mdp, build_data_model(in.mdp, in.data, in.h));
        const int s0 = 0;
        const double exact = eval_ac_policy_openloop(in.mdp, plus.policy, {s0}).at(s0);
        const McEstimate mc = monte_carlo_value(in.mdp, s0, chunk_openloop_rollout_policy(plus.policy.choice, in.mdp.num_actions, in.h),
                                                100000, derive_seed(77, static_cast<std::uint64_t>(i)));
        if (!(std::abs(mc.mean - exact) <= 3.0 * mc.std_error))
            mc_fail[static_cast<size_t>(i)] = "instance " + std::to_string(i) + ": MC " + fmt(mc.mean) + " vs exact " + fmt(exact) +
                                              " (se " + fmt(mc.std_error) + ")";
    }
    for (const auto& f : mc_fail) t.expect(f.empty(), f);
}

void crit_6(Tally& t) {
    const ChainFork cf = make_chainfork();
    const int s0 = cf.start_state;
    const double vstar = solve_optimal(cf.mdp).v.at(s0);
    const double range = vstar;  // rewards are nonnegative, so the minimum value is 0
    const auto t0 = Clock::now();

    auto cfg_for = [](Variant v, int h, int h_a, double lam) {
        AgentConfig c;
        c.variant = v;
        c.h = h;
        c.h_a = h_a;
        c.n = h;
        c.kappa_b = 0.9;
        c.kappa_d = 0.8;
        c.target_rate = lam;
        return c;
    };

    // Common fixed budget.
    const double dqc = run_variant(cf.mdp, cf.data, cfg_for(Variant::DQC, 4, 1, 5e-3), 500).report.eval_value;
    const double ns = run_variant(cf.mdp, cf.data, cfg_for(Variant::NS, 4, 1, 5e-3), 500).report.eval_value;
    const double os = run_variant(cf.mdp, cf.data, cfg_for(Variant::OS, 1, 1, 5e-3), 500).report.eval_value;
    t.notes.push_back("budget: DQC " + fmt(dqc) + " NS " + fmt(ns) + " OS " + fmt(os));
    t.expect(dqc >= ns - kTightTol, "DQC < NS at the fixed budget");
    t.expect(ns >= os - kTightTol, "NS < OS at the fixed budget");
    t.expect(dqc - os >= 0.05 * range, "DQC - OS below 5% of the value range at the fixed budget");

    // Converged at lambda = 1.
    const RunResult dqc_c = run_variant(cf.mdp, cf.data, cfg_for(Variant::DQC, 4, 1, 1.0), 1000000);
    const RunResult ns_c = run_variant(cf.mdp, cf.data, cfg_for(Variant::NS, 4, 1, 1.0), 1000000);
    t.expect(dqc_c.report.converged && ns_c.report.converged, "lambda = 1 runs did not converge");
    t.expect(dqc_c.report.eval_value >= ns_c.report.eval_value - kTightTol, "converged DQC < NS");
    t.notes.push_back("converged: DQC " + fmt(dqc_c.report.eval_value) + " NS " + fmt(ns_c.report.eval_value));

    // Degeneracy: DQC(h = h_a, kappa_d = 0.5) and QC share the critic fixed point.
    AgentConfig d = cfg_for(Variant::DQC, 4, 4, 1.0);
    d.kappa_d = 0.5;
    AgentConfig q = d;
    q.variant = Variant::QC;
    const RunResult a = run_variant(cf.mdp, cf.data, d, 1000000), b = run_variant(cf.mdp, cf.data, q, 1000000);
    double diff = 0.0;
    bool same_keys = a.state.q_chunk.q.size() == b.state.q_chunk.q.size();
    for (size_t s = 0; same_keys && s < a.state.q_chunk.q.size(); ++s) {
        same_keys = a.state.q_chunk.q[s].size() == b.state.q_chunk.q[s].size();
        for (const auto& [c, x] : a.state.q_chunk.q[s]) {
            const auto it = b.state.q_chunk.q[s].find(c);
            if (it == b.state.q_chunk.q[s].end()) same_keys = false;
            else diff = std::max(diff, std::abs(x - it->second));
        }
    }
    t.worst_err = diff;
    t.expect(same_keys && a.report.converged && b.report.converged, "degeneracy runs differ in keys or did not converge");
    t.expect(diff <= 1e-9, "DQC vs QC critic max difference " + fmt(diff));
    t.slowest = seconds_since(t0);
    t.expect(t.slowest <= 30.0, "took " + fmt(t.slowest) + " s");
}

// ---- criterion 7: repeated CLI invocations --------------------------------------------------

int sh(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

void compare_trees(Tally& t, const fs::path& a, const fs::path& b, const std::string& what) {
    long files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        const fs::path other = b / rel;
        ++files;
        t.expect(fs::exists(other) && read_text_file(e.path().string()) == read_text_file(other.string()),
                 what + ": " + rel.string() + " differs");
    }
    t.expect(files > 0, what + ": produced no files");
}

void crit_7(Tally& t) {
    const std::string cli = ACLAB_CLI;
    const fs::path work = fs::temp_directory_path() / ("aclab_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    write_text_file((work / "sweep.json").string(), R"({"seed": 11, "runs": [
        {"check": "strong_olc_bound", "grid": {"index": {"range": [0, 16]}}},
        {"check": "ac_value_bias_tight", "grid": {"gamma": [0.8, 0.9], "h": [2, 3]}},
        {"check": "dqc", "grid": {"variant": [0, 2]}, "params": {"iters": 300, "target_rate": 0.05}}]})");
    write_text_file((work / "train.json").string(),
                    R"({"agent": {"mode": "sampled", "dataset_size": 2000, "eval_every": 50, "mc_rollouts": 2000}, "iters": 400})");

    for (const std::string run : {"r1", "r2"}) {
        const fs::path d = work / run;
        fs::create_directories(d);
        const std::string w = run == "r1" ? "1" : "4";  // results must not depend on the worker count
        const std::string D = d.string();
        t.expect(sh(cli + " --seed 9 verify strong_olc_bound --param index=3 --out " + D + "/verify.json") == 0, run + " verify");
        t.expect(sh(cli + " --seed 9 --workers " + w + " sweep " + (work / "sweep.json").string() + " --out " + D +
                    "/sweep.jsonl --table " + D + "/table.json") == 0,
                 run + " sweep");
        t.expect(sh(cli + " --format csv export " + D + "/sweep.jsonl --out " + D + "/table.csv") == 0, run + " export");
        t.expect(sh(cli + " gen strong_worstcase --param gamma=0.9 --param h=3 --out " + D + "/gen") == 0, run + " gen");
        t.expect(sh(cli + " solve " + D + "/gen/mdp.json " + D + "/gen/data_D.json --backup nstep --n 3 --out " + D +
                    "/solve.json") == 0,
                 run + " solve");
        t.expect(sh(cli + " --seed 9 --workers " + w + " dqc-train " + (work / "train.json").string() + " --out " + D + "/train") == 0,
                 run + " dqc-train");
    }
    compare_trees(t, work / "r1", work / "r2", "repeat");
    fs::remove_all(work);
}

}  // namespace

int main(int argc, char** argv) {
    // Optional arguments select criteria by id, e.g. `acceptance 1a 6`.
    const std::vector<std::string> only(argv + 1, argv + argc);
    struct Criterion {
        const char* id;
        const char* title;
        std::function<void(Tally&)> run;
    };
    const std::vector<Criterion> criteria = {
        {"1a", "value-bias tightness, both signs", crit_1a},
        {"1b", "AC optimality-gap tightness", crit_1b},
        {"1c", "weak-OLC failure gap c gamma/(1-gamma)", crit_1c},
        {"1d", "strong worst case two-term gap and three-term limit", crit_1d},
        {"1e", "n-step worst case gap and V* = V+_ac", crit_1e},
        {"1f", "castle/flower closed-loop gap and AC gap floor", crit_1f},
        {"2", "universal-bound sweep, 200 instances per bound", crit_2},
        {"3", "eps-deterministic MDPs satisfy the weak-OLC bound", crit_3},
        {"4", "implicit statistics: expectile(0.5) = mean, quantile = max", crit_4},
        {"5", "fixed-point residuals and Monte Carlo agreement", crit_5},
        {"6", "DQC directional ordering and QC degeneracy on ChainFork", crit_6},
        {"7", "CLI determinism", crit_7},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Tally t;
        const auto t0 = Clock::now();
        try {
            c.run(t);
        } catch (const std::exception& e) {
            t.expect(false, std::string("threw: ") + e.what());
        }
        const bool ok = t.failures == 0 && t.checks > 0;
        failed += ok ? 0 : 1;
        std::cout << (ok ? "PASS " : "FAIL ") << c.id << "  " << c.title << "  [" << t.checks - t.failures << "/" << t.checks
                  << " checks, max err " << fmt(t.worst_err) << ", " << fmt(seconds_since(t0)) << " s]\n";
        for (const auto& n : t.notes) std::cout << "       " << n << "\n";
        std::cout.flush();
    }
    std::cout << (failed == 0 ? "ALL CRITERIA PASS" : std::to_string(failed) + " CRITERIA FAILED") << "\n";
    return failed == 0 ? 0 : 1;
}
