// Command-line front end for checks, sweeps, generators, solvers and agent runs.
// Exit codes: 0 pass, 1 check failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include "aclab/chainfork.hpp"
#include "aclab/counterexamples.hpp"
#include "aclab/harness.hpp"
#include "aclab/io.hpp"

namespace fs = std::filesystem;
using namespace aclab;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    int workers = 1;
    std::string format = "json";
};

Params parse_params(const std::vector<std::string>& kvs) {
    Params p;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw Error("--param expects k=v, got '" + kv + "'");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(val, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != val.size() || val.empty()) throw Error("--param " + key + ": '" + val + "' is not a number");
        p[key] = x;
    }
    return p;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) std::cout << text;
    else write_text_file(out_path, text);
}

std::string check_csv(const TheoremCheck& c) {
    std::string params;
    for (const auto& [k, v] : c.params) params += (params.empty() ? "" : ";") + k + "=" + format_number(v);
    return "name,params,relation,bound_value,actual_value,tolerance,pass\n" + c.name + "," + params + "," +
           relation_name(c.relation) + "," + format_number(c.bound_value) + "," + format_number(c.actual_value) + "," +
           format_number(c.tolerance) + "," + (c.pass ? "1" : "0") + "\n";
}

int cmd_verify(const Globals& g, const std::string& name, const std::vector<std::string>& kvs, const std::string& out) {
    Params p = parse_params(kvs);
    if (g.seed && !p.count("seed")) p["seed"] = static_cast<double>(*g.seed);
    if (g.tol && !p.count("tol")) p["tol"] = *g.tol;
    const TheoremCheck c = verify(name, p);
    emit(out, g.format == "csv" ? check_csv(c) : check_to_json(c).dump(2) + "\n");
    return c.pass ? 0 : 1;
}

int cmd_sweep(const Globals& g, const std::string& config, const std::string& out, const std::string& violations,
              const std::string& table) {
    SweepConfig cfg = parse_sweep_config(read_json_file(config));
    if (g.seed) cfg.seed = *g.seed;
    if (g.tol)
        for (auto& r : cfg.runs) r.fixed.emplace("tol", *g.tol);
    SweepOptions opt;
    opt.workers = g.workers;
    opt.out_path = out;
    opt.violation_dir = violations;
    long failed = 0;
    opt.on_row = [&](const ResultRow& r) { failed += r.pass ? 0 : 1; };
    const auto rows = sweep(cfg, opt);
    const std::string text = g.format == "csv" ? export_csv(rows) : export_json(rows);
    if (!table.empty()) write_text_file(table, text);
    else if (out.empty()) std::cout << text;
    std::cerr << rows.size() << " cells, " << failed << " failed\n";
    return failed == 0 ? 0 : 1;
}

int cmd_gen(const std::string& name, const std::vector<std::string>& kvs, const std::string& out) {
    const GenOutput gen = generate(name, parse_params(kvs));
    const fs::path dir(out);
    write_text_file((dir / "mdp.json").string(), mdp_to_json(gen.mdp).dump(2) + "\n");
    for (const auto& [key, d] : gen.data) write_text_file((dir / ("data_" + key + ".json")).string(), data_to_json(d).dump(2) + "\n");
    json meta{{"generator", gen.name},       {"params", gen.params},           {"h", gen.h},
              {"start_state", gen.start_state}, {"state_names", gen.state_names}, {"expected", gen.expected},
              {"formulas", gen.formulas}};
    write_text_file((dir / "expected.json").string(), meta.dump(2) + "\n");
    return 0;
}

int cmd_solve(const Globals& g, const std::string& mdp_path, const std::string& data_path, const std::string& backup,
              int h, int n, const std::string& out) {
    const Mdp m = mdp_from_json(read_json_file(mdp_path));
    const DataDist data = data_from_json(read_json_file(data_path), m.num_states, m.num_actions);
    SolveOptions so;
    if (g.tol) so.tolerance = *g.tol;
    const bool csv = g.format == "csv";
    if (backup == "one_step" || backup == "nstep") {
        const int len = backup == "one_step" ? 1 : n;
        const NStepSolution ns = nstep_uncorrected_q(m, build_data_model(m, data, len), so);
        json j = value_table_to_json(ns.v);
        j["backup"] = backup;
        j["n"] = len;
        j["policy"] = policy_to_json(ns.policy);
        emit(out, csv ? value_table_csv(ns.v) : j.dump(2) + "\n");
    } else if (backup == "chunk") {
        const ValueTable v = behavior_chunk_value(m, build_data_model(m, data, h), so);
        json j = value_table_to_json(v);
        j["backup"] = backup;
        j["h"] = h;
        emit(out, csv ? value_table_csv(v) : j.dump(2) + "\n");
    } else {
        const ChunkSolution cs = chunk_q_optimality(m, build_data_model(m, data, h), so);
        json j = value_table_to_json(cs.v);
        j["backup"] = backup;
        j["h"] = h;
        j["q"] = chunk_q_to_json(cs.q);
        j["policy"] = policy_to_json(cs.policy);
        emit(out, csv ? chunk_q_csv(cs.q) : j.dump(2) + "\n");
    }
    return 0;
}

// Config: {"agent": {...}, "iters": N, "env": "chainfork" | {"mdp": path, "data": path}, "out": dir}
int cmd_dqc_train(const Globals& g, const std::string& config_path, std::string out) {
    const json cfg = read_json_file(config_path);
    if (!cfg.is_object()) throw Error("dqc-train config must be an object");
    for (const auto& [k, v] : cfg.items())
        if (k != "agent" && k != "iters" && k != "env" && k != "out") throw Error("unknown dqc-train key '" + k + "'");
    AgentConfig agent = agent_config_from_json(cfg.value("agent", json::object()));
    if (g.seed) agent.seed = *g.seed;
    if (g.tol) agent.tolerance = *g.tol;
    const long iters = cfg.value("iters", 100000L);
    if (iters < 1) throw Error("iters must be positive");
    Mdp m;
    DataDist data;
    const json env = cfg.value("env", json("chainfork"));
    if (env.is_string() && env.get<std::string>() == "chainfork") {
        ChainFork cf = make_chainfork();
        m = cf.mdp;
        data = cf.data;
        if (!cfg.contains("agent") || !cfg.at("agent").contains("eval_state")) agent.eval_state = cf.start_state;
    } else if (env.is_object()) {
        const fs::path base = fs::path(config_path).parent_path();
        m = mdp_from_json(read_json_file((base / env.at("mdp").get<std::string>()).string()));
        data = data_from_json(read_json_file((base / env.at("data").get<std::string>()).string()), m.num_states, m.num_actions);
    } else {
        throw Error("env must be \"chainfork\" or {\"mdp\", \"data\"}");
    }
    if (out.empty()) out = cfg.value("out", std::string());
    if (out.empty()) throw Error("dqc-train needs an output directory (--out or \"out\")");
    const RunResult r = run_variant(m, data, agent, iters);
    const fs::path dir(out);

    std::string curve = "iter,residual,eval_value\n";
    for (const auto& pt : r.report.curve)
        curve += std::to_string(pt.iter) + "," + format_number(pt.residual) + "," +
                 (pt.eval_value ? format_number(*pt.eval_value) : std::string()) + "\n";
    write_text_file((dir / "curve.csv").string(), curve);

    json report{{"agent", agent_config_to_json(agent)},
                {"iterations", r.report.iterations},
                {"converged", r.report.converged},
                {"eval_state", agent.eval_state},
                {"eval_value", r.report.eval_value},
                {"policy", policy_to_json(r.report.policy)},
                {"value", value_table_to_json(r.report.value)}};
    if (agent.mc_rollouts > 0)
        report["monte_carlo"] = {{"mean", r.report.mc.mean}, {"std_error", r.report.mc.std_error}, {"rollouts", r.report.mc.rollouts}};
    write_text_file((dir / "report.json").string(), report.dump(2) + "\n");
    const bool csv = g.format == "csv";
    write_text_file((dir / (csv ? "q_chunk.csv" : "q_chunk.json")).string(),
                    csv ? chunk_q_csv(r.state.q_chunk) : chunk_q_to_json(r.state.q_chunk).dump(2) + "\n");
    write_text_file((dir / (csv ? "q_partial.csv" : "q_partial.json")).string(),
                    csv ? chunk_q_csv(r.state.q_partial) : chunk_q_to_json(r.state.q_partial).dump(2) + "\n");
    write_text_file((dir / (csv ? "v.csv" : "v.json")).string(),
                    csv ? value_table_csv(r.state.v) : value_table_to_json(r.state.v).dump(2) + "\n");
    std::cout << variant_name(agent.variant) << " eval_value=" << format_number(r.report.eval_value)
              << " iterations=" << r.report.iterations << "\n";
    return 0;
}

int cmd_export(const Globals& g, const std::string& in, const std::string& out) {
    std::vector<ResultRow> rows;
    if (in.size() > 5 && in.compare(in.size() - 5, 5, ".json") == 0) rows = rows_from_export_json(read_json_file(in));
    else {
        if (!fs::exists(in)) throw Error("no such results file: " + in);
        rows = load_rows_jsonl(in);
    }
    emit(out, g.format == "csv" ? export_csv(rows) : export_json(rows));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aclab: action-chunking value analysis toolkit"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    double tol = 0.0;
    auto* seed_opt = app.add_option("--seed", seed, "Master seed")->check(CLI::NonNegativeNumber);
    auto* tol_opt = app.add_option("--tol", tol, "Numerical tolerance")->check(CLI::PositiveNumber);
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::Range(1, 1024));
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.fallthrough();

    std::string name, out, config, input, violations, table, mdp_path, data_path, backup = "chunk_opt";
    std::vector<std::string> kvs;
    int h = 2, n = 1;

    auto* verify_cmd = app.add_subcommand("verify", "Run one registered check");
    verify_cmd->add_option("name", name, "Check name")->required();
    verify_cmd->add_option("--param", kvs, "k=v parameter")->allow_extra_args(false);
    verify_cmd->add_option("--out", out, "Write the result here instead of stdout");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep");
    sweep_cmd->add_option("config", config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--out", out, "Incremental JSON-lines results (resumable)");
    sweep_cmd->add_option("--table", table, "Long-format table in --format");
    sweep_cmd->add_option("--violations", violations, "Dump failing cells here");

    auto* gen_cmd = app.add_subcommand("gen", "Write a counterexample instance");
    gen_cmd->add_option("name", name, "Generator name")->required();
    gen_cmd->add_option("--param", kvs, "k=v parameter")->allow_extra_args(false);
    gen_cmd->add_option("--out", out, "Output directory")->required();

    auto* solve_cmd = app.add_subcommand("solve", "Solve a fixed point on an MDP and dataset");
    solve_cmd->set_help_flag("--help", "Print this help message and exit");
    solve_cmd->add_option("mdp", mdp_path, "MDP JSON")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("data", data_path, "Data JSON")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--backup", backup, "Backup operator")->check(CLI::IsMember({"one_step", "nstep", "chunk", "chunk_opt"}));
    solve_cmd->add_option("--h", h, "Chunk length")->check(CLI::Range(1, 64));
    solve_cmd->add_option("--n", n, "n-step length")->check(CLI::Range(1, 64));
    solve_cmd->add_option("--out", out, "Write the result here instead of stdout");

    auto* dqc_cmd = app.add_subcommand("dqc-train", "Train a tabular agent variant");
    dqc_cmd->add_option("config", config, "Run config JSON")->required()->check(CLI::ExistingFile);
    dqc_cmd->add_option("--out", out, "Output directory");

    auto* export_cmd = app.add_subcommand("export", "Convert sweep results to a long-format table");
    export_cmd->add_option("results", input, "JSON-lines results or exported JSON")->required();
    export_cmd->add_option("--out", out, "Write the table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (*seed_opt) g.seed = seed;
    if (*tol_opt) g.tol = tol;
    omp_set_num_threads(g.workers);

    try {
        if (*verify_cmd) return cmd_verify(g, name, kvs, out);
        if (*sweep_cmd) return cmd_sweep(g, config, out, violations, table);
        if (*gen_cmd) return cmd_gen(name, kvs, out);
        if (*solve_cmd) return cmd_solve(g, mdp_path, data_path, backup, h, n, out);
        if (*dqc_cmd) return cmd_dqc_train(g, config, out);
        if (*export_cmd) return cmd_export(g, input, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
