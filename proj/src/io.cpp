#include "aclab/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace aclab {

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

namespace {

template <class T>
T get(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(std::string("field '") + key + "': " + e.what());
    }
}

}  // namespace

json mdp_to_json(const Mdp& m) {
    json t = json::array(), r = json::array();
    for (int s = 0; s < m.num_states; ++s) {
        json ts = json::array(), rs = json::array();
        for (int a = 0; a < m.num_actions; ++a) {
            ts.push_back(m.T(s, a));
            rs.push_back(m.r(s, a));
        }
        t.push_back(std::move(ts));
        r.push_back(std::move(rs));
    }
    return {{"num_states", m.num_states}, {"num_actions", m.num_actions}, {"gamma", m.gamma},
            {"init_dist", m.init_dist},   {"transition", t},              {"reward", r}};
}

Mdp mdp_from_json(const json& j) {
    const int S = get<int>(j, "num_states");
    const int A = get<int>(j, "num_actions");
    if (S < 1 || A < 1) throw Error("MDP needs at least one state and one action");
    Mdp m(S, A, get<double>(j, "gamma"));
    m.init_dist = get<Dist>(j, "init_dist");
    const auto t = get<std::vector<std::vector<Dist>>>(j, "transition");
    const auto r = get<std::vector<std::vector<double>>>(j, "reward");
    if (t.size() != static_cast<size_t>(S) || r.size() != static_cast<size_t>(S)) throw Error("MDP arrays must have num_states rows");
    for (int s = 0; s < S; ++s) {
        if (t[s].size() != static_cast<size_t>(A) || r[s].size() != static_cast<size_t>(A))
            throw Error("MDP arrays must have num_actions entries per state");
        for (int a = 0; a < A; ++a) {
            m.T(s, a) = t[s][a];
            m.r(s, a) = r[s][a];
        }
    }
    require_valid(m);
    return m;
}

json data_to_json(const DataDist& d) {
    json comps = json::array();
    for (const auto& c : d.components) {
        json jc{{"weight", c.weight}};
        if (c.source.kind == BehaviorSource::Kind::phase_cycled_markov) {
            jc["kind"] = "phase_cycled";
            jc["phase_policy"] = c.source.phase_policy;
        } else {
            jc["kind"] = "chunk_table";
            json table = json::array();
            for (const auto& row : c.source.table) {
                json jr = json::array();
                for (const auto& e : row) {
                    json je{{"chunk", e.chunk}, {"prob", e.prob}};
                    if (!e.overrides.empty()) {
                        json ov = json::array();
                        for (const auto& o : e.overrides) ov.push_back({{"prefix", o.prefix}, {"state", o.state}, {"actions", o.actions}});
                        je["overrides"] = ov;
                    }
                    jr.push_back(std::move(je));
                }
                table.push_back(std::move(jr));
            }
            jc["table"] = table;
        }
        comps.push_back(std::move(jc));
    }
    return {{"start_dist", d.start_dist}, {"components", comps}};
}

DataDist data_from_json(const json& j, int num_states, int num_actions) {
    DataDist d;
    d.start_dist = get<Dist>(j, "start_dist");
    for (const auto& jc : get<json>(j, "components")) {
        DataComponent c;
        c.weight = get<double>(jc, "weight");
        const auto kind = get<std::string>(jc, "kind");
        if (kind == "phase_cycled") {
            c.source = BehaviorSource::phase_cycled(get<std::vector<std::vector<Dist>>>(jc, "phase_policy"));
        } else if (kind == "chunk_table") {
            std::vector<std::vector<ChunkTableEntry>> table;
            for (const auto& jr : get<json>(jc, "table")) {
                std::vector<ChunkTableEntry> row;
                for (const auto& je : jr) {
                    ChunkTableEntry e{get<Chunk>(je, "chunk"), get<double>(je, "prob"), {}};
                    if (je.contains("overrides"))
                        for (const auto& o : je.at("overrides"))
                            e.overrides.push_back({get<Chunk>(o, "prefix"), get<int>(o, "state"), get<Dist>(o, "actions")});
                    row.push_back(std::move(e));
                }
                table.push_back(std::move(row));
            }
            c.source = BehaviorSource::chunks(std::move(table));
        } else {
            throw Error("unknown component kind '" + kind + "'");
        }
        d.components.push_back(std::move(c));
    }
    d.validate(num_states, num_actions);
    return d;
}

json value_table_to_json(const ValueTable& v) {
    json states = json::array();
    for (size_t s = 0; s < v.v.size(); ++s)
        if (v.defined[s]) states.push_back({{"state", s}, {"value", v.v[s]}});
    return {{"values", states}, {"iterations", v.report.iterations}, {"residual", v.report.residual}};
}

std::string value_table_csv(const ValueTable& v) {
    std::ostringstream os;
    os << "state,value\n";
    for (size_t s = 0; s < v.v.size(); ++s)
        if (v.defined[s]) os << s << ',' << format_number(v.v[s]) << '\n';
    return os.str();
}

namespace {
std::string chunk_string(ChunkCode c, int A, int h) {
    std::string out;
    for (int a : decode_chunk(c, A, h)) {
        if (!out.empty()) out += ' ';
        out += std::to_string(a);
    }
    return out;
}
}  // namespace

json chunk_q_to_json(const ChunkQTable& q) {
    json rows = json::array();
    for (size_t s = 0; s < q.q.size(); ++s)
        for (const auto& [c, x] : q.q[s]) rows.push_back({{"state", s}, {"chunk", decode_chunk(c, q.num_actions, q.h)}, {"value", x}});
    return {{"h", q.h}, {"num_actions", q.num_actions}, {"q", rows}, {"iterations", q.report.iterations},
            {"residual", q.report.residual}};
}

std::string chunk_q_csv(const ChunkQTable& q) {
    std::ostringstream os;
    os << "state,chunk,value\n";
    for (size_t s = 0; s < q.q.size(); ++s)
        for (const auto& [c, x] : q.q[s]) os << s << ',' << chunk_string(c, q.num_actions, q.h) << ',' << format_number(x) << '\n';
    return os.str();
}

json policy_to_json(const AcPolicy& p) {
    json rows = json::array();
    for (size_t s = 0; s < p.choice.size(); ++s)
        if (p.choice[s] >= 0) rows.push_back({{"state", s}, {"chunk", p.chunk(static_cast<int>(s))}});
    return {{"h", p.h}, {"policy", rows}};
}

json agent_config_to_json(const AgentConfig& c) {
    return {{"h", c.h},
            {"h_a", c.h_a},
            {"n", c.n},
            {"kappa_b", c.kappa_b},
            {"kappa_d", c.kappa_d},
            {"N", c.N},
            {"target_rate", c.target_rate},
            {"learn_rate", c.learn_rate},
            {"batch_size", c.batch_size},
            {"variant", variant_name(c.variant)},
            {"seed", c.seed},
            {"mode", c.mode == TrainMode::population ? "population" : "sampled"},
            {"dataset_size", c.dataset_size},
            {"tolerance", c.tolerance},
            {"eval_state", c.eval_state},
            {"mc_rollouts", c.mc_rollouts},
            {"best_of_n_eval", c.best_of_n_eval},
            {"eval_every", c.eval_every}};
}

AgentConfig agent_config_from_json(const json& j) {
    AgentConfig c;
    for (const auto& [k, v] : j.items()) {
        try {
            if (k == "h") c.h = v.get<int>();
            else if (k == "h_a") c.h_a = v.get<int>();
            else if (k == "n") c.n = v.get<int>();
            else if (k == "kappa_b") c.kappa_b = v.get<double>();
            else if (k == "kappa_d") c.kappa_d = v.get<double>();
            else if (k == "N") c.N = v.get<int>();
            else if (k == "target_rate") c.target_rate = v.get<double>();
            else if (k == "learn_rate") c.learn_rate = v.get<double>();
            else if (k == "batch_size") c.batch_size = v.get<int>();
            else if (k == "variant") c.variant = parse_variant(v.get<std::string>());
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else if (k == "mode") {
                const auto m = v.get<std::string>();
                if (m == "population") c.mode = TrainMode::population;
                else if (m == "sampled") c.mode = TrainMode::sampled;
                else throw Error("unknown mode '" + m + "'");
            } else if (k == "dataset_size") c.dataset_size = v.get<int>();
            else if (k == "tolerance") c.tolerance = v.get<double>();
            else if (k == "eval_state") c.eval_state = v.get<int>();
            else if (k == "mc_rollouts") c.mc_rollouts = v.get<int>();
            else if (k == "best_of_n_eval") c.best_of_n_eval = v.get<bool>();
            else if (k == "eval_every") c.eval_every = v.get<long>();
            else throw Error("unknown agent config key '" + k + "'");
        } catch (const json::exception& e) {
            throw Error("agent config key '" + k + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json_file(const std::string& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

}  // namespace aclab
