#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aclab/io.hpp"

namespace aclab {

using Params = std::map<std::string, double>;

enum class Relation { leq, geq, eq_within };
std::string relation_name(Relation r);

struct TheoremCheck {
    std::string name;
    Params params;
    double bound_value = 0.0;
    double actual_value = 0.0;
    Relation relation = Relation::leq;
    double tolerance = 1e-9;
    bool pass = false;
    json witnesses = json::object();
    std::vector<std::string> side_failures;  // auxiliary conditions of the check that did not hold

    void decide();  // pass = relation holds at tolerance and no side condition failed
};
json check_to_json(const TheoremCheck& c);

// Registered check names, in canonical order.
const std::vector<std::string>& check_names();
// Throws Error for unknown names and ConstraintError for generator parameter violations.
TheoremCheck verify(const std::string& name, const Params& params);

// ---- sweeps ---------------------------------------------------------------------

struct ResultRow {
    long cell = 0;
    std::string check;
    Params params;
    std::map<std::string, double> metrics;
    bool pass = true;
    std::string error;  // set when the cell raised instead of producing a result
};
json row_to_json(const ResultRow& r);
ResultRow row_from_json(const json& j);

struct SweepRun {
    std::string check;  // a registered check name or "dqc"
    std::vector<std::pair<std::string, std::vector<double>>> grid;  // axes in canonical (sorted) order
    Params fixed;
};
struct SweepConfig {
    std::vector<SweepRun> runs;
    std::uint64_t seed = 0;  // placed into every cell as param "seed" unless the cell sets it
};
SweepConfig parse_sweep_config(const json& j);

// Cells in canonical order: runs in file order, grid product with the last axis fastest.
struct SweepCell {
    long index = 0;
    std::string check;
    Params params;
};
std::vector<SweepCell> expand_cells(const SweepConfig& cfg);

ResultRow run_cell(const SweepCell& cell);

struct SweepOptions {
    int workers = 1;
    std::string out_path;        // JSON-lines results, appended in cell order; empty = in-memory only
    std::string violation_dir;   // failing bound cells dump their instance here when set
    std::function<void(const ResultRow&)> on_row;
};
// Resumes from the rows already present in out_path.
std::vector<ResultRow> sweep(const SweepConfig& cfg, const SweepOptions& opt);
std::vector<ResultRow> load_rows_jsonl(const std::string& path);

// Long format: one metric per row.
std::string export_csv(const std::vector<ResultRow>& rows);
std::string export_json(const std::vector<ResultRow>& rows);
std::vector<ResultRow> rows_from_export_json(const json& j);

// Full instance behind a random bound check, for triage dumps.
json check_instance(const std::string& name, const Params& params);

}  // namespace aclab
