#pragma once

// Scenario presets and drivers that regenerate each figure and table as a ResultTable.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "dimer/dynamics.hpp"
#include "dimer/model.hpp"

namespace dimer {

inline constexpr const char* kEngineVersion = "0.1.0";

enum class ScenarioId {
    Fig2SchemeComparison,
    Fig3Robustness,
    TqdComparison,
    HextraChirality,
    HextraDriveNeglect,
    SpontaneousEmission,
    DetuningPatterns,
    MultimerN6,
};

const char* to_string(ScenarioId id);
ScenarioId scenario_from_string(const std::string& name);
std::vector<ScenarioId> all_scenarios();

using Cell = std::variant<double, std::string>;

struct ResultTable {
    std::string scenario;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::map<std::string, std::string> metadata;

    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
    const std::string& text(std::size_t row, const std::string& name) const;
    void add_row(std::vector<Cell> row);
    // Appends every row of `other` (same columns required).
    void append(const ResultTable& other);
    // Rows whose text column `name` equals `value`.
    std::vector<std::size_t> select(const std::string& name, const std::string& value) const;
};

// Aggregate checks over every trajectory a scenario integrated.
struct InvariantLedger {
    double max_trace_drift = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 1.0;
    std::size_t trajectories = 0;

    void absorb(const Trajectory& traj);
    void merge(const InvariantLedger& other);
};

// Union of every scenario's knobs. `preset` fills the values each scenario uses; the rest
// stay at their defaults and are ignored.
struct ScenarioConfig {
    ScenarioId id = ScenarioId::Fig2SchemeComparison;

    int n_qubits = 8;
    double theta_k = 10.0;
    double slope = 25.0;            // m
    double saturation_time = 1.0;   // t_f
    double omega = 25.0;            // time-independent drive
    double delta_gamma = 0.0;
    double gamma_f = 0.0;
    NoiseConfig noise;

    double t_end = 3.0;
    double dt = 0.01;
    std::size_t sample_every = 5;
    double max_step_norm = 0.025;
    unsigned threads = 1;

    // Sweep axes (empty axes fall back to the single scalar above).
    std::vector<double> slopes;
    std::vector<double> eta1_grid;
    std::vector<double> eta2_grid;
    std::vector<double> k_values;
    std::vector<double> gamma_f_values;
    std::vector<int> n_values;

    // Per-qubit detuning patterns.
    std::vector<double> pattern_a;
    std::vector<double> pattern_b;

    // Long-time horizon for "steady" values taken from trajectories.
    double steady_tolerance = 1e-6;
    double steady_cap = 200.0;
    double max_c_horizon = 20.0;     // time-independent transient search window
    std::size_t coarse_sample_every = 10;  // sampling for long transient searches
    bool include_n8_steady = false;  // long relaxation; off by default

    static ScenarioConfig preset(ScenarioId id);
};

struct ScenarioResult {
    ResultTable table;
    InvariantLedger invariants;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

ScenarioResult run_scheme_comparison(const ScenarioConfig& config);
ScenarioResult run_robustness_sweep(const ScenarioConfig& config);
ScenarioResult run_tqd_comparison(const ScenarioConfig& config);
ScenarioResult run_hextra_approximation_studies(const ScenarioConfig& config);
ScenarioResult run_spontaneous_emission_study(const ScenarioConfig& config);
ScenarioResult run_detuning_study(const ScenarioConfig& config);
ScenarioResult run_multimer_n6(const ScenarioConfig& config);

// Per-qubit detunings for the time-independent comparison: pair p gets +-(base + step (p - 1)).
std::vector<double> paired_detunings(int n_qubits, double base, double step);

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

// Runs `count` independent jobs on up to `threads` workers; job i writes only slot i.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job);

} // namespace dimer
