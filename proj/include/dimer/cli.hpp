#pragma once

// Configuration parsing, command dispatch and artifact output for the dimer tool.
//
// Config format: flat `key = value` lines under [bath], [drive], [control], [noise], [run].
// `#` starts a comment. Lists are whitespace or comma separated.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dimer/experiments.hpp"
#include "dimer/model.hpp"

namespace dimer::cli {

enum class Command { Evolve, SteadyState, Gap, Qsl, Reproduce };

const char* to_string(Command command);

struct RunConfig {
    Command command = Command::Evolve;
    std::optional<ScenarioId> scenario;

    // [bath]
    double gamma_total = 1.0;
    double delta_gamma = 0.0;
    std::optional<double> gamma_L;
    std::optional<double> gamma_R;
    double gamma_f = 0.0;
    std::vector<double> phases;

    // [drive]
    DriveProtocol::Mode drive_mode = DriveProtocol::Mode::Ramp;
    double slope = 25.0;
    double saturation_time = 1.0;
    double theta_k = 10.0;
    std::optional<double> omega;
    std::vector<double> detunings;

    // [control]
    ControlMode control = ControlMode::LocalPauli;
    std::string target = "dimers";  // dimers | all-pairings | explicit pairs "1-2 3-4"

    // [noise]
    NoiseConfig noise;

    // [run]
    int n_qubits = 2;
    std::optional<double> t_end;
    std::optional<double> dt;
    std::optional<std::size_t> sample_every;
    std::optional<double> max_step_norm;
    unsigned threads = 1;
    std::string output_dir = "out";
    bool plot = false;
    std::string initial = "ground";  // ground | target

    // reproduce overrides
    std::optional<std::vector<double>> slopes;
    std::optional<std::vector<double>> eta1_grid;
    std::optional<std::vector<double>> eta2_grid;
    std::optional<std::vector<double>> k_values;
    std::optional<std::vector<double>> gamma_f_values;
    std::optional<std::vector<int>> n_values;
    std::optional<double> steady_cap;
    std::optional<double> max_c_horizon;
    bool include_n8_steady = false;

    BathConfig bath() const;
    PairingSpec pairing() const;
    DriveProtocol protocol() const;
    // Drive value used by the time-independent commands.
    double frozen_omega() const;
    SystemModel build_model() const;
    ScenarioConfig scenario_config() const;
};

// Throws ParseError (with the 1-based line) on syntax errors, unknown sections or keys,
// invalid enumerations, negative rates and missing required keys.
RunConfig parse_config(const std::string& text);

std::string help_text();

struct Outcome {
    ResultTable table;
    bool contracts_met = true;
    std::vector<std::string> notes;
};

Outcome execute(const RunConfig& config);

std::string to_csv(const ResultTable& table);
ResultTable parse_csv(const std::string& text);
std::string to_svg(const ResultTable& table);
std::string metadata_json(const ResultTable& table, const RunConfig* config);

// Writes <scenario>.csv, <scenario>.json and, with `plot`, <scenario>.svg. Returns the paths.
std::vector<std::filesystem::path> emit_outputs(const ResultTable& table, const std::filesystem::path& dir, bool plot,
                                                const RunConfig* config = nullptr);

} // namespace dimer::cli
