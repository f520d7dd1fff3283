#include "dimer/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "dimer/errors.hpp"
#include "dimer/liouville.hpp"
#include "dimer/metrics.hpp"

namespace dimer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Scenario {
    ScenarioId id;
    const char* name;
};

constexpr Scenario kScenarios[] = {
    {ScenarioId::Fig2SchemeComparison, "fig2_scheme_comparison"},
    {ScenarioId::Fig3Robustness, "fig3_robustness"},
    {ScenarioId::TqdComparison, "tqd_comparison"},
    {ScenarioId::HextraChirality, "hextra_chirality"},
    {ScenarioId::HextraDriveNeglect, "hextra_drive_neglect"},
    {ScenarioId::SpontaneousEmission, "spontaneous_emission"},
    {ScenarioId::DetuningPatterns, "detuning_patterns"},
    {ScenarioId::MultimerN6, "multimer_n6"},
};

const std::vector<double> kPatternA{0.25, -0.25, 0.275, -0.275, 0.3, -0.3, 0.325, -0.325};
const std::vector<double> kPatternB{0.300, 0.296, 0.426, 0.405, 0.381, 0.459, 0.292, 0.429};

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }
    return out;
}

// Everything needed to assemble one model.
struct ModelSpec {
    BathConfig bath;
    std::vector<double> deltas;
    DriveProtocol protocol;
    ControlMode control = ControlMode::None;
    PairingSpec pairing;
    NoiseConfig noise;
    int n_qubits = 2;

    SystemModel build() const {
        const TargetState target = target_state(pairing, n_qubits);
        DetuningPattern detunings{deltas.empty() ? std::vector<double>(static_cast<std::size_t>(n_qubits), 0.0) : deltas};
        return SystemModel::assemble(bath, detunings, protocol, control, target, noise, n_qubits);
    }
};

EvolveOptions evolve_options(const ScenarioConfig& config) {
    EvolveOptions options;
    options.max_step_norm = config.max_step_norm;
    options.storage = StoragePolicy::MetricsOnly;
    return options;
}

Trajectory run_from_ground(const SystemModel& model, const ScenarioConfig& config, double t_end,
                           EvolveOptions options) {
    return evolve(model, pure_state(ops::ground_state(model.n_qubits())), t_end, config.dt, config.sample_every,
                  options);
}

std::vector<double> pattern_or(const std::vector<double>& configured, const std::vector<double>& fallback, int n) {
    const auto& p = configured.empty() ? fallback : configured;
    if (p.size() != static_cast<std::size_t>(n)) {
        throw Error(ErrorKind::Shape, "detuning pattern has " + std::to_string(p.size()) + " entries, need " +
                                          std::to_string(n));
    }
    return p;
}

double mean_root_fidelity(const MetricSample& sample) {
    if (sample.singlet_fidelity_per_pair.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (double f : sample.singlet_fidelity_per_pair) {
        sum += std::sqrt(std::max(f, 0.0));
    }
    return sum / static_cast<double>(sample.singlet_fidelity_per_pair.size());
}

void describe(ResultTable& table, const ScenarioConfig& config) {
    auto& md = table.metadata;
    md["scenario"] = to_string(config.id);
    md["engine_version"] = kEngineVersion;
    md["local_pauli_scale"] = format_number(local_pauli_calibration().scale);
    md["local_pauli_z_sign"] = format_number(local_pauli_calibration().z_sign);
    md["n_qubits"] = std::to_string(config.n_qubits);
    md["theta_k"] = format_number(config.theta_k);
    md["slope"] = format_number(config.slope);
    md["saturation_time"] = format_number(config.saturation_time);
    md["omega"] = format_number(config.omega);
    md["delta_gamma"] = format_number(config.delta_gamma);
    md["gamma_f"] = format_number(config.gamma_f);
    md["eta1"] = format_number(config.noise.eta1);
    md["eta2"] = format_number(config.noise.eta2);
    md["t_end"] = format_number(config.t_end);
    md["dt"] = format_number(config.dt);
    md["sample_every"] = std::to_string(config.sample_every);
    md["max_step_norm"] = format_number(config.max_step_norm);
    md["coarse_sample_every"] = std::to_string(config.coarse_sample_every);
    auto join = [](const auto& values) {
        std::string out;
        for (const auto& v : values) {
            if (!out.empty()) {
                out += ' ';
            }
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, int>) {
                out += std::to_string(v);
            } else {
                out += format_number(v);
            }
        }
        return out;
    };
    if (!config.slopes.empty()) md["slopes"] = join(config.slopes);
    if (!config.eta1_grid.empty()) md["eta1_grid"] = join(config.eta1_grid);
    if (!config.eta2_grid.empty()) md["eta2_grid"] = join(config.eta2_grid);
    if (!config.k_values.empty()) md["k_values"] = join(config.k_values);
    if (!config.gamma_f_values.empty()) md["gamma_f_values"] = join(config.gamma_f_values);
    if (!config.n_values.empty()) md["n_values"] = join(config.n_values);
    if (!config.pattern_a.empty()) md["pattern_a"] = join(config.pattern_a);
    if (!config.pattern_b.empty()) md["pattern_b"] = join(config.pattern_b);
}

} // namespace

const char* to_string(ScenarioId id) {
    for (const auto& s : kScenarios) {
        if (s.id == id) {
            return s.name;
        }
    }
    return "unknown";
}

ScenarioId scenario_from_string(const std::string& name) {
    for (const auto& s : kScenarios) {
        if (name == s.name) {
            return s.id;
        }
    }
    throw Error(ErrorKind::Domain, "unknown scenario '" + name + "'");
}

std::vector<ScenarioId> all_scenarios() {
    std::vector<ScenarioId> out;
    for (const auto& s : kScenarios) {
        out.push_back(s.id);
    }
    return out;
}

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::vector<double> paired_detunings(int n_qubits, double base, double step) {
    if (n_qubits % 2 != 0) {
        throw Error(ErrorKind::Parity, "paired detunings need an even qubit count");
    }
    std::vector<double> magnitudes;
    for (int p = 0; p < n_qubits / 2; ++p) {
        magnitudes.push_back(base + step * p);
    }
    return DetuningPattern::alternating(magnitudes).deltas;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
    const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::vector<std::exception_ptr> errors(count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            job(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

// ---- ResultTable ----

std::size_t ResultTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw Error(ErrorKind::Index, "no column '" + name + "' in table " + scenario);
    }
    return static_cast<std::size_t>(it - columns.begin());
}

double ResultTable::number(std::size_t row, const std::string& name) const {
    const Cell& cell = rows.at(row).at(column(name));
    if (const double* v = std::get_if<double>(&cell)) {
        return *v;
    }
    throw Error(ErrorKind::Domain, "column '" + name + "' is not numeric");
}

const std::string& ResultTable::text(std::size_t row, const std::string& name) const {
    const Cell& cell = rows.at(row).at(column(name));
    if (const std::string* v = std::get_if<std::string>(&cell)) {
        return *v;
    }
    throw Error(ErrorKind::Domain, "column '" + name + "' is not text");
}

void ResultTable::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw Error(ErrorKind::Shape, "row has " + std::to_string(row.size()) + " cells, table has " +
                                          std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
}

void ResultTable::append(const ResultTable& other) {
    if (other.columns != columns) {
        throw Error(ErrorKind::Shape, "cannot append tables with different columns");
    }
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

std::vector<std::size_t> ResultTable::select(const std::string& name, const std::string& value) const {
    const std::size_t c = column(name);
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto* v = std::get_if<std::string>(&rows[r][c]);
        if (v && *v == value) {
            out.push_back(r);
        }
    }
    return out;
}

void InvariantLedger::absorb(const Trajectory& traj) {
    max_trace_drift = std::max(max_trace_drift, traj.max_trace_drift);
    max_hermiticity_error = std::max(max_hermiticity_error, traj.max_hermiticity_error);
    min_eigenvalue = std::min(min_eigenvalue, traj.min_eigenvalue);
    ++trajectories;
}

void InvariantLedger::merge(const InvariantLedger& other) {
    max_trace_drift = std::max(max_trace_drift, other.max_trace_drift);
    max_hermiticity_error = std::max(max_hermiticity_error, other.max_hermiticity_error);
    min_eigenvalue = std::min(min_eigenvalue, other.min_eigenvalue);
    trajectories += other.trajectories;
}

// ---- presets ----

ScenarioConfig ScenarioConfig::preset(ScenarioId id) {
    ScenarioConfig c;
    c.id = id;
    switch (id) {
    case ScenarioId::Fig2SchemeComparison:
        c.n_qubits = 8;
        c.slope = 25.0;
        c.omega = 25.0;
        c.delta_gamma = 1.0;
        c.t_end = 3.0;
        c.pattern_a = kPatternA;
        break;
    case ScenarioId::Fig3Robustness:
        c.n_qubits = 8;
        c.delta_gamma = 0.0;
        c.eta1_grid = linspace(0.0, 0.3, 11);
        c.eta2_grid = linspace(0.0, 0.3, 11);
        c.slopes = linspace(1.0, 50.0, 11);
        c.sample_every = 50;
        c.steady_cap = 40.0;
        break;
    case ScenarioId::TqdComparison:
        c.n_qubits = 2;
        c.slopes = {1.0, 10.0};
        c.t_end = 3.0;
        c.sample_every = 1;
        break;
    case ScenarioId::HextraChirality:
        c.n_qubits = 8;
        c.delta_gamma = 1.0;
        c.slopes = {10.0, 50.0};
        c.t_end = 3.0;
        break;
    case ScenarioId::HextraDriveNeglect:
        c.n_qubits = 8;
        c.delta_gamma = 0.0;
        c.slope = 10.0;
        c.k_values = {0.5, 5.0};
        c.t_end = 3.0;
        break;
    case ScenarioId::SpontaneousEmission:
        c.omega = 5.0;
        c.slope = 25.0;
        c.saturation_time = 0.2;
        c.delta_gamma = 0.0;
        c.gamma_f_values = {0.01, 0.1};
        c.n_values = {4, 6, 8};
        c.t_end = 2.0;
        c.max_c_horizon = 20.0;
        c.sample_every = 1;
        break;
    case ScenarioId::DetuningPatterns:
        c.n_qubits = 8;
        c.slope = 5.0;
        c.omega = 5.0;
        c.delta_gamma = 0.0;
        c.t_end = 10.0;
        c.sample_every = 10;
        c.pattern_a = kPatternA;
        c.pattern_b = kPatternB;
        break;
    case ScenarioId::MultimerN6:
        c.n_qubits = 6;
        c.slope = 25.0;
        c.delta_gamma = 0.0;
        c.t_end = 2.0;
        c.sample_every = 1;
        break;
    }
    return c;
}

// ---- scenarios ----

ScenarioResult run_scheme_comparison(const ScenarioConfig& config) {
    const int n = config.n_qubits;
    const auto pairing = PairingSpec::adjacent_dimers(n);
    const auto detuned = pattern_or(config.pattern_a, paired_detunings(n, 0.25, 0.025), n);
    const auto ramp = DriveProtocol::ramp(config.slope, config.saturation_time, config.theta_k);

    struct Entry {
        std::string name;
        ModelSpec spec;
    };
    std::vector<Entry> entries;
    auto bath = [&](double dg) { return BathConfig::from_chirality(1.0, dg, config.gamma_f); };
    entries.push_back({"ours_dg0", {bath(0.0), {}, ramp, ControlMode::LocalPauli, pairing, config.noise, n}});
    entries.push_back({"ours_dg1", {bath(config.delta_gamma), {}, ramp, ControlMode::LocalPauli, pairing, config.noise, n}});
    entries.push_back({"adiabatic", {bath(config.delta_gamma), detuned, ramp, ControlMode::None, pairing, config.noise, n}});
    entries.push_back({"time_independent",
                       {bath(config.delta_gamma), detuned, DriveProtocol::constant(config.omega, config.theta_k),
                        ControlMode::None, pairing, config.noise, n}});

    std::vector<Trajectory> trajs(entries.size());
    parallel_for(entries.size(), config.threads, [&](std::size_t i) {
        trajs[i] = run_from_ground(entries[i].spec.build(), config, config.t_end, evolve_options(config));
    });

    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"t", "scheme", "concurrence_12", "purity_12"};
    describe(out.table, config);
    out.table.metadata["detunings"] = [&] {
        std::string s;
        for (double d : detuned) s += (s.empty() ? "" : " ") + format_number(d);
        return s;
    }();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out.invariants.absorb(trajs[i]);
        for (const auto& sample : trajs[i].samples) {
            out.table.add_row({sample.t, entries[i].name, sample.concurrence_per_pair.at(0), sample.purity_per_pair.at(0)});
        }
    }
    return out;
}

ScenarioResult run_robustness_sweep(const ScenarioConfig& config) {
    const int n = config.n_qubits;
    struct CellSpec {
        std::string axis;
        double eta1;
        double eta2;
        double m;
    };
    std::vector<CellSpec> cells;
    const std::vector<double> slopes = config.slopes.empty() ? std::vector<double>{config.slope} : config.slopes;
    for (double eta : config.eta1_grid) {
        for (double m : slopes) {
            cells.push_back({"eta1", eta, 0.0, m});
        }
    }
    for (double eta : config.eta2_grid) {
        for (double m : slopes) {
            cells.push_back({"eta2", 0.0, eta, m});
        }
    }

    struct CellResult {
        double concurrence = kNaN;
        double t_steady = kNaN;
        double residual = kNaN;
        bool converged = false;
        Trajectory traj;
    };
    std::vector<CellResult> results(cells.size());
    parallel_for(cells.size(), config.threads, [&](std::size_t i) {
        const auto& cell = cells[i];
        ModelSpec spec{BathConfig::from_chirality(1.0, config.delta_gamma, config.gamma_f), {},
                       DriveProtocol::ramp(cell.m, config.saturation_time, config.theta_k), ControlMode::LocalPauli,
                       PairingSpec::adjacent_dimers(n), NoiseConfig{cell.eta1, cell.eta2}, n};
        const SystemModel model = spec.build();
        EvolveOptions options = evolve_options(config);
        double residual = kNaN;
        options.observer = [&](double t, const DensityMatrix& rho) {
            if (t <= config.saturation_time) {
                return true;
            }
            residual = lindblad_rhs(model, rho, t).norm();
            return residual >= config.steady_tolerance;
        };
        CellResult r;
        r.traj = run_from_ground(model, config, config.steady_cap, options);
        r.concurrence = r.traj.samples.back().mean_concurrence();
        r.t_steady = r.traj.times.back();
        r.residual = residual;
        r.converged = residual < config.steady_tolerance;
        r.traj.samples.clear();
        results[i] = std::move(r);
    });

    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"axis", "eta1", "eta2", "m", "concurrence", "log_one_minus_c", "t_steady", "residual",
                         "converged"};
    describe(out.table, config);
    out.table.metadata["steady_tolerance"] = format_number(config.steady_tolerance);
    out.table.metadata["steady_cap"] = format_number(config.steady_cap);
    out.table.metadata["grid_note"] = "axis ranges are configurable defaults";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& r = results[i];
        out.invariants.absorb(r.traj);
        const double gap = 1.0 - r.concurrence;
        out.table.add_row({cells[i].axis, cells[i].eta1, cells[i].eta2, cells[i].m, r.concurrence,
                           gap > 0.0 ? std::log10(gap) : -std::numeric_limits<double>::infinity(), r.t_steady,
                           r.residual, r.converged ? 1.0 : 0.0});
    }
    return out;
}

ScenarioResult run_tqd_comparison(const ScenarioConfig& config) {
    const std::vector<double> slopes = config.slopes.empty() ? std::vector<double>{config.slope} : config.slopes;
    struct Entry {
        std::string name;
        double m;
        ModelSpec spec;
    };
    std::vector<Entry> entries;
    const auto pairing = PairingSpec::adjacent_dimers(2);
    for (double m : slopes) {
        const auto ramp = DriveProtocol::ramp(m, config.saturation_time, config.theta_k);
        entries.push_back({"counterdiabatic", m,
                           {BathConfig::from_chirality(1.0, 1.0, config.gamma_f), {}, ramp, ControlMode::Counterdiabatic,
                            pairing, config.noise, 2}});
        entries.push_back({"ours", m,
                           {BathConfig::from_chirality(1.0, 0.0, config.gamma_f), {}, ramp, ControlMode::LocalPauli,
                            pairing, config.noise, 2}});
    }
    std::vector<Trajectory> trajs(entries.size());
    parallel_for(entries.size(), config.threads, [&](std::size_t i) {
        trajs[i] = run_from_ground(entries[i].spec.build(), config, config.t_end, evolve_options(config));
    });
    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"t", "scheme", "m", "concurrence", "fidelity"};
    describe(out.table, config);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out.invariants.absorb(trajs[i]);
        for (const auto& s : trajs[i].samples) {
            out.table.add_row({s.t, entries[i].name, entries[i].m, s.concurrence_per_pair.at(0), s.fidelity_to_target});
        }
    }
    return out;
}

ScenarioResult run_hextra_approximation_studies(const ScenarioConfig& config) {
    const int n = config.n_qubits;
    const auto pairing = PairingSpec::adjacent_dimers(n);
    struct Entry {
        std::string study;
        ControlMode mode;
        double m;
        double k;
        double dg;
    };
    std::vector<Entry> entries;
    const bool chirality = config.id == ScenarioId::HextraChirality;
    for (ControlMode mode : {ControlMode::ApproximateGenerator, ControlMode::ExactGenerator}) {
        if (chirality) {
            const auto slopes = config.slopes.empty() ? std::vector<double>{config.slope} : config.slopes;
            for (double m : slopes) {
                entries.push_back({"chirality", mode, m, config.theta_k, config.delta_gamma});
            }
        } else {
            const auto ks = config.k_values.empty() ? std::vector<double>{config.theta_k} : config.k_values;
            for (double k : ks) {
                entries.push_back({"drive_neglect", mode, config.slope, k, config.delta_gamma});
            }
        }
    }
    std::vector<Trajectory> trajs(entries.size());
    parallel_for(entries.size(), config.threads, [&](std::size_t i) {
        const auto& e = entries[i];
        ModelSpec spec{BathConfig::from_chirality(1.0, e.dg, config.gamma_f), {},
                       DriveProtocol::ramp(e.m, config.saturation_time, e.k), e.mode, pairing, config.noise, n};
        trajs[i] = run_from_ground(spec.build(), config, config.t_end, evolve_options(config));
    });
    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"t", "study", "mode", "m", "k", "concurrence", "purity", "fidelity"};
    describe(out.table, config);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out.invariants.absorb(trajs[i]);
        for (const auto& s : trajs[i].samples) {
            out.table.add_row({s.t, entries[i].study, std::string(to_string(entries[i].mode)), entries[i].m, entries[i].k,
                               s.mean_concurrence(), s.global_purity, s.fidelity_to_target});
        }
    }
    return out;
}

ScenarioResult run_spontaneous_emission_study(const ScenarioConfig& config) {
    const auto n_values = config.n_values.empty() ? std::vector<int>{config.n_qubits} : config.n_values;
    const auto gf_values = config.gamma_f_values.empty() ? std::vector<double>{config.gamma_f} : config.gamma_f_values;
    struct Entry {
        int n;
        double gf;
        std::string scheme;
    };
    std::vector<Entry> entries;
    for (int n : n_values) {
        for (double gf : gf_values) {
            for (const char* scheme : {"ours", "time_independent_half", "time_independent_small"}) {
                entries.push_back({n, gf, scheme});
            }
        }
    }
    struct Row {
        double steady_c = kNaN;
        double steady_f = kNaN;
        double residual = kNaN;
        std::string method = "none";
        double max_c = kNaN;
        double t_max_c = kNaN;
        InvariantLedger ledger;
    };
    std::vector<Row> rows(entries.size());
    parallel_for(entries.size(), config.threads, [&](std::size_t i) {
        const auto& e = entries[i];
        const auto pairing = PairingSpec::adjacent_dimers(e.n);
        const BathConfig bath = BathConfig::from_chirality(1.0, config.delta_gamma, e.gf);
        Row row;
        auto track_max = [&](const Trajectory& traj) {
            row.ledger.absorb(traj);
            for (const auto& s : traj.samples) {
                const double c = s.mean_concurrence();
                if (!(c <= row.max_c)) {
                    row.max_c = c;
                    row.t_max_c = s.t;
                }
            }
        };
        if (e.scheme == "ours") {
            ModelSpec spec{bath, {}, DriveProtocol::ramp(config.slope, config.saturation_time, config.theta_k),
                           ControlMode::LocalPauli, pairing, config.noise, e.n};
            track_max(run_from_ground(spec.build(), config, config.t_end, evolve_options(config)));
        } else {
            const bool half = e.scheme == "time_independent_half";
            const auto deltas = half ? paired_detunings(e.n, config.omega / 2.0, 0.01) : paired_detunings(e.n, 0.01, 0.01);
            ModelSpec spec{bath, deltas, DriveProtocol::constant(config.omega, config.theta_k), ControlMode::None,
                           pairing, config.noise, e.n};
            const SystemModel model = spec.build();
            if (half) {
                ScenarioConfig coarse = config;
                coarse.sample_every = config.coarse_sample_every;
                track_max(run_from_ground(model, coarse, config.max_c_horizon, evolve_options(config)));
            }
            if (e.n <= kMaxDenseLiouvillianQubits) {
                const auto ss = steady_state(build_liouvillian(model, config.omega));
                const auto sample = sample_metrics(0.0, ss.rho_ss, model.target());
                row.steady_c = sample.mean_concurrence();
                row.steady_f = mean_root_fidelity(sample);
                row.residual = ss.residual;
                row.method = "nullspace";
            } else if (config.include_n8_steady) {
                const auto ev = steady_state_by_evolution(model, pure_state(ops::ground_state(e.n)), config.steady_cap,
                                                          config.dt * static_cast<double>(config.sample_every),
                                                          config.steady_tolerance, evolve_options(config));
                const auto sample = sample_metrics(0.0, ev.result.rho_ss, model.target());
                row.steady_c = sample.mean_concurrence();
                row.steady_f = mean_root_fidelity(sample);
                row.residual = ev.result.residual;
                row.method = ev.converged ? "evolution" : "evolution_capped";
            }
        }
        rows[i] = std::move(row);
    });

    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"n_qubits", "gamma_f", "scheme", "steady_concurrence", "steady_fidelity", "steady_residual",
                         "steady_method", "max_concurrence", "t_max_concurrence"};
    describe(out.table, config);
    out.table.metadata["fidelity_definition"] = "mean over pairs of sqrt(<S|rho_pair|S>)";
    out.table.metadata["max_c_horizon"] = format_number(config.max_c_horizon);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& r = rows[i];
        out.invariants.merge(r.ledger);
        out.table.add_row({static_cast<double>(entries[i].n), entries[i].gf, entries[i].scheme, r.steady_c, r.steady_f,
                           r.residual, r.method, r.max_c, r.t_max_c});
    }
    return out;
}

ScenarioResult run_detuning_study(const ScenarioConfig& config) {
    const int n = config.n_qubits;
    const auto pairing = PairingSpec::adjacent_dimers(n);
    const auto a = pattern_or(config.pattern_a, kPatternA, n);
    const auto b = pattern_or(config.pattern_b, kPatternB, n);
    struct Entry {
        std::string pattern;
        std::string scheme;
        ModelSpec spec;
    };
    const BathConfig bath = BathConfig::from_chirality(1.0, config.delta_gamma, config.gamma_f);
    const auto ramp = DriveProtocol::ramp(config.slope, config.saturation_time, config.theta_k);
    const auto flat = DriveProtocol::constant(config.omega, config.theta_k);
    std::vector<Entry> entries;
    for (const auto& [name, deltas] : {std::pair{std::string("A"), a}, std::pair{std::string("B"), b}}) {
        entries.push_back({name, "ours", {bath, deltas, ramp, ControlMode::LocalPauli, pairing, config.noise, n}});
        entries.push_back({name, "time_independent", {bath, deltas, flat, ControlMode::None, pairing, config.noise, n}});
    }
    std::vector<Trajectory> trajs(entries.size());
    parallel_for(entries.size(), config.threads, [&](std::size_t i) {
        trajs[i] = run_from_ground(entries[i].spec.build(), config, config.t_end, evolve_options(config));
    });
    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"t", "pattern", "scheme", "mean_concurrence", "purity"};
    describe(out.table, config);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        out.invariants.absorb(trajs[i]);
        for (const auto& s : trajs[i].samples) {
            out.table.add_row({s.t, entries[i].pattern, entries[i].scheme, s.mean_concurrence(), s.global_purity});
        }
    }
    return out;
}

ScenarioResult run_multimer_n6(const ScenarioConfig& config) {
    const int n = config.n_qubits;
    ModelSpec spec{BathConfig::from_chirality(1.0, config.delta_gamma, config.gamma_f), {},
                   DriveProtocol::ramp(config.slope, config.saturation_time, config.theta_k),
                   ControlMode::ApproximateGenerator, PairingSpec::all_pairings(), config.noise, n};
    const SystemModel model = spec.build();
    const Trajectory traj = run_from_ground(model, config, config.t_end, evolve_options(config));
    ScenarioResult out;
    out.table.scenario = to_string(config.id);
    out.table.columns = {"t", "fidelity", "purity"};
    describe(out.table, config);
    out.table.metadata["target_terms"] = std::to_string(model.target().term_count);
    out.invariants.absorb(traj);
    for (const auto& s : traj.samples) {
        out.table.add_row({s.t, s.fidelity_to_target, s.global_purity});
    }
    return out;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
    switch (config.id) {
    case ScenarioId::Fig2SchemeComparison: return run_scheme_comparison(config);
    case ScenarioId::Fig3Robustness: return run_robustness_sweep(config);
    case ScenarioId::TqdComparison: return run_tqd_comparison(config);
    case ScenarioId::HextraChirality:
    case ScenarioId::HextraDriveNeglect: return run_hextra_approximation_studies(config);
    case ScenarioId::SpontaneousEmission: return run_spontaneous_emission_study(config);
    case ScenarioId::DetuningPatterns: return run_detuning_study(config);
    case ScenarioId::MultimerN6: return run_multimer_n6(config);
    }
    throw Error(ErrorKind::Domain, "unhandled scenario");
}

} // namespace dimer
