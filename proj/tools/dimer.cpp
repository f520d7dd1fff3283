#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dimer/cli.hpp"
#include "dimer/errors.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw dimer::Error(dimer::ErrorKind::Io, "cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven-dissipative dimer entanglement engine"};
    std::string config_path;
    std::string scenario;
    std::string out_dir;
    bool plot = false;
    bool list = false;
    unsigned threads = 0;
    double dt = 0.0;
    double max_time = 0.0;
    app.add_option("-c,--config", config_path, "Config file")->check(CLI::ExistingFile);
    app.add_option("-s,--scenario", scenario, "Reproduce a preset scenario without a config file");
    app.add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");
    app.add_flag("-p,--plot", plot, "Also write an SVG plot");
    app.add_option("-j,--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--dt", dt, "Macro time step")->check(CLI::PositiveNumber);
    app.add_option("--max-time", max_time, "Final time t_end")->check(CLI::PositiveNumber);
    app.add_flag("--list", list, "List scenario names");
    app.footer(dimer::cli::help_text());
    CLI11_PARSE(app, argc, argv);

    if (list) {
        for (auto id : dimer::all_scenarios()) {
            std::cout << dimer::to_string(id) << '\n';
        }
        return 0;
    }

    try {
        dimer::cli::RunConfig config;
        if (!config_path.empty()) {
            config = dimer::cli::parse_config(read_file(config_path));
        } else if (!scenario.empty()) {
            config = dimer::cli::parse_config("[run]\ncommand = reproduce\nscenario = " + scenario + "\n");
        } else {
            std::cerr << "need a config file or --scenario\n" << app.help();
            return 1;
        }
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (plot) config.plot = true;
        if (threads) config.threads = threads;
        if (dt > 0.0) config.dt = dt;
        if (max_time > 0.0) config.t_end = max_time;

        const auto outcome = dimer::cli::execute(config);
        for (const auto& path : dimer::cli::emit_outputs(outcome.table, config.output_dir, config.plot, &config)) {
            std::cout << path.string() << '\n';
        }
        for (const auto& note : outcome.notes) {
            std::cerr << "note: " << note << '\n';
        }
        if (!outcome.contracts_met) {
            std::cerr << "numerical contracts not met; see the .json metadata\n";
            return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
