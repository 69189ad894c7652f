#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sbsde/errors.hpp"
#include "sbsde/scenario.hpp"
#include "sbsde/version.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw sbsde::ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/* One value per line; a first line that does not parse as a number is treated
   as a header. */
std::vector<double> read_candidate(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw sbsde::ConfigError("cannot read candidate file " + path);
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(line, &used);
            values.push_back(v);
        } catch (const std::exception&) {
            if (lineno == 1) continue; // header
            throw sbsde::ConfigError("candidate file line " + std::to_string(lineno) +
                                     " is not a number");
        }
    }
    if (values.empty()) throw sbsde::ConfigError("candidate file holds no values");
    return values;
}

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<int> threads;
    std::optional<std::string> out;

    sbsde::RunOverrides overrides() const { return {seed, paths, threads, out}; }
};

void add_common(CLI::App* cmd, std::string& config_path, CommonFlags& flags) {
    cmd->add_option("config", config_path, "scenario JSON file")->required();
    cmd->add_option("--seed", flags.seed, "override the scenario seed");
    cmd->add_option("--paths", flags.paths, "override the ensemble size");
    cmd->add_option("--threads", flags.threads, "worker threads (results are identical "
                                                "for any value)")
        ->check(CLI::Range(1, 256));
    cmd->add_option("--out", flags.out, "output directory");
}

int report(const sbsde::RunOutcome& outcome) {
    if (outcome.exit_code == 0)
        std::cout << "ok: outputs in " << outcome.out_dir << "\n";
    else
        std::cerr << "error (exit " << outcome.exit_code << "): " << outcome.message
                  << "\noutputs in " << outcome.out_dir << "\n";
    return outcome.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"singular stochastic control experiments: backward-equation solvers, "
                 "optimality diagnostics and the consumption fixed point"};
    app.set_version_flag("--version", std::string(sbsde::version()));
    app.require_subcommand(1);

    std::string run_config, conv_config, bat_config;
    CommonFlags run_flags, conv_flags, bat_flags;
    std::string axis;
    std::vector<std::size_t> levels;
    std::string candidate_path;

    CLI::App* cmd_run = app.add_subcommand("run", "execute the scenario's task pipeline");
    add_common(cmd_run, run_config, run_flags);

    CLI::App* cmd_conv =
        app.add_subcommand("converge", "repeat the backward solve across refinement levels");
    add_common(cmd_conv, conv_config, conv_flags);
    cmd_conv->add_option("--axis", axis, "grid | paths | iterations")->required();
    cmd_conv->add_option("--levels", levels, "comma-separated level list")
        ->required()
        ->delimiter(',');

    CLI::App* cmd_bat =
        app.add_subcommand("battery", "directional-derivative battery at a candidate control");
    add_common(cmd_bat, bat_config, bat_flags);
    cmd_bat->add_option("--candidate", candidate_path,
                        "file with one control value per grid node");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_run->parsed()) {
            const std::string text = read_file(run_config);
            const sbsde::ScenarioConfig cfg = sbsde::parse_scenario_json(text);
            return report(sbsde::run_scenario(cfg, text, run_flags.overrides()));
        }
        if (cmd_conv->parsed()) {
            const std::string text = read_file(conv_config);
            const sbsde::ScenarioConfig cfg = sbsde::parse_scenario_json(text);
            return report(
                sbsde::run_convergence(cfg, text, conv_flags.overrides(), axis, levels));
        }
        if (cmd_bat->parsed()) {
            const std::string text = read_file(bat_config);
            const sbsde::ScenarioConfig cfg = sbsde::parse_scenario_json(text);
            std::optional<std::vector<double>> candidate;
            if (!candidate_path.empty()) candidate = read_candidate(candidate_path);
            return report(sbsde::run_battery(cfg, text, bat_flags.overrides(), candidate));
        }
    } catch (const sbsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sbsde::NonConvergence& e) {
        std::cerr << "not established: " << e.what() << "\n";
        return 3;
    } catch (const sbsde::UnsupportedInput& e) {
        std::cerr << "unsupported input: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
