// gplab: command-line front end. A JSON config describes the experiment;
// flags override individual fields.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "gplab/cli.hpp"

using nlohmann::ordered_json;

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-field level-set percolation lab"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_version_flag("--version", "gplab 1.0");

    std::string command, config_path, out, kernel;
    std::uint64_t seed = 0;
    std::size_t replicas = 0;
    unsigned threads = 0;
    double level = 0, range = 0, epsilon = 0, delta = 0, spacing = 0, eta = 0, sprinkle = 0;
    bool bf_schedule = false;
    std::vector<std::string> events;

    app.add_option("command", command, "Command (or take it from the config)")
        ->check(CLI::IsMember(gplab::cli::kCommands));
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    auto* o_seed = app.add_option("--seed", seed, "Master seed (fallback: GPLAB_SEED)");
    auto* o_reps = app.add_option("--replicas", replicas, "Monte Carlo replicas");
    app.add_option("--threads", threads, "Worker threads (default: all cores)");
    auto* o_out = app.add_option("--out", out, "Output directory");
    auto* o_kernel = app.add_option("--kernel", kernel, "bargmann-fock | rational-quadratic:BETA | tabulated:CSV:BETA");
    auto* o_level = app.add_option("--level", level, "Level l (open where f >= -l)");
    auto* o_N = app.add_option("--N", range, "Truncation range N");
    auto* o_eps = app.add_option("--epsilon", epsilon, "Discretisation step");
    auto* o_delta = app.add_option("--delta", delta, "Noise probability");
    auto* o_h = app.add_option("--h", spacing, "White-noise spacing");
    auto* o_eta = app.add_option("--eta", eta, "Polynomial schedule exponent");
    auto* o_s = app.add_option("--s", sprinkle, "Sprinkle s");
    app.add_flag("--bf-schedule", bf_schedule, "Use the Bargmann-Fock schedule");
    app.add_option("--event", events, "Event: full:r,R | slab:r,R,M | cross:L[,aspect] (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ordered_json doc = ordered_json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            try {
                doc = ordered_json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw gplab::Error(gplab::ErrorKind::ConfigInvalid, std::string("malformed JSON: ") + e.what(), "config");
            }
        }
        if (!command.empty()) doc["command"] = command;
        if (!doc.contains("command"))
            throw gplab::Error(gplab::ErrorKind::ConfigInvalid, "no command given", "command");
        if (o_seed->count()) doc["seed"] = seed;
        else if (!doc.contains("seed")) {
            if (const char* env = std::getenv("GPLAB_SEED")) {
                try {
                    doc["seed"] = std::stoull(env);
                } catch (const std::exception&) {
                    throw gplab::Error(gplab::ErrorKind::ConfigInvalid, "GPLAB_SEED is not an unsigned integer", "seed");
                }
            }
        }
        if (o_reps->count()) doc["replicas"] = replicas;
        if (o_out->count()) doc["out"] = out;
        if (o_kernel->count()) doc["kernel"] = kernel;
        auto set = [&](const char* section, const char* key, CLI::Option* opt, double value) {
            if (opt->count()) doc[section][key] = value;
        };
        set("model", "level", o_level, level);
        set("model", "N", o_N, range);
        set("geometry", "epsilon", o_eps, epsilon);
        set("model", "delta", o_delta, delta);
        set("geometry", "h", o_h, spacing);
        set("model", "eta", o_eta, eta);
        set("model", "s", o_s, sprinkle);
        if (bf_schedule) doc["model"]["schedule"] = "bargmann-fock";
        if (!events.empty()) {
            doc.erase("event");
            doc["events"] = events;
        }

        auto config = gplab::cli::parse_config(doc);
        if (threads) config.threads = threads;
        gplab::cli::run(config, std::cerr);
        return 0;
    } catch (const gplab::Error& e) {
        std::cout << gplab::cli::error_record(e) << '\n';
        std::cerr << e.what() << '\n';
        return gplab::cli::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cout << gplab::cli::error_record(e) << '\n';
        std::cerr << e.what() << '\n';
        return 3;
    }
}
