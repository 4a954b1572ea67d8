#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "promptsteer/config.hpp"
#include "promptsteer/errors.hpp"
#include "promptsteer/experiment.hpp"

using namespace promptsteer;

int main(int argc, char** argv) {
    CLI::App app{"promptsteer: steer a black-box chatbot with an RL-trained prompt generator"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    bool force_merge = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--seed", seed, "override the master seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--out", out_dir, "override the output directory");
        cmd->add_flag("--force-merge", force_merge,
                      "merge report inputs even when config hashes differ");
    };
    add_common(app.add_subcommand("pretrain", "multi-task pretraining; writes a checkpoint"));
    add_common(app.add_subcommand("adapt", "few-shot adaptation on every held-out task"));
    add_common(app.add_subcommand("baseline", "no-prompt, human-template and independent rows"));
    add_common(app.add_subcommand("report", "merge run artifacts into one table"));

    CLI11_PARSE(app, argc, argv);

    try {
        Command command = parse_command(app.get_subcommands().front()->get_name());
        ExperimentConfig config = load_config(config_path);
        if (seed_set) config.master_seed = seed;
        if (!out_dir.empty()) config.out_dir = out_dir;
        run_experiment(config, command, force_merge);
        return kExitOk;
    } catch (const MissingFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingFile;
    } catch (const MergeConflictError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMergeConflict;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitResponder;
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitResponder;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
