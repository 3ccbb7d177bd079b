// robustdet: data generation, training, attacks, DIRE extraction,
// evaluation and visualization from one binary.

#include "robustdet/cli/config.hpp"
#include "robustdet/cli/runner.hpp"
#include "robustdet/core/error.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

namespace {

using robustdet::cli::Command;

struct Subcommand {
    Command command;
    CLI::App* app;
    std::string config_file;
    bool print_config = false;
    std::vector<std::string> sets;
    std::map<std::string, std::string> values;
};

void add_key_options(Subcommand& sub) {
    for (const auto& key : robustdet::cli::config_keys()) {
        if (key.key == "command") continue;
        std::string names = "--" + key.key;
        if (!key.alias.empty()) names += ",--" + key.alias;
        sub.app->add_option(names, sub.values[key.key], key.description + " [default " + key.default_text + "]")
            ->group("Configuration");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust AI-generated image detection: synthetic benchmark, adversarial training, DIRE and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(robustdet::cli::version()));

    const std::vector<std::pair<Command, const char*>> commands = {
        {Command::kGenData, "Generate the synthetic benchmark and fit its diffusion backbone"},
        {Command::kTrain, "Train a detector (--mode standard|at|at-dire)"},
        {Command::kAttack, "Attack a detector on the test splits and write adversarial images"},
        {Command::kDire, "Write DIRE maps of the test splits"},
        {Command::kEval, "Evaluate detectors clean and under attack (--protocol all-set|cross-domain)"},
        {Command::kViz, "Render noise or DIRE-difference panels (--kind noise|dire-diff)"},
    };
    std::vector<std::unique_ptr<Subcommand>> subs;
    for (const auto& [command, help] : commands) {
        auto sub = std::make_unique<Subcommand>();
        sub->command = command;
        sub->app = app.add_subcommand(std::string(robustdet::cli::to_string(command)), help);
        sub->app->add_option("-c,--config", sub->config_file, "JSON config file")->check(CLI::ExistingFile);
        sub->app->add_option("--set", sub->sets, "key=value override, repeatable");
        sub->app->add_flag("--print-config", sub->print_config, "Print the resolved config and exit");
        add_key_options(*sub);
        subs.push_back(std::move(sub));
    }
    auto* keys = app.add_subcommand("keys", "List every configuration key with its default");

    CLI11_PARSE(app, argc, argv);

    if (keys->parsed()) {
        for (const auto& k : robustdet::cli::config_keys()) {
            std::cout << k.key << (k.alias.empty() ? "" : " (--" + k.alias + ")") << " = " << k.default_text << "\n    "
                      << k.description << '\n';
        }
        return 0;
    }

    for (const auto& sub : subs) {
        if (!sub->app->parsed()) continue;
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& s : sub->sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                std::cerr << "error: --set expects key=value, got '" << s << "'\n";
                return 2;
            }
            overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [key, value] : sub->values) {
            if (sub->app->get_option("--" + key)->count() > 0) overrides.emplace_back(key, value);
        }
        std::map<std::string, std::string> env;
        if (const char* out = std::getenv(robustdet::cli::kOutputDirEnv)) env[robustdet::cli::kOutputDirEnv] = out;

        robustdet::cli::RunConfig cfg;
        try {
            std::optional<std::filesystem::path> file;
            if (!sub->config_file.empty()) file = sub->config_file;
            cfg = robustdet::cli::parse_config(sub->command, file, overrides, env);
        } catch (const robustdet::Error& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return 2;
        }
        if (sub->print_config) {
            std::cout << robustdet::cli::to_json_text(cfg);
            return 0;
        }
        const auto result = robustdet::cli::run_command(cfg, &std::cerr);
        if (result.exit_code != 0) {
            std::cerr << "error: " << result.error << "\nmanifest: " << result.manifest.string() << '\n';
            return result.exit_code;
        }
        std::cerr << "ok, manifest: " << result.manifest.string() << '\n';
        return 0;
    }
    return 1;
}
