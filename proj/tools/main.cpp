// Copyright 2026 The qtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <fmt/core.h>

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "json.hpp"
#include "qtwin/error.hpp"
#include "qtwin/io.hpp"

namespace {

using qtwin::cli::ConfigError;

constexpr const char *kVersion = "0.1.0";

// Exit codes.
constexpr int kOk = 0;
constexpr int kUnexpected = 1;
constexpr int kConfig = 2;
constexpr int kInput = 3;
constexpr int kCompute = 4;

int report_error(int code, const char *type, const std::string &message) {
    const nlohmann::json rec = {{"error", {{"code", code}, {"type", type}, {"message", message}}}};
    std::cerr << rec.dump() << '\n';
    return code;
}

struct Options {
    std::string config;
    std::string out = ".";
    std::string format = "json";
    std::uint64_t seed = 0;
    long trials = 0;
    int resolution = 0;
    bool dry_run = false;
    bool convergence = false;
};

int run(const qtwin::cli::CommandInfo &cmd, const Options &opt, const CLI::App &sub) {
    using namespace qtwin::cli;
    Overrides ov;
    ov.format = opt.format == "csv" ? Format::csv : Format::json;
    if (sub.count("--seed")) ov.seed = opt.seed;
    if (sub.count("--trials")) ov.trials = opt.trials;
    if (sub.count("--resolution")) ov.resolution = opt.resolution;
    ov.convergence = opt.convergence;

    const std::filesystem::path config_path = opt.config;
    Config cfg(load_config_file(config_path),
               config_path.empty() ? std::filesystem::path(".") : config_path.parent_path());
    const Job job = cmd.prepare(cfg, ov);
    cfg.finish();

    nlohmann::json manifest = {{"tool", "qtwin"},
                               {"version", kVersion},
                               {"subcommand", cmd.name},
                               {"config_file", opt.config},
                               {"format", opt.format},
                               {"config", cfg.resolved()}};
    if (opt.dry_run) {
        manifest["dry_run"] = true;
        std::cout << manifest.dump(2) << '\n';
        return kOk;
    }
    const std::vector<OutputFile> files = job();
    const std::filesystem::path out_dir = opt.out;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw qtwin::InputError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    nlohmann::json listed = nlohmann::json::array();
    for (const auto &f : files) {
        qtwin::write_file_atomic(out_dir / f.name, f.contents);
        listed.push_back({{"file", f.name}, {"bytes", f.contents.size()}});
    }
    manifest["outputs"] = listed;
    qtwin::write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    fmt::print("qtwin {}: wrote {} file(s) and manifest.json to {}\n", cmd.name, files.size(), out_dir.string());
    return kOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"qtwin: transmon design, loss budget, QND detection and characterization fits"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options opt;
    std::vector<std::pair<const qtwin::cli::CommandInfo *, CLI::App *>> subs;
    for (const auto &cmd : qtwin::cli::commands()) {
        CLI::App *sub = app.add_subcommand(cmd.name, cmd.description);
        sub->add_option("--config", opt.config, "JSON configuration file");
        sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
        sub->add_option("--format", opt.format, "Record format")
            ->check(CLI::IsMember({"json", "csv"}))
            ->capture_default_str();
        sub->add_option("--seed", opt.seed, "Master seed (overrides the config; default 1)");
        sub->add_option("--trials", opt.trials, "Monte-Carlo trials or round-trip repetitions")
            ->check(CLI::PositiveNumber);
        sub->add_option("--resolution", opt.resolution, "Cross-section cells across the feature")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--dry-run", opt.dry_run, "Validate the configuration and print it, computing nothing");
        if (std::string(cmd.name) == "xsect")
            sub->add_flag("--convergence", opt.convergence, "Add a refinement sweep with extrapolation");
        subs.emplace_back(&cmd, sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        return report_error(kConfig, "usage", e.what());
    }
    for (const auto &[cmd, sub] : subs) {
        if (!sub->parsed()) continue;
        try {
            return run(*cmd, opt, *sub);
        } catch (const ConfigError &e) {
            return report_error(kConfig, "config", e.what());
        } catch (const qtwin::InputError &e) {
            return report_error(kInput, "input", e.what());
        } catch (const qtwin::DomainError &e) {
            return report_error(kCompute, "domain", e.what());
        } catch (const qtwin::NumericalError &e) {
            return report_error(kCompute, "numerical", e.what());
        } catch (const std::exception &e) {
            return report_error(kUnexpected, "internal", e.what());
        }
    }
    return report_error(kConfig, "usage", "no subcommand");
}
