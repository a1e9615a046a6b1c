#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <ostream>
#include <streambuf>

#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

class NullBuffer : public std::streambuf {
protected:
    int overflow(int c) override { return c; }
};

}  // namespace

int main(int argc, char** argv) {
    using namespace mtlprune;
    namespace fs = std::filesystem;

    CLI::App app{"Multi-task CNN training and structured filter pruning"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    app.add_option("-c,--config", config_path, "Experiment config (JSON)");
    app.add_option("-s,--seed", seed, "Override the config seed");
    app.add_flag("-q,--quiet", quiet, "Only print errors");

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset and print its checksum");
    auto* train_cmd = app.add_subcommand("train", "Train the base multi-task model");

    auto* prune_cmd = app.add_subcommand("prune", "Iteratively prune and fine-tune a trained model");
    PruneCommandOptions prune_opts;
    std::string base_path;
    prune_cmd->add_option("--criterion", prune_opts.criterion, "cosprune, taylor, taylor_raw or random");
    prune_cmd->add_option("--base", base_path, "Base checkpoint directory");
    prune_cmd->add_flag("--from-scratch", prune_opts.from_scratch, "Train a base model first when none exists");
    prune_cmd->add_option("--name", prune_opts.run_name, "Run directory name");

    auto* retrain_cmd = app.add_subcommand("retrain", "Retrain a pruned architecture from scratch over the lr sweep");
    std::string manifest;
    std::optional<std::string> retrain_name;
    retrain_cmd->add_option("manifest", manifest, "Checkpoint directory or its manifest.json")->required();
    retrain_cmd->add_option("--name", retrain_name, "Run directory name");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    std::string eval_ckpt, eval_split = "val";
    eval_cmd->add_option("checkpoint", eval_ckpt, "Checkpoint directory or its manifest.json")->required();
    eval_cmd->add_option("--split", eval_split, "val, train or all")->capture_default_str();

    auto* report_cmd = app.add_subcommand("report", "Compare prune runs against the baseline criterion");
    std::vector<std::string> report_runs;
    std::string report_out, report_aggregate;
    std::optional<std::string> report_baseline;
    std::optional<double> report_tolerance;
    report_cmd->add_option("runs", report_runs, "Prune run directories")->required();
    report_cmd->add_option("-o,--out", report_out, "Output directory (default <output root>/report)");
    report_cmd->add_option("--baseline", report_baseline, "Baseline criterion");
    report_cmd->add_option("--tolerance", report_tolerance, "Relative parameter pairing tolerance");
    report_cmd->add_option("--aggregate", report_aggregate, "best or mean over repetitions")
        ->check(CLI::IsMember({"best", "mean"}));

    auto* selftest_cmd = app.add_subcommand("selftest", "Run gradient checks and metric oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    NullBuffer null_buffer;
    std::ostream null_stream(&null_buffer);
    std::ostream& log = quiet ? null_stream : std::cout;

    auto need_config = [&]() {
        if (config_path.empty()) throw ConfigError("this command needs --config <file>");
        return load_config(config_path, seed);
    };

    try {
        if (*gen) {
            cmd_gen_data(need_config(), log);
        } else if (*train_cmd) {
            cmd_train(need_config(), log);
        } else if (*prune_cmd) {
            if (!base_path.empty()) prune_opts.base = fs::path(base_path);
            cmd_prune(need_config(), prune_opts, log);
        } else if (*retrain_cmd) {
            if (!fs::exists(manifest)) throw ConfigError("checkpoint not found: " + manifest);
            cmd_retrain(need_config(), manifest, retrain_name, log);
        } else if (*eval_cmd) {
            if (!fs::exists(eval_ckpt)) throw ConfigError("checkpoint not found: " + eval_ckpt);
            cmd_eval(need_config(), eval_ckpt, eval_split, log);
        } else if (*report_cmd) {
            ReportSettings settings;
            fs::path out = "report";
            if (!config_path.empty()) {
                const auto cfg = load_config(config_path, seed);
                settings = cfg.report;
                out = cfg.output_dir / "report";
            } else if (const char* root = std::getenv(kOutputRootEnv); root && *root) {
                out = fs::path(root) / "report";
            }
            if (report_baseline) settings.baseline = *report_baseline;
            if (report_tolerance) settings.pairing_tolerance = *report_tolerance;
            if (!report_aggregate.empty()) settings.aggregate = report_aggregate == "mean" ? Aggregate::mean : Aggregate::best;
            if (!report_out.empty()) out = report_out;
            std::vector<fs::path> runs(report_runs.begin(), report_runs.end());
            cmd_report(runs, settings, out, log);
        } else if (*selftest_cmd) {
            if (!cmd_selftest(log)) {
                std::cerr << "selftest: some checks failed\n";
                return kExitRuntime;
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
