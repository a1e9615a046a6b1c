#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtlprune/pruning.hpp"
#include "mtlprune/serialize.hpp"

namespace mtlprune {

/// Environment variable that, when set, replaces the configured output directory.
inline constexpr const char* kOutputRootEnv = "MTLPRUNE_OUTPUT_ROOT";

struct RetrainSettings {
    std::vector<double> lr_sweep{1e-3, 5e-4, 1e-4};
    TrainConfig train;  // lr is taken from the sweep
};

enum class Aggregate { best, mean };

struct ReportSettings {
    std::string baseline = "taylor_squared";
    double pairing_tolerance = 0.02;
    Aggregate aggregate = Aggregate::best;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string precision = "float";
    std::filesystem::path output_dir = "runs/default";
    std::optional<std::filesystem::path> dataset_dir;
    DatasetConfig dataset;
    ModelSpec model;
    TrainConfig train;
    PruneConfig prune;
    std::optional<std::filesystem::path> base_checkpoint;
    RetrainSettings retrain;
    ReportSettings report;
    json raw;  // the validated input document, echoed into run records
};

/// Validates `doc` against the config schema. Every problem is reported with its
/// field path in one ConfigError. Missing keys take defaults; unknown keys are errors.
ExperimentConfig parse_config(const json& doc);

/// Reads and parses a config file, applies an optional seed override and the output-root
/// environment variable.
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});

/// Per-stage seeds, all derived from the single config seed.
struct Seeds {
    std::uint64_t dataset, init, train, prune, criterion, retrain;
};
Seeds derive_seeds(const ExperimentConfig& cfg);

/// Loads `dataset_dir` when given, otherwise generates the configured dataset.
Dataset obtain_dataset(const ExperimentConfig& cfg);

struct PruneCommandOptions {
    std::optional<std::string> criterion;          // overrides prune.criterion
    std::optional<std::filesystem::path> base;     // overrides prune.base_checkpoint
    bool from_scratch = false;                     // train a base model first
    std::optional<std::string> run_name;
};

std::filesystem::path cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log);
std::filesystem::path cmd_train(const ExperimentConfig& cfg, std::ostream& log);
std::filesystem::path cmd_prune(const ExperimentConfig& cfg, const PruneCommandOptions& opts, std::ostream& log);
std::filesystem::path cmd_retrain(const ExperimentConfig& cfg, const std::filesystem::path& manifest,
                                  const std::optional<std::string>& run_name, std::ostream& log);
std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                               const std::string& split_name, std::ostream& log);

/// Reads prune run directories, aggregates repetitions per criterion, pairs every
/// criterion's levels with the baseline's nearest level within the tolerance and
/// writes comparison.csv and comparison.txt into `out_dir`.
std::filesystem::path cmd_report(const std::vector<std::filesystem::path>& runs, const ReportSettings& settings,
                                 const std::filesystem::path& out_dir, std::ostream& log);

/// Gradient checks and metric oracles; returns true when every check passes.
bool cmd_selftest(std::ostream& log);

/// 100 * (other - baseline) / baseline.
double percent_delta(double baseline, double other);

/// Fixed CSV layouts.
std::vector<std::string> curves_header();
std::vector<std::string> epoch_header(const ModelSpec& spec);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Re-reads a written file and checks its header and that every cell of the named
/// numeric columns parses as a finite number.
void validate_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                  std::size_t numeric_from_column = 0);

}  // namespace mtlprune
