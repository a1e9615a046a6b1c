#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlprune/pruning.hpp"

namespace mtlprune {

using json = nlohmann::json;

json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j);

json to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const json& j);

json to_json(const PruneLevel& level);
json to_json(const PruneEvent& event);

/// Fixed-width numeric formatting shared by every CSV writer.
std::string format_number(double v);

struct CheckpointInfo {
    ModelSpec spec;
    std::vector<std::vector<int>> alive;
    std::uint64_t rng_seed = 0;
    std::optional<std::string> prune_history;  // path relative to the checkpoint directory
    std::string precision = "float";
};

/// manifest.json + params.bin (little-endian f32, in manifest order). Running
/// normalization statistics are stored alongside the trainable tensors.
template <typename Real>
void save_checkpoint(const MTLModel<Real>& model, const std::filesystem::path& dir, std::uint64_t rng_seed,
                     const std::optional<std::string>& prune_history = std::nullopt);

CheckpointInfo read_checkpoint_manifest(const std::filesystem::path& dir);

template <typename Real>
MTLModel<Real> load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

}  // namespace mtlprune
