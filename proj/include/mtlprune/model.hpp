#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtlprune/autodiff.hpp"
#include "mtlprune/losses.hpp"
#include "mtlprune/ops.hpp"

namespace mtlprune {

struct ConvLayerSpec {
    int filters = 8;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    int dilation = 1;
    bool pool_after = false;

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// Plain sequential conv stack; each layer is conv -> [norm] -> ReLU -> [2x2 max pool].
struct BackboneSpec {
    int input_channels = 3;
    std::vector<ConvLayerSpec> layers;

    friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// Dilation-pyramid head: parallel 3x3 branches (one per dilation) -> ReLU ->
/// concat -> 1x1 projection -> nearest upsample to input resolution.
struct HeadSpec {
    TaskKind kind = TaskKind::segmentation;
    std::vector<int> dilations{1, 2, 4};
    int mid_channels = 16;
    int out_channels = 4;

    friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct ModelSpec {
    BackboneSpec backbone;
    std::vector<HeadSpec> heads;
    int input_height = 32;
    int input_width = 32;
    bool normalization = false;
    int min_filters_per_layer = 1;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// The default desk configuration: six 3x3 layers (8, 8, 16, 16, 32, 32 filters)
/// with pooling after layers 2 and 4, and segmentation/depth/normals heads.
ModelSpec desk_model_spec(int classes = 4);

/// Throws ConfigError describing the first structural problem found.
void validate_model_spec(const ModelSpec& spec);

/// One prunable filter of the backbone, addressed by its current position.
struct FilterCoord {
    int layer = 0;
    int filter = 0;

    friend auto operator<=>(const FilterCoord&, const FilterCoord&) = default;
};

std::string to_string(const FilterCoord& c);

template <typename Real>
struct ConvParams {
    Tensor<Real> weight;  // [Cout, Cin, k, k]
    Tensor<Real> bias;    // [Cout]
    ConvGeometry geometry;

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }
};

template <typename Real>
struct NormParams {
    Tensor<Real> gamma;
    Tensor<Real> beta;
    std::vector<Real> running_mean;
    std::vector<Real> running_var;
};

template <typename Real>
struct BackboneLayer {
    ConvParams<Real> conv;
    std::optional<NormParams<Real>> norm;
    bool pool_after = false;
    std::vector<int> alive;  // original filter ids of the current output channels
};

template <typename Real>
struct TaskHead {
    HeadSpec spec;
    std::vector<ConvParams<Real>> branches;
    ConvParams<Real> projection;
};

enum class Mode { train, eval };

template <typename Real>
struct ForwardPass {
    std::vector<Var<Real>> predictions;
    std::vector<std::vector<Real>> batch_means;  // per backbone layer, empty without normalization
    std::vector<std::vector<Real>> batch_vars;
};

struct ParamCounts {
    std::size_t backbone = 0;
    std::size_t heads = 0;
    std::size_t total() const { return backbone + heads; }
};

struct FlopCounts {
    std::uint64_t backbone = 0;
    std::uint64_t heads = 0;
    std::uint64_t total() const { return backbone + heads; }
};

template <typename TensorT>
struct NamedParam {
    std::string name;
    TensorT* tensor;
};

/// Hard-parameter-sharing multi-task network: one shared conv backbone and a
/// head per task. Parameters are addressed by slot in a fixed canonical order
/// (backbone layers first, then heads) that is stable across surgery.
template <typename Real>
class MTLModel {
public:
    static MTLModel build(const ModelSpec& spec, std::uint64_t seed);

    /// Rebuilds the structure recorded by `alive` (original filter ids per layer)
    /// with freshly initialized parameters.
    static MTLModel build_pruned(const ModelSpec& spec, const std::vector<std::vector<int>>& alive,
                                 std::uint64_t seed);

    const ModelSpec& spec() const noexcept { return spec_; }
    /// The original spec with each layer's filter count replaced by its current value.
    ModelSpec current_spec() const;

    std::size_t num_tasks() const noexcept { return heads_.size(); }
    std::size_t num_layers() const noexcept { return layers_.size(); }
    const BackboneLayer<Real>& layer(std::size_t i) const { return layers_.at(i); }
    BackboneLayer<Real>& layer(std::size_t i) { return layers_.at(i); }
    const TaskHead<Real>& head(std::size_t t) const { return heads_.at(t); }
    TaskHead<Real>& head(std::size_t t) { return heads_.at(t); }

    std::vector<int> filter_counts() const;
    std::size_t alive_filter_count() const;
    std::vector<std::vector<int>> alive_filter_ids() const;
    /// All current filter coordinates in (layer, filter) order.
    std::vector<FilterCoord> filters() const;
    bool contains(const FilterCoord& c) const;

    std::vector<NamedParam<Tensor<Real>>> parameters();
    std::vector<NamedParam<const Tensor<Real>>> parameters() const;
    std::size_t slot_count() const;
    /// Slot of the conv weight of backbone layer `layer`.
    std::size_t weight_slot(std::size_t layer) const;

    /// Records the forward pass of every head on `tape`.
    ForwardPass<Real> forward(Tape<Real>& tape, const Tensor<Real>& images, Mode mode) const;
    /// Per-task predictions at input resolution, without keeping a tape.
    std::vector<Tensor<Real>> forward_all(const Tensor<Real>& images, Mode mode = Mode::eval) const;
    /// Backbone feature map (for tests of masking behaviour).
    Tensor<Real> backbone_features(const Tensor<Real>& images, Mode mode = Mode::eval) const;

    void update_running_stats(const ForwardPass<Real>& pass, double momentum = 0.1);

    ParamCounts count_params() const;
    FlopCounts count_flops(std::size_t height, std::size_t width) const;

    /// Physically removes the victim filters and the input slices that consume them.
    MTLModel apply_prune(std::span<const FilterCoord> victims) const;
    /// Zeroes the victim filters (weights, bias, normalization affine) in place of removal.
    MTLModel mask_prune(std::span<const FilterCoord> victims) const;

    /// Parameter count removed by apply_prune(victims), computed in closed form.
    std::size_t removed_params(std::span<const FilterCoord> victims) const;

    /// FNV-1a over all parameter bytes.
    std::uint64_t checksum() const;

    /// Flattened k*k*Cin weight block of one filter.
    std::span<const Real> filter_weights(const FilterCoord& c) const;

private:
    MTLModel() = default;
    void check_victims(std::span<const FilterCoord> victims, bool enforce_floor) const;
    Var<Real> run_backbone(Tape<Real>& tape, const Tensor<Real>& images, Mode mode, std::size_t& slot,
                           ForwardPass<Real>* pass) const;

    ModelSpec spec_;
    std::vector<BackboneLayer<Real>> layers_;
    std::vector<TaskHead<Real>> heads_;
};

extern template class MTLModel<float>;
extern template class MTLModel<double>;

}  // namespace mtlprune
