#include "mtlprune/serialize.hpp"

#include <cstdio>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/error.hpp"

namespace mtlprune {

namespace {

constexpr int kCheckpointVersion = 1;

template <typename Real>
std::string precision_name() {
    return sizeof(Real) == 4 ? "float" : "double";
}

// Tensors stored in a checkpoint: all parameters, then running statistics.
template <typename Real>
struct StoredTensor {
    std::string name;
    Shape shape;
    std::span<Real> data;
};

template <typename Elem, typename ModelT>
std::vector<StoredTensor<Elem>> stored_tensors(ModelT& model) {
    std::vector<StoredTensor<Elem>> out;
    for (auto& p : model.parameters()) out.push_back({p.name, p.tensor->shape(), p.tensor->data()});
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        auto& layer = model.layer(i);
        if (!layer.norm) continue;
        auto& mean = layer.norm->running_mean;
        auto& var = layer.norm->running_var;
        const std::string prefix = "backbone." + std::to_string(i) + ".";
        out.push_back({prefix + "running_mean", Shape{mean.size()}, std::span<Elem>(mean)});
        out.push_back({prefix + "running_var", Shape{var.size()}, std::span<Elem>(var)});
    }
    return out;
}

}  // namespace

json to_json(const ModelSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.backbone.layers)
        layers.push_back({{"filters", l.filters},
                          {"kernel", l.kernel},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"dilation", l.dilation},
                          {"pool_after", l.pool_after}});
    json heads = json::array();
    for (const auto& h : spec.heads)
        heads.push_back({{"task", task_name(h.kind)},
                         {"dilations", h.dilations},
                         {"mid_channels", h.mid_channels},
                         {"out_channels", h.out_channels}});
    return {{"input_channels", spec.backbone.input_channels},
            {"layers", layers},
            {"heads", heads},
            {"input_height", spec.input_height},
            {"input_width", spec.input_width},
            {"normalization", spec.normalization},
            {"min_filters_per_layer", spec.min_filters_per_layer}};
}

ModelSpec model_spec_from_json(const json& j) {
    ModelSpec spec;
    spec.backbone.input_channels = j.at("input_channels").get<int>();
    for (const auto& l : j.at("layers"))
        spec.backbone.layers.push_back(ConvLayerSpec{l.at("filters").get<int>(), l.at("kernel").get<int>(),
                                                     l.at("stride").get<int>(), l.at("padding").get<int>(),
                                                     l.at("dilation").get<int>(), l.at("pool_after").get<bool>()});
    for (const auto& h : j.at("heads"))
        spec.heads.push_back(HeadSpec{parse_task_kind(h.at("task").get<std::string>()),
                                      h.at("dilations").get<std::vector<int>>(), h.at("mid_channels").get<int>(),
                                      h.at("out_channels").get<int>()});
    spec.input_height = j.at("input_height").get<int>();
    spec.input_width = j.at("input_width").get<int>();
    spec.normalization = j.at("normalization").get<bool>();
    spec.min_filters_per_layer = j.at("min_filters_per_layer").get<int>();
    return spec;
}

json to_json(const MetricsReport& m) {
    json j = json::object();
    const auto v = m.values();
    for (std::size_t i = 0; i < v.size(); ++i) j[std::string(MetricsReport::column_names()[i])] = v[i];
    return j;
}

MetricsReport metrics_from_json(const json& j) {
    std::array<double, MetricsReport::kColumns> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(std::string(MetricsReport::column_names()[i])).get<double>();
    return MetricsReport::from_values(v);
}

json to_json(const PruneLevel& level) {
    return {{"params", level.params},
            {"backbone_params", level.backbone_params},
            {"flops", level.flops},
            {"filter_counts", level.filter_counts},
            {"metrics", to_json(level.metrics)},
            {"total_val_loss", level.total_val_loss}};
}

json to_json(const PruneEvent& event) {
    auto coords = [](const std::vector<FilterCoord>& cs) {
        json a = json::array();
        for (const auto& c : cs) a.push_back({c.layer, c.filter});
        return a;
    };
    json j = to_json(event.after);
    j["step"] = event.step;
    j["victims"] = coords(event.victims);
    j["victim_ids"] = coords(event.victim_ids);
    return j;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

template <typename Real>
void save_checkpoint(const MTLModel<Real>& model, const std::filesystem::path& dir, std::uint64_t rng_seed,
                     const std::optional<std::string>& prune_history) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    json tensors = json::array();
    std::vector<float> blob;
    for (const auto& t : stored_tensors<const Real>(model)) {
        tensors.push_back({{"name", t.name}, {"shape", t.shape}});
        for (Real v : t.data) blob.push_back(static_cast<float>(v));
    }
    write_le_f32(dir / "params.bin", blob);
    Fnv1a h;
    h.update_values<float>(blob);
    json manifest{{"format", "mtlprune-checkpoint"},
                  {"format_version", kCheckpointVersion},
                  {"spec", to_json(model.spec())},
                  {"alive", model.alive_filter_ids()},
                  {"filter_counts", model.filter_counts()},
                  {"rng_seed", rng_seed},
                  {"prune_history", prune_history ? json(*prune_history) : json(nullptr)},
                  {"precision", precision_name<Real>()},
                  {"params_file", "params.bin"},
                  {"params_checksum", hex64(h.value())},
                  {"tensors", tensors}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

CheckpointInfo read_checkpoint_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    if (!std::filesystem::exists(path)) throw IoError("no checkpoint manifest at " + path.string());
    try {
        const json j = json::parse(read_text(path));
        if (j.at("format") != "mtlprune-checkpoint") throw IoError(path.string() + " is not a checkpoint manifest");
        if (j.at("format_version").get<int>() != kCheckpointVersion)
            throw IoError(path.string() + ": unsupported checkpoint version");
        CheckpointInfo info;
        info.spec = model_spec_from_json(j.at("spec"));
        info.alive = j.at("alive").get<std::vector<std::vector<int>>>();
        info.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        if (!j.at("prune_history").is_null()) info.prune_history = j.at("prune_history").get<std::string>();
        info.precision = j.at("precision").get<std::string>();
        return info;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint manifest " + path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw IoError("malformed checkpoint manifest " + path.string() + ": " + e.what());
    }
}

template <typename Real>
MTLModel<Real> load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info_out) {
    const CheckpointInfo info = read_checkpoint_manifest(dir);
    const json j = json::parse(read_text(dir / "manifest.json"));
    auto model = MTLModel<Real>::build_pruned(info.spec, info.alive, info.rng_seed);
    auto slots = stored_tensors<Real>(model);
    const auto& listed = j.at("tensors");
    if (listed.size() != slots.size())
        throw IoError(dir.string() + ": manifest lists " + std::to_string(listed.size()) + " tensors, architecture has " +
                      std::to_string(slots.size()));
    std::size_t total = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (listed[i].at("name").get<std::string>() != slots[i].name ||
            listed[i].at("shape").get<Shape>() != slots[i].shape)
            throw IoError(dir.string() + ": tensor " + std::to_string(i) + " does not match the architecture (" +
                          slots[i].name + ")");
        total += slots[i].data.size();
    }
    const auto blob = read_le_f32(dir / j.at("params_file").get<std::string>(), total);
    Fnv1a h;
    h.update_values<float>(blob);
    if (hex64(h.value()) != j.at("params_checksum").get<std::string>())
        throw IoError(dir.string() + ": params.bin checksum mismatch");
    std::size_t offset = 0;
    for (auto& s : slots)
        for (auto& v : s.data) v = static_cast<Real>(blob[offset++]);
    if (info_out) *info_out = info;
    return model;
}

template void save_checkpoint(const MTLModel<float>&, const std::filesystem::path&, std::uint64_t,
                              const std::optional<std::string>&);
template void save_checkpoint(const MTLModel<double>&, const std::filesystem::path&, std::uint64_t,
                              const std::optional<std::string>&);
template MTLModel<float> load_checkpoint(const std::filesystem::path&, CheckpointInfo*);
template MTLModel<double> load_checkpoint(const std::filesystem::path&, CheckpointInfo*);

}  // namespace mtlprune
