#include "mtlprune/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/error.hpp"

namespace mtlprune {

namespace {

constexpr double kNormEps = 1e-5;

struct SpatialTrace {
    std::vector<std::size_t> conv_h, conv_w;  // conv output extent per layer
    std::size_t feature_h = 0, feature_w = 0;
};

SpatialTrace trace_spatial(const BackboneSpec& backbone, std::size_t h, std::size_t w) {
    SpatialTrace t;
    for (const auto& l : backbone.layers) {
        const ConvGeometry g{l.stride, l.padding, l.dilation};
        h = conv_output_extent(h, static_cast<std::size_t>(l.kernel), g);
        w = conv_output_extent(w, static_cast<std::size_t>(l.kernel), g);
        t.conv_h.push_back(h);
        t.conv_w.push_back(w);
        if (l.pool_after) {
            if (h < 2 || w < 2) throw ShapeError("pooling would shrink the feature map below 1x1");
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
    }
    t.feature_h = h;
    t.feature_w = w;
    return t;
}

int expected_out_channels(const HeadSpec& h, int fallback) {
    switch (h.kind) {
        case TaskKind::depth: return 1;
        case TaskKind::normals: return 3;
        case TaskKind::segmentation: return fallback;
    }
    return fallback;
}

template <typename Real>
ConvParams<Real> init_conv(std::size_t cout, std::size_t cin, std::size_t k, ConvGeometry g, std::mt19937_64& rng) {
    ConvParams<Real> p{Tensor<Real>({cout, cin, k, k}), Tensor<Real>({cout}), g};
    const double fan_in = static_cast<double>(cin * k * k);
    std::uniform_real_distribution<double> wdist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    std::uniform_real_distribution<double> bdist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (auto& v : p.weight.data()) v = static_cast<Real>(wdist(rng));
    for (auto& v : p.bias.data()) v = static_cast<Real>(bdist(rng));
    return p;
}

template <typename Real>
NormParams<Real> init_norm(std::size_t c) {
    return NormParams<Real>{Tensor<Real>({c}, Real(1)), Tensor<Real>({c}, Real(0)), std::vector<Real>(c, Real(0)),
                            std::vector<Real>(c, Real(1))};
}

// Keeps the listed output channels (rows) of a conv.
template <typename Real>
void keep_outputs(ConvParams<Real>& conv, const std::vector<std::size_t>& keep) {
    const std::size_t block = conv.in_channels() * conv.kernel() * conv.kernel();
    Tensor<Real> w({keep.size(), conv.in_channels(), conv.kernel(), conv.kernel()});
    Tensor<Real> b({keep.size()});
    for (std::size_t i = 0; i < keep.size(); ++i) {
        std::copy_n(conv.weight.data().data() + keep[i] * block, block, w.data().data() + i * block);
        b[i] = conv.bias[keep[i]];
    }
    conv.weight = std::move(w);
    conv.bias = std::move(b);
}

// Keeps the listed input channels of a conv.
template <typename Real>
void keep_inputs(ConvParams<Real>& conv, const std::vector<std::size_t>& keep) {
    const std::size_t cout = conv.out_channels(), cin = conv.in_channels(), kk = conv.kernel() * conv.kernel();
    Tensor<Real> w({cout, keep.size(), conv.kernel(), conv.kernel()});
    for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < keep.size(); ++i)
            std::copy_n(conv.weight.data().data() + (o * cin + keep[i]) * kk, kk,
                        w.data().data() + (o * keep.size() + i) * kk);
    conv.weight = std::move(w);
}

template <typename Real>
void keep_norm(NormParams<Real>& norm, const std::vector<std::size_t>& keep) {
    Tensor<Real> g({keep.size()}), b({keep.size()});
    std::vector<Real> m(keep.size()), v(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        g[i] = norm.gamma[keep[i]];
        b[i] = norm.beta[keep[i]];
        m[i] = norm.running_mean[keep[i]];
        v[i] = norm.running_var[keep[i]];
    }
    norm = NormParams<Real>{std::move(g), std::move(b), std::move(m), std::move(v)};
}

template <typename Real>
Var<Real> run_conv(Tape<Real>& tape, Var<Real> x, const ConvParams<Real>& conv, std::size_t& slot) {
    auto w = tape.parameter(conv.weight, slot++);
    auto b = tape.parameter(conv.bias, slot++);
    return conv2d(x, w, b, conv.geometry);
}

}  // namespace

ModelSpec desk_model_spec(int classes) {
    ModelSpec spec;
    spec.backbone.input_channels = 3;
    const int filters[] = {8, 8, 16, 16, 32, 32};
    for (int i = 0; i < 6; ++i) {
        ConvLayerSpec l;
        l.filters = filters[i];
        l.pool_after = (i == 1 || i == 3);
        spec.backbone.layers.push_back(l);
    }
    spec.heads = {HeadSpec{TaskKind::segmentation, {1, 2, 4}, 16, classes},
                  HeadSpec{TaskKind::depth, {1, 2, 4}, 16, 1}, HeadSpec{TaskKind::normals, {1, 2, 4}, 16, 3}};
    return spec;
}

void validate_model_spec(const ModelSpec& spec) {
    if (spec.backbone.input_channels < 1) throw ConfigError("backbone.input_channels must be >= 1");
    if (spec.backbone.layers.empty()) throw ConfigError("backbone needs at least one layer");
    if (spec.heads.empty()) throw ConfigError("model needs at least one task head");
    if (spec.min_filters_per_layer < 1) throw ConfigError("min_filters_per_layer must be >= 1");
    if (spec.input_height < 1 || spec.input_width < 1) throw ConfigError("input size must be positive");
    for (std::size_t i = 0; i < spec.backbone.layers.size(); ++i) {
        const auto& l = spec.backbone.layers[i];
        const std::string where = "backbone.layers[" + std::to_string(i) + "]";
        if (l.filters < 1) throw ConfigError(where + ".filters must be >= 1");
        if (l.kernel < 1 || l.stride < 1 || l.dilation < 1 || l.padding < 0) {
            throw ConfigError(where + ": kernel, stride and dilation must be >= 1 and padding >= 0");
        }
    }
    SpatialTrace t;
    try {
        t = trace_spatial(spec.backbone, static_cast<std::size_t>(spec.input_height),
                          static_cast<std::size_t>(spec.input_width));
    } catch (const ShapeError& e) {
        throw ConfigError(std::string("backbone does not fit the input size: ") + e.what());
    }
    if (spec.input_height % t.feature_h != 0 || spec.input_width % t.feature_w != 0 ||
        spec.input_height / t.feature_h != spec.input_width / t.feature_w) {
        throw ConfigError("input size must be an integer multiple of the backbone feature size");
    }
    for (std::size_t i = 0; i < spec.heads.size(); ++i) {
        const auto& h = spec.heads[i];
        const std::string where = "heads[" + std::to_string(i) + "]";
        if (h.dilations.empty()) throw ConfigError(where + ".dilations must not be empty");
        for (int d : h.dilations)
            if (d < 1) throw ConfigError(where + ".dilations must be >= 1");
        if (h.mid_channels < 1) throw ConfigError(where + ".mid_channels must be >= 1");
        if (h.out_channels < 1 || h.out_channels != expected_out_channels(h, h.out_channels)) {
            throw ConfigError(where + ".out_channels inconsistent with task " + std::string(task_name(h.kind)));
        }
        if (h.kind == TaskKind::segmentation && h.out_channels < 2) {
            throw ConfigError(where + ": segmentation needs at least 2 classes");
        }
    }
}

std::string to_string(const FilterCoord& c) {
    return "(" + std::to_string(c.layer) + "," + std::to_string(c.filter) + ")";
}

template <typename Real>
MTLModel<Real> MTLModel<Real>::build(const ModelSpec& spec, std::uint64_t seed) {
    std::vector<std::vector<int>> alive;
    for (const auto& l : spec.backbone.layers) {
        std::vector<int> ids(static_cast<std::size_t>(std::max(l.filters, 0)));
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
        alive.push_back(std::move(ids));
    }
    return build_pruned(spec, alive, seed);
}

template <typename Real>
MTLModel<Real> MTLModel<Real>::build_pruned(const ModelSpec& spec, const std::vector<std::vector<int>>& alive,
                                            std::uint64_t seed) {
    validate_model_spec(spec);
    if (alive.size() != spec.backbone.layers.size()) {
        throw ConfigError("alive filter lists do not match the number of backbone layers");
    }
    MTLModel m;
    m.spec_ = spec;
    std::mt19937_64 rng(seed);
    std::size_t cin = static_cast<std::size_t>(spec.backbone.input_channels);
    for (std::size_t i = 0; i < spec.backbone.layers.size(); ++i) {
        const auto& ls = spec.backbone.layers[i];
        const auto& ids = alive[i];
        if (static_cast<int>(ids.size()) < spec.min_filters_per_layer) {
            throw ConfigError("layer " + std::to_string(i) + " has fewer alive filters than the per-layer floor");
        }
        std::set<int> unique(ids.begin(), ids.end());
        if (unique.size() != ids.size() || !std::is_sorted(ids.begin(), ids.end()) || ids.front() < 0 ||
            ids.back() >= ls.filters) {
            throw ConfigError("layer " + std::to_string(i) + " alive ids must be sorted, unique and < filters");
        }
        BackboneLayer<Real> layer;
        layer.conv = init_conv<Real>(ids.size(), cin, static_cast<std::size_t>(ls.kernel),
                                     ConvGeometry{ls.stride, ls.padding, ls.dilation}, rng);
        if (spec.normalization) layer.norm = init_norm<Real>(ids.size());
        layer.pool_after = ls.pool_after;
        layer.alive = ids;
        cin = ids.size();
        m.layers_.push_back(std::move(layer));
    }
    for (const auto& hs : spec.heads) {
        TaskHead<Real> head;
        head.spec = hs;
        const std::size_t mid = static_cast<std::size_t>(hs.mid_channels);
        for (int d : hs.dilations) head.branches.push_back(init_conv<Real>(mid, cin, 3, ConvGeometry{1, d, d}, rng));
        head.projection = init_conv<Real>(static_cast<std::size_t>(hs.out_channels), mid * hs.dilations.size(), 1,
                                          ConvGeometry{1, 0, 1}, rng);
        m.heads_.push_back(std::move(head));
    }
    return m;
}

template <typename Real>
ModelSpec MTLModel<Real>::current_spec() const {
    ModelSpec s = spec_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        s.backbone.layers[i].filters = static_cast<int>(layers_[i].conv.out_channels());
    }
    return s;
}

template <typename Real>
std::vector<int> MTLModel<Real>::filter_counts() const {
    std::vector<int> out;
    for (const auto& l : layers_) out.push_back(static_cast<int>(l.conv.out_channels()));
    return out;
}

template <typename Real>
std::size_t MTLModel<Real>::alive_filter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.conv.out_channels();
    return n;
}

template <typename Real>
std::vector<std::vector<int>> MTLModel<Real>::alive_filter_ids() const {
    std::vector<std::vector<int>> out;
    for (const auto& l : layers_) out.push_back(l.alive);
    return out;
}

template <typename Real>
std::vector<FilterCoord> MTLModel<Real>::filters() const {
    std::vector<FilterCoord> out;
    for (std::size_t l = 0; l < layers_.size(); ++l)
        for (std::size_t f = 0; f < layers_[l].conv.out_channels(); ++f)
            out.push_back(FilterCoord{static_cast<int>(l), static_cast<int>(f)});
    return out;
}

template <typename Real>
bool MTLModel<Real>::contains(const FilterCoord& c) const {
    return c.layer >= 0 && static_cast<std::size_t>(c.layer) < layers_.size() && c.filter >= 0 &&
           static_cast<std::size_t>(c.filter) < layers_[static_cast<std::size_t>(c.layer)].conv.out_channels();
}

template <typename Real>
std::vector<NamedParam<Tensor<Real>>> MTLModel<Real>::parameters() {
    std::vector<NamedParam<Tensor<Real>>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string p = "backbone." + std::to_string(i) + ".";
        out.push_back({p + "weight", &layers_[i].conv.weight});
        out.push_back({p + "bias", &layers_[i].conv.bias});
        if (layers_[i].norm) {
            out.push_back({p + "gamma", &layers_[i].norm->gamma});
            out.push_back({p + "beta", &layers_[i].norm->beta});
        }
    }
    for (std::size_t t = 0; t < heads_.size(); ++t) {
        const std::string p = "head." + std::to_string(t) + ".";
        for (std::size_t b = 0; b < heads_[t].branches.size(); ++b) {
            out.push_back({p + "branch" + std::to_string(b) + ".weight", &heads_[t].branches[b].weight});
            out.push_back({p + "branch" + std::to_string(b) + ".bias", &heads_[t].branches[b].bias});
        }
        out.push_back({p + "projection.weight", &heads_[t].projection.weight});
        out.push_back({p + "projection.bias", &heads_[t].projection.bias});
    }
    return out;
}

template <typename Real>
std::vector<NamedParam<const Tensor<Real>>> MTLModel<Real>::parameters() const {
    auto mutable_params = const_cast<MTLModel*>(this)->parameters();
    std::vector<NamedParam<const Tensor<Real>>> out;
    out.reserve(mutable_params.size());
    for (auto& p : mutable_params) out.push_back({std::move(p.name), p.tensor});
    return out;
}

template <typename Real>
std::size_t MTLModel<Real>::slot_count() const {
    std::size_t per_layer = spec_.normalization ? 4 : 2;
    std::size_t n = per_layer * layers_.size();
    for (const auto& h : heads_) n += 2 * h.branches.size() + 2;
    return n;
}

template <typename Real>
std::size_t MTLModel<Real>::weight_slot(std::size_t layer) const {
    return layer * (spec_.normalization ? 4 : 2);
}

template <typename Real>
Var<Real> MTLModel<Real>::run_backbone(Tape<Real>& tape, const Tensor<Real>& images, Mode mode, std::size_t& slot,
                                       ForwardPass<Real>* pass) const {
    const Shape& s = images.shape();
    if (s.size() != 4 || s[1] != static_cast<std::size_t>(spec_.backbone.input_channels)) {
        throw ShapeError("forward: images must be [N," + std::to_string(spec_.backbone.input_channels) +
                         ",H,W], got " + shape_to_string(s));
    }
    Var<Real> x = tape.constant(images);
    for (const auto& layer : layers_) {
        x = run_conv(tape, x, layer.conv, slot);
        if (layer.norm) {
            auto g = tape.parameter(layer.norm->gamma, slot++);
            auto b = tape.parameter(layer.norm->beta, slot++);
            if (mode == Mode::train) {
                std::vector<Real> mean, var;
                x = batch_norm_train(x, g, b, kNormEps, &mean, &var);
                if (pass) {
                    pass->batch_means.push_back(std::move(mean));
                    pass->batch_vars.push_back(std::move(var));
                }
            } else {
                x = batch_norm_eval(x, g, b, std::span<const Real>(layer.norm->running_mean),
                                    std::span<const Real>(layer.norm->running_var), kNormEps);
            }
        }
        x = relu(x);
        if (layer.pool_after) x = maxpool2d(x, 2, 2);
    }
    return x;
}

template <typename Real>
ForwardPass<Real> MTLModel<Real>::forward(Tape<Real>& tape, const Tensor<Real>& images, Mode mode) const {
    ForwardPass<Real> pass;
    std::size_t slot = 0;
    Var<Real> x = run_backbone(tape, images, mode, slot, &pass);
    const Shape& s = images.shape();
    const std::size_t fh = x.shape()[2], fw = x.shape()[3];
    if (s[2] % fh != 0 || s[3] % fw != 0 || s[2] / fh != s[3] / fw) {
        throw ShapeError("forward: input " + shape_to_string(s) + " is not an integer multiple of feature map " +
                         shape_to_string(x.shape()));
    }
    const int factor = static_cast<int>(s[2] / fh);
    for (const auto& head : heads_) {
        std::vector<Var<Real>> branches;
        for (const auto& conv : head.branches) branches.push_back(relu(run_conv(tape, x, conv, slot)));
        Var<Real> merged = branches.size() == 1 ? branches[0] : concat_channels<Real>(branches);
        Var<Real> out = run_conv(tape, merged, head.projection, slot);
        if (factor > 1) out = upsample_nearest(out, factor);
        pass.predictions.push_back(out);
    }
    return pass;
}

template <typename Real>
std::vector<Tensor<Real>> MTLModel<Real>::forward_all(const Tensor<Real>& images, Mode mode) const {
    Tape<Real> tape;
    auto pass = forward(tape, images, mode);
    std::vector<Tensor<Real>> out;
    for (const auto& p : pass.predictions) out.push_back(p.value());
    return out;
}

template <typename Real>
Tensor<Real> MTLModel<Real>::backbone_features(const Tensor<Real>& images, Mode mode) const {
    Tape<Real> tape;
    std::size_t slot = 0;
    return run_backbone(tape, images, mode, slot, nullptr).value();
}

template <typename Real>
void MTLModel<Real>::update_running_stats(const ForwardPass<Real>& pass, double momentum) {
    if (!spec_.normalization) return;
    if (pass.batch_means.size() != layers_.size()) throw Error("update_running_stats: pass has no batch statistics");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& norm = *layers_[i].norm;
        for (std::size_t c = 0; c < norm.running_mean.size(); ++c) {
            norm.running_mean[c] = static_cast<Real>((1 - momentum) * norm.running_mean[c] + momentum * pass.batch_means[i][c]);
            norm.running_var[c] = static_cast<Real>((1 - momentum) * norm.running_var[c] + momentum * pass.batch_vars[i][c]);
        }
    }
}

template <typename Real>
ParamCounts MTLModel<Real>::count_params() const {
    ParamCounts c;
    for (const auto& l : layers_) {
        c.backbone += l.conv.weight.numel() + l.conv.bias.numel();
        if (l.norm) c.backbone += l.norm->gamma.numel() + l.norm->beta.numel();
    }
    for (const auto& h : heads_) {
        for (const auto& b : h.branches) c.heads += b.weight.numel() + b.bias.numel();
        c.heads += h.projection.weight.numel() + h.projection.bias.numel();
    }
    return c;
}

template <typename Real>
FlopCounts MTLModel<Real>::count_flops(std::size_t height, std::size_t width) const {
    // 2 * k^2 * Cin * Cout * Hout * Wout per conv; bias, activation and pooling are not counted.
    FlopCounts f;
    std::size_t h = height, w = width;
    for (const auto& l : layers_) {
        h = conv_output_extent(h, l.conv.kernel(), l.conv.geometry);
        w = conv_output_extent(w, l.conv.kernel(), l.conv.geometry);
        f.backbone += 2ULL * l.conv.kernel() * l.conv.kernel() * l.conv.in_channels() * l.conv.out_channels() * h * w;
        if (l.pool_after) {
            h = (h - 2) / 2 + 1;
            w = (w - 2) / 2 + 1;
        }
    }
    for (const auto& head : heads_) {
        for (const auto& b : head.branches) {
            const std::size_t bh = conv_output_extent(h, b.kernel(), b.geometry);
            const std::size_t bw = conv_output_extent(w, b.kernel(), b.geometry);
            f.heads += 2ULL * b.kernel() * b.kernel() * b.in_channels() * b.out_channels() * bh * bw;
        }
        const auto& p = head.projection;
        f.heads += 2ULL * p.kernel() * p.kernel() * p.in_channels() * p.out_channels() * h * w;
    }
    return f;
}

template <typename Real>
void MTLModel<Real>::check_victims(std::span<const FilterCoord> victims, bool enforce_floor) const {
    std::set<FilterCoord> seen;
    std::vector<int> removed(layers_.size(), 0);
    for (const auto& v : victims) {
        if (!contains(v)) throw PruneError("unknown filter coordinate " + to_string(v));
        if (!seen.insert(v).second) throw PruneError("duplicate victim " + to_string(v));
        ++removed[static_cast<std::size_t>(v.layer)];
    }
    if (!enforce_floor) return;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const int left = static_cast<int>(layers_[l].conv.out_channels()) - removed[l];
        if (removed[l] > 0 && left < spec_.min_filters_per_layer) {
            throw PruneError("pruning " + std::to_string(removed[l]) + " filters from layer " + std::to_string(l) +
                             " leaves " + std::to_string(left) + ", below the floor of " +
                             std::to_string(spec_.min_filters_per_layer));
        }
    }
}

template <typename Real>
MTLModel<Real> MTLModel<Real>::apply_prune(std::span<const FilterCoord> victims) const {
    check_victims(victims, true);
    MTLModel out = *this;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        std::set<int> drop;
        for (const auto& v : victims)
            if (static_cast<std::size_t>(v.layer) == l) drop.insert(v.filter);
        if (drop.empty()) continue;
        std::vector<std::size_t> keep;
        std::vector<int> alive;
        for (std::size_t f = 0; f < layers_[l].conv.out_channels(); ++f) {
            if (!drop.count(static_cast<int>(f))) {
                keep.push_back(f);
                alive.push_back(layers_[l].alive[f]);
            }
        }
        auto& layer = out.layers_[l];
        keep_outputs(layer.conv, keep);
        if (layer.norm) keep_norm(*layer.norm, keep);
        layer.alive = std::move(alive);
        if (l + 1 < layers_.size()) {
            keep_inputs(out.layers_[l + 1].conv, keep);
        } else {
            for (auto& head : out.heads_)
                for (auto& branch : head.branches) keep_inputs(branch, keep);
        }
    }
    return out;
}

template <typename Real>
MTLModel<Real> MTLModel<Real>::mask_prune(std::span<const FilterCoord> victims) const {
    check_victims(victims, false);
    MTLModel out = *this;
    for (const auto& v : victims) {
        auto& layer = out.layers_[static_cast<std::size_t>(v.layer)];
        const std::size_t f = static_cast<std::size_t>(v.filter);
        const std::size_t block = layer.conv.in_channels() * layer.conv.kernel() * layer.conv.kernel();
        std::fill_n(layer.conv.weight.data().data() + f * block, block, Real(0));
        layer.conv.bias[f] = Real(0);
        if (layer.norm) {
            layer.norm->gamma[f] = Real(0);
            layer.norm->beta[f] = Real(0);
        }
    }
    return out;
}

template <typename Real>
std::size_t MTLModel<Real>::removed_params(std::span<const FilterCoord> victims) const {
    check_victims(victims, false);
    std::vector<std::size_t> before, after;
    for (const auto& l : layers_) before.push_back(l.conv.out_channels());
    after = before;
    for (const auto& v : victims) --after[static_cast<std::size_t>(v.layer)];
    const std::size_t per_filter_extra = spec_.normalization ? 3 : 1;  // bias (+ gamma, beta)
    std::size_t removed = 0;
    std::size_t cin_before = static_cast<std::size_t>(spec_.backbone.input_channels), cin_after = cin_before;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::size_t kk = layers_[l].conv.kernel() * layers_[l].conv.kernel();
        removed += kk * (cin_before * before[l] - cin_after * after[l]) + per_filter_extra * (before[l] - after[l]);
        cin_before = before[l];
        cin_after = after[l];
    }
    for (const auto& head : heads_)
        for (const auto& b : head.branches)
            removed += b.kernel() * b.kernel() * b.out_channels() * (cin_before - cin_after);
    return removed;
}

template <typename Real>
std::uint64_t MTLModel<Real>::checksum() const {
    Fnv1a h;
    for (const auto& p : parameters()) h.update(std::as_bytes(p.tensor->data()));
    return h.value();
}

template <typename Real>
std::span<const Real> MTLModel<Real>::filter_weights(const FilterCoord& c) const {
    if (!contains(c)) throw PruneError("unknown filter coordinate " + to_string(c));
    const auto& conv = layers_[static_cast<std::size_t>(c.layer)].conv;
    const std::size_t block = conv.in_channels() * conv.kernel() * conv.kernel();
    return conv.weight.data().subspan(static_cast<std::size_t>(c.filter) * block, block);
}

template class MTLModel<float>;
template class MTLModel<double>;

}  // namespace mtlprune
