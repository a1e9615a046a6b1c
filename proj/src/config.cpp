#include <array>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"

namespace mtlprune {

namespace {

// Walks one JSON object, reading known keys with type and range checks and
// collecting every problem under its dotted field path.
class Section {
public:
    Section(const json* obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (obj_ && !obj_->is_object()) {
            fail("", "expected an object");
            obj_ = nullptr;
        }
    }
    ~Section() {
        if (!obj_) return;
        for (const auto& [key, _] : obj_->items())
            if (!known_.contains(key)) fail(key, "unknown key");
    }
    Section(const Section&) = delete;

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    void fail(const std::string& key, const std::string& msg) const {
        errors_.push_back((key.empty() ? (path_.empty() ? "<root>" : path_) : field(key)) + ": " + msg);
    }

    const json* find(const std::string& key) {
        known_.insert(key);
        if (!obj_) return nullptr;
        auto it = obj_->find(key);
        return it == obj_->end() ? nullptr : &*it;
    }

    Section child(const std::string& key) { return Section(find(key), field(key), errors_); }

    template <typename T>
    void integer(const std::string& key, T& out, long long lo, long long hi = (1LL << 53)) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number_integer()) return fail(key, "expected an integer");
        const auto x = v->get<long long>();
        if (x < lo || x > hi)
            return fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                                 std::to_string(x));
        out = static_cast<T>(x);
    }

    void number(const std::string& key, double& out, const std::function<bool(double)>& ok, const char* rule) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number()) return fail(key, "expected a number");
        const double x = v->get<double>();
        if (!ok(x)) return fail(key, std::string("must be ") + rule);
        out = x;
    }

    void boolean(const std::string& key, bool& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_boolean()) return fail(key, "expected true or false");
        out = v->get<bool>();
    }

    template <typename T>
    void choice(const std::string& key, T& out, const std::function<T(const std::string&)>& parse) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_string()) return fail(key, "expected a string");
        try {
            out = parse(v->get<std::string>());
        } catch (const ConfigError& e) {
            fail(key, e.what());
        }
    }

    void string(const std::string& key, std::string& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_string()) return fail(key, "expected a string");
        out = v->get<std::string>();
    }

    void optional_path(const std::string& key, std::optional<std::filesystem::path>& out) {
        const json* v = find(key);
        if (!v || v->is_null()) return;
        if (!v->is_string()) return fail(key, "expected a path string or null");
        out = v->get<std::string>();
    }

    void number_list(const std::string& key, std::vector<double>& out, const std::function<bool(double)>& ok,
                     const char* rule) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_array() || v->empty()) return fail(key, "expected a non-empty array of numbers");
        std::vector<double> values;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const auto& e = (*v)[i];
            if (!e.is_number() || !ok(e.get<double>())) {
                fail(key + "[" + std::to_string(i) + "]", std::string("must be a number ") + rule);
                return;
            }
            values.push_back(e.get<double>());
        }
        out = values;
    }

    void int_list(const std::string& key, std::vector<int>& out, int lo) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_array() || v->empty()) return fail(key, "expected a non-empty array of integers");
        std::vector<int> values;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const auto& e = (*v)[i];
            if (!e.is_number_integer() || e.get<long long>() < lo) {
                fail(key + "[" + std::to_string(i) + "]", "must be an integer >= " + std::to_string(lo));
                return;
            }
            values.push_back(e.get<int>());
        }
        out = values;
    }

    const json* array(const std::string& key) {
        const json* v = find(key);
        if (v && (!v->is_array() || v->empty())) {
            fail(key, "expected a non-empty array");
            return nullptr;
        }
        return v;
    }

    std::vector<std::string>& errors() { return errors_; }

private:
    const json* obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> known_;
};

const auto positive = [](double x) { return x > 0.0; };
const auto non_negative = [](double x) { return x >= 0.0; };
const auto unit_open = [](double x) { return x > 0.0 && x < 1.0; };

void read_optimizer(Section& s, OptimizerConfig& opt) {
    s.choice<OptimizerKind>("optimizer", opt.kind, parse_optimizer);
    s.number("weight_decay", opt.weight_decay, non_negative, "non-negative");
    s.number("beta1", opt.beta1, [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)");
    s.number("beta2", opt.beta2, [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)");
    s.number("eps", opt.eps, positive, "positive");
    if (opt.kind == OptimizerKind::adam && opt.weight_decay != 0.0)
        s.fail("weight_decay", "requires optimizer \"adamw\"");
}

void read_train(Section& s, TrainConfig& t, bool with_lr) {
    s.integer("epochs", t.epochs, 1, 100000);
    s.integer("batch_size", t.batch_size, 1, 1 << 20);
    if (with_lr) s.number("lr", t.lr, positive, "positive");
    s.integer("schedule_epochs", t.schedule_epochs, 0, 100000);
    s.choice<BestPolicy>("policy", t.policy, parse_policy);
    s.number("bn_momentum", t.bn_momentum, [](double x) { return x > 0.0 && x <= 1.0; }, "in (0, 1]");
    read_optimizer(s, t.optimizer);
}

void read_model(Section& s, ModelSpec& spec) {
    if (const json* layers = s.array("layers")) {
        spec.backbone.layers.clear();
        for (std::size_t i = 0; i < layers->size(); ++i) {
            Section l(&(*layers)[i], s.field("layers") + "[" + std::to_string(i) + "]", s.errors());
            ConvLayerSpec c;
            l.integer("filters", c.filters, 1, 4096);
            l.integer("kernel", c.kernel, 1, 15);
            l.integer("stride", c.stride, 1, 8);
            l.integer("padding", c.padding, 0, 16);
            l.integer("dilation", c.dilation, 1, 16);
            l.boolean("pool_after", c.pool_after);
            spec.backbone.layers.push_back(c);
        }
    }
    std::vector<int> dilations{1, 2, 4};
    int mid = 16;
    s.int_list("head_dilations", dilations, 1);
    s.integer("head_mid_channels", mid, 1, 4096);
    for (auto& h : spec.heads) {
        h.dilations = dilations;
        h.mid_channels = mid;
    }
    s.boolean("normalization", spec.normalization);
    s.integer("min_filters_per_layer", spec.min_filters_per_layer, 1, 4096);
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    std::vector<std::string> errors;
    {
        Section root(&doc, "", errors);
        root.integer("seed", cfg.seed, 0);
        root.choice<std::string>("precision", cfg.precision, [](const std::string& p) {
            if (p != "float" && p != "double") throw ConfigError("expected \"float\" or \"double\"");
            return p;
        });
        std::string out = cfg.output_dir.string();
        root.string("output_dir", out);
        cfg.output_dir = out;

        {
            Section d = root.child("dataset");
            d.optional_path("dir", cfg.dataset_dir);
            std::optional<std::uint64_t> dseed;
            if (const json* v = d.find("seed"); v) {
                if (v->is_number_integer() && v->get<long long>() >= 0) dseed = v->get<std::uint64_t>();
                else d.fail("seed", "expected a non-negative integer");
            }
            d.integer("n_samples", cfg.dataset.n_samples, 2, 1000000);
            d.integer("height", cfg.dataset.height, 1, 4096);
            d.integer("width", cfg.dataset.width, 1, 4096);
            d.integer("classes", cfg.dataset.classes, 2, 64);
            d.integer("min_shapes", cfg.dataset.min_shapes, 0, 64);
            d.integer("max_shapes", cfg.dataset.max_shapes, 0, 64);
            d.number("d_min", cfg.dataset.d_min, unit_open, "in (0, 1)");
            d.number("noise", cfg.dataset.noise, non_negative, "non-negative");
            d.number("val_fraction", cfg.dataset.val_fraction, unit_open, "in (0, 1)");
            if (cfg.dataset.max_shapes < cfg.dataset.min_shapes) d.fail("max_shapes", "must be >= min_shapes");
            cfg.dataset.seed = dseed.value_or(cfg.seed);
        }

        cfg.model = desk_model_spec(cfg.dataset.classes);
        {
            Section m = root.child("model");
            read_model(m, cfg.model);
        }
        cfg.model.input_height = cfg.dataset.height;
        cfg.model.input_width = cfg.dataset.width;

        cfg.train.epochs = 12;
        {
            Section t = root.child("train");
            read_train(t, cfg.train, true);
        }

        {
            Section p = root.child("prune");
            auto& pc = cfg.prune;
            pc.stop.target_backbone_reduction = 0.6;
            p.choice<CriterionKind>("criterion", pc.criterion.kind, parse_criterion);
            p.choice<bool>("cosprune_pairs", pc.criterion.cosprune_all_pairs, [](const std::string& v) {
                if (v == "unordered") return false;
                if (v == "all") return true;
                throw ConfigError("expected \"unordered\" or \"all\"");
            });
            p.integer("filters_per_step", pc.filters_per_step, 1, 100000);
            p.integer("accumulation_epochs", pc.accumulation_epochs, 1, 100000);
            p.integer("schedule_epochs", pc.schedule_epochs, 0, 100000);
            p.integer("batch_size", pc.batch_size, 1, 1 << 20);
            p.number("lr", pc.lr, positive, "positive");
            p.choice<BestPolicy>("policy", pc.policy, parse_policy);
            p.number("bn_momentum", pc.bn_momentum, [](double x) { return x > 0.0 && x <= 1.0; }, "in (0, 1]");
            read_optimizer(p, pc.optimizer);
            p.optional_path("base_checkpoint", cfg.base_checkpoint);
            Section st = p.child("stop");
            st.integer("max_events", pc.stop.max_events, 0, 1000000);
            st.integer("min_alive_filters", pc.stop.min_alive_filters, 0, 1000000);
            st.integer("target_total_params", pc.stop.target_total_params, 0);
            st.number("target_backbone_reduction", pc.stop.target_backbone_reduction,
                      [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)");
            if (pc.schedule_epochs > 0 && pc.schedule_epochs < pc.accumulation_epochs)
                p.fail("schedule_epochs", "must be 0 or at least accumulation_epochs");
            if (pc.stop.max_events == 0 && pc.stop.min_alive_filters == 0 && pc.stop.target_total_params == 0 &&
                pc.stop.target_backbone_reduction == 0.0)
                st.fail("", "set at least one stop criterion");
        }

        {
            Section r = root.child("retrain");
            cfg.retrain.train.epochs = 30;
            r.number_list("lr_sweep", cfg.retrain.lr_sweep, positive, "> 0");
            read_train(r, cfg.retrain.train, false);
        }

        {
            Section rep = root.child("report");
            rep.string("baseline", cfg.report.baseline);
            rep.number("pairing_tolerance", cfg.report.pairing_tolerance, non_negative, "non-negative");
            rep.choice<Aggregate>("aggregate", cfg.report.aggregate, [](const std::string& v) {
                if (v == "best") return Aggregate::best;
                if (v == "mean") return Aggregate::mean;
                throw ConfigError("expected \"best\" or \"mean\"");
            });
        }
    }

    if (errors.empty()) {
        try {
            validate_model_spec(cfg.model);
        } catch (const ConfigError& e) {
            errors.push_back(std::string("model: ") + e.what());
        }
    }
    if (!errors.empty()) {
        std::ostringstream msg;
        msg << "invalid config (" << errors.size() << (errors.size() == 1 ? " problem" : " problems") << "):";
        for (const auto& e : errors) msg << "\n  " << e;
        throw ConfigError(msg.str());
    }

    const Seeds seeds = derive_seeds(cfg);
    cfg.train.seed = seeds.train;
    cfg.retrain.train.seed = seeds.retrain;
    cfg.prune.seed = seeds.prune;
    cfg.prune.criterion.seed = seeds.criterion;
    cfg.raw = doc;
    return cfg;
}

Seeds derive_seeds(const ExperimentConfig& cfg) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32)};
    std::array<std::uint32_t, 10> words{};
    seq.generate(words.begin(), words.end());
    auto word = [&](std::size_t i) { return (static_cast<std::uint64_t>(words[2 * i]) << 32) | words[2 * i + 1]; };
    return Seeds{cfg.dataset.seed, word(0), word(1), word(2), word(3), word(4)};
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (seed_override) {
        if (!doc.is_object()) throw ConfigError("config root must be an object");
        doc["seed"] = *seed_override;
    }
    ExperimentConfig cfg = parse_config(doc);
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) cfg.output_dir = root;
    return cfg;
}

Dataset obtain_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset_dir) {
        Dataset d = load_dataset(*cfg.dataset_dir);
        if (d.config.height != cfg.model.input_height || d.config.width != cfg.model.input_width)
            throw ConfigError("dataset at " + cfg.dataset_dir->string() + " has a different image size than the model");
        return d;
    }
    return generate(cfg.dataset);
}

}  // namespace mtlprune
