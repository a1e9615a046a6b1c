#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/checks.hpp"
#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"

namespace mtlprune {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- CSV

std::vector<std::string> curves_header() {
    std::vector<std::string> h{"step", "seed", "params", "backbone_params", "flops"};
    for (auto name : MetricsReport::column_names()) h.emplace_back(name);
    h.emplace_back("total_val_loss");
    return h;
}

std::vector<std::string> epoch_header(const ModelSpec& spec) {
    std::vector<std::string> h{"epoch"};
    for (const auto& head : spec.heads) h.push_back("train_loss_" + std::string(task_name(head.kind)));
    for (auto name : MetricsReport::column_names()) h.emplace_back(name);
    h.emplace_back("total_val_loss");
    h.emplace_back("lr");
    return h;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty CSV file");
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split_line(line);
        if (row.size() != t.header.size())
            throw IoError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                          std::to_string(row.size()) + " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_csv(const fs::path& path, const CsvTable& table) {
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << "\n";
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    write_text(path, out.str());
}

void validate_csv(const fs::path& path, const std::vector<std::string>& header, std::size_t numeric_from) {
    const CsvTable t = read_csv(path);
    if (t.header != header) throw IoError(path.string() + ": unexpected column layout");
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = numeric_from; c < header.size(); ++c) {
            const std::string& cell = t.rows[r][c];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0' || !std::isfinite(v))
                throw IoError(path.string() + ": row " + std::to_string(r + 1) + " column " + header[c] +
                              " is not a finite number ('" + cell + "')");
        }
}

double percent_delta(double baseline, double other) {
    if (baseline == 0.0) throw Error("percent change relative to a zero baseline");
    return 100.0 * (other - baseline) / baseline;
}

// ---------------------------------------------------------------- helpers

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Replaces a previous run's output directory so reruns are idempotent.
void fresh_dir(const fs::path& dir) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (ec) throw IoError("cannot clear " + dir.string() + ": " + ec.message());
    ensure_dir(dir);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> metric_cells(const MetricsReport& m) {
    std::vector<std::string> cells;
    for (double v : m.values()) cells.push_back(format_number(v));
    return cells;
}

void write_epochs_csv(const fs::path& path, const ModelSpec& spec, const std::vector<EpochRecord>& records) {
    CsvTable t{epoch_header(spec), {}};
    for (const auto& r : records) {
        std::vector<std::string> row{std::to_string(r.epoch)};
        for (double l : r.train_losses) row.push_back(format_number(l));
        for (auto& c : metric_cells(r.val)) row.push_back(c);
        row.push_back(format_number(r.total_val_loss));
        row.push_back(format_number(r.lr));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
    validate_csv(path, t.header);
}

void log_epoch(std::ostream& log, const std::string& tag, const EpochRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s epoch %3d  lr %.2e  train %.4f  val %.4f  pix_acc %.4f  miou %.4f  depth_abs %.4f  angle %.2f",
                  tag.c_str(), r.epoch, r.lr,
                  [&] {
                      double s = 0.0;
                      for (double l : r.train_losses) s += l;
                      return s;
                  }(),
                  r.total_val_loss, r.val.seg.pixel_accuracy, r.val.seg.miou, r.val.depth.abs_err,
                  r.val.normals.angle_mean_deg);
    log << buf << std::endl;
}

json epoch_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"train_losses", r.train_losses},
            {"metrics", to_json(r.val)},
            {"total_val_loss", r.total_val_loss},
            {"lr", r.lr}};
}

Split split_for(const Dataset& data) {
    return split(data.size(), data.config.val_fraction, data.config.seed);
}

template <typename Real>
json model_summary(const MTLModel<Real>& m) {
    const auto p = m.count_params();
    const auto f = m.count_flops(static_cast<std::size_t>(m.spec().input_height),
                                 static_cast<std::size_t>(m.spec().input_width));
    return {{"params", p.total()},
            {"backbone_params", p.backbone},
            {"head_params", p.heads},
            {"flops", f.total()},
            {"backbone_flops", f.backbone},
            {"filter_counts", m.filter_counts()}};
}

template <typename Real>
fs::path train_impl(const ExperimentConfig& cfg, std::ostream& log) {
    const Seeds seeds = derive_seeds(cfg);
    const Dataset data = obtain_dataset(cfg);
    const Split sp = split_for(data);
    auto model = MTLModel<Real>::build(cfg.model, seeds.init);
    log << "train: " << sp.train.size() << " training / " << sp.val.size() << " validation samples, "
        << model.count_params().total() << " parameters" << std::endl;
    auto result = train(std::move(model), data, sp, cfg.train, [&](const EpochRecord& r) { log_epoch(log, "train", r); });

    const fs::path dir = cfg.output_dir / "train";
    fresh_dir(dir);
    save_checkpoint(result.best_model, dir / "best", seeds.init);
    save_checkpoint(result.final_model, dir / "final", seeds.init);
    write_epochs_csv(dir / "epochs.csv", cfg.model, result.records);
    const auto& best = result.records[result.best_epoch];
    write_json(dir / "train.json", {{"seed", cfg.seed},
                                    {"precision", cfg.precision},
                                    {"policy", policy_name(cfg.train.policy)},
                                    {"best_epoch", result.best_epoch},
                                    {"best", epoch_json(best)},
                                    {"model", model_summary(result.best_model)},
                                    {"config", cfg.raw}});
    log << "train: best epoch " << result.best_epoch << " pixel accuracy " << best.val.seg.pixel_accuracy
        << "; checkpoint " << (dir / "best").string() << std::endl;
    return dir;
}

template <typename Real>
fs::path prune_impl(const ExperimentConfig& cfg, const PruneCommandOptions& opts, std::ostream& log) {
    PruneConfig pc = cfg.prune;
    if (opts.criterion) pc.criterion.kind = parse_criterion(*opts.criterion);

    fs::path base_path;
    if (opts.base) base_path = *opts.base;
    else if (cfg.base_checkpoint) base_path = *cfg.base_checkpoint;
    else base_path = cfg.output_dir / "train" / "best";
    if (!fs::exists(base_path / "manifest.json")) {
        if (!opts.from_scratch || opts.base || cfg.base_checkpoint)
            throw ConfigError("no trained base checkpoint at " + base_path.string() +
                              " (run `train` first, set prune.base_checkpoint, or pass --from-scratch)");
        train_impl<Real>(cfg, log);
    }

    const Dataset data = obtain_dataset(cfg);
    const Split sp = split_for(data);
    auto base = load_checkpoint<Real>(base_path);
    if (base.spec().input_height != cfg.model.input_height || base.spec().input_width != cfg.model.input_width)
        throw ConfigError("base checkpoint image size does not match the dataset");

    const std::string name = opts.run_name.value_or(criterion_name(pc.criterion.kind) + "-s" + std::to_string(cfg.seed));
    const fs::path dir = cfg.output_dir / "prune" / name;
    fresh_dir(dir);
    ensure_dir(dir / "events");
    log << "prune: criterion " << criterion_name(pc.criterion.kind) << ", " << pc.filters_per_step
        << " filters per step, " << pc.accumulation_epochs << " epoch window; output " << dir.string() << std::endl;

    const Seeds seeds = derive_seeds(cfg);
    auto event_dir = [&](int step) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "event_%03d", step);
        return dir / "events" / buf;
    };
    PruneCallbacks<Real> callbacks;
    callbacks.on_epoch = [&](int step, const EpochRecord& r) { log_epoch(log, "prune step " + std::to_string(step), r); };
    callbacks.after_window = [&](int step, const MTLModel<Real>& m) {
        if (step > 0) save_checkpoint(m, event_dir(step), seeds.init, std::string("../../history.jsonl"));
    };
    callbacks.after_event = [&](const PruneProbe<Real>& p) {
        log << "prune: event " << p.step << " -> " << p.model.count_params().total() << " parameters, filters";
        for (int c : p.model.filter_counts()) log << " " << c;
        log << std::endl;
    };
    const auto result = run_iterative(std::move(base), data, sp, pc, callbacks);
    const auto& history = result.history;

    std::ostringstream jsonl;
    for (const auto& e : history.events) jsonl << to_json(e).dump() << "\n";
    write_text(dir / "history.jsonl", jsonl.str());

    CsvTable curves{curves_header(), {}};
    auto level_row = [&](int step, const PruneLevel& l) {
        std::vector<std::string> row{std::to_string(step), std::to_string(cfg.seed), std::to_string(l.params),
                                     std::to_string(l.backbone_params), std::to_string(l.flops)};
        for (auto& c : metric_cells(l.metrics)) row.push_back(c);
        row.push_back(format_number(l.total_val_loss));
        return row;
    };
    curves.rows.push_back(level_row(0, history.base));
    for (const auto& e : history.events) curves.rows.push_back(level_row(e.step, e.after));
    write_csv(dir / "curves.csv", curves);
    validate_csv(dir / "curves.csv", curves.header);

    // One plot-ready file per metric: params against value, plus the best value
    // reached at this or any larger model along the trajectory.
    const auto names = MetricsReport::column_names();
    const auto& up = MetricsReport::higher_is_better();
    for (std::size_t m = 0; m < names.size(); ++m) {
        CsvTable t{{"step", "params", std::string(names[m]), "best_so_far"}, {}};
        double best = 0.0;
        for (std::size_t r = 0; r < curves.rows.size(); ++r) {
            const double v = std::stod(curves.rows[r][5 + m]);
            best = r == 0 ? v : (up[m] ? std::max(best, v) : std::min(best, v));
            t.rows.push_back({curves.rows[r][0], curves.rows[r][2], curves.rows[r][5 + m], format_number(best)});
        }
        const fs::path p = dir / ("curve_" + std::string(names[m]) + ".csv");
        write_csv(p, t);
        validate_csv(p, t.header);
    }

    json events = json::array();
    for (const auto& e : history.events)
        events.push_back({{"step", e.step}, {"checkpoint", "events/" + event_dir(e.step).filename().string()}});
    write_json(dir / "run.json",
               {{"criterion", criterion_name(pc.criterion.kind)},
                {"cosprune_pairs", pc.criterion.cosprune_all_pairs ? "all" : "unordered"},
                {"seed", cfg.seed},
                {"precision", cfg.precision},
                {"base_checkpoint", base_path.string()},
                {"filters_per_step", pc.filters_per_step},
                {"accumulation_epochs", pc.accumulation_epochs},
                {"stop_reason", history.stop_reason},
                {"base", to_json(history.base)},
                {"events", events},
                {"final", history.events.empty() ? json(nullptr) : to_json(history.events.back().after)},
                {"history", "history.jsonl"},
                {"curves", "curves.csv"},
                {"config", cfg.raw}});
    log << "prune: " << history.events.size() << " events, stopped by " << history.stop_reason << "; "
        << history.base.params << " -> " << result.model.count_params().total() << " parameters" << std::endl;
    return dir;
}

fs::path resolve_manifest_dir(const fs::path& p) {
    if (p.filename() == "manifest.json") return p.parent_path();
    return p;
}

template <typename Real>
fs::path retrain_impl(const ExperimentConfig& cfg, const fs::path& manifest, const std::optional<std::string>& run_name,
                      std::ostream& log) {
    const fs::path src = resolve_manifest_dir(manifest);
    const CheckpointInfo info = read_checkpoint_manifest(src);
    const Dataset data = obtain_dataset(cfg);
    const Split sp = split_for(data);
    const Seeds seeds = derive_seeds(cfg);

    std::string name;
    if (run_name) name = *run_name;
    else if (src.parent_path().filename() == "events") name = src.parent_path().parent_path().filename().string() + "_" + src.filename().string();
    else name = src.filename().string();
    const fs::path dir = cfg.output_dir / "retrain" / name;
    fresh_dir(dir);

    log << "retrain: architecture from " << src.string() << ", filters";
    for (const auto& layer : info.alive) log << " " << layer.size();
    log << "; " << cfg.retrain.lr_sweep.size() << " learning rates" << std::endl;
    const auto rr = retrain_from_scratch<Real>(
        info.spec, info.alive, data, sp, cfg.retrain.train, cfg.retrain.lr_sweep, seeds.retrain,
        [&](double lr, const EpochRecord& r) { log_epoch(log, "retrain lr " + format_number(lr), r); });

    CsvTable runs{{"lr", "best_epoch", "is_best"}, {}};
    for (auto name : MetricsReport::column_names()) runs.header.emplace_back(name);
    runs.header.emplace_back("total_val_loss");
    json run_list = json::array();
    for (std::size_t i = 0; i < rr.runs.size(); ++i) {
        const auto& run = rr.runs[i];
        const auto& best = run.result.records[run.result.best_epoch];
        std::vector<std::string> row{format_number(run.lr), std::to_string(run.result.best_epoch), i == rr.best ? "1" : "0"};
        for (auto& c : metric_cells(best.val)) row.push_back(c);
        row.push_back(format_number(best.total_val_loss));
        runs.rows.push_back(std::move(row));
        const fs::path run_dir = dir / ("lr_" + format_number(run.lr));
        ensure_dir(run_dir);
        write_epochs_csv(run_dir / "epochs.csv", info.spec, run.result.records);
        run_list.push_back({{"lr", run.lr}, {"best_epoch", run.result.best_epoch}, {"best", i == rr.best},
                            {"metrics", to_json(best.val)}, {"total_val_loss", best.total_val_loss}});
    }
    write_csv(dir / "runs.csv", runs);
    validate_csv(dir / "runs.csv", runs.header);
    const auto& chosen = rr.best_run();
    save_checkpoint(chosen.result.best_model, dir / "best", seeds.retrain);
    write_json(dir / "retrain.json", {{"source", src.string()},
                                      {"chosen_lr", chosen.lr},
                                      {"policy", policy_name(cfg.retrain.train.policy)},
                                      {"model", model_summary(chosen.result.best_model)},
                                      {"runs", run_list},
                                      {"config", cfg.raw}});
    log << "retrain: chosen lr " << format_number(chosen.lr) << ", pixel accuracy "
        << chosen.result.records[chosen.result.best_epoch].val.seg.pixel_accuracy << std::endl;
    return dir;
}

template <typename Real>
fs::path eval_impl(const ExperimentConfig& cfg, const fs::path& checkpoint, const std::string& split_name,
                   std::ostream& log) {
    const fs::path src = resolve_manifest_dir(checkpoint);
    const auto model = load_checkpoint<Real>(src);
    const Dataset data = obtain_dataset(cfg);
    const Split sp = split_for(data);
    std::vector<std::size_t> indices;
    if (split_name == "val") indices = sp.val;
    else if (split_name == "train") indices = sp.train;
    else if (split_name == "all") {
        indices.resize(data.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
        throw ConfigError("unknown split '" + split_name + "' (expected val, train or all)");
    }
    const auto ev = evaluate(model, data, indices);
    const fs::path dir = cfg.output_dir / "eval";
    ensure_dir(dir);
    const json out{{"checkpoint", src.string()},
                   {"split", split_name},
                   {"samples", indices.size()},
                   {"metrics", to_json(ev.metrics)},
                   {"task_losses", ev.losses},
                   {"total_loss", ev.total_loss},
                   {"model", model_summary(model)}};
    const fs::path path = dir / (src.filename().string() + "_" + split_name + ".json");
    write_json(path, out);
    log << out.dump(2) << std::endl;
    return path;
}

}  // namespace

// ---------------------------------------------------------------- commands

fs::path cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
    const Dataset data = generate(cfg.dataset);
    const fs::path dir = cfg.dataset_dir.value_or(cfg.output_dir / "data");
    save_dataset(data, dir);
    const Split sp = split(data.size(), cfg.dataset.val_fraction, cfg.dataset.seed);
    log << "gen-data: " << data.size() << " samples (" << sp.train.size() << " train / " << sp.val.size()
        << " val) at " << cfg.dataset.height << "x" << cfg.dataset.width << ", " << cfg.dataset.classes
        << " classes -> " << dir.string() << "\n"
        << "checksum " << hex64(data.checksum()) << std::endl;
    return dir;
}

fs::path cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
    return cfg.precision == "double" ? train_impl<double>(cfg, log) : train_impl<float>(cfg, log);
}

fs::path cmd_prune(const ExperimentConfig& cfg, const PruneCommandOptions& opts, std::ostream& log) {
    return cfg.precision == "double" ? prune_impl<double>(cfg, opts, log) : prune_impl<float>(cfg, opts, log);
}

fs::path cmd_retrain(const ExperimentConfig& cfg, const fs::path& manifest, const std::optional<std::string>& run_name,
                     std::ostream& log) {
    return cfg.precision == "double" ? retrain_impl<double>(cfg, manifest, run_name, log)
                                     : retrain_impl<float>(cfg, manifest, run_name, log);
}

fs::path cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const std::string& split_name,
                  std::ostream& log) {
    return cfg.precision == "double" ? eval_impl<double>(cfg, checkpoint, split_name, log)
                                     : eval_impl<float>(cfg, checkpoint, split_name, log);
}

bool cmd_selftest(std::ostream& log) {
    bool ok = true;
    for (const auto& c : selftest_checks()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g (limit %.3g)", c.measured, c.limit);
        log << (c.pass ? "PASS  " : "FAIL  ") << c.name << ": " << buf << std::endl;
        ok = ok && c.pass;
    }
    return ok;
}

}  // namespace mtlprune
