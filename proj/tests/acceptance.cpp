// Acceptance suite: one PASS/FAIL line per criterion.
//   mtlprune_acceptance                 all criteria
//   mtlprune_acceptance --only 1,2,3    a subset
//   mtlprune_acceptance --seeds 1,2,3   seeds for the trend check

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/checks.hpp"
#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"

using namespace mtlprune;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    bool pass = false;
    bool soft = false;  // a failure that flags for investigation without failing the suite
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mtlprune_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const Dataset& desk_data() {
    static const Dataset data = generate(DatasetConfig{});
    return data;
}

// Batch of `n` distinct samples drawn with `rng`.
template <typename Real>
Batch<Real> random_samples(const Dataset& data, std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    return make_batch<Real>(data, idx);
}

template <typename Real>
ImportanceAccumulator accumulate_scores(const MTLModel<Real>& model, const Criterion& crit, int batches,
                                        std::uint64_t seed, const std::vector<Real>& scales = {}) {
    std::mt19937_64 rng(seed), crit_rng(seed + 1);
    ImportanceAccumulator acc(model.filters());
    for (int b = 0; b < batches; ++b) {
        const auto batch = random_samples<Real>(desk_data(), 8, rng);
        acc.accumulate(batch_scores(crit, model, task_gradients(model, batch, Mode::train, scales), crit_rng));
    }
    return acc;
}

// 1. Finite-difference gradient checks in double.
Verdict gradient_correctness() {
    const auto t0 = Clock::now();
    const double ops = op_gradient_worst(20);
    const double model = model_gradient_worst();
    const double elapsed = seconds_since(t0);
    Verdict v;
    v.pass = ops < 1e-6 && model < 1e-6 && elapsed < 120.0;
    v.detail = "max rel. error ops " + fmt("%.2e", ops) + ", full model " + fmt("%.2e", model) + " (limit 1e-6); " +
               fmt("%.1f", elapsed) + " s (limit 120 s)";
    return v;
}

// 2. Sum of per-task filter gradients equals the total-loss gradient, single precision.
Verdict gradient_sum_identity() {
    const auto model = MTLModel<float>::build(desk_model_spec(), 101);
    std::mt19937_64 rng(202);
    double worst = 0.0;
    for (int b = 0; b < 50; ++b) {
        const auto batch = random_samples<float>(desk_data(), 16, rng);
        const auto per_task = per_task_filter_grads(model, batch);
        const auto total = total_gradient(model, batch);
        for (const auto& [coord, grads] : per_task) {
            const auto expected = filter_gradient(model, total, coord);
            for (std::size_t i = 0; i < expected.size(); ++i) {
                double s = 0.0;
                for (const auto& g : grads) s += g[i];
                worst = std::max(worst, std::abs(s - expected[i]) / std::max(1.0, std::abs(double(expected[i]))));
            }
        }
    }
    return {worst < 1e-6, false,
            "50 batches x 112 filters, max deviation " + fmt("%.2e", worst) + " (limit 1e-6, relative above 1)"};
}

// 3. Physical removal and zero-masking agree; the closed-form delta matches the recount.
Verdict surgery_soundness() {
    double worst = 0.0;
    bool counts_ok = true;
    int cases = 0;
    std::mt19937_64 rng(303);
    for (bool norm : {false, true}) {
        auto spec = desk_model_spec();
        spec.normalization = norm;
        auto model = MTLModel<float>::build(spec, 31);
        if (norm) {
            Tape<float> tape;
            model.update_running_stats(model.forward(tape, random_samples<float>(desk_data(), 16, rng).images, Mode::train),
                                       0.5);
        }
        const int victims_n = static_cast<int>(std::lround(0.2 * static_cast<double>(model.alive_filter_count())));
        for (auto kind : {CriterionKind::cosprune, CriterionKind::taylor_squared, CriterionKind::taylor_raw,
                          CriterionKind::random}) {
            const auto acc = accumulate_scores(model, Criterion{kind, false, 5}, 3, 40 + static_cast<int>(kind));
            const auto victims = select_victims(acc, victims_n, model);
            const auto pruned = model.apply_prune(victims);
            const auto masked = model.mask_prune(victims);
            counts_ok = counts_ok && model.count_params().total() - pruned.count_params().total() ==
                                         model.removed_params(victims);
            const auto images = random_samples<float>(desk_data(), 4, rng).images;
            for (Mode mode : {Mode::eval, Mode::train}) {
                const auto a = pruned.forward_all(images, mode);
                const auto b = masked.forward_all(images, mode);
                for (std::size_t t = 0; t < a.size(); ++t)
                    for (std::size_t i = 0; i < a[t].numel(); ++i)
                        worst = std::max(worst, std::abs(double(a[t][i]) - double(b[t][i])));
            }
            ++cases;
        }
    }
    return {worst < 1e-5 && counts_ok, false,
            std::to_string(cases) + " cases (4 criteria, with/without normalization, 20% of filters): max output gap " +
                fmt("%.2e", worst) + " (limit 1e-5), parameter delta " + (counts_ok ? "exact" : "MISMATCH")};
}

// 4. CosPrune score bounds, loss-scale invariance and task-permutation invariance.
struct InvarianceProbe {
    double lo = 0.0, hi = 0.0, worst_scale = 0.0;
    bool ranking_same = true, permutation_exact = true;
};

template <typename Real>
InvarianceProbe probe_cosprune() {
    const auto model = MTLModel<Real>::build(desk_model_spec(), 41);
    std::mt19937_64 rng(404), unused(0);
    const Criterion crit{CriterionKind::cosprune};
    InvarianceProbe r;
    for (int b = 0; b < 10; ++b) {
        const auto batch = random_samples<Real>(desk_data(), 8, rng);
        const auto grads = task_gradients(model, batch);
        const auto base = batch_scores(crit, model, grads, unused);
        for (const auto& [c, s] : base) {
            r.lo = std::min(r.lo, s);
            r.hi = std::max(r.hi, s);
        }
        for (std::size_t t = 0; t < 3; ++t) {
            std::vector<Real> scales(3, Real(1));
            scales[t] = Real(10);
            const auto scaled = batch_scores(crit, model, task_gradients(model, batch, Mode::train, scales), unused);
            for (const auto& [c, s] : base) r.worst_scale = std::max(r.worst_scale, std::abs(s - scaled.at(c)));
        }
        for (const auto& perm : std::vector<std::array<std::size_t, 3>>{{1, 0, 2}, {2, 1, 0}, {1, 2, 0}}) {
            TaskGradients<Real> permuted;
            for (std::size_t k : perm) permuted.per_task.push_back(grads.per_task[k]);
            r.permutation_exact = r.permutation_exact && batch_scores(crit, model, permuted, unused) == base;
        }
    }
    const auto a = accumulate_scores(model, crit, 10, 77);
    for (std::size_t t = 0; t < 3; ++t) {
        std::vector<Real> scales(3, Real(1));
        scales[t] = Real(10);
        const auto b = accumulate_scores(model, crit, 10, 77, scales);
        for (int p : {4, 22})
            r.ranking_same = r.ranking_same && select_victims(a, p, model) == select_victims(b, p, model);
    }
    return r;
}

// The score tolerance is a statement about the math, so it is measured in double; single-precision
// backprop noise on near-zero filter gradients reaches a few 1e-6 and is reported alongside.
Verdict cosprune_invariances() {
    const double bound = 3.0;  // T(T-1)/2 for three tasks
    const auto d = probe_cosprune<double>();
    const auto f = probe_cosprune<float>();
    const double lo = std::min(d.lo, f.lo), hi = std::max(d.hi, f.hi);
    const bool bounded = lo >= -bound && hi <= bound;
    const bool ranking = d.ranking_same && f.ranking_same;
    const bool permutation = d.permutation_exact && f.permutation_exact;
    return {bounded && d.worst_scale <= 1e-6 && ranking && permutation, false,
            "scores in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "] within +-3; x10 task-loss change " +
                fmt("%.2e", d.worst_scale) + " in double (limit 1e-6; float " + fmt("%.2e", f.worst_scale) +
                "); victim ranking " + (ranking ? "identical" : "CHANGED") + " in both precisions; permutation " +
                (permutation ? "exact" : "NOT exact")};
}

// 5. Iterative loop contract on the desk configuration.
Verdict loop_contract() {
    const auto& data = desk_data();
    const auto sp = split(data.size(), 0.2, data.config.seed);
    PruneConfig cfg;
    cfg.criterion.kind = CriterionKind::cosprune;
    cfg.filters_per_step = 4;
    cfg.accumulation_epochs = 1;
    cfg.stop.max_events = 5;
    cfg.seed = 5;
    bool zero_ok = true, lr_ok = true, steps_ok = true;
    std::vector<std::size_t> alive;
    PruneCallbacks<float> cb;
    cb.after_event = [&](const PruneProbe<float>& p) {
        zero_ok = zero_ok && p.accumulator.all_zero() && p.accumulator.batches_seen() == 0 &&
                  p.accumulator.scores().size() == p.model.alive_filter_count();
        lr_ok = lr_ok && p.lr == cfg.lr;
        steps_ok = steps_ok && p.optimizer_steps == 0;
        alive.push_back(p.model.alive_filter_count());
    };
    const auto start = MTLModel<float>::build(desk_model_spec(), 51);
    const auto r = run_iterative(start, data, sp, cfg, cb);
    const auto& h = r.history;
    bool decreasing = true, exact_p = true;
    std::size_t prev_params = h.base.params, prev_alive = start.alive_filter_count();
    for (std::size_t e = 0; e < h.events.size(); ++e) {
        decreasing = decreasing && h.events[e].after.params < prev_params;
        exact_p = exact_p && h.events[e].victims.size() == 4 && prev_alive - alive[e] == 4;
        prev_params = h.events[e].after.params;
        prev_alive = alive[e];
    }
    const bool pass = h.events.size() == 5 && decreasing && exact_p && zero_ok && lr_ok && steps_ok;
    std::ostringstream d;
    d << h.events.size() << " events, params " << h.base.params;
    for (const auto& e : h.events) d << " > " << e.after.params;
    d << "; 4 removed per event " << (exact_p ? "yes" : "NO") << "; accumulator zero after event "
      << (zero_ok ? "yes" : "NO") << "; lr = eta0 and fresh optimizer after rewind " << (lr_ok && steps_ok ? "yes" : "NO");
    return {pass, false, d.str()};
}

// 6. Two identical prune commands give byte-identical outputs.
Verdict determinism() {
    const auto dir = scratch("determinism");
    json doc = {{"seed", 6},
                {"output_dir", (dir / "out").string()},
                {"dataset", {{"n_samples", 160}}},
                {"train", {{"epochs", 2}}},
                {"prune", {{"criterion", "cosprune"}, {"stop", {{"max_events", 3}}}}}};
    const auto cfg = parse_config(doc);
    std::ostringstream log;
    cmd_train(cfg, log);
    const auto a = cmd_prune(cfg, PruneCommandOptions{{}, {}, false, std::string("first")}, log);
    const auto b = cmd_prune(cfg, PruneCommandOptions{{}, {}, false, std::string("second")}, log);
    const bool curves = read_text(a / "curves.csv") == read_text(b / "curves.csv");
    const bool history = read_text(a / "history.jsonl") == read_text(b / "history.jsonl");
    bool per_metric = true;
    for (auto name : MetricsReport::column_names()) {
        const std::string f = "curve_" + std::string(name) + ".csv";
        per_metric = per_metric && read_text(a / f) == read_text(b / f);
    }
    const bool weights = read_text(a / "events/event_003/params.bin") == read_text(b / "events/event_003/params.bin");
    return {curves && history && per_metric && weights, false,
            std::string("curves.csv ") + (curves ? "identical" : "DIFFER") + ", per-metric CSVs " +
                (per_metric ? "identical" : "DIFFER") + ", victim sequence " + (history ? "identical" : "DIFFERS") +
                ", final weights " + (weights ? "identical" : "DIFFER")};
}

// 7. Metrics against direct loops, plus the inclusive boundary conventions.
Verdict metrics_oracle() {
    const double worst = metrics_oracle_worst(100, 707);
    const std::string boundary = metric_boundary_failure();
    return {worst < 1e-6 && boundary.empty(), false,
            "100 random 8x8 instances, max deviation " + fmt("%.2e", worst) + " (limit 1e-6); thresholds " +
                (boundary.empty() ? "inclusive at 1.25^k and 11.25/22.5/30 deg" : boundary)};
}

// 8. The report's percent change against the published table arithmetic.
Verdict published_arithmetic() {
    const auto dir = scratch("report");
    auto fake = [&](const std::string& name, const std::string& criterion, double acc, double rel) {
        fs::create_directories(dir / name);
        write_text(dir / name / "run.json", json{{"criterion", criterion}}.dump());
        MetricsReport m;
        m.seg = {acc, 20.0};
        m.depth = {0.6, rel, {0.5, 0.7, 0.8}};
        m.normals = {30.0, 25.0, {0.2, 0.4, 0.6}};
        std::vector<std::string> row{"1", "0", "14300000", "14000000", "1"};
        for (double v : m.values()) row.push_back(format_number(v));
        row.push_back("1");
        write_csv(dir / name / "curves.csv", CsvTable{curves_header(), {row}});
    };
    fake("taylor", "taylor_squared", 35.83, 0.3896);
    fake("cosprune", "cosprune", 41.70, 0.3276);
    std::ostringstream log;
    const auto out = cmd_report({dir / "taylor", dir / "cosprune"}, ReportSettings{}, dir / "out", log);
    const auto t = read_csv(out / "comparison.csv");
    auto col = [&](const std::string& name) {
        const auto it = std::find(t.header.begin(), t.header.end(), name);
        return std::stod(t.rows.at(0).at(static_cast<std::size_t>(it - t.header.begin())));
    };
    const double acc = col("pixel_acc_delta_pct"), rel = col("depth_rel_delta_pct");
    const bool pass = t.rows.size() == 1 && std::abs(acc - 16.39) <= 0.05 && std::abs(rel - (-15.93)) <= 0.05;
    return {pass, false,
            "pixel acc (35.83 -> 41.70) " + fmt("%+.2f%%", acc) + " vs printed +16.39%; rel. error (0.3896 -> 0.3276) " +
                fmt("%+.2f%%", rel) + " vs printed -15.93% (tolerance 0.05)"};
}

// 9. Iterative pruning then retraining from scratch, CosPrune against Taylor, averaged over seeds.
Verdict trend_reproduction(const std::vector<std::uint64_t>& seeds) {
    const auto t0 = Clock::now();
    const auto dir = scratch("trend");
    struct Outcome {
        double iterative = 0, retrained = 0, params = 0, reduction = 0;
    };
    std::map<std::string, std::vector<Outcome>> by_criterion;
    for (auto seed : seeds) {
        json doc = {{"seed", seed}, {"output_dir", (dir / ("s" + std::to_string(seed))).string()}};
        const auto cfg = parse_config(doc);
        std::ostringstream log;
        cmd_train(cfg, log);
        for (const std::string crit : {"cosprune", "taylor"}) {
            const auto run = cmd_prune(cfg, PruneCommandOptions{crit, {}, false, {}}, log);
            const auto meta = json::parse(read_text(run / "run.json"));
            const auto& events = meta["events"];
            if (events.empty()) throw Error("prune run stopped before any event");
            const std::string last = events.back()["checkpoint"].get<std::string>();
            const auto rdir = cmd_retrain(cfg, run / last, std::nullopt, log);
            const auto rmeta = json::parse(read_text(rdir / "retrain.json"));
            Outcome o;
            o.iterative = meta["final"]["metrics"]["pixel_acc"].get<double>();
            for (const auto& r : rmeta["runs"]) o.retrained = std::max(o.retrained, r["metrics"]["pixel_acc"].get<double>());
            o.params = meta["final"]["params"].get<double>();
            o.reduction = 1.0 - meta["final"]["backbone_params"].get<double>() / meta["base"]["backbone_params"].get<double>();
            by_criterion[crit].push_back(o);
            std::cout << "  seed " << seed << " " << crit << ": backbone -" << fmt("%.1f", 100 * o.reduction) << "%, "
                      << static_cast<long>(o.params) << " params, iterative pixel acc " << fmt("%.4f", o.iterative)
                      << ", retrained " << fmt("%.4f", o.retrained) << " (" << fmt("%.0f", seconds_since(t0)) << " s)"
                      << std::endl;
        }
    }
    auto mean = [](const std::vector<Outcome>& v, double Outcome::*f) {
        double s = 0;
        for (const auto& o : v) s += o.*f;
        return s / static_cast<double>(v.size());
    };
    const auto& c = by_criterion["cosprune"];
    const auto& t = by_criterion["taylor"];
    const double ci = mean(c, &Outcome::iterative), cr = mean(c, &Outcome::retrained);
    const double ti = mean(t, &Outcome::iterative), tr = mean(t, &Outcome::retrained);
    double min_reduction = 1.0;
    for (const auto* runs : {&c, &t})
        for (const auto& o : *runs) min_reduction = std::min(min_reduction, o.reduction);
    const bool a = cr >= ci - 0.01 && tr >= ti - 0.01;
    const bool b = std::abs(cr - tr) <= std::abs(ci - ti);
    const double elapsed = seconds_since(t0);
    const bool budget = elapsed <= 3600.0 && min_reduction >= 0.6;
    Verdict v;
    v.pass = a && b && budget;
    v.soft = a && budget && !b;
    v.detail = std::to_string(seeds.size()) + " seeds, every run at backbone reduction >= " + fmt("%.1f%%", 100 * min_reduction) +
               "; (a) retrained vs iterative pixel acc: cosprune " + fmt("%.4f", cr) + " vs " + fmt("%.4f", ci) +
               ", taylor " + fmt("%.4f", tr) + " vs " + fmt("%.4f", ti) + (a ? " ok" : " FAILED") +
               "; (b) retrained gap " + fmt("%.4f", std::abs(cr - tr)) + " <= iterative gap " +
               fmt("%.4f", std::abs(ci - ti)) + (b ? " ok" : " FAILED (flagged for investigation)") + "; " +
               fmt("%.0f", elapsed) + " s (limit 3600 s)";
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
    app.add_option("--seeds", seeds, "Seeds for the trend check")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    const std::map<int, std::pair<std::string, std::function<Verdict()>>> criteria{
        {1, {"gradient correctness", gradient_correctness}},
        {2, {"per-task gradients sum to the total gradient", gradient_sum_identity}},
        {3, {"surgery soundness", surgery_soundness}},
        {4, {"cosprune invariances", cosprune_invariances}},
        {5, {"iterative loop contract", loop_contract}},
        {6, {"determinism", determinism}},
        {7, {"metrics oracle equivalence", metrics_oracle}},
        {8, {"published percent-change arithmetic", published_arithmetic}},
        {9, {"trend reproduction", [&] { return trend_reproduction(seeds); }}},
    };

    int hard_failures = 0;
    for (int id : only) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = it->second.second();
        } catch (const std::exception& e) {
            v = {false, false, std::string("exception: ") + e.what()};
        }
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << it->second.first
                  << "): " << v.detail << " [" << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
        if (!v.pass && !v.soft) ++hard_failures;
    }
    return hard_failures == 0 ? 0 : 1;
}
