#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"

using namespace mtlprune;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mtlprune_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json tiny_doc(const fs::path& out) {
    return json{{"seed", 3},
                {"output_dir", out.string()},
                {"dataset", {{"n_samples", 40}, {"height", 16}, {"width", 16}}},
                {"train", {{"epochs", 2}}},
                {"prune", {{"stop", {{"max_events", 3}}}}},
                {"retrain", {{"epochs", 2}, {"lr_sweep", {1e-3, 5e-4, 1e-4}}}}};
}

fs::path write_config(const fs::path& dir, const json& doc) {
    const fs::path p = dir / "config.json";
    write_text(p, doc.dump(2));
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MTLPRUNE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

// Synthetic prune run directory with the given per-step pixel accuracy and relative error.
void fake_run(const fs::path& dir, const std::string& criterion, const std::vector<std::size_t>& params,
              const std::vector<double>& acc, const std::vector<double>& rel) {
    fs::create_directories(dir);
    write_text(dir / "run.json", json{{"criterion", criterion}, {"seed", 0}}.dump());
    CsvTable t{curves_header(), {}};
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<std::string> row{std::to_string(i), "0", std::to_string(params[i]), std::to_string(params[i] / 2),
                                     "1000"};
        MetricsReport m;
        m.seg = {acc[i], acc[i] / 2};
        m.depth = {0.5, rel[i], {0.4, 0.6, 0.8}};
        m.normals = {20, 15, {0.3, 0.5, 0.7}};
        for (double v : m.values()) row.push_back(format_number(v));
        row.push_back("1.5");
        t.rows.push_back(row);
    }
    write_csv(dir / "curves.csv", t);
}

double csv_value(const CsvTable& t, std::size_t row, const std::string& column) {
    const auto it = std::find(t.header.begin(), t.header.end(), column);
    REQUIRE(it != t.header.end());
    return std::stod(t.rows[row][static_cast<std::size_t>(it - t.header.begin())]);
}

}  // namespace

TEST_CASE("config defaults validate and describe the desk setup") {
    const auto cfg = parse_config(json::object());
    CHECK(cfg.dataset.n_samples == 640);
    CHECK(cfg.model.backbone.layers.size() == 6);
    CHECK(cfg.model.heads.size() == 3);
    CHECK(cfg.train.batch_size == 16);
    CHECK(cfg.prune.filters_per_step == 4);
    CHECK(cfg.prune.optimizer.kind == OptimizerKind::adamw);
    CHECK(cfg.retrain.lr_sweep == std::vector<double>{1e-3, 5e-4, 1e-4});
    const auto sp = split(cfg.dataset.n_samples, cfg.dataset.val_fraction, cfg.dataset.seed);
    CHECK(sp.train.size() == 512);
    CHECK(sp.val.size() == 128);
}

TEST_CASE("schema violations are all reported with their field paths") {
    json doc = {{"seed", "x"},
                {"dataset", {{"height", 30}, {"noise", -1}}},
                {"prune", {{"criterion", "magnitude"}, {"stop", {{"max_events", -2}}}}},
                {"retrain", {{"lr_sweep", json::array()}}},
                {"typo", 1}};
    const std::string msg = config_error(doc);
    CHECK(msg.find("seed:") != std::string::npos);
    CHECK(msg.find("dataset.noise") != std::string::npos);
    CHECK(msg.find("prune.criterion") != std::string::npos);
    CHECK(msg.find("prune.stop.max_events") != std::string::npos);
    CHECK(msg.find("retrain.lr_sweep") != std::string::npos);
    CHECK(msg.find("typo: unknown key") != std::string::npos);

    CHECK(config_error(json{{"model", {{"layers", {{{"filters", 0}}}}}}}).find("model.layers") != std::string::npos);
    CHECK_FALSE(config_error(json{{"dataset", {{"height", 30}}}}).empty());  // not divisible by the pooling
    CHECK_FALSE(config_error(json::array()).empty());
}

TEST_CASE("seeds derive from the single config seed") {
    const auto a = parse_config(json{{"seed", 1}});
    const auto b = parse_config(json{{"seed", 2}});
    CHECK(derive_seeds(a).init != derive_seeds(b).init);
    CHECK(derive_seeds(a).init == derive_seeds(parse_config(json{{"seed", 1}})).init);
    CHECK(a.dataset.seed == 1);
    CHECK(a.prune.seed != a.train.seed);
}

TEST_CASE("load_config: seed override and output-root variable") {
    const auto dir = scratch("load");
    const auto path = write_config(dir, tiny_doc(dir / "out"));
    CHECK(load_config(path).output_dir == dir / "out");
    CHECK(load_config(path, 9).seed == 9);
    ::setenv(kOutputRootEnv, (dir / "elsewhere").c_str(), 1);
    CHECK(load_config(path).output_dir == dir / "elsewhere");
    ::unsetenv(kOutputRootEnv);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
    write_text(dir / "broken.json", "{ not json");
    CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("percent change reproduces the published arithmetic") {
    CHECK(percent_delta(35.83, 41.70) == doctest::Approx(16.383).epsilon(1e-4));
    CHECK(percent_delta(0.3896, 0.3276) == doctest::Approx(-15.914).epsilon(1e-4));
    CHECK(percent_delta(2.0, 2.0) == 0.0);
    CHECK_THROWS(percent_delta(0.0, 1.0));
}

TEST_CASE("report pairs levels, computes percent change and writes both tables") {
    const auto dir = scratch("report");
    fake_run(dir / "taylor", "taylor_squared", {1000, 800, 600}, {40.0, 35.83, 30.0}, {0.35, 0.3896, 0.45});
    fake_run(dir / "cos", "cosprune", {1000, 805, 500}, {40.0, 41.70, 33.0}, {0.35, 0.3276, 0.40});
    std::ostringstream log;
    const auto out = cmd_report({dir / "taylor", dir / "cos"}, ReportSettings{}, dir / "report", log);
    const auto t = read_csv(out / "comparison.csv");
    // the 500-param level has no Taylor level within 2%
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][0] == "cosprune");
    CHECK(csv_value(t, 1, "baseline_params") == 800);
    CHECK(csv_value(t, 1, "pixel_acc_delta_pct") == doctest::Approx(16.383).epsilon(1e-4));
    CHECK(csv_value(t, 1, "depth_rel_delta_pct") == doctest::Approx(-15.914).epsilon(1e-4));
    CHECK(csv_value(t, 0, "pixel_acc_delta_pct") == 0.0);
    const std::string txt = read_text(out / "comparison.txt");
    CHECK(txt.find("pixel_acc ↑") != std::string::npos);
    CHECK(txt.find("depth_rel ↓") != std::string::npos);
    CHECK(txt.find("+16.38%") != std::string::npos);
    CHECK(txt.find("-15.91%") != std::string::npos);

    // identical inputs give zero change everywhere
    fake_run(dir / "same", "cosprune", {1000, 800, 600}, {40.0, 35.83, 30.0}, {0.35, 0.3896, 0.45});
    const auto same = read_csv(cmd_report({dir / "taylor", dir / "same"}, ReportSettings{}, dir / "r2", log) /
                               "comparison.csv");
    CHECK(same.rows.size() == 3);
    for (const auto& row : same.rows)
        for (std::size_t c = 0; c < same.header.size(); ++c)
            if (same.header[c].ends_with("_delta_pct")) CHECK(std::stod(row[c]) == 0.0);
}

TEST_CASE("report aggregates repetitions and rejects unpairable runs") {
    const auto dir = scratch("report_agg");
    fake_run(dir / "t", "taylor_squared", {1000, 800}, {40.0, 30.0}, {0.3, 0.4});
    fake_run(dir / "c1", "cosprune", {1000, 800}, {40.0, 32.0}, {0.3, 0.5});
    fake_run(dir / "c2", "cosprune", {1000, 800}, {40.0, 36.0}, {0.3, 0.3});
    std::ostringstream log;
    ReportSettings best;
    auto t = read_csv(cmd_report({dir / "t", dir / "c1", dir / "c2"}, best, dir / "best", log) / "comparison.csv");
    CHECK(csv_value(t, 1, "pixel_acc") == 36.0);
    CHECK(csv_value(t, 1, "depth_rel") == doctest::Approx(0.3));
    ReportSettings mean;
    mean.aggregate = Aggregate::mean;
    t = read_csv(cmd_report({dir / "t", dir / "c1", dir / "c2"}, mean, dir / "mean", log) / "comparison.csv");
    CHECK(csv_value(t, 1, "pixel_acc") == doctest::Approx(34.0));

    fake_run(dir / "far", "cosprune", {2000}, {40.0}, {0.3});
    CHECK_THROWS_AS(cmd_report({dir / "t", dir / "far"}, best, dir / "none", log), Error);
    CHECK_THROWS_AS(cmd_report({dir / "c1", dir / "c2"}, best, dir / "nobase", log), ConfigError);
    CHECK_THROWS_AS(cmd_report({dir / "t"}, best, dir / "single", log), ConfigError);
}

TEST_CASE("csv validation catches layout and value problems") {
    const auto dir = scratch("csv");
    write_text(dir / "a.csv", "x,y\n1,2\n3,nan\n");
    CHECK_THROWS_AS(validate_csv(dir / "a.csv", {"x", "y"}), IoError);
    CHECK_THROWS_AS(validate_csv(dir / "a.csv", {"x", "z"}), IoError);
    write_text(dir / "b.csv", "x,y\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(dir / "b.csv"), IoError);
    write_text(dir / "c.csv", "name,y\nfoo,2\n");
    CHECK_NOTHROW(validate_csv(dir / "c.csv", {"name", "y"}, 1));
}

TEST_CASE("end to end: gen-data, train, prune, retrain, eval") {
    const auto dir = scratch("e2e");
    const auto cfg = parse_config(tiny_doc(dir / "out"));
    std::ostringstream log;

    const auto data_dir = cmd_gen_data(cfg, log);
    CHECK(log.str().find(hex64(generate(cfg.dataset).checksum())) != std::string::npos);
    CHECK(load_dataset(data_dir).checksum() == generate(cfg.dataset).checksum());

    const auto train_dir = cmd_train(cfg, log);
    const auto epochs = read_csv(train_dir / "epochs.csv");
    CHECK(epochs.rows.size() == 2);
    CHECK(epochs.header == epoch_header(cfg.model));

    SUBCASE("checkpoint round trip is bitwise") {
        CheckpointInfo info;
        const auto m = load_checkpoint<float>(train_dir / "best", &info);
        CHECK(info.spec == cfg.model);
        save_checkpoint(m, dir / "copy", info.rng_seed);
        CHECK(read_text(dir / "copy" / "params.bin") == read_text(train_dir / "best" / "params.bin"));
        CHECK(load_checkpoint<float>(dir / "copy").checksum() == m.checksum());
        // corrupt the parameters
        std::string bytes = read_text(dir / "copy" / "params.bin");
        bytes[10] = static_cast<char>(bytes[10] ^ 0x5a);
        write_text(dir / "copy" / "params.bin", bytes);
        CHECK_THROWS_AS(load_checkpoint<float>(dir / "copy"), IoError);
    }

    SUBCASE("prune writes base + one row per event and is byte-reproducible") {
        const auto run = cmd_prune(cfg, PruneCommandOptions{std::string("cosprune"), {}, false, {}}, log);
        const auto curves = read_csv(run / "curves.csv");
        CHECK(curves.header == curves_header());
        REQUIRE(curves.rows.size() == 4);
        for (std::size_t r = 1; r < 4; ++r) CHECK(csv_value(curves, r, "params") < csv_value(curves, r - 1, "params"));
        CHECK(fs::exists(run / "events" / "event_003" / "manifest.json"));
        CHECK(fs::exists(run / "curve_miou.csv"));
        CHECK(read_csv(run / "curve_pixel_acc.csv").rows.size() == 4);
        std::ifstream hist(run / "history.jsonl");
        int lines = 0;
        for (std::string line; std::getline(hist, line);) {
            const auto ev = json::parse(line);
            CHECK(ev["victims"].size() == 4);
            ++lines;
        }
        CHECK(lines == 3);
        const auto manifest = read_checkpoint_manifest(run / "events" / "event_002");
        REQUIRE(manifest.prune_history);
        CHECK(fs::exists(run / "events" / "event_002" / *manifest.prune_history));

        const std::string first = read_text(run / "curves.csv");
        const std::string hist_first = read_text(run / "history.jsonl");
        cmd_prune(cfg, PruneCommandOptions{std::string("cosprune"), {}, false, {}}, log);
        CHECK(read_text(run / "curves.csv") == first);
        CHECK(read_text(run / "history.jsonl") == hist_first);

        const auto rdir = cmd_retrain(cfg, run / "events" / "event_003" / "manifest.json", std::nullopt, log);
        const auto runs = read_csv(rdir / "runs.csv");
        REQUIRE(runs.rows.size() == 3);
        int best = 0;
        double best_acc = -1.0;
        for (std::size_t r = 0; r < 3; ++r) {
            best += runs.rows[r][2] == "1";
            best_acc = std::max(best_acc, csv_value(runs, r, "pixel_acc"));
        }
        CHECK(best == 1);
        const auto meta = json::parse(read_text(rdir / "retrain.json"));
        const double chosen = meta["chosen_lr"].get<double>();
        CHECK((chosen == 1e-3 || chosen == 5e-4 || chosen == 1e-4));
        for (std::size_t r = 0; r < 3; ++r)
            if (runs.rows[r][2] == "1") CHECK(csv_value(runs, r, "pixel_acc") == best_acc);
        const auto retrained = load_checkpoint<float>(rdir / "best");
        const auto pruned_info = read_checkpoint_manifest(run / "events" / "event_003");
        for (std::size_t l = 0; l < pruned_info.alive.size(); ++l)
            CHECK(retrained.filter_counts()[l] == static_cast<int>(pruned_info.alive[l].size()));

        const auto eval_path = cmd_eval(cfg, rdir / "best", "val", log);
        const auto ev = json::parse(read_text(eval_path));
        CHECK(ev["samples"].get<int>() == 8);
        CHECK(ev["metrics"].contains("miou"));
    }

    SUBCASE("prune without a base checkpoint") {
        auto c2 = cfg;
        c2.output_dir = dir / "fresh";
        CHECK_THROWS_AS(cmd_prune(c2, PruneCommandOptions{}, log), ConfigError);
        PruneCommandOptions scratch_opts;
        scratch_opts.from_scratch = true;
        const auto run = cmd_prune(c2, scratch_opts, log);
        CHECK(fs::exists(c2.output_dir / "train" / "best" / "manifest.json"));
        CHECK(read_csv(run / "curves.csv").rows.size() == 4);
    }
}

TEST_CASE("exit codes: 0 success, 2 config error, 3 runtime failure") {
    const auto dir = scratch("exit");
    const auto good = write_config(dir, tiny_doc(dir / "out"));
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("train") == 2);
    CHECK(run_cli("gen-data -c " + (dir / "missing.json").string()) == 2);
    write_text(dir / "bad.json", R"({"train": {"epochs": "many"}})");
    CHECK(run_cli("train -c " + (dir / "bad.json").string()) == 2);
    CHECK(run_cli("gen-data -c " + good.string()) == 0);
    CHECK(run_cli("gen-data -q -c " + good.string()) == 0);
    CHECK(run_cli("retrain -c " + good.string() + " " + (dir / "nope").string()) == 2);

    // a run directory that exists but is unreadable as a run is a runtime failure
    fs::create_directories(dir / "r1");
    fs::create_directories(dir / "r2");
    write_text(dir / "r1" / "run.json", "{}");
    write_text(dir / "r2" / "run.json", "{}");
    CHECK(run_cli("report " + (dir / "r1").string() + " " + (dir / "r2").string() + " -o " + (dir / "rep").string()) == 3);
    // a corrupted checkpoint is a runtime failure
    fs::create_directories(dir / "ckpt");
    write_text(dir / "ckpt" / "manifest.json", "{\"format\": \"something else\"}");
    CHECK(run_cli("eval -c " + good.string() + " " + (dir / "ckpt").string()) == 3);
}
