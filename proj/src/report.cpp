#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/error.hpp"
#include "mtlprune/experiment.hpp"

namespace mtlprune {

namespace fs = std::filesystem;

namespace {

using Values = std::array<double, MetricsReport::kColumns>;

struct Level {
    int step = 0;
    double params = 0.0;
    Values metrics{};
};

struct Run {
    std::string criterion;
    std::vector<Level> levels;
};

Run load_run(const fs::path& dir) {
    const fs::path run_json = dir / "run.json";
    if (!fs::exists(run_json)) throw IoError(dir.string() + " is not a prune run directory (no run.json)");
    json meta;
    try {
        meta = json::parse(read_text(run_json));
    } catch (const json::exception& e) {
        throw IoError(run_json.string() + ": " + e.what());
    }
    if (!meta.contains("criterion") || !meta["criterion"].is_string())
        throw IoError(run_json.string() + ": missing criterion");

    const fs::path curves = dir / "curves.csv";
    validate_csv(curves, curves_header());
    const CsvTable t = read_csv(curves);
    Run run{meta["criterion"].get<std::string>(), {}};
    for (const auto& row : t.rows) {
        Level l;
        l.step = std::stoi(row[0]);
        l.params = std::stod(row[2]);
        for (std::size_t m = 0; m < MetricsReport::kColumns; ++m) l.metrics[m] = std::stod(row[5 + m]);
        run.levels.push_back(l);
    }
    if (run.levels.empty()) throw IoError(curves.string() + " has no rows");
    return run;
}

// Repetitions are aligned by prune step.
std::vector<Level> aggregate(const std::vector<Run>& reps, Aggregate how) {
    std::size_t depth = 0;
    for (const auto& r : reps) depth = std::max(depth, r.levels.size());
    const auto& up = MetricsReport::higher_is_better();
    std::vector<Level> out;
    for (std::size_t s = 0; s < depth; ++s) {
        std::vector<const Level*> at;
        for (const auto& r : reps)
            if (s < r.levels.size()) at.push_back(&r.levels[s]);
        Level agg;
        agg.step = at.front()->step;
        for (const Level* l : at) agg.params += l->params / static_cast<double>(at.size());
        for (std::size_t m = 0; m < MetricsReport::kColumns; ++m) {
            double v = at.front()->metrics[m];
            if (how == Aggregate::mean) {
                v = 0.0;
                for (const Level* l : at) v += l->metrics[m] / static_cast<double>(at.size());
            } else {
                for (const Level* l : at) v = up[m] ? std::max(v, l->metrics[m]) : std::min(v, l->metrics[m]);
            }
            agg.metrics[m] = v;
        }
        out.push_back(agg);
    }
    return out;
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string signed_pct(double v) {
    std::ostringstream s;
    s << std::showpos << std::fixed << std::setprecision(2) << v << "%";
    return s.str();
}

}  // namespace

fs::path cmd_report(const std::vector<fs::path>& run_dirs, const ReportSettings& settings, const fs::path& out_dir,
                    std::ostream& log) {
    if (run_dirs.size() < 2) throw ConfigError("report needs at least two run directories");
    if (!(settings.pairing_tolerance >= 0.0)) throw ConfigError("report.pairing_tolerance must be non-negative");
    const std::string baseline = criterion_name(parse_criterion(settings.baseline));

    std::map<std::string, std::vector<Run>> groups;
    for (const auto& d : run_dirs) {
        Run r = load_run(d);
        groups[r.criterion].push_back(std::move(r));
    }
    if (!groups.contains(baseline))
        throw ConfigError("report: no run uses the baseline criterion '" + baseline + "'");
    if (groups.size() < 2) throw ConfigError("report: every run uses the baseline criterion; nothing to compare");

    const std::vector<Level> base = aggregate(groups[baseline], settings.aggregate);
    const auto names = MetricsReport::column_names();
    const auto& up = MetricsReport::higher_is_better();

    CsvTable csv{{"criterion", "step", "params", "reduction_pct", "baseline_step", "baseline_params"}, {}};
    for (auto n : names) {
        csv.header.emplace_back(n);
        csv.header.push_back(std::string(n) + "_baseline");
        csv.header.push_back(std::string(n) + "_delta_pct");
    }

    struct TextRow {
        std::vector<std::string> cells;
    };
    std::vector<std::string> text_header{"criterion", "params", "reduction", "vs " + baseline};
    for (std::size_t m = 0; m < names.size(); ++m)
        text_header.push_back(std::string(names[m]) + (up[m] ? " ↑" : " ↓"));
    std::vector<TextRow> text_rows;

    for (const auto& [criterion, reps] : groups) {
        if (criterion == baseline) continue;
        const std::vector<Level> levels = aggregate(reps, settings.aggregate);
        const double start = levels.front().params;
        for (const Level& l : levels) {
            const Level* match = nullptr;
            double best_gap = 0.0;
            for (const Level& b : base) {
                const double gap = std::abs(b.params - l.params);
                if (!match || gap < best_gap) {
                    match = &b;
                    best_gap = gap;
                }
            }
            if (!match || best_gap > settings.pairing_tolerance * match->params) continue;

            std::vector<std::string> row{criterion, std::to_string(l.step), format_number(l.params),
                                         format_number(100.0 * (start - l.params) / start), std::to_string(match->step),
                                         format_number(match->params)};
            TextRow tr{{criterion, fixed(l.params, 0), fixed(100.0 * (start - l.params) / start, 1) + "%",
                        "step " + std::to_string(match->step) + " (" + fixed(match->params, 0) + ")"}};
            for (std::size_t m = 0; m < names.size(); ++m) {
                const double d = percent_delta(match->metrics[m], l.metrics[m]);
                row.push_back(format_number(l.metrics[m]));
                row.push_back(format_number(match->metrics[m]));
                row.push_back(format_number(d));
                tr.cells.push_back(fixed(l.metrics[m], 4) + " (" + signed_pct(d) + ")");
            }
            csv.rows.push_back(std::move(row));
            text_rows.push_back(std::move(tr));
        }
    }
    if (csv.rows.empty())
        throw Error("report: no parameter level lies within " + fixed(100.0 * settings.pairing_tolerance, 1) +
                    "% of a " + baseline + " level");

    fs::create_directories(out_dir);
    write_csv(out_dir / "comparison.csv", csv);
    validate_csv(out_dir / "comparison.csv", csv.header, 1);

    // Column widths count code points so the arrows do not skew alignment.
    auto width = [](const std::string& s) {
        std::size_t n = 0;
        for (unsigned char c : s) n += (c & 0xC0) != 0x80;
        return n;
    };
    std::vector<std::size_t> widths(text_header.size());
    for (std::size_t c = 0; c < widths.size(); ++c) {
        widths[c] = width(text_header[c]);
        for (const auto& r : text_rows) widths[c] = std::max(widths[c], width(r.cells[c]));
    }
    std::ostringstream txt;
    txt << "Percent change relative to " << baseline << " at the nearest parameter level ("
        << (settings.aggregate == Aggregate::best ? "best" : "mean") << " over repetitions). "
        << "↑ higher is better, ↓ lower is better.\n\n";
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            txt << (c ? "  " : "") << cells[c];
            if (c + 1 < cells.size()) txt << std::string(widths[c] - width(cells[c]), ' ');
        }
        txt << "\n";
    };
    emit(text_header);
    for (const auto& r : text_rows) emit(r.cells);
    write_text(out_dir / "comparison.txt", txt.str());
    log << txt.str();
    return out_dir;
}

}  // namespace mtlprune
