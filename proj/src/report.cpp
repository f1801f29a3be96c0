#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <json.hpp>

#include "softseg/csvio.hpp"
#include "softseg/experiment.hpp"
#include "softseg/stats.hpp"

namespace softseg::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kReference = "Soft-ReLU-Wing";

struct RunRecord {
    std::string candidate;
    int iteration = 0;
    bool converged = false;
    std::map<std::string, std::optional<double>> metric_means;
    double softness = 0;
    std::vector<double> kde_x, kde_y;
    std::vector<std::array<double, 3>> threshold_curve;  // tau, dice, is_argmax
};

std::optional<double> column_mean(const csv::Table& t, const std::string& col) {
    const int c = t.column(col);
    if (c < 0) return std::nullopt;
    double acc = 0;
    int n = 0;
    for (const auto& row : t.rows) {
        if (static_cast<size_t>(c) >= row.size() || row[c].empty()) continue;
        acc += csv::parse(row[c]);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return acc / n;
}

std::string fmt2(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string mean_std_cell(const std::vector<double>& values, bool marked) {
    if (values.empty()) return "n/a";
    std::string cell = fmt2(stats::mean(values)) + " \xC2\xB1 " + fmt2(stats::stddev(values));
    if (marked) cell += " **";
    return cell;
}

// Minimal SVG polyline chart; one line per series.
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>>& series,
                     double x_min, double x_max, double y_min, double y_max) {
    static const char* palette[] = {"#4363d8", "#e6194b", "#3cb44b", "#911eb4", "#f58231", "#664400"};
    const int W = 720, H = 440, ml = 60, mr = 180, mt = 40, mb = 40;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (W - ml - mr); };
    auto sy = [&](double y) { return H - mb - (y - y_min) / (y_max - y_min) * (H - mt - mb); };
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << ml << "' y='24' font-size='16'>" << title << "</text>\n";
    out << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
        << "' stroke='black'/>\n";
    out << "<text x='" << ml << "' y='" << H - mb + 16 << "' font-size='11'>" << x_min << "</text>\n";
    out << "<text x='" << W - mr << "' y='" << H - mb + 16 << "' font-size='11' text-anchor='end'>" << x_max
        << "</text>\n";
    out << "<text x='" << ml - 6 << "' y='" << H - mb << "' font-size='11' text-anchor='end'>" << y_min
        << "</text>\n";
    out << "<text x='" << ml - 6 << "' y='" << mt + 10 << "' font-size='11' text-anchor='end'>" << y_max
        << "</text>\n";
    int idx = 0;
    for (const auto& [name, pts] : series) {
        const char* color = palette[idx % 6];
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (const auto& p : pts) out << sx(p[0]) << "," << sy(p[1]) << " ";
        out << "'/>\n";
        out << "<text x='" << W - mr + 10 << "' y='" << mt + 16 * idx + 10 << "' font-size='12' fill='"
            << color << "'>" << name << "</text>\n";
        ++idx;
    }
    out << "</svg>\n";
}

}  // namespace

void write_report(const std::string& results_dir) {
    const json plan = [&] {
        std::ifstream in((fs::path(results_dir) / "plan.json").string());
        if (!in) throw FormatError("missing plan.json in " + results_dir);
        json j;
        in >> j;
        return j;
    }();
    const std::string task = plan.at("dataset").at("task").get<std::string>();
    const std::vector<std::string> candidates =
        plan.at("experiment").at("candidates").get<std::vector<std::string>>();

    std::vector<std::string> metric_cols;
    if (task == "lesion")
        metric_cols = {"dice", "precision", "recall", "lfdr", "ltpr"};
    else
        metric_cols = {"dice", "precision", "recall", "avd", "rvd", "mse"};

    // collect completed runs
    std::vector<RunRecord> runs;
    const fs::path runs_dir = fs::path(results_dir) / "runs";
    if (!fs::exists(runs_dir)) throw FormatError("no runs directory under " + results_dir);
    std::vector<std::string> run_names;
    for (const auto& e : fs::directory_iterator(runs_dir))
        if (e.is_directory() && fs::exists(e.path() / ".complete")) run_names.push_back(e.path().string());
    std::sort(run_names.begin(), run_names.end());
    if (run_names.empty()) throw StateError("no completed runs in " + runs_dir.string());

    for (const auto& dir : run_names) {
        std::ifstream min((fs::path(dir) / "metadata.json").string());
        json meta;
        min >> meta;
        RunRecord r;
        r.candidate = meta.at("candidate").get<std::string>();
        r.iteration = meta.at("iteration").get<int>();
        r.converged = meta.at("converged").get<bool>();
        const csv::Table metrics = csv::Table::load((fs::path(dir) / "metrics.csv").string());
        for (const auto& col : metric_cols) r.metric_means[col] = column_mean(metrics, col);
        std::ifstream ein((fs::path(dir) / "evaluation.json").string());
        json ev;
        ein >> ev;
        r.softness = ev.at("softness").get<double>();
        const csv::Table dist = csv::Table::load((fs::path(dir) / "distribution.csv").string());
        for (const auto& row : dist.rows) {
            r.kde_x.push_back(csv::parse(row[0]));
            r.kde_y.push_back(csv::parse(row[1]));
        }
        const csv::Table curve = csv::Table::load((fs::path(dir) / "threshold_curve.csv").string());
        for (const auto& row : curve.rows)
            r.threshold_curve.push_back({csv::parse(row[0]), csv::parse(row[1]), csv::parse(row[2])});
        runs.push_back(std::move(r));
    }

    auto runs_of = [&](const std::string& cand, bool converged_only) {
        std::vector<const RunRecord*> out;
        for (const auto& r : runs)
            if (r.candidate == cand && (!converged_only || r.converged)) out.push_back(&r);
        std::sort(out.begin(), out.end(),
                  [](const RunRecord* a, const RunRecord* b) { return a->iteration < b->iteration; });
        return out;
    };

    // Wilcoxon on per-iteration means vs the reference candidate
    std::map<std::string, std::map<std::string, std::optional<double>>> p_values;
    const bool have_reference =
        std::find(candidates.begin(), candidates.end(), kReference) != candidates.end();
    csv::Table sig;
    sig.header = {"candidate", "metric", "n_pairs", "p_value", "significant"};
    if (have_reference) {
        const auto ref_runs = runs_of(kReference, true);
        for (const auto& cand : candidates) {
            if (cand == kReference) continue;
            const auto cand_runs = runs_of(cand, true);
            for (const auto& metric : metric_cols) {
                std::vector<double> a, b;
                for (const RunRecord* cr : cand_runs) {
                    if (!cr->metric_means.at(metric)) continue;
                    for (const RunRecord* rr : ref_runs) {
                        if (rr->iteration == cr->iteration && rr->metric_means.at(metric)) {
                            a.push_back(*cr->metric_means.at(metric));
                            b.push_back(*rr->metric_means.at(metric));
                            break;
                        }
                    }
                }
                std::optional<double> p;
                if (!a.empty()) p = stats::wilcoxon_signed_rank(a, b).p_value;
                p_values[cand][metric] = p;
                sig.rows.push_back({cand, metric, std::to_string(a.size()), csv::fmt(p),
                                    p && *p <= 0.05 ? "1" : "0"});
            }
        }
    }
    sig.save((fs::path(results_dir) / "report" / "significance.csv").string());

    // conventions behind the aggregation, next to the tables they shaped
    {
        json meta;
        meta["wilcoxon_pairing"] = "iteration-means";
        meta["wilcoxon_pairing_alternative"] = "per-subject pairing (not used)";
        meta["significance_threshold"] = 0.05;
        meta["reference_candidate"] = kReference;
        meta["summary_means"] = "converged runs only; see summary_including_failures.csv for the other view";
        std::ofstream out((fs::path(results_dir) / "report" / "report_meta.json").string(), std::ios::trunc);
        out << meta.dump(2) << "\n";
    }

    // summary tables: converged-only, and one including failures
    for (const bool converged_only : {true, false}) {
        csv::Table summary;
        summary.header = {"candidate"};
        for (const auto& m : metric_cols) summary.header.push_back(m);
        summary.header.push_back("softness");
        summary.header.push_back("n_runs");
        summary.header.push_back("n_converged");
        summary.header.push_back("convergence_rate");
        for (const auto& cand : candidates) {
            const auto all_runs = runs_of(cand, false);
            const auto used = runs_of(cand, converged_only);
            std::vector<std::string> row = {cand};
            for (const auto& metric : metric_cols) {
                std::vector<double> vals;
                for (const RunRecord* r : used)
                    if (r->metric_means.at(metric)) vals.push_back(*r->metric_means.at(metric));
                const bool marked = cand != kReference && have_reference && p_values.count(cand) &&
                                    p_values[cand][metric] && *p_values[cand][metric] <= 0.05;
                row.push_back(mean_std_cell(vals, marked));
            }
            std::vector<double> soft;
            for (const RunRecord* r : used) soft.push_back(r->softness);
            row.push_back(mean_std_cell(soft, false));
            int n_conv = 0;
            for (const RunRecord* r : all_runs) n_conv += r->converged;
            row.push_back(std::to_string(all_runs.size()));
            row.push_back(std::to_string(n_conv));
            row.push_back(all_runs.empty() ? "n/a" : fmt2(static_cast<double>(n_conv) / all_runs.size()));
            summary.rows.push_back(std::move(row));
        }
        const char* name = converged_only ? "summary.csv" : "summary_including_failures.csv";
        summary.save((fs::path(results_dir) / "report" / name).string());
    }

    // flattened threshold curves
    csv::Table curves;
    curves.header = {"candidate", "iteration", "threshold", "mean_dice", "is_argmax"};
    for (const auto& cand : candidates)
        for (const RunRecord* r : runs_of(cand, false))
            for (const auto& pt : r->threshold_curve)
                curves.rows.push_back({cand, std::to_string(r->iteration), csv::fmt(pt[0]), csv::fmt(pt[1]),
                                       pt[2] != 0.0 ? "1" : "0"});
    curves.save((fs::path(results_dir) / "report" / "threshold_curves.csv").string());

    // mean value-distribution per candidate over converged runs, area renormalized
    csv::Table dists;
    dists.header = {"candidate", "value", "density"};
    std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>> dist_series;
    double dist_ymax = 0;
    for (const auto& cand : candidates) {
        const auto used = runs_of(cand, true);
        if (used.empty() || used[0]->kde_x.empty()) continue;
        const size_t n = used[0]->kde_x.size();
        std::vector<double> mean_y(n, 0.0);
        for (const RunRecord* r : used)
            for (size_t i = 0; i < n && i < r->kde_y.size(); ++i) mean_y[i] += r->kde_y[i];
        for (auto& y : mean_y) y /= static_cast<double>(used.size());
        double area = 0;
        for (size_t i = 0; i + 1 < n; ++i)
            area += 0.5 * (mean_y[i] + mean_y[i + 1]) * (used[0]->kde_x[i + 1] - used[0]->kde_x[i]);
        if (area > 0)
            for (auto& y : mean_y) y /= area;
        std::vector<std::array<double, 2>> pts;
        for (size_t i = 0; i < n; ++i) {
            dists.rows.push_back({cand, csv::fmt(used[0]->kde_x[i]), csv::fmt(mean_y[i])});
            pts.push_back({used[0]->kde_x[i], mean_y[i]});
            dist_ymax = std::max(dist_ymax, mean_y[i]);
        }
        dist_series.push_back({cand, std::move(pts)});
    }
    dists.save((fs::path(results_dir) / "report" / "distributions.csv").string());

    // SVG plots
    std::vector<std::pair<std::string, std::vector<std::array<double, 2>>>> curve_series;
    for (const auto& cand : candidates) {
        const auto used = runs_of(cand, true);
        if (used.empty() || used[0]->threshold_curve.empty()) continue;
        const size_t n = used[0]->threshold_curve.size();
        std::vector<std::array<double, 2>> pts(n);
        for (size_t i = 0; i < n; ++i) {
            pts[i][0] = used[0]->threshold_curve[i][0];
            double acc = 0;
            for (const RunRecord* r : used) acc += r->threshold_curve[i][1];
            pts[i][1] = acc / used.size();
        }
        curve_series.push_back({cand, std::move(pts)});
    }
    if (!curve_series.empty())
        write_svg_lines((fs::path(results_dir) / "report" / "threshold_curves.svg").string(),
                        "Mean Dice vs binarization threshold", curve_series, 0.05, 0.95, 0.0, 100.0);
    if (!dist_series.empty())
        write_svg_lines((fs::path(results_dir) / "report" / "distributions.svg").string(),
                        "Distribution of non-zero prediction values", dist_series, 0.0, 1.0, 0.0,
                        std::max(1.0, dist_ymax));
}

}  // namespace softseg::exp
