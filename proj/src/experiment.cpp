#include "softseg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "softseg/checkpoint.hpp"
#include "softseg/csvio.hpp"
#include "softseg/trainer.hpp"

namespace softseg::exp {

namespace fs = std::filesystem;
using nlohmann::json;

SplitKind split_kind_from_string(const std::string& s) {
    if (s == "center") return SplitKind::CenterWise;
    if (s == "patient") return SplitKind::PatientWise;
    throw ConfigError("unknown split scheme '" + s + "'");
}

Splits make_splits(const phantom::Dataset& ds, SplitKind kind, int iteration, uint64_t base_seed) {
    if (iteration < 0) throw ConfigError("iteration must be >= 0");
    Splits out;
    Rng rng(derive_seed(base_seed, {static_cast<uint64_t>(iteration), kStreamSplit}));
    if (kind == SplitKind::CenterWise) {
        const auto& centers = ds.center_ids;
        if (centers.size() < 4) throw ConfigError("center-wise splits need at least 4 centers");
        const std::string test_center = centers[iteration % centers.size()];
        std::vector<std::string> rest;
        for (const auto& c : centers)
            if (c != test_center) rest.push_back(c);
        rng.shuffle(rest);
        const std::string val_center = rest[0];
        for (size_t i = 0; i < ds.subjects.size(); ++i) {
            const auto& c = ds.subjects[i].center_id;
            if (c == test_center)
                out.test.push_back(static_cast<int>(i));
            else if (c == val_center)
                out.val.push_back(static_cast<int>(i));
            else
                out.train.push_back(static_cast<int>(i));
        }
    } else {
        const int n = static_cast<int>(ds.subjects.size());
        if (n < 5) throw ConfigError("patient-wise splits need at least 5 subjects");
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const int n_test = std::max(1, n / 5);
        const int n_val = std::max(1, n / 5);
        for (int i = 0; i < n; ++i) {
            if (i < n_test)
                out.test.push_back(order[i]);
            else if (i < n_test + n_val)
                out.val.push_back(order[i]);
            else
                out.train.push_back(order[i]);
        }
    }
    if (out.train.empty() || out.val.empty() || out.test.empty())
        throw ConfigError("degenerate split: every part needs at least one subject");
    return out;
}

std::string run_dir_name(const std::string& candidate, int iteration) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", iteration);
    return candidate + "__iter" + buf;
}

namespace {

std::vector<ProcessedSubject> preprocess_all(const phantom::Dataset& ds, const std::vector<int>& idx,
                                             const TrainConfig& tc) {
    std::vector<ProcessedSubject> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(preprocess_subject(ds.subjects[i], tc.target_spacing, tc.crop));
    return out;
}

json split_to_json(const phantom::Dataset& ds, const std::vector<int>& idx) {
    json a = json::array();
    for (int i : idx) a.push_back(ds.subjects[i].id);
    return a;
}

void write_json(const json& j, const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("missing " + path);
    json j;
    in >> j;
    return j;
}

// Mean squared error between the raw soft prediction and the exact soft gt,
// restricted to partial-volume voxels (gt strictly inside lo..hi).
std::optional<double> boundary_soft_mse(const SoftMask& pred, const SoftMask& gt, float lo = 0.f,
                                        float hi = 1.f) {
    double acc = 0;
    int64_t n = 0;
    for (size_t i = 0; i < gt.data.size(); ++i) {
        const float g = gt.data[i];
        if (g <= lo || g >= hi) continue;
        const double d = static_cast<double>(pred.data[i]) - g;
        acc += d * d;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
}

}  // namespace

bool train_run(const RunConfig& cfg, const phantom::Dataset& ds, const std::string& candidate, int iteration,
               const std::string& run_dir) {
    cfg.validate();
    CandidateConfig cand = candidate_by_name(candidate, cfg.awing);
    cand.dice_variant = cfg.dice_variant == "squared" ? obj::DiceVariant::SquaredDenominator
                                                      : obj::DiceVariant::SumDenominator;
    const SplitKind kind = split_kind_from_string(cfg.split_scheme);
    const Splits splits = make_splits(ds, kind, iteration, cfg.base_seed);

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.base_seed, {static_cast<uint64_t>(iteration)});

    const auto train_set = preprocess_all(ds, splits.train, tc);
    const auto val_set = preprocess_all(ds, splits.val, tc);
    TrainResult result = train(train_set, val_set, cand, tc);

    fs::create_directories(run_dir);
    nn::save_checkpoint(*result.model, tc.seed, (fs::path(run_dir) / "checkpoint.ckpt").string());
    result.history.save_csv((fs::path(run_dir) / "history.csv").string());

    json meta;
    meta["candidate"] = candidate;
    meta["iteration"] = iteration;
    meta["seed"] = tc.seed;
    meta["plan_hash"] = config_hash(run_config_to_json(cfg));
    meta["converged"] = result.history.converged;
    meta["stop_epoch"] = result.history.stop_epoch;
    meta["stop_reason"] = result.history.stop_reason;
    meta["best_epoch"] = result.history.best_epoch;
    meta["best_val_loss"] = result.history.best_val_loss;
    meta["split"] = {{"train", split_to_json(ds, splits.train)},
                     {"val", split_to_json(ds, splits.val)},
                     {"test", split_to_json(ds, splits.test)}};
    meta["config"] = run_config_to_json(cfg);
    meta["conventions"] = {{"normrelu_scope", "per-slice"},
                           {"lesion_overlap", "any-voxel"},
                           {"wilcoxon_pairing", "iteration-means"},
                           {"val_gt_binarized", cand.binarize_after_aug}};
    write_json(meta, (fs::path(run_dir) / "metadata.json").string());
    return result.history.converged;
}

void evaluate_run(const RunConfig& cfg, const phantom::Dataset& ds, const std::string& run_dir,
                  const std::string& split) {
    if (split != "test" && split != "val") throw ConfigError("evaluate supports splits 'test' and 'val'");
    const json meta = read_json((fs::path(run_dir) / "metadata.json").string());
    const std::string candidate = meta.at("candidate").get<std::string>();
    const int iteration = meta.at("iteration").get<int>();
    const CandidateConfig cand = candidate_by_name(candidate, cfg.awing);
    const SplitKind kind = split_kind_from_string(cfg.split_scheme);
    const Splits splits = make_splits(ds, kind, iteration, cfg.base_seed);

    const std::string ckpt_path = (fs::path(run_dir) / "checkpoint.ckpt").string();
    if (!fs::exists(ckpt_path)) throw StateError("run has no checkpoint: " + ckpt_path);
    auto loaded = nn::load_checkpoint(ckpt_path);

    // threshold sweep on train + validation subjects, native grid
    std::vector<SoftMask> sweep_preds, sweep_gts;
    auto add_sweep = [&](const std::vector<int>& idx) {
        for (int i : idx) {
            sweep_preds.push_back(predict_subject(*loaded.model, cand, ds.subjects[i], cfg.train));
            sweep_gts.push_back(ds.subjects[i].gt);
        }
    };
    add_sweep(splits.train);
    add_sweep(splits.val);
    const eval::ThresholdSweep sweep = eval::optimize_threshold(sweep_preds, sweep_gts);

    csv::Table curve;
    curve.header = {"threshold", "mean_dice", "is_argmax"};
    for (size_t i = 0; i < sweep.thresholds.size(); ++i)
        curve.rows.push_back({csv::fmt(sweep.thresholds[i]), csv::fmt(sweep.mean_dice[i]),
                              static_cast<int>(i) == sweep.best_index ? "1" : "0"});
    curve.save((fs::path(run_dir) / "threshold_curve.csv").string());

    // per-subject metrics on the requested split
    const std::vector<int>& eval_idx = split == "test" ? splits.test : splits.val;
    const bool lesion = cfg.task == "lesion";
    csv::Table metrics;
    metrics.header = {"subject", "threshold", "dice", "precision", "recall", "avd", "rvd", "mse"};
    if (lesion) {
        metrics.header.push_back("ltpr");
        metrics.header.push_back("lfdr");
    }
    csv::Table soft_metrics;
    soft_metrics.header = {"subject", "softness", "boundary_soft_mse", "midband_soft_mse", "n_nonzero"};
    std::vector<float> pooled_values;
    for (int i : eval_idx) {
        const Subject& subj = ds.subjects[i];
        const SoftMask pred = predict_subject(*loaded.model, cand, subj, cfg.train);
        const eval::MetricsRecord rec =
            eval::evaluate_subject(subj.id, pred, subj.gt, sweep.best_threshold, lesion);
        std::vector<std::string> row = {rec.subject_id,        csv::fmt(rec.threshold),
                                        csv::fmt(rec.dice),    csv::fmt(rec.precision),
                                        csv::fmt(rec.recall),  csv::fmt(rec.avd),
                                        csv::fmt(rec.rvd),     csv::fmt(rec.mse)};
        if (lesion) {
            row.push_back(csv::fmt(rec.ltpr));
            row.push_back(csv::fmt(rec.lfdr));
        }
        metrics.rows.push_back(std::move(row));

        const auto dist = eval::value_distribution(pred);
        soft_metrics.rows.push_back({subj.id, csv::fmt(dist.softness),
                                     csv::fmt(boundary_soft_mse(pred, subj.gt)),
                                     csv::fmt(boundary_soft_mse(pred, subj.gt, 0.35f, 0.65f)),
                                     std::to_string(dist.n_nonzero)});
        pooled_values.insert(pooled_values.end(), pred.data.begin(), pred.data.end());
    }
    const std::string metrics_name = split == "test" ? "metrics.csv" : "metrics_val.csv";
    metrics.save((fs::path(run_dir) / metrics_name).string());
    soft_metrics.save((fs::path(run_dir) / "soft_metrics.csv").string());

    const auto pooled = eval::value_distribution(pooled_values);
    csv::Table dist_table;
    dist_table.header = {"value", "density"};
    for (size_t i = 0; i < pooled.kde_x.size(); ++i)
        dist_table.rows.push_back({csv::fmt(pooled.kde_x[i]), csv::fmt(pooled.kde_y[i])});
    dist_table.save((fs::path(run_dir) / "distribution.csv").string());

    json ev;
    ev["split"] = split;
    ev["threshold"] = sweep.best_threshold;
    ev["softness"] = pooled.softness;
    ev["n_nonzero"] = pooled.n_nonzero;
    ev["empty_distribution"] = pooled.empty;
    write_json(ev, (fs::path(run_dir) / "evaluation.json").string());
}

void run_experiment(const RunConfig& cfg, const std::string& out_dir, bool resume,
                    const std::function<void(const std::string&)>& log) {
    cfg.validate();
    const fs::path runs_dir = fs::path(out_dir) / "runs";

    if (fs::exists(runs_dir) && !fs::is_empty(runs_dir) && !resume)
        throw StateError("result store " + runs_dir.string() + " already has runs; pass resume to continue");
    fs::create_directories(runs_dir);

    json plan = run_config_to_json(cfg);
    plan["plan_hash"] = config_hash(run_config_to_json(cfg));
    write_json(plan, (fs::path(out_dir) / "plan.json").string());

    const phantom::Dataset ds = phantom::load_dataset(cfg.dataset_manifest);

    struct Task {
        std::string candidate;
        int iteration;
    };
    std::vector<Task> tasks;
    for (int it = 0; it < cfg.n_iterations; ++it)
        for (const auto& cand : cfg.candidates) tasks.push_back({cand, it});

    std::atomic<size_t> next{0};
    std::mutex log_mutex;
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!failed) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            const fs::path run_dir = runs_dir / run_dir_name(t.candidate, t.iteration);
            const fs::path marker = run_dir / ".complete";
            if (fs::exists(marker)) {
                if (log) {
                    std::lock_guard<std::mutex> lk(log_mutex);
                    log("skip " + run_dir_name(t.candidate, t.iteration) + " (complete)");
                }
                continue;
            }
            try {
                const bool converged = train_run(cfg, ds, t.candidate, t.iteration, run_dir.string());
                evaluate_run(cfg, ds, run_dir.string(), "test");
                std::ofstream(marker.string(), std::ios::trunc) << "ok\n";
                if (log) {
                    std::lock_guard<std::mutex> lk(log_mutex);
                    log(run_dir_name(t.candidate, t.iteration) +
                        (converged ? " done" : " done (did not converge)"));
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
                return;
            }
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed) throw StateError("experiment aborted: " + first_error);
}

}  // namespace softseg::exp
