#pragma once

#include <functional>
#include <string>
#include <vector>

#include "softseg/config.hpp"
#include "softseg/metrics.hpp"
#include "softseg/phantom.hpp"

namespace softseg::exp {

enum class SplitKind { CenterWise, PatientWise };

struct Splits {
    std::vector<int> train, val, test;  // indices into the dataset
};

// CenterWise: 2/1/1 centers with the test center cycling evenly across
// iterations; PatientWise: seeded 60/20/20 shuffle. Disjoint and exhaustive.
Splits make_splits(const phantom::Dataset& ds, SplitKind kind, int iteration, uint64_t base_seed);

SplitKind split_kind_from_string(const std::string& s);

// Result-store layout helpers.
std::string run_dir_name(const std::string& candidate, int iteration);

// Trains one (candidate, iteration) run into run_dir: checkpoint.ckpt,
// history.csv, metadata.json. Returns the convergence flag.
bool train_run(const RunConfig& cfg, const phantom::Dataset& ds, const std::string& candidate, int iteration,
               const std::string& run_dir);

// Threshold sweep on train+val, metrics on the requested split ("test" or
// "val"): metrics.csv, threshold_curve.csv, soft_metrics.csv,
// distribution.csv, evaluation.json.
void evaluate_run(const RunConfig& cfg, const phantom::Dataset& ds, const std::string& run_dir,
                  const std::string& split);

// Full plan: every iteration x candidate, trained and evaluated with `jobs`
// parallel workers. Completed runs (marker file present) are skipped when
// resume is set; partial stores without resume are refused.
void run_experiment(const RunConfig& cfg, const std::string& out_dir, bool resume,
                    const std::function<void(const std::string&)>& log = {});

// Report bundle under <results_dir>/report: summary.csv (+ one including
// non-converged runs), significance.csv, threshold_curves.csv,
// distributions.csv, and SVG plots.
void write_report(const std::string& results_dir);

}  // namespace softseg::exp
