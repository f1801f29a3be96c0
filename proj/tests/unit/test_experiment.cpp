#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "softseg/csvio.hpp"
#include "softseg/experiment.hpp"

using namespace softseg;
using namespace softseg::exp;
namespace fs = std::filesystem;

namespace {

phantom::Dataset tiny_dataset(uint64_t seed, int n_centers = 4, int n_per_center = 2) {
    phantom::PhantomSpec spec;
    spec.task = phantom::PhantomTask::SingleBlob;
    spec.min_size_mm = 8.f;
    spec.max_size_mm = 12.f;
    spec.extent_mm = 24.f;
    spec.num_slices = 2;
    spec.seed = seed;
    std::vector<phantom::CenterProfile> centers;
    for (int i = 0; i < n_centers; ++i) {
        phantom::CenterProfile c;
        c.id = "c" + std::to_string(i + 1);
        c.spacing_mm = {0.9f + 0.1f * i, 0.9f + 0.1f * i, 3.f};
        c.noise_std = 2.f;
        centers.push_back(c);
    }
    return phantom::gen_dataset(spec, centers, n_per_center);
}

RunConfig tiny_config(const std::string& manifest, uint64_t seed) {
    RunConfig cfg;
    cfg.dataset_manifest = manifest;
    cfg.split_scheme = "center";
    cfg.task = "blob";
    cfg.train.batch_size = 4;
    cfg.train.max_epochs = 2;
    cfg.train.patience = 2;
    cfg.train.lr0 = 0.002;
    cfg.train.unet.depth = 1;
    cfg.train.unet.base_filters = 4;
    cfg.train.unet.dropout_rate = 0.1;
    cfg.train.crop = {16, 16};
    cfg.train.target_spacing = {1.5f, 1.5f, 3.f};
    cfg.candidates = {"Hard-Sig-Dice", "Soft-ReLU-Wing"};
    cfg.n_iterations = 1;
    cfg.base_seed = seed;
    cfg.jobs = 2;
    return cfg;
}

std::map<std::string, std::vector<char>> dir_bytes(const fs::path& root) {
    std::map<std::string, std::vector<char>> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] =
            std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return out;
}

}  // namespace

TEST_CASE("canonical candidates match the five-row ablation") {
    const auto cands = canonical_candidates();
    REQUIRE(cands.size() == 5);
    CHECK(cands[0].name == "Hard-Sig-Dice");
    CHECK(cands[4].name == "Soft-ReLU-Wing");

    const auto& conv = cands[0];
    const auto& softseg = cands[4];
    // the proposed candidate differs from the conventional one in all three features
    CHECK(conv.binarize_after_aug != softseg.binarize_after_aug);
    CHECK(conv.activation != softseg.activation);
    CHECK(conv.loss != softseg.loss);

    // each ablation candidate differs from the proposed one in exactly one feature
    for (int i = 1; i <= 3; ++i) {
        int diffs = 0;
        diffs += cands[i].binarize_after_aug != softseg.binarize_after_aug;
        diffs += cands[i].activation != softseg.activation;
        diffs += cands[i].loss != softseg.loss;
        CHECK(diffs == 1);
    }
}

TEST_CASE("unknown candidate names are rejected with the valid list") {
    try {
        candidate_by_name("Soft-Sig-Dice");
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("Hard-Sig-Dice") != std::string::npos);
        CHECK(msg.find("Soft-ReLU-Wing") != std::string::npos);
    }
}

TEST_CASE("center-wise splits cycle the test center evenly") {
    const auto ds = tiny_dataset(1);
    std::map<std::string, int> test_counts;
    for (int it = 0; it < 8; ++it) {
        const auto s = make_splits(ds, SplitKind::CenterWise, it, 42);
        // splits are disjoint and exhaustive
        std::set<int> seen;
        for (const auto* part : {&s.train, &s.val, &s.test})
            for (int i : *part) CHECK(seen.insert(i).second);
        CHECK(seen.size() == ds.subjects.size());
        // one test center, one val center, two train centers
        std::set<std::string> tc, vc, rc;
        for (int i : s.test) tc.insert(ds.subjects[i].center_id);
        for (int i : s.val) vc.insert(ds.subjects[i].center_id);
        for (int i : s.train) rc.insert(ds.subjects[i].center_id);
        CHECK(tc.size() == 1);
        CHECK(vc.size() == 1);
        CHECK(rc.size() == 2);
        ++test_counts[*tc.begin()];
    }
    for (const auto& [center, count] : test_counts) CHECK(count == 2);

    // 40 iterations: each of 4 centers is the test center exactly 10 times
    test_counts.clear();
    for (int it = 0; it < 40; ++it) {
        const auto s = make_splits(ds, SplitKind::CenterWise, it, 42);
        std::set<std::string> tc;
        for (int i : s.test) tc.insert(ds.subjects[i].center_id);
        ++test_counts[*tc.begin()];
    }
    for (const auto& [center, count] : test_counts) CHECK(count == 10);
}

TEST_CASE("identical split for identical seed and iteration") {
    const auto ds = tiny_dataset(2);
    const auto a = make_splits(ds, SplitKind::CenterWise, 3, 7);
    const auto b = make_splits(ds, SplitKind::CenterWise, 3, 7);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
}

TEST_CASE("patient-wise splits are 60/20/20 on ten subjects") {
    const auto ds = tiny_dataset(3, 5, 2);  // 10 subjects
    const auto s = make_splits(ds, SplitKind::PatientWise, 0, 11);
    CHECK(s.train.size() == 6);
    CHECK(s.val.size() == 2);
    CHECK(s.test.size() == 2);
}

TEST_CASE("center-wise splits need at least four centers") {
    const auto ds = tiny_dataset(4, 3, 2);
    CHECK_THROWS_AS(make_splits(ds, SplitKind::CenterWise, 0, 1), ConfigError);
}

TEST_CASE("run_experiment produces the full result store and is idempotent") {
    const auto root = fs::temp_directory_path() / "softseg_exp_store";
    fs::remove_all(root);
    fs::create_directories(root);
    auto ds = tiny_dataset(5);
    phantom::save_dataset(ds, (root / "data").string());
    auto cfg = tiny_config((root / "data" / "manifest.json").string(), 99);

    const auto out = (root / "results").string();
    run_experiment(cfg, out, false);

    // 1 iteration x 2 candidates -> 2 run dirs with the expected inventory
    int n_dirs = 0;
    for (const auto& e : fs::directory_iterator(fs::path(out) / "runs")) {
        ++n_dirs;
        for (const char* f : {"checkpoint.ckpt", "history.csv", "metadata.json", "metrics.csv",
                              "threshold_curve.csv", "soft_metrics.csv", "distribution.csv",
                              "evaluation.json", ".complete"})
            CHECK(fs::exists(e.path() / f));
        const auto metrics = csv::Table::load((e.path() / "metrics.csv").string());
        CHECK(metrics.rows.size() == 2);  // one row per test subject
        const auto curve = csv::Table::load((e.path() / "threshold_curve.csv").string());
        CHECK(curve.rows.size() == 19);
    }
    CHECK(n_dirs == 2);

    // partial store without resume is refused
    fs::remove(fs::path(out) / "runs" / run_dir_name("Hard-Sig-Dice", 0) / ".complete");
    CHECK_THROWS_AS(run_experiment(cfg, out, false), StateError);

    // resume recomputes only the incomplete run and leaves the other untouched
    const auto before = dir_bytes(fs::path(out) / "runs" / run_dir_name("Soft-ReLU-Wing", 0));
    run_experiment(cfg, out, true);
    const auto after = dir_bytes(fs::path(out) / "runs" / run_dir_name("Soft-ReLU-Wing", 0));
    CHECK(before == after);
    CHECK(fs::exists(fs::path(out) / "runs" / run_dir_name("Hard-Sig-Dice", 0) / ".complete"));
}

TEST_CASE("lesion task carries detection metrics through store and report") {
    const auto root = fs::temp_directory_path() / "softseg_exp_lesion";
    fs::remove_all(root);
    fs::create_directories(root);

    phantom::PhantomSpec spec;
    spec.task = phantom::PhantomTask::MultiLesion;
    spec.min_objects = 3;
    spec.max_objects = 5;
    spec.min_size_mm = 3.f;
    spec.max_size_mm = 8.f;
    spec.extent_mm = 24.f;
    spec.num_slices = 2;
    spec.seed = 12;
    std::vector<phantom::CenterProfile> centers;
    for (int i = 0; i < 4; ++i) {
        phantom::CenterProfile c;
        c.id = "c" + std::to_string(i + 1);
        c.spacing_mm = {1.f, 1.f, 3.f};
        c.noise_std = 2.f;
        centers.push_back(c);
    }
    phantom::save_dataset(phantom::gen_dataset(spec, centers, 2), (root / "data").string());

    auto cfg = tiny_config((root / "data" / "manifest.json").string(), 3);
    cfg.task = "lesion";
    cfg.candidates = {"Soft-ReLU-Wing"};
    run_experiment(cfg, (root / "results").string(), false);
    write_report((root / "results").string());

    const auto metrics = csv::Table::load(
        (root / "results" / "runs" / run_dir_name("Soft-ReLU-Wing", 0) / "metrics.csv").string());
    CHECK(metrics.column("ltpr") >= 0);
    CHECK(metrics.column("lfdr") >= 0);

    const auto summary = csv::Table::load((root / "results" / "report" / "summary.csv").string());
    const std::vector<std::string> expect = {"candidate", "dice", "precision", "recall", "lfdr", "ltpr"};
    for (size_t i = 0; i < expect.size(); ++i) CHECK(summary.header[i] == expect[i]);
}

TEST_CASE("rerunning a plan in a fresh store reproduces it bytewise") {
    const auto root = fs::temp_directory_path() / "softseg_exp_det";
    fs::remove_all(root);
    fs::create_directories(root);
    auto ds = tiny_dataset(6);
    phantom::save_dataset(ds, (root / "data").string());
    auto cfg = tiny_config((root / "data" / "manifest.json").string(), 123);
    cfg.candidates = {"Soft-ReLU-Wing"};

    run_experiment(cfg, (root / "a").string(), false);
    run_experiment(cfg, (root / "b").string(), false);
    CHECK(dir_bytes(root / "a") == dir_bytes(root / "b"));
}

TEST_CASE("report bundle has the expected tables and markers column") {
    const auto root = fs::temp_directory_path() / "softseg_exp_report";
    fs::remove_all(root);
    fs::create_directories(root);
    auto ds = tiny_dataset(7);
    phantom::save_dataset(ds, (root / "data").string());
    auto cfg = tiny_config((root / "data" / "manifest.json").string(), 7);
    cfg.n_iterations = 2;
    const auto out = (root / "results").string();
    run_experiment(cfg, out, false);
    write_report(out);

    const auto report = fs::path(out) / "report";
    for (const char* f : {"summary.csv", "summary_including_failures.csv", "significance.csv",
                          "threshold_curves.csv", "distributions.csv", "threshold_curves.svg",
                          "distributions.svg"})
        CHECK(fs::exists(report / f));

    const auto summary = csv::Table::load((report / "summary.csv").string());
    REQUIRE(summary.rows.size() == 2);
    CHECK(summary.header[0] == "candidate");
    // blob task: the six metric columns in table order
    const std::vector<std::string> expect = {"dice", "precision", "recall", "avd", "rvd", "mse"};
    for (size_t i = 0; i < expect.size(); ++i) CHECK(summary.header[i + 1] == expect[i]);
    // every metric cell carries mean +/- std
    for (const auto& row : summary.rows)
        for (size_t i = 1; i <= expect.size(); ++i) CHECK(row[i].find("\xC2\xB1") != std::string::npos);

    const auto sig = csv::Table::load((report / "significance.csv").string());
    CHECK(sig.rows.size() == expect.size());  // one non-reference candidate x six metrics

    // ** markers appear exactly where significance.csv flags p <= 0.05
    std::map<std::string, bool> flagged;
    for (const auto& row : sig.rows) flagged[row[0] + ":" + row[1]] = row[4] == "1";
    for (const auto& row : summary.rows)
        for (size_t i = 1; i <= expect.size(); ++i) {
            const bool has_marker = row[i].find("**") != std::string::npos;
            if (row[0] == "Soft-ReLU-Wing")
                CHECK(!has_marker);
            else
                CHECK(has_marker == flagged[row[0] + ":" + expect[i - 1]]);
        }
}
