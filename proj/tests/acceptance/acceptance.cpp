// Acceptance suite: one pass/fail line per criterion on stdout. Criterion 9
// (the desk-scale five-candidate experiment) dominates the runtime; run this
// binary through ctest with its configured timeout.

#include <doctest.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "softseg/checkpoint.hpp"
#include "softseg/csvio.hpp"
#include "softseg/experiment.hpp"
#include "softseg/optim.hpp"
#include "softseg/stats.hpp"
#include "softseg/trainer.hpp"

using namespace softseg;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int number;
    std::string detail;
    bool ok = true;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
    ~Criterion() {
        if (std::uncaught_exceptions() > 0 && ok) {
            ok = false;
            if (detail.empty()) detail = "aborted by a failed precondition";
        }
        std::printf("[criterion %2d] %s%s%s\n", number, ok ? "PASS" : "FAIL", detail.empty() ? "" : " - ",
                    detail.c_str());
        std::fflush(stdout);
    }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
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

phantom::Dataset acceptance_dataset(uint64_t seed, int n_per_center) {
    phantom::PhantomSpec spec;
    spec.task = phantom::PhantomTask::SingleBlob;
    spec.min_size_mm = 18.f;
    spec.max_size_mm = 32.f;
    spec.extent_mm = 64.f;
    spec.num_slices = 3;
    spec.supersample = 8;
    spec.seed = seed;
    std::vector<phantom::CenterProfile> centers(4);
    const float spacings[4] = {0.8f, 0.9f, 1.0f, 1.1f};
    const float noise[4] = {3.f, 4.f, 5.f, 4.f};
    const float bg[4] = {20.f, 25.f, 15.f, 20.f};
    const float obj[4] = {80.f, 75.f, 85.f, 70.f};
    for (int i = 0; i < 4; ++i) {
        centers[i].id = "c" + std::to_string(i + 1);
        centers[i].spacing_mm = {spacings[i], spacings[i], 3.f};
        centers[i].noise_std = noise[i];
        centers[i].intensity_bg = bg[i];
        centers[i].intensity_obj = obj[i];
    }
    return phantom::gen_dataset(spec, centers, n_per_center);
}

RunConfig desk_scale_config(const std::string& manifest) {
    RunConfig cfg;
    cfg.dataset_manifest = manifest;
    cfg.split_scheme = "center";
    cfg.task = "blob";
    cfg.train.batch_size = 8;
    cfg.train.max_epochs = 72;
    cfg.train.patience = 18;
    cfg.train.min_improvement = 1e-4;
    cfg.train.lr0 = 0.004;
    cfg.train.unet.depth = 2;
    cfg.train.unet.base_filters = 4;
    cfg.train.unet.in_channels = 1;
    cfg.train.unet.dropout_rate = 0.2;
    cfg.train.crop = {64, 64};
    cfg.train.target_spacing = {1.f, 1.f, 3.f};
    cfg.candidates.clear();
    for (const auto& cand : canonical_candidates(cfg.awing)) cfg.candidates.push_back(cand.name);
    cfg.n_iterations = 8;
    cfg.base_seed = 20260808;
    cfg.jobs = std::min(4u, std::max(1u, std::thread::hardware_concurrency()));
    return cfg;
}

}  // namespace

TEST_CASE("criterion 1: norm_relu contracts on 1000 random tensors") {
    Criterion c{1};
    Rng rng(1001);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(60));
        nn::Tensor<double> x({n});
        bool any_pos = false;
        for (auto& v : x.values) {
            v = rng.normal() * std::exp(rng.uniform(-1, 1));
            any_pos |= v > 0;
        }
        const auto y = obj::norm_relu(x);
        double mx = 0;
        for (double v : y.values) {
            c.require(v >= 0.0 && v <= 1.0, "output left [0,1]");
            mx = std::max(mx, v);
        }
        if (any_pos)
            c.require(mx == 1.0, "max not exactly 1 despite a positive entry");
        else
            for (double v : y.values) c.require(v == 0.0, "all-nonpositive input must map to zeros");

        const double scale = std::exp(rng.uniform(-2.0, 2.0));
        nn::Tensor<double> xs = x;
        for (auto& v : xs.values) v *= scale;
        const auto ys = obj::norm_relu(xs);
        for (size_t i = 0; i < y.numel(); ++i)
            c.require(std::abs(ys.values[i] - y.values[i]) <= 1e-12, "positive-scaling invariance beyond 1e-12");
    }
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 2: adaptive wing continuity, zero at gt, gradient oracle") {
    Criterion c{2};
    obj::AWingParams p;  // epsilon 1, alpha 2.1, theta 0.5, omega 8
    Rng rng(1002);
    for (int i = 0; i < 100; ++i) {
        const double gt = rng.uniform();
        const double below = obj::awing_voxel(gt + p.theta - 1e-12, gt, p);
        const double above = obj::awing_voxel(gt + p.theta + 1e-12, gt, p);
        c.require(std::abs(below - above) < 1e-9, "branch discontinuity at d = theta");
    }
    for (int i = 0; i < 50; ++i) {
        nn::Tensor<double> g({16});
        for (auto& v : g.values) v = rng.uniform();
        c.require(obj::adaptive_wing_loss(g, g, p) == 0.0, "loss not zero at pred == gt");
    }
    int checked = 0;
    while (checked < 100) {
        const double gt = rng.uniform();
        const double pred = gt + rng.uniform(-1.2, 1.2);
        const double d = std::abs(gt - pred);
        if (d < 5e-3 || std::abs(d - p.theta) < 5e-3) continue;  // off the non-smooth set
        const double h = 1e-6;
        const double fd = (obj::awing_voxel(pred + h, gt, p) - obj::awing_voxel(pred - h, gt, p)) / (2 * h);
        c.require(rel_err(fd, obj::awing_voxel_grad(pred, gt, p)) < 1e-4, "gradient disagrees with finite differences");
        ++checked;
    }
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 3: dice loss and voxel metrics equal the brute-force oracle") {
    Criterion c{3};
    Rng rng(1003);
    for (int trial = 0; trial < 200; ++trial) {
        Volume pred({16, 16, 16}, {1, 1, 1}), gt({16, 16, 16}, {1, 1, 1});
        const double pp = rng.uniform(0.02, 0.7), pg = rng.uniform(0.02, 0.7);
        for (auto& v : pred.data) v = rng.uniform() < pp ? 1.f : 0.f;
        for (auto& v : gt.data) v = rng.uniform() < pg ? 1.f : 0.f;

        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < pred.data.size(); ++i) {
            const bool p = pred.data[i] != 0.f, g = gt.data[i] != 0.f;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        const auto vm = eval::voxel_metrics(pred, gt);
        c.require(vm.dice == ((2 * tp + fp + fn) == 0 ? 100.0 : 200.0 * tp / double(2 * tp + fp + fn)),
                  "dice mismatch");
        c.require(vm.mse == 100.0 * double(fp + fn) / double(pred.data.size()), "mse mismatch");
        if (tp + fp > 0) c.require(*vm.precision == 100.0 * tp / double(tp + fp), "precision mismatch");
        if (tp + fn > 0) {
            c.require(*vm.recall == 100.0 * tp / double(tp + fn), "recall mismatch");
            const double vg = tp + fn, vp = tp + fp;
            c.require(*vm.avd == 100.0 * std::abs(vg - vp) / vg, "avd mismatch");
            c.require(*vm.rvd == 100.0 * (vg - vp) / vg, "rvd mismatch");
        }

        // soft dice loss against a direct transcription of the formula
        nn::Tensor<double> tp_t({static_cast<int>(pred.data.size())}), tg_t({static_cast<int>(gt.data.size())});
        for (size_t i = 0; i < pred.data.size(); ++i) {
            tp_t.values[i] = pred.data[i];
            tg_t.values[i] = gt.data[i];
        }
        const double expected = 1.0 - (2.0 * tp + 1.0) / (double(tp + fp) + double(tp + fn) + 1.0);
        c.require(obj::dice_loss(tp_t, tg_t) == expected, "dice loss mismatch");
    }
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 4: depth-1 unet finite-difference gradient check, BN eval mode") {
    Criterion c{4};
    nn::UNetConfig cfg;
    cfg.depth = 1;
    cfg.in_channels = 1;
    cfg.base_filters = 2;
    cfg.dropout_rate = 0.0;
    nn::UNet<double> net(cfg, 17);
    Rng rng(4);
    nn::Tensor<double> x({1, 1, 8, 8});
    for (auto& v : x.values) v = rng.normal();
    Rng wr(555);
    nn::Tensor<double> y0 = net.forward(x, false);
    nn::Tensor<double> w(y0.shape);
    for (auto& v : w.values) v = wr.normal();
    net.zero_grad();
    net.backward(w);
    std::vector<std::vector<double>> analytic;
    for (auto& p : net.params())
        if (p.learned) analytic.push_back(p.tensor->grad);
    auto loss = [&] {
        const auto y = net.forward(x, false);
        double L = 0;
        for (size_t i = 0; i < y.numel(); ++i) L += y.values[i] * w.values[i];
        return L;
    };
    const double h = 1e-4;
    double worst = 0;
    size_t pi = 0;
    for (auto& p : net.params()) {
        if (!p.learned) continue;
        for (size_t k = 0; k < p.tensor->values.size(); ++k) {
            const double orig = p.tensor->values[k];
            p.tensor->values[k] = orig + h;
            const double lp = loss();
            p.tensor->values[k] = orig - h;
            const double lm = loss();
            p.tensor->values[k] = orig;
            worst = std::max(worst, rel_err((lp - lm) / (2 * h), analytic[pi][k]));
        }
        ++pi;
    }
    c.require(worst < 1e-3, "relative error " + std::to_string(worst));
    c.detail = "worst relative error " + std::to_string(worst);
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 5: threshold sweep argmax equals exhaustive recomputation") {
    Criterion c{5};
    Rng rng(1005);
    phantom::PhantomSpec spec;
    spec.extent_mm = 32.f;
    spec.num_slices = 2;
    spec.min_size_mm = 10.f;
    spec.max_size_mm = 16.f;
    phantom::CenterProfile center;
    center.id = "c";
    center.spacing_mm = {1.f, 1.f, 3.f};
    center.noise_std = 0.f;

    for (int trial = 0; trial < 10; ++trial) {
        std::vector<SoftMask> preds, gts;
        for (int s = 0; s < 4; ++s) {
            auto g = phantom::gen_subject(spec, center, derive_seed(1005, {static_cast<uint64_t>(trial), static_cast<uint64_t>(s)}));
            SoftMask pred = g.subject.gt;
            for (auto& v : pred.data)
                v = static_cast<float>(std::clamp(v * rng.uniform(0.6, 1.1) + rng.uniform(-0.2, 0.2), 0.0, 1.0));
            preds.push_back(std::move(pred));
            gts.push_back(g.subject.gt);
        }
        const auto sweep = eval::optimize_threshold(preds, gts);
        c.require(sweep.thresholds.size() == 19, "grid must have 19 thresholds");

        // independent exhaustive loop over all 19 grid values
        double best = -1, best_tau = 0;
        for (int ti = 1; ti <= 19; ++ti) {
            const double tau = ti * 5 / 100.0;
            double total = 0;
            for (size_t s = 0; s < preds.size(); ++s) {
                long tp = 0, fp = 0, fn = 0;
                for (size_t i = 0; i < preds[s].data.size(); ++i) {
                    const bool p = preds[s].data[i] >= tau, g = gts[s].data[i] >= 0.5f;
                    tp += p && g;
                    fp += p && !g;
                    fn += !p && g;
                }
                total += (2 * tp + fp + fn) == 0 ? 100.0 : 200.0 * tp / double(2 * tp + fp + fn);
            }
            const double mean_dice = total / preds.size();
            if (mean_dice > best + 1e-12) {
                best = mean_dice;
                best_tau = tau;
            }
        }
        c.require(std::abs(sweep.best_threshold - best_tau) < 1e-12, "argmax differs from exhaustive oracle");
    }

    // ties resolve to the lowest threshold: a perfect binary prediction
    SoftMask bin({8, 8, 1}, {1, 1, 1});
    for (auto& v : bin.data) v = rng.uniform() < 0.4 ? 1.f : 0.f;
    const auto flat = eval::optimize_threshold({bin}, {bin});
    c.require(flat.best_threshold == 0.05, "tie must resolve to the lowest threshold");
    for (double d : flat.mean_dice) c.require(d == 100.0, "perfect prediction curve must be constant 100");
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 6: wilcoxon signed-rank exact value, approximation agreement, degenerate case") {
    Criterion c{6};
    std::vector<double> a = {2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<double> b = {1, 2, 3, 4, 5, 6, 7, 8};
    const auto r = stats::wilcoxon_signed_rank(a, b);
    c.require(r.p_value == 0.0078125, "n=8 all-positive exact p must be 2/2^8");

    Rng rng(1006);
    int compared = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(25), y(25);
        for (int i = 0; i < 25; ++i) {
            x[i] = rng.normal();
            y[i] = rng.normal() + 0.4;
        }
        const auto exact = stats::wilcoxon_signed_rank(x, y, stats::WilcoxonMethod::Exact);
        const auto approx = stats::wilcoxon_signed_rank(x, y, stats::WilcoxonMethod::Normal);
        if (exact.p_value < 0.001) continue;  // extreme tail: quantized exact distribution
        c.require(std::abs(exact.p_value - approx.p_value) < 0.01, "exact vs normal approximation beyond 0.01");
        ++compared;
    }
    c.require(compared >= 5, "not enough moderate-statistic samples");

    const auto same = stats::wilcoxon_signed_rank(a, a);
    c.require(same.p_value == 1.0 && same.degenerate, "p(a,a) must be 1 with a degenerate flag");
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 7: phantom soft gt is the exact supersampled fraction") {
    Criterion c{7};
    phantom::PhantomSpec spec;
    spec.extent_mm = 48.f;
    spec.num_slices = 1;
    spec.min_size_mm = 14.f;
    spec.max_size_mm = 24.f;
    spec.supersample = 8;
    phantom::CenterProfile center;
    center.id = "c";
    center.spacing_mm = {1.f, 1.f, 3.f};
    center.noise_std = 0.f;

    for (uint64_t seed : {1ull, 2ull, 3ull, 5ull, 8ull}) {
        const auto g = phantom::gen_subject(spec, center, seed);
        const auto& gt = g.subject.gt;
        const phantom::Ellipse& e = g.shapes.at(0);

        // (i) fractions equal direct supersample recounting
        int boundary_checked = 0;
        for (int y = 0; y < gt.dims[1]; ++y)
            for (int x = 0; x < gt.dims[0]; ++x) {
                const float v = gt.at(x, y, 0);
                if (v <= 0.f || v >= 1.f) continue;
                int hits = 0;
                for (int ay = 0; ay < 8; ++ay)
                    for (int ax = 0; ax < 8; ++ax)
                        if (e.contains((x - 0.5 + (ax + 0.5) / 8.0), (y - 0.5 + (ay + 0.5) / 8.0))) ++hits;
                c.require(v == static_cast<float>(hits) / 64.f, "soft gt is not the supersample fraction");
                ++boundary_checked;
            }
        c.require(boundary_checked > 10, "no partial-volume voxels to check");

        // (ii) total mass vs analytic ellipse area within 1%
        double mass = 0;
        for (float v : gt.data) mass += v;
        c.require(std::abs(mass - e.area_mm2()) / e.area_mm2() < 0.01, "soft mass deviates from pi*a*b by over 1%");

        // (iii) noiseless image is exactly affine in the soft gt
        const auto& img = g.subject.images[0];
        for (size_t i = 0; i < gt.data.size(); ++i) {
            const float expected = center.intensity_bg + (center.intensity_obj - center.intensity_bg) * gt.data[i];
            c.require(img.data[i] == expected, "noiseless image is not an exact affine function of soft gt");
        }
    }
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 8: interpolation contracts and mask range under random ops") {
    Criterion c{8};
    // constants preserved exactly
    for (auto kind : {ResampleKind::Image, ResampleKind::GroundTruth}) {
        Volume v({9, 7, 3}, {1.f, 1.f, 2.f});
        std::fill(v.data.begin(), v.data.end(), 0.715f);
        const Volume r = resample(v, {0.6f, 1.4f, 1.3f}, kind);
        for (float x : r.data) c.require(x == 0.715f, "constant not preserved exactly");
    }
    // linear kind: 0.5 at the step midpoint
    SoftMask step({4, 1, 1}, {1, 1, 1});
    step.data = {0.f, 0.f, 1.f, 1.f};
    const SoftMask up = resample(step, {0.5f, 1.f, 1.f}, ResampleKind::GroundTruth);
    c.require(up.data[3] == 0.5f, "step midpoint must interpolate to exactly 0.5");

    // 1000 random resample/affine operations keep masks inside [0,1]
    Rng rng(1008);
    aug::AugmentRanges ranges;
    for (int op = 0; op < 1000; ++op) {
        if (op % 2 == 0) {
            SoftMask m({6, 5, 2}, {1.f, 1.f, 1.f});
            for (auto& x : m.data) x = static_cast<float>(rng.uniform());
            const std::array<float, 3> target = {static_cast<float>(rng.uniform(0.3, 3.0)),
                                                 static_cast<float>(rng.uniform(0.3, 3.0)),
                                                 static_cast<float>(rng.uniform(0.5, 2.0))};
            const auto kind = rng.below(2) ? ResampleKind::Image : ResampleKind::GroundTruth;
            const SoftMask r = resample(m, target, kind);
            for (float x : r.data) c.require(x >= 0.f && x <= 1.f, "mask left [0,1] after resample");
        } else {
            Slice2D m;
            m.width = 8;
            m.height = 8;
            m.data.resize(64);
            for (auto& x : m.data) x = static_cast<float>(rng.uniform());
            const auto params = aug::sample_affine(rng, ranges);
            const auto t = aug::apply_affine(m, params, true);
            for (float x : t.data) c.require(x >= 0.f && x <= 1.f, "mask left [0,1] after affine");
        }
    }
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 10: full pipeline is bytewise deterministic") {
    Criterion c{10};
    const char* cli = std::getenv("SOFTSEG_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "SOFTSEG_CLI must point at the built binary");

    const char* phantom_spec = R"({
  "seed": 4242, "task": "blob", "n_per_center": 2,
  "phantom": {"extent_mm": 24.0, "num_slices": 2, "min_size_mm": 8.0, "max_size_mm": 12.0},
  "centers": [
    {"id": "c1", "spacing_mm": [0.9, 0.9, 3.0], "noise_std": 2.0},
    {"id": "c2", "spacing_mm": [1.0, 1.0, 3.0], "noise_std": 2.0},
    {"id": "c3", "spacing_mm": [1.1, 1.1, 3.0], "noise_std": 2.0},
    {"id": "c4", "spacing_mm": [1.2, 1.2, 3.0], "noise_std": 2.0}
  ]})";
    const char* run_config = R"({
  "dataset": {"manifest": "phantoms/manifest.json"},
  "preprocessing": {"resample_mm": [1.5, 1.5, 3.0], "crop": [16, 16]},
  "model": {"depth": 1, "base_filters": 4, "dropout_rate": 0.1},
  "training": {"batch_size": 4, "max_epochs": 1, "patience": 1, "lr0": 0.002},
  "experiment": {"base_seed": 7}})";

    for (const char* side : {"a", "b"}) {
        const auto dir = fresh_dir(std::string("softseg_determinism_") + side);
        std::ofstream(dir / "phantom.json") << phantom_spec;
        std::ofstream(dir / "config.json") << run_config;
        const std::string base = "cd " + dir.string() + " && " + cli;
        c.require(std::system((base + " generate-phantoms --spec phantom.json --out phantoms > log1.txt 2>&1").c_str()) == 0,
                  "generate-phantoms failed");
        c.require(std::system((base + " train --config config.json --candidate Soft-ReLU-Wing --iteration 0 --out run > log2.txt 2>&1").c_str()) == 0,
                  "train failed");
        c.require(std::system((base + " evaluate --run run --split test > log3.txt 2>&1").c_str()) == 0,
                  "evaluate failed");
    }
    const auto a = dir_bytes(fs::temp_directory_path() / "softseg_determinism_a" / "run");
    const auto b = dir_bytes(fs::temp_directory_path() / "softseg_determinism_b" / "run");
    c.require(!a.empty(), "run directory is empty");
    c.require(a == b, "result directories differ between identical pipelines");

    const auto pa = dir_bytes(fs::temp_directory_path() / "softseg_determinism_a" / "phantoms");
    const auto pb = dir_bytes(fs::temp_directory_path() / "softseg_determinism_b" / "phantoms");
    c.require(pa == pb, "generated datasets differ between identical seeds");
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 11: report fidelity against the golden summary") {
    Criterion c{11};
    const char* golden_env = std::getenv("SOFTSEG_GOLDEN_DIR");
    REQUIRE_MESSAGE(golden_env != nullptr, "SOFTSEG_GOLDEN_DIR must point at tests/data");
    const fs::path golden_path = fs::path(golden_env) / "golden_summary.csv";

    const auto root = fresh_dir("softseg_acceptance_golden");
    auto ds = acceptance_dataset(1111, 2);  // 4 centers x 2 subjects
    phantom::save_dataset(ds, (root / "data").string());
    RunConfig cfg = desk_scale_config((root / "data" / "manifest.json").string());
    cfg.train.crop = {32, 32};
    cfg.train.target_spacing = {2.f, 2.f, 3.f};
    cfg.train.unet.depth = 1;
    cfg.train.max_epochs = 2;
    cfg.train.patience = 2;
    cfg.n_iterations = 2;
    cfg.base_seed = 515151;
    exp::run_experiment(cfg, (root / "results").string(), false);
    exp::write_report((root / "results").string());

    const auto produced = csv::Table::load((root / "results" / "report" / "summary.csv").string());

    // structure: the six metric columns of the blob task in table order
    const std::vector<std::string> expected_cols = {"candidate", "dice", "precision", "recall",
                                                    "avd",       "rvd",  "mse"};
    for (size_t i = 0; i < expected_cols.size(); ++i)
        c.require(i < produced.header.size() && produced.header[i] == expected_cols[i],
                  "summary.csv column structure mismatch at " + expected_cols[i]);
    c.require(produced.rows.size() == 5, "summary.csv must have one row per candidate");

    // each metric cell carries MEAN +/- STD
    for (const auto& row : produced.rows)
        for (size_t i = 1; i <= 6; ++i)
            c.require(row[i].find("\xC2\xB1") != std::string::npos, "metric cell without mean +/- std");

    // ** markers appear exactly where significance.csv reports p <= 0.05
    const auto sig = csv::Table::load((root / "results" / "report" / "significance.csv").string());
    std::map<std::string, bool> flagged;
    for (const auto& row : sig.rows) {
        const double p = row[3].empty() ? 1.0 : csv::parse(row[3]);
        flagged[row[0] + ":" + row[1]] = p <= 0.05;
        c.require((p <= 0.05) == (row[4] == "1"), "significance flag disagrees with its p-value");
    }
    for (const auto& row : produced.rows)
        for (size_t i = 1; i <= 6; ++i) {
            const bool marker = row[i].find("**") != std::string::npos;
            const bool expected = row[0] != "Soft-ReLU-Wing" && flagged[row[0] + ":" + produced.header[i]];
            c.require(marker == expected, "** marker placement disagrees with p <= 0.05 in row " + row[0]);
        }

    // golden-file comparison (numeric cells within 1e-4 relative, text exact)
    if (!fs::exists(golden_path)) {
        fs::create_directories(golden_path.parent_path());
        fs::copy_file(root / "results" / "report" / "summary.csv", golden_path);
        c.require(false, "golden file was missing; wrote " + golden_path.string() + ", rerun to verify");
    } else {
        const auto golden = csv::Table::load(golden_path.string());
        c.require(golden.header == produced.header, "header differs from the golden file");
        c.require(golden.rows.size() == produced.rows.size(), "row count differs from the golden file");
        for (size_t r = 0; r < std::min(golden.rows.size(), produced.rows.size()); ++r)
            for (size_t i = 0; i < golden.rows[r].size(); ++i) {
                const std::string &g = golden.rows[r][i], &p = produced.rows[r][i];
                // compare "MEAN ± STD [**]" cells numerically, everything else exactly
                const auto pm_g = g.find("\xC2\xB1"), pm_p = p.find("\xC2\xB1");
                if (pm_g != std::string::npos && pm_p != std::string::npos) {
                    const double gm = csv::parse(g), pm = csv::parse(p);
                    const double gs = csv::parse(g.substr(pm_g + 2)), ps = csv::parse(p.substr(pm_p + 2));
                    c.require(rel_err(gm, pm) < 1e-4 && rel_err(gs, ps) < 1e-4,
                              "numeric drift vs golden at row " + std::to_string(r));
                    c.require((g.find("**") != std::string::npos) == (p.find("**") != std::string::npos),
                              "marker drift vs golden at row " + std::to_string(r));
                } else {
                    c.require(g == p, "cell mismatch vs golden at row " + std::to_string(r));
                }
            }
    }
    CHECK_MESSAGE(c.ok, c.detail);
}

TEST_CASE("criterion 9: desk-scale five-candidate reproduction") {
    Criterion c{9};
    const auto t0 = std::chrono::steady_clock::now();

    const auto root = fresh_dir("softseg_acceptance_desk");
    auto ds = acceptance_dataset(20260808, 10);  // 4 centers x 10 subjects
    REQUIRE(ds.subjects.size() == 40);
    phantom::save_dataset(ds, (root / "data").string());
    const RunConfig cfg = desk_scale_config((root / "data" / "manifest.json").string());
    exp::run_experiment(cfg, (root / "results").string(), false,
                        [](const std::string& msg) { std::printf("  [desk-scale] %s\n", msg.c_str()); });
    exp::write_report((root / "results").string());

    // collect per-run facts
    struct Run {
        bool converged;
        double mean_dice;
        double softness;
        double mean_boundary_mse;
        double mean_midband_mse;
    };
    std::map<std::string, std::map<int, Run>> runs;  // candidate -> iteration -> facts
    for (const auto& e : fs::directory_iterator(root / "results" / "runs")) {
        std::ifstream min(e.path() / "metadata.json");
        nlohmann::json meta;
        min >> meta;
        Run r{};
        r.converged = meta.at("converged").get<bool>();
        const auto metrics = csv::Table::load((e.path() / "metrics.csv").string());
        const int dcol = metrics.column("dice");
        double acc = 0;
        for (const auto& row : metrics.rows) acc += csv::parse(row[dcol]);
        r.mean_dice = acc / metrics.rows.size();
        std::ifstream ein(e.path() / "evaluation.json");
        nlohmann::json ev;
        ein >> ev;
        r.softness = ev.at("softness").get<double>();
        const auto soft = csv::Table::load((e.path() / "soft_metrics.csv").string());
        auto col_mean = [&](const char* name, double fallback) {
            const int c = soft.column(name);
            double a = 0;
            int n = 0;
            for (const auto& row : soft.rows)
                if (c >= 0 && !row[c].empty()) {
                    a += csv::parse(row[c]);
                    ++n;
                }
            return n ? a / n : fallback;
        };
        r.mean_boundary_mse = col_mean("boundary_soft_mse", 1e9);
        r.mean_midband_mse = col_mean("midband_soft_mse", 1e9);
        runs[meta.at("candidate").get<std::string>()][meta.at("iteration").get<int>()] = r;
    }

    // (a) Soft-ReLU-Wing converges on at least 7 of 8 iterations
    int softseg_converged = 0;
    for (const auto& [it, r] : runs["Soft-ReLU-Wing"]) softseg_converged += r.converged;
    c.require(softseg_converged >= 7, "Soft-ReLU-Wing converged on only " + std::to_string(softseg_converged) + "/8");

    // (b) mean test dice within 1 point of (or above) the conventional candidate
    auto converged_mean_dice = [&](const std::string& cand) {
        double acc = 0;
        int n = 0;
        for (const auto& [it, r] : runs[cand])
            if (r.converged) {
                acc += r.mean_dice;
                ++n;
            }
        return n ? acc / n : 0.0;
    };
    const double dice_soft = converged_mean_dice("Soft-ReLU-Wing");
    const double dice_hard = converged_mean_dice("Hard-Sig-Dice");
    c.require(dice_soft >= dice_hard - 1.0,
              "mean dice " + std::to_string(dice_soft) + " vs conventional " + std::to_string(dice_hard));

    // (c) softness: normrelu group strictly above the sigmoid group per iteration
    const std::set<std::string> relu_group = {"Hard-ReLU-Wing", "Soft-ReLU-Dice", "Soft-ReLU-Wing"};
    const std::set<std::string> sigmoid_group = {"Hard-Sig-Dice", "Soft-Sig-Wing"};
    int soft_iters_checked = 0;
    for (int it = 0; it < cfg.n_iterations; ++it) {
        double relu_acc = 0, sig_acc = 0;
        int relu_n = 0, sig_n = 0;
        for (const auto& [cand, by_iter] : runs) {
            const auto found = by_iter.find(it);
            if (found == by_iter.end() || !found->second.converged) continue;
            if (relu_group.count(cand)) {
                relu_acc += found->second.softness;
                ++relu_n;
            } else if (sigmoid_group.count(cand)) {
                sig_acc += found->second.softness;
                ++sig_n;
            }
        }
        if (relu_n == 0 || sig_n == 0) continue;
        ++soft_iters_checked;
        c.require(relu_acc / relu_n > sig_acc / sig_n,
                  "iteration " + std::to_string(it) + ": normrelu softness not above sigmoid softness");
    }
    c.require(soft_iters_checked >= 7, "too few iterations with both groups converged");

    // (d) boundary soft-MSE lower for Soft-ReLU-Wing on at least 6 of 8 iterations
    int lower = 0, paired = 0;
    for (int it = 0; it < cfg.n_iterations; ++it) {
        const auto s = runs["Soft-ReLU-Wing"].find(it);
        const auto h = runs["Hard-Sig-Dice"].find(it);
        if (s == runs["Soft-ReLU-Wing"].end() || h == runs["Hard-Sig-Dice"].end()) continue;
        if (!s->second.converged || !h->second.converged) continue;
        ++paired;
        lower += s->second.mean_boundary_mse < h->second.mean_boundary_mse;
        std::printf("  [desk-scale] iter %d boundary-mse: soft %.4f vs hard %.4f (mid-band %.4f vs %.4f)\n",
                    it, s->second.mean_boundary_mse, h->second.mean_boundary_mse,
                    s->second.mean_midband_mse, h->second.mean_midband_mse);
    }
    c.require(paired >= 6, "too few paired converged iterations");
    c.require(lower >= 6, "boundary soft-MSE lower on only " + std::to_string(lower) + "/" + std::to_string(paired));

    const double elapsed =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0).count();
    c.require(elapsed < 2700.0, "runtime " + std::to_string(elapsed) + "s exceeds 45 minutes");
    c.detail = "dice " + std::to_string(dice_soft) + " vs " + std::to_string(dice_hard) + ", softseg converged " +
               std::to_string(softseg_converged) + "/8, boundary-mse lower " + std::to_string(lower) + "/" +
               std::to_string(paired) + ", " + std::to_string(static_cast<int>(elapsed)) + "s";
    CHECK_MESSAGE(c.ok, c.detail);
}
