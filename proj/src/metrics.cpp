#include "softseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace softseg::eval {

Volume binarize(const Volume& pred, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("binarization threshold must lie in (0,1)");
    Volume out = pred;
    for (auto& v : out.data) v = v >= tau ? 1.f : 0.f;
    return out;
}

namespace {

struct Counts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts count_voxels(const Volume& pred, const Volume& gt) {
    if (!pred.same_grid(gt)) throw ShapeError("metric inputs must share one grid");
    Counts c;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0.f, g = gt.data[i] != 0.f;
        if (p && g)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

}  // namespace

VoxelMetrics voxel_metrics(const Volume& pred_bin, const Volume& gt_bin) {
    const Counts c = count_voxels(pred_bin, gt_bin);
    VoxelMetrics m;
    const int64_t denom = 2 * c.tp + c.fp + c.fn;
    m.dice = denom == 0 ? 100.0 : 200.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
    if (c.tp + c.fp > 0) m.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    // volumes share the voxel size, so the counts carry the ratio
    const int64_t vg = c.tp + c.fn, vp = c.tp + c.fp;
    if (vg > 0) {
        m.avd = 100.0 * std::abs(static_cast<double>(vg - vp)) / static_cast<double>(vg);
        m.rvd = 100.0 * static_cast<double>(vg - vp) / static_cast<double>(vg);
    }
    m.mse = 100.0 * static_cast<double>(c.fp + c.fn) / static_cast<double>(pred_bin.data.size());
    return m;
}

ComponentLabels connected_components(const Volume& mask_bin, Connectivity conn) {
    const int nx = mask_bin.dims[0], ny = mask_bin.dims[1], nz = mask_bin.dims[2];
    std::vector<std::array<int, 3>> offsets;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (manhattan == 0) continue;
                if (conn == Connectivity::Face && manhattan > 1) continue;
                if (conn == Connectivity::FaceEdge && manhattan > 2) continue;
                offsets.push_back({dx, dy, dz});
            }

    ComponentLabels out;
    out.labels.assign(mask_bin.data.size(), 0);
    std::deque<size_t> queue;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const size_t idx = mask_bin.index(x, y, z);
                if (mask_bin.data[idx] == 0.f || out.labels[idx] != 0) continue;
                const int label = ++out.count;
                out.labels[idx] = label;
                queue.push_back(idx);
                while (!queue.empty()) {
                    const size_t cur = queue.front();
                    queue.pop_front();
                    const int cz = static_cast<int>(cur / (static_cast<size_t>(nx) * ny));
                    const int cy = static_cast<int>((cur / nx) % ny);
                    const int cx = static_cast<int>(cur % nx);
                    for (const auto& o : offsets) {
                        const int qx = cx + o[0], qy = cy + o[1], qz = cz + o[2];
                        if (qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz) continue;
                        const size_t qi = mask_bin.index(qx, qy, qz);
                        if (mask_bin.data[qi] == 0.f || out.labels[qi] != 0) continue;
                        out.labels[qi] = label;
                        queue.push_back(qi);
                    }
                }
            }
    return out;
}

LesionMetrics lesion_metrics(const Volume& pred_bin, const Volume& gt_bin, Connectivity conn) {
    if (!pred_bin.same_grid(gt_bin)) throw ShapeError("lesion metric inputs must share one grid");
    const ComponentLabels gl = connected_components(gt_bin, conn);
    const ComponentLabels pl = connected_components(pred_bin, conn);

    LesionMetrics m;
    m.gt_components = gl.count;
    m.pred_components = pl.count;

    std::vector<char> gt_hit(gl.count + 1, 0), pred_hit(pl.count + 1, 0);
    for (size_t i = 0; i < gl.labels.size(); ++i) {
        if (gl.labels[i] && pred_bin.data[i] != 0.f) gt_hit[gl.labels[i]] = 1;
        if (pl.labels[i] && gt_bin.data[i] != 0.f) pred_hit[pl.labels[i]] = 1;
    }
    for (int l = 1; l <= gl.count; ++l) m.detected += gt_hit[l];
    for (int l = 1; l <= pl.count; ++l) m.false_detections += 1 - pred_hit[l];

    if (gl.count > 0) m.ltpr = 100.0 * m.detected / gl.count;
    if (pl.count > 0) m.lfdr = 100.0 * m.false_detections / pl.count;
    return m;
}

std::vector<double> threshold_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(i * 5 / 100.0);
    return grid;
}

namespace {

double dice_percent_at(const SoftMask& pred, const Volume& gt_bin, double tau) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] >= tau, g = gt_bin.data[i] != 0.f;
        if (p && g)
            ++tp;
        else if (p)
            ++fp;
        else if (g)
            ++fn;
    }
    const int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 100.0 : 200.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

ThresholdSweep optimize_threshold(const std::vector<SoftMask>& predictions, const std::vector<SoftMask>& gts) {
    if (predictions.empty() || predictions.size() != gts.size())
        throw ConfigError("threshold sweep needs matched prediction/gt lists");
    ThresholdSweep sweep;
    sweep.thresholds = threshold_grid();
    sweep.mean_dice.assign(sweep.thresholds.size(), 0.0);

    std::vector<Volume> gt_bins;
    gt_bins.reserve(gts.size());
    for (const auto& g : gts) gt_bins.push_back(binarize(g, 0.5));

    for (size_t ti = 0; ti < sweep.thresholds.size(); ++ti) {
        double total = 0;
        for (size_t si = 0; si < predictions.size(); ++si)
            total += dice_percent_at(predictions[si], gt_bins[si], sweep.thresholds[ti]);
        sweep.mean_dice[ti] = total / static_cast<double>(predictions.size());
    }
    sweep.best_index = 0;
    for (size_t ti = 1; ti < sweep.thresholds.size(); ++ti)
        if (sweep.mean_dice[ti] > sweep.mean_dice[sweep.best_index]) sweep.best_index = static_cast<int>(ti);
    sweep.best_threshold = sweep.thresholds[sweep.best_index];
    return sweep;
}

ValueDistribution value_distribution(const std::vector<float>& values) {
    ValueDistribution d;
    std::vector<double> nz;
    for (float v : values) {
        if (v <= 0.f) continue;
        nz.push_back(v);
        int bin = static_cast<int>(std::ceil(static_cast<double>(v) * 100.0)) - 1;  // (0,1] -> 0..99
        bin = std::clamp(bin, 0, 99);
        ++d.histogram[bin];
        if (v > 0.1f && v < 0.9f) d.softness += 1.0;
    }
    d.n_nonzero = static_cast<int64_t>(nz.size());
    if (d.n_nonzero == 0) {
        d.softness = 0;
        return d;  // empty distribution stays flagged
    }
    d.empty = false;
    d.softness /= static_cast<double>(d.n_nonzero);

    // Silverman's rule of thumb bandwidth on the non-zero sample
    double mean = 0;
    for (double v : nz) mean += v;
    mean /= static_cast<double>(nz.size());
    double var = 0;
    for (double v : nz) var += (v - mean) * (v - mean);
    var /= static_cast<double>(nz.size());
    double bw = 1.06 * std::sqrt(var) * std::pow(static_cast<double>(nz.size()), -0.2);
    if (bw < 1e-3) bw = 1e-3;

    const int grid_n = 101;
    d.kde_x.resize(grid_n);
    d.kde_y.assign(grid_n, 0.0);
    const double inv = 1.0 / (bw * std::sqrt(2.0 * 3.14159265358979323846) * static_cast<double>(nz.size()));
    for (int i = 0; i < grid_n; ++i) {
        const double x = static_cast<double>(i) / (grid_n - 1);
        d.kde_x[i] = x;
        double acc = 0;
        for (double v : nz) {
            const double u = (x - v) / bw;
            acc += std::exp(-0.5 * u * u);
        }
        d.kde_y[i] = acc * inv;
    }
    // normalize the curve so its trapezoid area over [0,1] is exactly 1
    double area = 0;
    for (int i = 0; i + 1 < grid_n; ++i) area += 0.5 * (d.kde_y[i] + d.kde_y[i + 1]) / (grid_n - 1);
    if (area > 0)
        for (auto& y : d.kde_y) y /= area;
    return d;
}

ValueDistribution value_distribution(const SoftMask& pred) { return value_distribution(pred.data); }

MetricsRecord evaluate_subject(const std::string& id, const SoftMask& pred_native, const SoftMask& gt_native,
                               double threshold, bool lesion_metrics_wanted) {
    if (!pred_native.same_grid(gt_native)) throw ShapeError("evaluation requires native-grid alignment");
    MetricsRecord rec;
    rec.subject_id = id;
    rec.threshold = threshold;
    const Volume pb = binarize(pred_native, threshold);
    const Volume gb = binarize(gt_native, 0.5);
    const VoxelMetrics vm = voxel_metrics(pb, gb);
    rec.dice = vm.dice;
    rec.precision = vm.precision;
    rec.recall = vm.recall;
    rec.avd = vm.avd;
    rec.rvd = vm.rvd;
    rec.mse = vm.mse;
    if (lesion_metrics_wanted) {
        const LesionMetrics lm = lesion_metrics(pb, gb);
        rec.ltpr = lm.ltpr;
        rec.lfdr = lm.lfdr;
    }
    return rec;
}

}  // namespace softseg::eval
