#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "softseg/volume.hpp"

namespace softseg::eval {

// v >= tau -> 1, else 0.
Volume binarize(const Volume& pred, double tau);

// Voxel-wise metrics on binary masks sharing one grid, in percent. Missing
// values stay missing (never reported as 0): precision needs a non-empty
// prediction, recall/avd/rvd need a non-empty ground truth.
struct VoxelMetrics {
    double dice = 0;  // 100 when both masks are empty
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> avd;
    std::optional<double> rvd;  // (Vg - Vp) / Vg: over-segmentation is negative
    double mse = 0;
};

VoxelMetrics voxel_metrics(const Volume& pred_bin, const Volume& gt_bin);

enum class Connectivity { Face, FaceEdge, FaceEdgeCorner };

// Connected components; labels 1..K assigned in scanline order (x fastest,
// then y, then z). FaceEdge (18-connectivity) restricted to one slice is
// exactly 2D 8-connectivity.
struct ComponentLabels {
    std::vector<int> labels;
    int count = 0;
};

ComponentLabels connected_components(const Volume& mask_bin, Connectivity conn = Connectivity::FaceEdge);

// Lesion-wise detection: a gt component is detected iff it overlaps at least
// one predicted voxel; a predicted component is false iff it overlaps no gt.
struct LesionMetrics {
    std::optional<double> ltpr;  // missing when gt has no components
    std::optional<double> lfdr;  // missing when prediction has no components
    int gt_components = 0;
    int pred_components = 0;
    int detected = 0;
    int false_detections = 0;
};

LesionMetrics lesion_metrics(const Volume& pred_bin, const Volume& gt_bin,
                             Connectivity conn = Connectivity::FaceEdge);

// Fixed threshold grid 0.05 .. 0.95, step 0.05.
std::vector<double> threshold_grid();

// Mean Dice (percent, binarized gt at 0.5) across subjects for every grid
// threshold; ties resolve to the lowest threshold.
struct ThresholdSweep {
    std::vector<double> thresholds;
    std::vector<double> mean_dice;
    double best_threshold = 0;
    int best_index = 0;
};

ThresholdSweep optimize_threshold(const std::vector<SoftMask>& predictions, const std::vector<SoftMask>& gts);

// Distribution of non-zero predicted values: 100-bin histogram over (0,1],
// Gaussian KDE (Silverman bandwidth) normalized to unit area, and the
// softness score = fraction of non-zero values inside (0.1, 0.9).
struct ValueDistribution {
    std::array<int64_t, 100> histogram{};
    std::vector<double> kde_x;  // 101 points spanning [0,1]
    std::vector<double> kde_y;
    double softness = 0;
    int64_t n_nonzero = 0;
    bool empty = true;
};

ValueDistribution value_distribution(const SoftMask& pred);
ValueDistribution value_distribution(const std::vector<float>& values);

// Per-subject evaluation row (percent everywhere, threshold in [0,1]).
struct MetricsRecord {
    std::string subject_id;
    double threshold = 0;
    double dice = 0;
    std::optional<double> precision, recall, avd, rvd;
    double mse = 0;
    std::optional<double> ltpr, lfdr;
};

MetricsRecord evaluate_subject(const std::string& id, const SoftMask& pred_native, const SoftMask& gt_native,
                               double threshold, bool lesion_metrics_wanted);

}  // namespace softseg::eval
