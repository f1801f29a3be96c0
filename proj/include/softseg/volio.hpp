#pragma once

#include <array>
#include <string>
#include <vector>

#include "softseg/volume.hpp"

namespace softseg {

// Volume container format: <name>.vol holds raw little-endian float32,
// x-fastest; <name>.volhdr is UTF-8 key=value lines (dims, spacing_mm,
// orientation, contrast).
void save_volume(const Volume& v, const std::string& vol_path);
Volume load_volume(const std::string& vol_path);

enum class ResampleKind { Image, GroundTruth };

// Resamples onto a new spacing. Image kind: separable quadratic B-spline with
// interpolation prefilter; GroundTruth kind: trilinear. Output dims are
// round(dim * spacing / target), grids aligned at voxel index 0.
Volume resample(const Volume& v, std::array<float, 3> target_spacing_mm, ResampleKind kind);
SoftMask resample(const SoftMask& m, std::array<float, 3> target_spacing_mm, ResampleKind kind);

// Trilinear resample onto an explicit grid (used to map predictions back to
// the native grid, where rounded dims must be reproduced exactly).
Volume resample_to_grid(const Volume& v, std::array<int, 3> target_dims, std::array<float, 3> target_spacing_mm);

// Center crop in-plane (x,y); volumes smaller than the crop are zero-padded
// symmetrically first. Offsets are signed: negative means padding was added.
struct CropInfo {
    std::array<int, 3> pre_crop_dims{0, 0, 0};
    std::array<int, 3> offset{0, 0, 0};
};

Volume center_crop(const Volume& v, std::array<int, 3> size, CropInfo* info = nullptr);
// Re-embeds a cropped volume into its pre-crop dims (zero fill outside).
Volume uncrop(const Volume& v, const CropInfo& info);

// Mean 0 / std 1 per volume; constant volumes map to zeros.
Volume zscore_normalize(const Volume& v);

// Axial (third axis) slice decomposition. Slices keep x-fastest layout.
struct Slice2D {
    int width = 0, height = 0;
    std::vector<float> data;

    float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

std::vector<Slice2D> slices(const Volume& v);
Volume reassemble(const std::vector<Slice2D>& s, std::array<float, 3> spacing_mm);

// Everything needed to map a processed-grid prediction back to native.
struct PreprocRecord {
    std::array<int, 3> native_dims{0, 0, 0};
    std::array<float, 3> native_spacing{0.f, 0.f, 0.f};
    std::array<float, 3> processed_spacing{0.f, 0.f, 0.f};
    CropInfo crop;
    bool valid = false;
};

// Inverse crop, then inverse resample (trilinear), then clamp to [0,1]. The
// output grid equals the subject's native grid exactly.
SoftMask to_native(const SoftMask& prediction, const PreprocRecord& rec);

// The standard preprocessing chain for one subject: resample images (spline)
// and gt (linear), center-crop in-plane, z-score normalize each contrast.
struct ProcessedSubject {
    std::string id;
    std::string center_id;
    std::vector<Volume> images;
    SoftMask gt;
    PreprocRecord record;
};

ProcessedSubject preprocess_subject(const Subject& s, std::array<float, 3> target_spacing,
                                    std::array<int, 2> crop_xy);

}  // namespace softseg
