#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "softseg/volume.hpp"

namespace softseg::phantom {

// One synthetic acquisition center: its grid resolution, tissue intensities
// and noise level. Centers differ so center-wise splits mean something.
struct CenterProfile {
    std::string id;
    std::array<float, 3> spacing_mm{1.f, 1.f, 3.f};
    float intensity_bg = 20.f;
    float intensity_obj = 80.f;
    float noise_std = 2.f;
    float contrast_scale = 1.f;

    void validate() const {
        for (float s : spacing_mm)
            if (!(s > 0.f)) throw ConfigError("center spacing must be positive");
        if (noise_std < 0.f) throw ConfigError("noise_std must be >= 0");
    }
};

enum class PhantomTask { SingleBlob, MultiLesion };

struct PhantomSpec {
    PhantomTask task = PhantomTask::SingleBlob;
    int min_objects = 1, max_objects = 1;
    float min_size_mm = 8.f, max_size_mm = 20.f;  // object diameters
    float extent_mm = 64.f;                       // in-plane field of view
    int num_slices = 3;
    int supersample = 8;  // k: soft GT is the exact kxk subsample fraction
    uint64_t seed = 0;

    void validate() const {
        if (supersample < 4) throw ConfigError("supersample factor must be >= 4");
        if (!(min_size_mm > 0.f) || max_size_mm < min_size_mm) throw ConfigError("bad size range");
        if (min_objects < 1 || max_objects < min_objects) throw ConfigError("bad object count range");
        if (num_slices < 1) throw ConfigError("num_slices must be >= 1");
        if (!(extent_mm > 0.f)) throw ConfigError("extent must be positive");
    }
};

// Rotated ellipse living on a contiguous slice range.
struct Ellipse {
    double cx_mm = 0, cy_mm = 0;
    double semi_a_mm = 1, semi_b_mm = 1;
    double angle_rad = 0;
    int z0 = 0, z1 = 0;  // inclusive slice range

    bool contains(double x_mm, double y_mm) const {
        const double dx = x_mm - cx_mm, dy = y_mm - cy_mm;
        const double c = std::cos(angle_rad), s = std::sin(angle_rad);
        const double u = (c * dx + s * dy) / semi_a_mm;
        const double v = (-s * dx + c * dy) / semi_b_mm;
        return u * u + v * v <= 1.0;
    }
    double area_mm2() const { return 3.14159265358979323846 * semi_a_mm * semi_b_mm; }
};

// Subject plus the shapes it was generated from (tests use the analytic areas).
struct GeneratedSubject {
    Subject subject;
    std::vector<Ellipse> shapes;
};

// Rasterizes random ellipses on a k-times supersampled grid. Soft GT is the
// exact per-voxel fraction of subsample centers inside any shape; the image is
// the two-tissue intensity mixture under the same fractions plus Gaussian
// noise; all deterministic in the seed.
GeneratedSubject gen_subject(const PhantomSpec& spec, const CenterProfile& center, uint64_t seed);

struct Dataset {
    std::vector<Subject> subjects;
    std::vector<std::string> center_ids;
};

Dataset gen_dataset(const PhantomSpec& spec, const std::vector<CenterProfile>& centers, int n_per_center);

// Writes subjects in the volume container format plus manifest.json.
void save_dataset(const Dataset& ds, const std::string& out_dir);
Dataset load_dataset(const std::string& manifest_path);

}  // namespace softseg::phantom
