#pragma once

#include <cstdint>

#include "softseg/rng.hpp"
#include "softseg/volio.hpp"

namespace softseg::aug {

struct AugmentRanges {
    double max_rotation_deg = 20.0;
    double max_translate_frac = 0.03;
    double max_scale_frac = 0.10;
};

// One sampled transform. Image and mask of a sample always share one of these.
struct AffineParams {
    double rotation_deg = 0.0;
    double translate_frac_x = 0.0;
    double translate_frac_y = 0.0;
    double scale_frac = 0.0;
    uint64_t rng_stamp = 0;  // stream position marker for provenance

    bool is_identity() const {
        return rotation_deg == 0.0 && translate_frac_x == 0.0 && translate_frac_y == 0.0 && scale_frac == 0.0;
    }
};

// Uniform draws within the configured ranges.
AffineParams sample_affine(Rng& rng, const AugmentRanges& ranges);

// Applies the affine (rotation and scale about the slice center, translation
// as a fraction of the slice extent) with bilinear interpolation, zero fill
// outside. Masks are clamped to [0,1] afterwards.
Slice2D apply_affine(const Slice2D& sample, const AffineParams& p, bool is_mask);

// hard = true: threshold at 0.5, ties map to 1. hard = false: untouched.
Slice2D finalize_mask(Slice2D mask, bool hard);

}  // namespace softseg::aug
