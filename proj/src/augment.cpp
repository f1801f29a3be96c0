#include "softseg/augment.hpp"

#include <cmath>

namespace softseg::aug {

AffineParams sample_affine(Rng& rng, const AugmentRanges& ranges) {
    AffineParams p;
    p.rng_stamp = rng.next_u64();
    p.rotation_deg = rng.uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg);
    p.translate_frac_x = rng.uniform(-ranges.max_translate_frac, ranges.max_translate_frac);
    p.translate_frac_y = rng.uniform(-ranges.max_translate_frac, ranges.max_translate_frac);
    p.scale_frac = rng.uniform(-ranges.max_scale_frac, ranges.max_scale_frac);
    return p;
}

Slice2D apply_affine(const Slice2D& sample, const AffineParams& p, bool is_mask) {
    if (p.is_identity()) return sample;
    const int w = sample.width, h = sample.height;
    Slice2D out;
    out.width = w;
    out.height = h;
    out.data.assign(sample.data.size(), 0.f);

    const double theta = p.rotation_deg * 3.14159265358979323846 / 180.0;
    const double scale = 1.0 + p.scale_frac;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double tx = p.translate_frac_x * w, ty = p.translate_frac_y * h;
    // inverse map: undo translation, then inverse rotate/scale about the center
    const double c = std::cos(theta), s = std::sin(theta);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx - tx, dy = y - cy - ty;
            const double sx = (c * dx + s * dy) / scale + cx;
            const double sy = (-s * dx + c * dy) / scale + cy;
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            double acc = 0.0;
            for (int by = 0; by < 2; ++by) {
                const int yy = y0 + by;
                if (yy < 0 || yy >= h) continue;
                const double wy = by ? fy : 1.0 - fy;
                for (int bx = 0; bx < 2; ++bx) {
                    const int xx = x0 + bx;
                    if (xx < 0 || xx >= w) continue;
                    const double wx = bx ? fx : 1.0 - fx;
                    acc += wy * wx * sample.at(xx, yy);
                }
            }
            float v = static_cast<float>(acc);
            if (is_mask) v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
            out.at(x, y) = v;
        }
    }
    return out;
}

Slice2D finalize_mask(Slice2D mask, bool hard) {
    if (!hard) return mask;
    for (auto& v : mask.data) v = v >= 0.5f ? 1.f : 0.f;
    return mask;
}

}  // namespace softseg::aug
