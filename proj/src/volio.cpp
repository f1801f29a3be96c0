#include "softseg/volio.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

// the container format is little-endian by contract
static_assert(std::endian::native == std::endian::little);

namespace softseg {

namespace {

std::string hdr_path_for(const std::string& vol_path) {
    std::filesystem::path p(vol_path);
    p.replace_extension(".volhdr");
    return p.string();
}

std::string fmt_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

}  // namespace

void save_volume(const Volume& v, const std::string& vol_path) {
    v.validate();
    std::filesystem::path p(vol_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    {
        std::ofstream hdr(hdr_path_for(vol_path), std::ios::trunc);
        if (!hdr) throw FormatError("cannot write header for " + vol_path);
        hdr << "dims=" << v.dims[0] << " " << v.dims[1] << " " << v.dims[2] << "\n";
        hdr << "spacing_mm=" << fmt_float(v.spacing_mm[0]) << " " << fmt_float(v.spacing_mm[1]) << " "
            << fmt_float(v.spacing_mm[2]) << "\n";
        hdr << "orientation=" << v.orientation << "\n";
        hdr << "contrast=" << v.contrast_id << "\n";
    }
    std::ofstream out(vol_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + vol_path);
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(v.data.data()),
              static_cast<std::streamsize>(v.data.size() * sizeof(float)));
}

Volume load_volume(const std::string& vol_path) {
    std::ifstream hdr(hdr_path_for(vol_path));
    if (!hdr) throw FormatError("missing header " + hdr_path_for(vol_path));
    Volume v;
    bool have_dims = false, have_spacing = false;
    std::string line;
    while (std::getline(hdr, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("header line without '=': " + line);
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        std::istringstream is(val);
        if (key == "dims") {
            if (!(is >> v.dims[0] >> v.dims[1] >> v.dims[2])) throw FormatError("dims: expected three integers");
            have_dims = true;
        } else if (key == "spacing_mm") {
            if (!(is >> v.spacing_mm[0] >> v.spacing_mm[1] >> v.spacing_mm[2]))
                throw FormatError("spacing_mm: expected three floats");
            have_spacing = true;
        } else if (key == "orientation") {
            v.orientation = val;
        } else if (key == "contrast") {
            v.contrast_id = val;
        } else {
            throw FormatError("unknown header key: " + key);
        }
    }
    if (!have_dims) throw FormatError("dims: missing from header");
    if (!have_spacing) throw FormatError("spacing_mm: missing from header");
    v.validate_header();

    std::ifstream in(vol_path, std::ios::binary);
    if (!in) throw FormatError("missing payload " + vol_path);
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(in.tellg());
    in.seekg(0);
    if (bytes != v.numel() * sizeof(float))
        throw FormatError("data: payload is " + std::to_string(bytes / sizeof(float)) + " floats, dims need " +
                          std::to_string(v.numel()));
    v.data.resize(v.numel());
    in.read(reinterpret_cast<char*>(v.data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw FormatError("data: short read from " + vol_path);
    return v;
}

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// In-place direct quadratic B-spline transform (Unser-style recursive filter),
// mirror boundaries. After this, sum_j c[j] b2(t - j) interpolates the input.
void bspline2_prefilter(std::vector<double>& c) {
    const int n = static_cast<int>(c.size());
    if (n < 2) return;
    const double z = std::sqrt(8.0) - 3.0;
    for (auto& v : c) v *= 8.0;  // gain (1 - z)(1 - 1/z)
    const int horizon = 30;  // |z|^30 ~ 1e-23, below double precision
    double sum = 0.0, zj = 1.0;
    for (int j = 0; j < horizon; ++j) {
        sum += zj * c[reflect(j, n)];
        zj *= z;
    }
    c[0] = sum;
    for (int k = 1; k < n; ++k) c[k] += z * c[k - 1];
    c[n - 1] = (z / (z * z - 1.0)) * (z * c[n - 2] + c[n - 1]);
    for (int k = n - 2; k >= 0; --k) c[k] = z * (c[k + 1] - c[k]);
}

double bspline2_eval(const std::vector<double>& c, double t) {
    const int n = static_cast<int>(c.size());
    const int i = static_cast<int>(std::floor(t + 0.5));
    const double f = t - i;
    const double wl = 0.5 * (0.5 - f) * (0.5 - f);
    const double wc = 0.75 - f * f;
    const double wr = 0.5 * (0.5 + f) * (0.5 + f);
    return wl * c[reflect(i - 1, n)] + wc * c[reflect(i, n)] + wr * c[reflect(i + 1, n)];
}

double linear_eval(const std::vector<double>& line, double t) {
    const int n = static_cast<int>(line.size());
    const int i0 = std::min(std::max(static_cast<int>(std::floor(t)), 0), n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = t - i0;
    if (f <= 0.0) return line[i0];
    return (1.0 - f) * line[i0] + f * line[i1];
}

// Box average over [t - halfw, t + halfw], samples weighted by the overlap of
// their unit cells with the window, edge cells clamped. Used when downsampling
// masks so partial-volume fractions survive instead of aliasing.
double area_eval(const std::vector<double>& line, double t, double halfw) {
    const int n = static_cast<int>(line.size());
    const double lo = t - halfw, hi = t + halfw;
    double acc = 0.0, wsum = 0.0;
    for (int i = static_cast<int>(std::floor(lo)); i <= static_cast<int>(std::ceil(hi)); ++i) {
        const double ov = std::min(hi, i + 0.5) - std::max(lo, i - 0.5);
        if (ov <= 0.0) continue;
        const int ic = std::min(std::max(i, 0), n - 1);
        acc += ov * line[ic];
        wsum += ov;
    }
    return acc / wsum;
}

// Resamples one axis; out coordinate j maps to in coordinate j * step,
// clamped to the sample range (nearest extension past the last sample).
Volume resample_axis(const Volume& in, int axis, int out_n, double step, bool spline) {
    std::array<int, 3> od = in.dims;
    od[axis] = out_n;
    Volume out;
    out.dims = od;
    out.spacing_mm = in.spacing_mm;
    out.orientation = in.orientation;
    out.contrast_id = in.contrast_id;
    out.data.assign(out.numel(), 0.f);

    const int n = in.dims[axis];
    std::array<size_t, 3> in_stride = {1, static_cast<size_t>(in.dims[0]),
                                       static_cast<size_t>(in.dims[0]) * in.dims[1]};
    std::array<size_t, 3> out_stride = {1, static_cast<size_t>(od[0]), static_cast<size_t>(od[0]) * od[1]};
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;

    std::vector<double> line(n);
    for (int i2 = 0; i2 < in.dims[a2]; ++i2) {
        for (int i1 = 0; i1 < in.dims[a1]; ++i1) {
            const size_t in_base = i1 * in_stride[a1] + i2 * in_stride[a2];
            const size_t out_base = i1 * out_stride[a1] + i2 * out_stride[a2];
            for (int k = 0; k < n; ++k) line[k] = in.data[in_base + k * in_stride[axis]];
            if (spline && n > 1) bspline2_prefilter(line);
            const bool area = !spline && step > 1.0 + 1e-9 && n > 1;
            for (int j = 0; j < out_n; ++j) {
                double t = j * step;
                if (t < 0.0) t = 0.0;
                if (t > n - 1) t = n - 1;
                double v;
                if (spline && n > 1)
                    v = bspline2_eval(line, t);
                else if (area)
                    v = area_eval(line, t, step / 2.0);
                else
                    v = linear_eval(line, t);
                out.data[out_base + j * out_stride[axis]] = static_cast<float>(v);
            }
        }
    }
    return out;
}

Volume resample_impl(const Volume& v, std::array<int, 3> out_dims, std::array<float, 3> target, bool spline) {
    v.validate();
    Volume cur = v;
    for (int axis = 0; axis < 3; ++axis) {
        const double step = static_cast<double>(target[axis]) / static_cast<double>(cur.spacing_mm[axis]);
        if (out_dims[axis] == cur.dims[axis] && std::abs(step - 1.0) < 1e-12) {
            cur.spacing_mm[axis] = target[axis];
            continue;
        }
        cur = resample_axis(cur, axis, out_dims[axis], step, spline);
        cur.spacing_mm[axis] = target[axis];
    }
    return cur;
}

}  // namespace

Volume resample(const Volume& v, std::array<float, 3> target_spacing_mm, ResampleKind kind) {
    for (float s : target_spacing_mm)
        if (!(s > 0.f)) throw ConfigError("target spacing must be positive");
    std::array<int, 3> out_dims;
    for (int a = 0; a < 3; ++a) {
        out_dims[a] = std::max(
            1, static_cast<int>(std::lround(static_cast<double>(v.dims[a]) * v.spacing_mm[a] / target_spacing_mm[a])));
    }
    return resample_impl(v, out_dims, target_spacing_mm, kind == ResampleKind::Image);
}

SoftMask resample(const SoftMask& m, std::array<float, 3> target_spacing_mm, ResampleKind kind) {
    Volume r = resample(static_cast<const Volume&>(m), target_spacing_mm, kind);
    SoftMask out;
    static_cast<Volume&>(out) = std::move(r);
    out.clamp01();
    return out;
}

Volume resample_to_grid(const Volume& v, std::array<int, 3> target_dims, std::array<float, 3> target_spacing_mm) {
    return resample_impl(v, target_dims, target_spacing_mm, false);
}

Volume center_crop(const Volume& v, std::array<int, 3> size, CropInfo* info) {
    for (int s : size)
        if (s <= 0) throw ConfigError("crop size must be positive");
    std::array<int, 3> off;
    for (int a = 0; a < 3; ++a) off[a] = static_cast<int>(std::floor((v.dims[a] - size[a]) / 2.0));
    Volume out;
    out.dims = size;
    out.spacing_mm = v.spacing_mm;
    out.orientation = v.orientation;
    out.contrast_id = v.contrast_id;
    out.data.assign(out.numel(), 0.f);
    for (int z = 0; z < size[2]; ++z) {
        const int sz = z + off[2];
        if (sz < 0 || sz >= v.dims[2]) continue;
        for (int y = 0; y < size[1]; ++y) {
            const int sy = y + off[1];
            if (sy < 0 || sy >= v.dims[1]) continue;
            const int x0 = std::max(0, -off[0]);
            const int x1 = std::min(size[0], v.dims[0] - off[0]);
            for (int x = x0; x < x1; ++x) out.at(x, y, z) = v.at(x + off[0], sy, sz);
        }
    }
    if (info) {
        info->pre_crop_dims = v.dims;
        info->offset = off;
    }
    return out;
}

Volume uncrop(const Volume& v, const CropInfo& info) {
    Volume out;
    out.dims = info.pre_crop_dims;
    out.spacing_mm = v.spacing_mm;
    out.orientation = v.orientation;
    out.contrast_id = v.contrast_id;
    out.data.assign(out.numel(), 0.f);
    for (int z = 0; z < v.dims[2]; ++z) {
        const int oz = z + info.offset[2];
        if (oz < 0 || oz >= out.dims[2]) continue;
        for (int y = 0; y < v.dims[1]; ++y) {
            const int oy = y + info.offset[1];
            if (oy < 0 || oy >= out.dims[1]) continue;
            for (int x = 0; x < v.dims[0]; ++x) {
                const int ox = x + info.offset[0];
                if (ox < 0 || ox >= out.dims[0]) continue;
                out.at(ox, oy, oz) = v.at(x, y, z);
            }
        }
    }
    return out;
}

Volume zscore_normalize(const Volume& v) {
    v.validate();
    double sum = 0.0;
    for (float x : v.data) sum += x;
    const double mean = sum / static_cast<double>(v.data.size());
    double ss = 0.0;
    for (float x : v.data) {
        const double d = x - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(v.data.size()));
    Volume out = v;
    if (sd < 1e-12) {
        std::fill(out.data.begin(), out.data.end(), 0.f);
        return out;
    }
    for (auto& x : out.data) x = static_cast<float>((x - mean) / sd);
    return out;
}

std::vector<Slice2D> slices(const Volume& v) {
    v.validate();
    std::vector<Slice2D> out(v.dims[2]);
    const size_t plane = static_cast<size_t>(v.dims[0]) * v.dims[1];
    for (int z = 0; z < v.dims[2]; ++z) {
        out[z].width = v.dims[0];
        out[z].height = v.dims[1];
        out[z].data.assign(v.data.begin() + z * plane, v.data.begin() + (z + 1) * plane);
    }
    return out;
}

Volume reassemble(const std::vector<Slice2D>& s, std::array<float, 3> spacing_mm) {
    if (s.empty()) throw ShapeError("reassemble: no slices");
    for (const auto& sl : s)
        if (sl.width != s[0].width || sl.height != s[0].height)
            throw ShapeError("reassemble: slice dims differ");
    Volume v({s[0].width, s[0].height, static_cast<int>(s.size())}, spacing_mm);
    const size_t plane = static_cast<size_t>(v.dims[0]) * v.dims[1];
    for (size_t z = 0; z < s.size(); ++z)
        std::copy(s[z].data.begin(), s[z].data.end(), v.data.begin() + z * plane);
    return v;
}

SoftMask to_native(const SoftMask& prediction, const PreprocRecord& rec) {
    if (!rec.valid) throw StateError("to_native: preprocessing provenance missing");
    Volume emb = uncrop(prediction, rec.crop);
    emb.spacing_mm = rec.processed_spacing;
    Volume nat = resample_to_grid(emb, rec.native_dims, rec.native_spacing);
    SoftMask out;
    static_cast<Volume&>(out) = std::move(nat);
    out.clamp01();
    return out;
}

ProcessedSubject preprocess_subject(const Subject& s, std::array<float, 3> target_spacing,
                                    std::array<int, 2> crop_xy) {
    s.validate();
    ProcessedSubject out;
    out.id = s.id;
    out.center_id = s.center_id;

    SoftMask gt_r = resample(s.gt, target_spacing, ResampleKind::GroundTruth);
    CropInfo crop;
    const std::array<int, 3> crop_size = {crop_xy[0], crop_xy[1], gt_r.dims[2]};
    Volume gt_c = center_crop(gt_r, crop_size, &crop);
    out.gt = SoftMask(gt_c, /*clamp=*/true);

    for (const auto& im : s.images) {
        Volume r = resample(im, target_spacing, ResampleKind::Image);
        Volume c = center_crop(r, crop_size, nullptr);
        out.images.push_back(zscore_normalize(c));
    }

    out.record.native_dims = s.gt.dims;
    out.record.native_spacing = s.gt.spacing_mm;
    out.record.processed_spacing = target_spacing;
    out.record.crop = crop;
    out.record.valid = true;
    return out;
}

}  // namespace softseg
