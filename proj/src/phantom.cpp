#include "softseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "softseg/rng.hpp"
#include "softseg/volio.hpp"

namespace softseg::phantom {

namespace {

// Samples one ellipse that fits inside the field of view with a margin.
Ellipse sample_ellipse(const PhantomSpec& spec, Rng& rng, bool lesion) {
    Ellipse e;
    const double size = rng.uniform(spec.min_size_mm, spec.max_size_mm);
    const double ecc = rng.uniform(0.6, 1.0);  // b/a
    e.semi_a_mm = size / 2.0;
    e.semi_b_mm = e.semi_a_mm * ecc;
    e.angle_rad = rng.uniform(0.0, 3.14159265358979323846);
    const double margin = e.semi_a_mm + 0.05 * spec.extent_mm;
    e.cx_mm = rng.uniform(margin, spec.extent_mm - margin);
    e.cy_mm = rng.uniform(margin, spec.extent_mm - margin);
    if (lesion && spec.num_slices > 1) {
        e.z0 = static_cast<int>(rng.below(static_cast<uint64_t>(spec.num_slices)));
        e.z1 = std::min(spec.num_slices - 1, e.z0 + static_cast<int>(rng.below(2)));
    } else {
        e.z0 = 0;
        e.z1 = spec.num_slices - 1;
    }
    return e;
}

}  // namespace

GeneratedSubject gen_subject(const PhantomSpec& spec, const CenterProfile& center, uint64_t seed) {
    spec.validate();
    center.validate();

    const int nx = std::max(2, static_cast<int>(std::lround(spec.extent_mm / center.spacing_mm[0])));
    const int ny = std::max(2, static_cast<int>(std::lround(spec.extent_mm / center.spacing_mm[1])));
    const int nz = spec.num_slices;
    const int k = spec.supersample;

    Rng shape_rng(derive_seed(seed, {kStreamData, 1}));
    Rng noise_rng(derive_seed(seed, {kStreamData, 2}));

    GeneratedSubject out;
    const bool lesion_task = spec.task == PhantomTask::MultiLesion;
    const int n_objects =
        spec.min_objects +
        static_cast<int>(shape_rng.below(static_cast<uint64_t>(spec.max_objects - spec.min_objects + 1)));

    SoftMask gt({nx, ny, nz}, center.spacing_mm);
    for (int obj = 0; obj < n_objects; ++obj) {
        // regenerate shapes that would not cover a single subsample point
        bool placed = false;
        for (int attempt = 0; attempt < 32 && !placed; ++attempt) {
            const Ellipse e = sample_ellipse(spec, shape_rng, lesion_task);
            size_t covered = 0;
            const double sx = center.spacing_mm[0], sy = center.spacing_mm[1];
            const int x_lo = std::max(0, static_cast<int>((e.cx_mm - e.semi_a_mm) / sx) - 1);
            const int x_hi = std::min(nx - 1, static_cast<int>((e.cx_mm + e.semi_a_mm) / sx) + 1);
            const int y_lo = std::max(0, static_cast<int>((e.cy_mm - e.semi_a_mm) / sy) - 1);
            const int y_hi = std::min(ny - 1, static_cast<int>((e.cy_mm + e.semi_a_mm) / sy) + 1);
            for (int z = e.z0; z <= e.z1; ++z) {
                for (int y = y_lo; y <= y_hi; ++y) {
                    for (int x = x_lo; x <= x_hi; ++x) {
                        int hits = 0;
                        // voxel j covers [(j-0.5) s, (j+0.5) s]; subsample centers tile it
                        for (int ay = 0; ay < k; ++ay) {
                            const double py = (y - 0.5 + (ay + 0.5) / k) * sy;
                            for (int ax = 0; ax < k; ++ax) {
                                const double px = (x - 0.5 + (ax + 0.5) / k) * sx;
                                if (e.contains(px, py)) ++hits;
                            }
                        }
                        if (hits == 0) continue;
                        covered += hits;
                        const float frac = static_cast<float>(hits) / static_cast<float>(k * k);
                        float& g = gt.at(x, y, z);
                        g = std::max(g, frac);  // union of shapes, conservative on overlap
                    }
                }
            }
            placed = covered > 0;
            if (placed) out.shapes.push_back(e);
        }
        if (!placed) throw NumericError("phantom: could not place an object after bounded retries");
    }

    Volume img({nx, ny, nz}, center.spacing_mm);
    img.contrast_id = "phantom";
    const float delta = (center.intensity_obj - center.intensity_bg) * center.contrast_scale;
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = center.intensity_bg + delta * gt.data[i];
        if (center.noise_std > 0.f) v += center.noise_std * static_cast<float>(noise_rng.normal());
        img.data[i] = v;
    }

    out.subject.images = {std::move(img)};
    out.subject.gt = std::move(gt);
    out.subject.center_id = center.id;
    return out;
}

Dataset gen_dataset(const PhantomSpec& spec, const std::vector<CenterProfile>& centers, int n_per_center) {
    if (n_per_center < 1) throw ConfigError("n_per_center must be >= 1");
    if (centers.empty()) throw ConfigError("no centers given");
    Dataset ds;
    for (size_t ci = 0; ci < centers.size(); ++ci) {
        ds.center_ids.push_back(centers[ci].id);
        for (int si = 0; si < n_per_center; ++si) {
            const uint64_t sub_seed = derive_seed(spec.seed, {kStreamData, ci, static_cast<uint64_t>(si)});
            GeneratedSubject g = gen_subject(spec, centers[ci], sub_seed);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s_s%03d", centers[ci].id.c_str(), si);
            g.subject.id = buf;
            ds.subjects.push_back(std::move(g.subject));
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "subjects");
    nlohmann::json manifest;
    manifest["centers"] = ds.center_ids;
    auto& subjects = manifest["subjects"] = nlohmann::json::array();
    for (const auto& s : ds.subjects) {
        nlohmann::json entry;
        entry["id"] = s.id;
        entry["center"] = s.center_id;
        auto& images = entry["images"] = nlohmann::json::array();
        for (size_t i = 0; i < s.images.size(); ++i) {
            const std::string rel = "subjects/" + s.id + "_img" + std::to_string(i) + ".vol";
            save_volume(s.images[i], (fs::path(out_dir) / rel).string());
            images.push_back(rel);
        }
        const std::string rel_gt = "subjects/" + s.id + "_gt.vol";
        save_volume(s.gt, (fs::path(out_dir) / rel_gt).string());
        entry["gt"] = rel_gt;
        subjects.push_back(entry);
    }
    std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw FormatError("missing manifest " + manifest_path);
    nlohmann::json manifest;
    in >> manifest;
    const fs::path root = fs::path(manifest_path).parent_path();

    Dataset ds;
    for (const auto& c : manifest.at("centers")) ds.center_ids.push_back(c.get<std::string>());
    for (const auto& entry : manifest.at("subjects")) {
        Subject s;
        s.id = entry.at("id").get<std::string>();
        s.center_id = entry.at("center").get<std::string>();
        for (const auto& rel : entry.at("images"))
            s.images.push_back(load_volume((root / rel.get<std::string>()).string()));
        s.gt = SoftMask(load_volume((root / entry.at("gt").get<std::string>()).string()));
        s.validate();
        ds.subjects.push_back(std::move(s));
    }
    return ds;
}

}  // namespace softseg::phantom
