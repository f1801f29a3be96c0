#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "softseg/errors.hpp"

namespace softseg {

// 3D scalar grid with physical spacing, x-fastest storage, canonical RPI
// orientation tag. Images, masks and predictions all use this.
struct Volume {
    std::array<int, 3> dims{0, 0, 0};            // nx, ny, nz
    std::array<float, 3> spacing_mm{1.f, 1.f, 1.f};
    std::string orientation = "RPI";
    std::string contrast_id;
    std::vector<float> data;

    Volume() = default;
    Volume(std::array<int, 3> d, std::array<float, 3> s) : dims(d), spacing_mm(s) {
        validate_header();
        data.assign(numel(), 0.f);
    }

    size_t numel() const {
        return static_cast<size_t>(dims[0]) * static_cast<size_t>(dims[1]) * static_cast<size_t>(dims[2]);
    }
    size_t index(int x, int y, int z) const {
        return (static_cast<size_t>(z) * dims[1] + y) * static_cast<size_t>(dims[0]) + x;
    }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data[index(x, y, z)]; }

    bool same_grid(const Volume& o) const { return dims == o.dims && spacing_mm == o.spacing_mm; }

    void validate_header() const {
        for (int i = 0; i < 3; ++i) {
            if (dims[i] <= 0) throw FormatError("dims: axis " + std::to_string(i) + " must be positive");
            if (!(spacing_mm[i] > 0.f)) throw FormatError("spacing_mm: axis " + std::to_string(i) + " must be positive");
        }
    }
    void validate() const {
        validate_header();
        if (data.size() != numel())
            throw FormatError("data: payload has " + std::to_string(data.size()) + " values, dims need " +
                              std::to_string(numel()));
    }
};

// A Volume whose values live in [0,1] (tissue fraction or label confidence).
struct SoftMask : Volume {
    SoftMask() = default;
    explicit SoftMask(const Volume& v, bool clamp = true) : Volume(v) {
        if (clamp) clamp01();
        check_range();
    }
    SoftMask(std::array<int, 3> d, std::array<float, 3> s) : Volume(d, s) {}

    void clamp01() {
        for (auto& v : data) v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    }
    void check_range() const {
        for (float v : data)
            if (v < 0.f || v > 1.f) throw NumericError("soft mask value outside [0,1]");
    }
};

// One subject: images (one per contrast) plus soft ground truth, all on one
// native grid, tagged with the acquisition center for center-wise splits.
struct Subject {
    std::string id;
    std::vector<Volume> images;
    SoftMask gt;
    std::string center_id;

    void validate() const {
        if (images.empty()) throw ConfigError("subject " + id + " has no images");
        for (const auto& im : images)
            if (!im.same_grid(gt)) throw ShapeError("subject " + id + ": image and gt grids differ");
    }
};

}  // namespace softseg
