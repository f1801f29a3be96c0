#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "softseg/errors.hpp"

namespace softseg::nn {

// Dense row-major tensor. Production code instantiates T = float (the model
// stores and computes in 32-bit); tests instantiate T = double so
// finite-difference oracles are well conditioned.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until ensure_grad()

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), values(numel_of(shape), T{0}) {}

    static size_t numel_of(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t numel() const { return values.size(); }
    int dim(size_t i) const { return shape.at(i); }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), T{0});
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T{0});
    }

    // NCHW helpers.
    T* plane(int n, int c, int h, int w) {
        return values.data() + ((static_cast<size_t>(n) * shape[1] + c) * shape[2]) * shape[3];
    }
    size_t offset4(int n, int c, int y, int x) const {
        return ((static_cast<size_t>(n) * shape[1] + c) * shape[2] + y) * static_cast<size_t>(shape[3]) + x;
    }
    T& at4(int n, int c, int y, int x) { return values[offset4(n, c, y, x)]; }
    const T& at4(int n, int c, int y, int x) const { return values[offset4(n, c, y, x)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
    return Tensor<T>(t.shape);
}

template <typename T, typename U>
Tensor<T> cast_tensor(const Tensor<U>& t) {
    Tensor<T> out(t.shape);
    for (size_t i = 0; i < t.values.size(); ++i) out.values[i] = static_cast<T>(t.values[i]);
    return out;
}

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace softseg::nn
