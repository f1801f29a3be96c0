#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "softseg/rng.hpp"
#include "softseg/tensor.hpp"

namespace softseg::nn {

// Layers cache whatever the backward pass needs during forward. One layer
// object therefore belongs to exactly one model instance and is not shared.

template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3, pad = 1;
    Tensor<T> weight;  // [out_ch, in_ch, k, k]
    Tensor<T> bias;    // [out_ch]

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k)
        : in_ch(in_c), out_ch(out_c), ksize(k), pad(k / 2),
          weight({out_c, in_c, k, k}), bias({out_c}) {
        weight.ensure_grad();
        bias.ensure_grad();
    }

    // Kaiming-uniform fan-in, zero bias.
    void init(Rng& rng) {
        const double fan_in = static_cast<double>(in_ch) * ksize * ksize;
        const double bound = std::sqrt(6.0 / fan_in);
        for (auto& w : weight.values) w = static_cast<T>(rng.uniform(-bound, bound));
        std::fill(bias.values.begin(), bias.values.end(), T{0});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape.size() != 4 || x.shape[1] != in_ch)
            throw ShapeError("conv2d expects [N," + std::to_string(in_ch) + ",H,W], got " + shape_str(x.shape));
        cached_x_ = x;
        const int N = x.shape[0], H = x.shape[2], W = x.shape[3];
        Tensor<T> y({N, out_ch, H, W});
        for (int n = 0; n < N; ++n) {
            for (int co = 0; co < out_ch; ++co) {
                T* yp = y.values.data() + y.offset4(n, co, 0, 0);
                std::fill(yp, yp + static_cast<size_t>(H) * W, bias.values[co]);
                for (int ci = 0; ci < in_ch; ++ci) {
                    const T* xp = x.values.data() + x.offset4(n, ci, 0, 0);
                    const T* wp = weight.values.data() + weight.offset4(co, ci, 0, 0);
                    for (int ky = 0; ky < ksize; ++ky) {
                        const int dy = ky - pad;
                        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                        for (int kx = 0; kx < ksize; ++kx) {
                            const int dx = kx - pad;
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            const T wv = wp[ky * ksize + kx];
                            if (wv == T{0}) continue;
                            for (int yy = y0; yy < y1; ++yy) {
                                T* yrow = yp + static_cast<size_t>(yy) * W;
                                const T* xrow = xp + static_cast<size_t>(yy + dy) * W + dx;
                                for (int xx = x0; xx < x1; ++xx) yrow[xx] += wv * xrow[xx];
                            }
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = cached_x_;
        const int N = x.shape[0], H = x.shape[2], W = x.shape[3];
        Tensor<T> dx(x.shape);
        for (int n = 0; n < N; ++n) {
            for (int co = 0; co < out_ch; ++co) {
                const T* gp = dy.values.data() + dy.offset4(n, co, 0, 0);
                T gsum{0};
                for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) gsum += gp[i];
                bias.grad[co] += gsum;
                for (int ci = 0; ci < in_ch; ++ci) {
                    const T* xp = x.values.data() + x.offset4(n, ci, 0, 0);
                    T* dxp = dx.values.data() + dx.offset4(n, ci, 0, 0);
                    const T* wp = weight.values.data() + weight.offset4(co, ci, 0, 0);
                    T* dwp = weight.grad.data() + weight.offset4(co, ci, 0, 0);
                    for (int ky = 0; ky < ksize; ++ky) {
                        const int dyo = ky - pad;
                        const int y0 = std::max(0, -dyo), y1 = std::min(H, H - dyo);
                        for (int kx = 0; kx < ksize; ++kx) {
                            const int dxo = kx - pad;
                            const int x0 = std::max(0, -dxo), x1 = std::min(W, W - dxo);
                            const T wv = wp[ky * ksize + kx];
                            T wacc{0};
                            for (int yy = y0; yy < y1; ++yy) {
                                const T* grow = gp + static_cast<size_t>(yy) * W;
                                const T* xrow = xp + static_cast<size_t>(yy + dyo) * W + dxo;
                                T* dxrow = dxp + static_cast<size_t>(yy + dyo) * W + dxo;
                                for (int xx = x0; xx < x1; ++xx) {
                                    wacc += grow[xx] * xrow[xx];
                                    dxrow[xx] += wv * grow[xx];
                                }
                            }
                            dwp[ky * ksize + kx] += wacc;
                        }
                    }
                }
            }
        }
        return dx;
    }

private:
    Tensor<T> cached_x_;
};

template <typename T>
struct BatchNorm2d {
    int channels = 0;
    T eps = static_cast<T>(1e-5);
    T momentum = static_cast<T>(0.1);
    Tensor<T> gamma, beta;              // learned
    Tensor<T> running_mean, running_var;  // buffers

    BatchNorm2d() = default;
    explicit BatchNorm2d(int c)
        : channels(c), gamma({c}), beta({c}), running_mean({c}), running_var({c}) {
        std::fill(gamma.values.begin(), gamma.values.end(), T{1});
        std::fill(running_var.values.begin(), running_var.values.end(), T{1});
        gamma.ensure_grad();
        beta.ensure_grad();
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (x.shape.size() != 4 || x.shape[1] != channels) throw ShapeError("batchnorm channel mismatch");
        const int N = x.shape[0], H = x.shape[2], W = x.shape[3];
        const size_t plane = static_cast<size_t>(H) * W;
        const size_t m = static_cast<size_t>(N) * plane;
        trained_mode_ = training;
        xhat_ = Tensor<T>(x.shape);
        inv_std_.assign(channels, T{0});
        Tensor<T> y(x.shape);
        for (int c = 0; c < channels; ++c) {
            T mean, var;
            if (training) {
                double s = 0.0;
                for (int n = 0; n < N; ++n) {
                    const T* xp = x.values.data() + x.offset4(n, c, 0, 0);
                    for (size_t i = 0; i < plane; ++i) s += xp[i];
                }
                mean = static_cast<T>(s / static_cast<double>(m));
                double v = 0.0;
                for (int n = 0; n < N; ++n) {
                    const T* xp = x.values.data() + x.offset4(n, c, 0, 0);
                    for (size_t i = 0; i < plane; ++i) {
                        const double d = static_cast<double>(xp[i]) - static_cast<double>(mean);
                        v += d * d;
                    }
                }
                var = static_cast<T>(v / static_cast<double>(m));
                // unbiased variance for the running buffer, biased for normalization
                const T unbiased = m > 1 ? static_cast<T>(v / static_cast<double>(m - 1)) : var;
                running_mean.values[c] = (T{1} - momentum) * running_mean.values[c] + momentum * mean;
                running_var.values[c] = (T{1} - momentum) * running_var.values[c] + momentum * unbiased;
            } else {
                mean = running_mean.values[c];
                var = running_var.values[c];
            }
            const T istd = T{1} / std::sqrt(var + eps);
            inv_std_[c] = istd;
            const T g = gamma.values[c], b = beta.values[c];
            for (int n = 0; n < N; ++n) {
                const T* xp = x.values.data() + x.offset4(n, c, 0, 0);
                T* hp = xhat_.values.data() + xhat_.offset4(n, c, 0, 0);
                T* yp = y.values.data() + y.offset4(n, c, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    const T h = (xp[i] - mean) * istd;
                    hp[i] = h;
                    yp[i] = g * h + b;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int N = dy.shape[0], H = dy.shape[2], W = dy.shape[3];
        const size_t plane = static_cast<size_t>(H) * W;
        const T m = static_cast<T>(static_cast<size_t>(N) * plane);
        Tensor<T> dx(dy.shape);
        for (int c = 0; c < channels; ++c) {
            T sum_dy{0}, sum_dy_h{0};
            for (int n = 0; n < N; ++n) {
                const T* gp = dy.values.data() + dy.offset4(n, c, 0, 0);
                const T* hp = xhat_.values.data() + xhat_.offset4(n, c, 0, 0);
                for (size_t i = 0; i < plane; ++i) {
                    sum_dy += gp[i];
                    sum_dy_h += gp[i] * hp[i];
                }
            }
            gamma.grad[c] += sum_dy_h;
            beta.grad[c] += sum_dy;
            const T g = gamma.values[c], istd = inv_std_[c];
            if (trained_mode_) {
                const T k1 = sum_dy / m, k2 = sum_dy_h / m;
                for (int n = 0; n < N; ++n) {
                    const T* gp = dy.values.data() + dy.offset4(n, c, 0, 0);
                    const T* hp = xhat_.values.data() + xhat_.offset4(n, c, 0, 0);
                    T* dp = dx.values.data() + dx.offset4(n, c, 0, 0);
                    for (size_t i = 0; i < plane; ++i) dp[i] = g * istd * (gp[i] - k1 - hp[i] * k2);
                }
            } else {
                for (int n = 0; n < N; ++n) {
                    const T* gp = dy.values.data() + dy.offset4(n, c, 0, 0);
                    T* dp = dx.values.data() + dx.offset4(n, c, 0, 0);
                    for (size_t i = 0; i < plane; ++i) dp[i] = g * istd * gp[i];
                }
            }
        }
        return dx;
    }

private:
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
    bool trained_mode_ = false;
};

template <typename T>
struct ReLU {
    Tensor<T> forward(const Tensor<T>& x) {
        mask_.assign(x.numel(), 0);
        Tensor<T> y(x.shape);
        for (size_t i = 0; i < x.numel(); ++i) {
            if (x.values[i] > T{0}) {
                y.values[i] = x.values[i];
                mask_[i] = 1;
            }
        }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.shape);
        for (size_t i = 0; i < dy.numel(); ++i) dx.values[i] = mask_[i] ? dy.values[i] : T{0};
        return dx;
    }

private:
    std::vector<uint8_t> mask_;
};

// Inverted dropout: zero with probability p, scale kept units by 1/(1-p).
template <typename T>
struct Dropout {
    T rate = T{0};

    Tensor<T> forward(const Tensor<T>& x, bool training, Rng* rng) {
        if (!training || rate <= T{0}) {
            active_ = false;
            return x;
        }
        active_ = true;
        const T keep = T{1} - rate;
        const T scale = T{1} / keep;
        mask_.assign(x.numel(), T{0});
        Tensor<T> y(x.shape);
        for (size_t i = 0; i < x.numel(); ++i) {
            if (rng->uniform() >= static_cast<double>(rate)) {
                mask_[i] = scale;
                y.values[i] = x.values[i] * scale;
            }
        }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        if (!active_) return dy;
        Tensor<T> dx(dy.shape);
        for (size_t i = 0; i < dy.numel(); ++i) dx.values[i] = dy.values[i] * mask_[i];
        return dx;
    }

private:
    std::vector<T> mask_;
    bool active_ = false;
};

// 2x2 max pooling, stride 2. Input dims must be even (the model pads first).
template <typename T>
struct MaxPool2x2 {
    Tensor<T> forward(const Tensor<T>& x) {
        const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
        if (H % 2 || W % 2) throw ShapeError("maxpool input dims must be even");
        in_shape_ = x.shape;
        Tensor<T> y({N, C, H / 2, W / 2});
        argmax_.assign(y.numel(), 0);
        size_t oi = 0;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < H / 2; ++oy)
                    for (int ox = 0; ox < W / 2; ++ox, ++oi) {
                        size_t best = x.offset4(n, c, oy * 2, ox * 2);
                        T bv = x.values[best];
                        for (int sy = 0; sy < 2; ++sy)
                            for (int sx = 0; sx < 2; ++sx) {
                                const size_t idx = x.offset4(n, c, oy * 2 + sy, ox * 2 + sx);
                                if (x.values[idx] > bv) {
                                    bv = x.values[idx];
                                    best = idx;
                                }
                            }
                        y.values[oi] = bv;
                        argmax_[oi] = best;
                    }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape_);
        for (size_t i = 0; i < dy.numel(); ++i) dx.values[argmax_[i]] += dy.values[i];
        return dx;
    }

private:
    std::vector<int> in_shape_;
    std::vector<size_t> argmax_;
};

// 2x nearest-neighbor upsampling.
template <typename T>
struct UpsampleNearest2x {
    Tensor<T> forward(const Tensor<T>& x) {
        const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
        in_shape_ = x.shape;
        Tensor<T> y({N, C, H * 2, W * 2});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < H * 2; ++oy) {
                    const T* xrow = x.values.data() + x.offset4(n, c, oy / 2, 0);
                    T* yrow = y.values.data() + y.offset4(n, c, oy, 0);
                    for (int ox = 0; ox < W * 2; ++ox) yrow[ox] = xrow[ox / 2];
                }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(in_shape_);
        const int H2 = dy.shape[2], W2 = dy.shape[3];
        for (int n = 0; n < dy.shape[0]; ++n)
            for (int c = 0; c < dy.shape[1]; ++c)
                for (int oy = 0; oy < H2; ++oy) {
                    const T* grow = dy.values.data() + dy.offset4(n, c, oy, 0);
                    T* drow = dx.values.data() + dx.offset4(n, c, oy / 2, 0);
                    for (int ox = 0; ox < W2; ++ox) drow[ox / 2] += grow[ox];
                }
        return dx;
    }

private:
    std::vector<int> in_shape_;
};

inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// Reflect padding on the right/bottom only, used to round spatial dims up to
// a multiple of 2^depth. Mirror excludes the border sample (abcb-style).
template <typename T>
struct ReflectPadToMultiple {
    int multiple = 1;
    int padded_h = 0, padded_w = 0, orig_h = 0, orig_w = 0;

    bool needed(const Tensor<T>& x) const {
        return x.shape[2] % multiple != 0 || x.shape[3] % multiple != 0;
    }

    Tensor<T> forward(const Tensor<T>& x) {
        const int N = x.shape[0], C = x.shape[1];
        orig_h = x.shape[2];
        orig_w = x.shape[3];
        padded_h = ((orig_h + multiple - 1) / multiple) * multiple;
        padded_w = ((orig_w + multiple - 1) / multiple) * multiple;
        Tensor<T> y({N, C, padded_h, padded_w});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < padded_h; ++oy) {
                    const int sy = reflect_index(oy, orig_h);
                    const T* xrow = x.values.data() + x.offset4(n, c, sy, 0);
                    T* yrow = y.values.data() + y.offset4(n, c, oy, 0);
                    for (int ox = 0; ox < padded_w; ++ox) yrow[ox] = xrow[reflect_index(ox, orig_w)];
                }
        return y;
    }

    // Crop back to the original dims.
    Tensor<T> crop(const Tensor<T>& y) const {
        Tensor<T> out({y.shape[0], y.shape[1], orig_h, orig_w});
        for (int n = 0; n < y.shape[0]; ++n)
            for (int c = 0; c < y.shape[1]; ++c)
                for (int yy = 0; yy < orig_h; ++yy) {
                    const T* src = y.values.data() + y.offset4(n, c, yy, 0);
                    T* dst = out.values.data() + out.offset4(n, c, yy, 0);
                    std::copy(src, src + orig_w, dst);
                }
        return out;
    }

    // Zero-embed an original-dims gradient into the padded dims.
    Tensor<T> embed_grad(const Tensor<T>& dy) const {
        Tensor<T> out({dy.shape[0], dy.shape[1], padded_h, padded_w});
        for (int n = 0; n < dy.shape[0]; ++n)
            for (int c = 0; c < dy.shape[1]; ++c)
                for (int yy = 0; yy < orig_h; ++yy) {
                    const T* src = dy.values.data() + dy.offset4(n, c, yy, 0);
                    T* dst = out.values.data() + out.offset4(n, c, yy, 0);
                    std::copy(src, src + orig_w, dst);
                }
        return out;
    }

    // Fold padded-region gradients back onto their mirror sources.
    Tensor<T> backward(const Tensor<T>& dpadded) const {
        Tensor<T> dx({dpadded.shape[0], dpadded.shape[1], orig_h, orig_w});
        for (int n = 0; n < dpadded.shape[0]; ++n)
            for (int c = 0; c < dpadded.shape[1]; ++c)
                for (int oy = 0; oy < padded_h; ++oy) {
                    const int sy = reflect_index(oy, orig_h);
                    const T* grow = dpadded.values.data() + dpadded.offset4(n, c, oy, 0);
                    T* drow = dx.values.data() + dx.offset4(n, c, sy, 0);
                    for (int ox = 0; ox < padded_w; ++ox) drow[reflect_index(ox, orig_w)] += grow[ox];
                }
        return dx;
    }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape[0] != b.shape[0] || a.shape[2] != b.shape[2] || a.shape[3] != b.shape[3])
        throw ShapeError("concat: spatial/batch dims differ");
    Tensor<T> y({a.shape[0], a.shape[1] + b.shape[1], a.shape[2], a.shape[3]});
    const size_t plane = static_cast<size_t>(a.shape[2]) * a.shape[3];
    for (int n = 0; n < a.shape[0]; ++n) {
        std::copy_n(a.values.data() + a.offset4(n, 0, 0, 0), plane * a.shape[1],
                    y.values.data() + y.offset4(n, 0, 0, 0));
        std::copy_n(b.values.data() + b.offset4(n, 0, 0, 0), plane * b.shape[1],
                    y.values.data() + y.offset4(n, a.shape[1], 0, 0));
    }
    return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int ca) {
    const int cb = y.shape[1] - ca;
    Tensor<T> a({y.shape[0], ca, y.shape[2], y.shape[3]});
    Tensor<T> b({y.shape[0], cb, y.shape[2], y.shape[3]});
    const size_t plane = static_cast<size_t>(y.shape[2]) * y.shape[3];
    for (int n = 0; n < y.shape[0]; ++n) {
        std::copy_n(y.values.data() + y.offset4(n, 0, 0, 0), plane * ca,
                    a.values.data() + a.offset4(n, 0, 0, 0));
        std::copy_n(y.values.data() + y.offset4(n, ca, 0, 0), plane * cb,
                    b.values.data() + b.offset4(n, 0, 0, 0));
    }
    return {std::move(a), std::move(b)};
}

}  // namespace softseg::nn
