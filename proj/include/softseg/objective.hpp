#pragma once

#include <cmath>
#include <string>

#include "softseg/tensor.hpp"

namespace softseg::obj {

using nn::Tensor;

enum class ActivationKind { Sigmoid, NormReLU };

struct AWingParams {
    double epsilon = 1.0;
    double alpha = 2.1;
    double theta = 0.5;
    double omega = 8.0;

    void validate() const {
        if (epsilon <= 0 || theta <= 0 || omega <= 0) throw ConfigError("adaptive wing parameters must be positive");
        if (alpha <= 1.0) throw ConfigError("adaptive wing alpha must exceed 1");
    }
};

enum class LossKind { Dice, AdaptiveWing };

// Batched tensors are [N,C,H,W]; anything lower-rank counts as one sample.
template <typename T>
int batch_of(const Tensor<T>& t) {
    return t.shape.size() == 4 ? t.shape[0] : 1;
}

// Rectify, then divide by the per-sample max of the rectified map. All-nonpositive
// samples map to zeros.
template <typename T>
Tensor<T> norm_relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    const int N = batch_of(x);
    const size_t per = x.numel() / N;
    for (int n = 0; n < N; ++n) {
        const T* xp = x.values.data() + n * per;
        T* yp = y.values.data() + n * per;
        T mx{0};
        for (size_t i = 0; i < per; ++i)
            if (xp[i] > mx) mx = xp[i];
        if (mx <= T{0}) continue;  // stays zero
        for (size_t i = 0; i < per; ++i) yp[i] = xp[i] > T{0} ? xp[i] / mx : T{0};
    }
    return y;
}

// d(loss)/d(x) from d(loss)/d(y) for norm_relu. The max is treated as a
// selection: the subgradient routes through the first argmax element.
template <typename T>
Tensor<T> norm_relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx(x.shape);
    const int N = batch_of(x);
    const size_t per = x.numel() / N;
    for (int n = 0; n < N; ++n) {
        const T* xp = x.values.data() + n * per;
        const T* gp = dy.values.data() + n * per;
        T* dp = dx.values.data() + n * per;
        T mx{0};
        size_t am = 0;
        bool has_pos = false;
        for (size_t i = 0; i < per; ++i) {
            if (xp[i] > mx) {
                mx = xp[i];
                am = i;
                has_pos = true;
            }
        }
        if (!has_pos) continue;  // zero output, zero gradient
        // y_i = r_i / M with r = relu(x), M = r[am]:
        //   d/dr_i = g_i / M for i != am;  d/dr_am = (g_am M - sum_j g_j r_j) / M^2
        T dot{0};
        for (size_t i = 0; i < per; ++i)
            if (xp[i] > T{0}) dot += gp[i] * xp[i];
        for (size_t i = 0; i < per; ++i) {
            if (xp[i] <= T{0}) continue;
            if (i == am)
                dp[i] = (gp[i] * mx - dot) / (mx * mx);
            else
                dp[i] = gp[i] / mx;
        }
    }
    return dx;
}

template <typename T>
Tensor<T> sigmoid_act(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) y.values[i] = T{1} / (T{1} + std::exp(-x.values[i]));
    return y;
}

// Backward given the forward output (sigma' = y (1 - y)).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx(y.shape);
    for (size_t i = 0; i < y.numel(); ++i) dx.values[i] = dy.values[i] * y.values[i] * (T{1} - y.values[i]);
    return dx;
}

template <typename T>
Tensor<T> apply_activation(ActivationKind kind, const Tensor<T>& logits) {
    return kind == ActivationKind::Sigmoid ? sigmoid_act(logits) : norm_relu(logits);
}

template <typename T>
Tensor<T> activation_backward(ActivationKind kind, const Tensor<T>& logits, const Tensor<T>& pred,
                              const Tensor<T>& dpred) {
    return kind == ActivationKind::Sigmoid ? sigmoid_backward(pred, dpred)
                                           : norm_relu_backward(logits, dpred);
}

// Sum-denominator is the default; the squared-denominator variant divides by
// sum(p^2) + sum(g^2) instead.
enum class DiceVariant { SumDenominator, SquaredDenominator };

// Soft Dice loss, Laplace smoothing s=1, per sample then averaged over the
// batch. Inputs are [N,...] with matching shapes.
template <typename T>
double dice_loss(const Tensor<T>& pred, const Tensor<T>& gt, double smooth = 1.0,
                 DiceVariant variant = DiceVariant::SumDenominator) {
    if (!pred.same_shape(gt)) throw ShapeError("dice loss shape mismatch");
    const bool squared = variant == DiceVariant::SquaredDenominator;
    const int N = batch_of(pred);
    const size_t per = pred.numel() / N;
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const T* pp = pred.values.data() + n * per;
        const T* gp = gt.values.data() + n * per;
        double inter = 0.0, sp = 0.0, sg = 0.0;
        for (size_t i = 0; i < per; ++i) {
            const double p = pp[i], g = gp[i];
            inter += p * g;
            sp += squared ? p * p : p;
            sg += squared ? g * g : g;
        }
        total += 1.0 - (2.0 * inter + smooth) / (sp + sg + smooth);
    }
    return total / N;
}

template <typename T>
Tensor<T> dice_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, double smooth = 1.0,
                         DiceVariant variant = DiceVariant::SumDenominator) {
    if (!pred.same_shape(gt)) throw ShapeError("dice loss shape mismatch");
    const bool squared = variant == DiceVariant::SquaredDenominator;
    const int N = batch_of(pred);
    const size_t per = pred.numel() / N;
    Tensor<T> dx(pred.shape);
    for (int n = 0; n < N; ++n) {
        const T* pp = pred.values.data() + n * per;
        const T* gp = gt.values.data() + n * per;
        T* dp = dx.values.data() + n * per;
        double inter = 0.0, sp = 0.0, sg = 0.0;
        for (size_t i = 0; i < per; ++i) {
            const double p = pp[i], g = gp[i];
            inter += p * g;
            sp += squared ? p * p : p;
            sg += squared ? g * g : g;
        }
        const double A = 2.0 * inter + smooth;
        const double B = sp + sg + smooth;
        for (size_t i = 0; i < per; ++i) {
            const double g = gp[i];
            const double dB = squared ? 2.0 * static_cast<double>(pp[i]) : 1.0;
            dp[i] = static_cast<T>(-(2.0 * g * B - A * dB) / (B * B) / N);
        }
    }
    return dx;
}

// Adaptive Wing loss (Wang et al. 2019). With d = |gt - pred| and e = alpha - gt:
//   d <  theta: omega ln(1 + (d/eps)^e)
//   d >= theta: A d - C, with A and C chosen so value and slope match at theta.
// Reduced by voxel mean, then batch mean (the two coincide for equal-size samples).
inline double awing_voxel(double pred, double gt, const AWingParams& p) {
    const double d = std::abs(gt - pred);
    const double e = p.alpha - gt;
    if (d < p.theta) return p.omega * std::log1p(std::pow(d / p.epsilon, e));
    const double te = std::pow(p.theta / p.epsilon, e);
    const double A = p.omega * (1.0 / (1.0 + te)) * e * std::pow(p.theta / p.epsilon, e - 1.0) / p.epsilon;
    const double C = p.theta * A - p.omega * std::log1p(te);
    return A * d - C;
}

inline double awing_voxel_grad(double pred, double gt, const AWingParams& p) {
    const double diff = pred - gt;
    const double d = std::abs(diff);
    const double e = p.alpha - gt;
    const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    if (d < p.theta) {
        const double de = std::pow(d / p.epsilon, e);
        return p.omega * e * std::pow(d / p.epsilon, e - 1.0) / p.epsilon / (1.0 + de) * sign;
    }
    const double te = std::pow(p.theta / p.epsilon, e);
    const double A = p.omega * (1.0 / (1.0 + te)) * e * std::pow(p.theta / p.epsilon, e - 1.0) / p.epsilon;
    return A * sign;
}

template <typename T>
double adaptive_wing_loss(const Tensor<T>& pred, const Tensor<T>& gt, const AWingParams& p) {
    if (!pred.same_shape(gt)) throw ShapeError("adaptive wing loss shape mismatch");
    double total = 0.0;
    for (size_t i = 0; i < pred.numel(); ++i) {
        const double pv = pred.values[i], gv = gt.values[i];
        if (!std::isfinite(pv) || !std::isfinite(gv)) throw NumericError("adaptive wing loss: non-finite input");
        total += awing_voxel(pv, gv, p);
    }
    return total / static_cast<double>(pred.numel());
}

template <typename T>
Tensor<T> adaptive_wing_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt, const AWingParams& p) {
    if (!pred.same_shape(gt)) throw ShapeError("adaptive wing loss shape mismatch");
    Tensor<T> dx(pred.shape);
    const double inv_n = 1.0 / static_cast<double>(pred.numel());
    for (size_t i = 0; i < pred.numel(); ++i)
        dx.values[i] = static_cast<T>(awing_voxel_grad(pred.values[i], gt.values[i], p) * inv_n);
    return dx;
}

template <typename T>
double loss_value(LossKind kind, const Tensor<T>& pred, const Tensor<T>& gt, const AWingParams& p,
                  DiceVariant variant = DiceVariant::SumDenominator) {
    return kind == LossKind::Dice ? dice_loss(pred, gt, 1.0, variant) : adaptive_wing_loss(pred, gt, p);
}

template <typename T>
Tensor<T> loss_gradient(LossKind kind, const Tensor<T>& pred, const Tensor<T>& gt, const AWingParams& p,
                        DiceVariant variant = DiceVariant::SumDenominator) {
    return kind == LossKind::Dice ? dice_loss_grad(pred, gt, 1.0, variant)
                                  : adaptive_wing_loss_grad(pred, gt, p);
}

inline std::string to_string(ActivationKind k) { return k == ActivationKind::Sigmoid ? "sigmoid" : "normrelu"; }
inline std::string to_string(LossKind k) { return k == LossKind::Dice ? "dice" : "adaptive_wing"; }

}  // namespace softseg::obj
