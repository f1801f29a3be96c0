#pragma once

#include <cmath>
#include <vector>

#include "softseg/tensor.hpp"
#include "softseg/unet.hpp"

namespace softseg::nn {

// lr(epoch) = lr_min + 0.5 (lr0 - lr_min) (1 + cos(pi epoch / t_max)), lr_min = 0.
inline double cosine_annealing_lr(int epoch, double lr0, int t_max) {
    if (t_max < 1) throw ConfigError("cosine annealing needs t_max >= 1");
    if (epoch < 0 || epoch > t_max) throw ConfigError("cosine annealing epoch out of [0, t_max]");
    constexpr double pi = 3.14159265358979323846;
    return 0.5 * lr0 * (1.0 + std::cos(pi * static_cast<double>(epoch) / static_cast<double>(t_max)));
}

// Adam with bias correction. One state per model; step() walks the learned
// parameters in listing order.
template <typename T>
class Adam {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit Adam(std::vector<ParamRef<T>> params) {
        for (auto& p : params)
            if (p.learned) params_.push_back(p);
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].tensor->numel(), T{0});
            v_[i].assign(params_[i].tensor->numel(), T{0});
        }
    }

    int step_count() const { return t_; }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, t_);
        const double bc2 = 1.0 - std::pow(beta2, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor<T>& p = *params_[i].tensor;
            if (p.grad.size() != p.values.size()) throw StateError("adam: parameter has no gradient");
            for (size_t k = 0; k < p.values.size(); ++k) {
                const double g = static_cast<double>(p.grad[k]);
                if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in " + params_[i].name);
                double m = beta1 * static_cast<double>(m_[i][k]) + (1.0 - beta1) * g;
                double v = beta2 * static_cast<double>(v_[i][k]) + (1.0 - beta2) * g * g;
                m_[i][k] = static_cast<T>(m);
                v_[i][k] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p.values[k] = static_cast<T>(static_cast<double>(p.values[k]) - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    int t_ = 0;
};

}  // namespace softseg::nn
