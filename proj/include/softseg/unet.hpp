#pragma once

#include <memory>
#include <string>
#include <vector>

#include "softseg/layers.hpp"

namespace softseg::nn {

struct UNetConfig {
    int depth = 3;          // number of downsampling stages
    int in_channels = 1;    // one per contrast
    int base_filters = 16;  // filters at the first stage
    double dropout_rate = 0.3;

    void validate() const {
        if (depth < 1) throw ConfigError("unet depth must be >= 1");
        if (in_channels < 1) throw ConfigError("unet in_channels must be >= 1");
        if (base_filters < 1) throw ConfigError("unet base_filters must be >= 1");
        if (dropout_rate < 0.0 || dropout_rate > 1.0) throw ConfigError("dropout_rate must be in [0,1]");
    }
};

// conv-BN-ReLU-dropout, twice.
template <typename T>
struct DoubleConv {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn1, bn2;
    ReLU<T> relu1, relu2;
    Dropout<T> drop1, drop2;

    DoubleConv() = default;
    DoubleConv(int in_c, int out_c, T dropout)
        : conv1(in_c, out_c, 3), conv2(out_c, out_c, 3), bn1(out_c), bn2(out_c) {
        drop1.rate = dropout;
        drop2.rate = dropout;
    }

    void init(Rng& rng) {
        conv1.init(rng);
        conv2.init(rng);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training, Rng* rng) {
        auto a = drop1.forward(relu1.forward(bn1.forward(conv1.forward(x), training)), training, rng);
        return drop2.forward(relu2.forward(bn2.forward(conv2.forward(a), training)), training, rng);
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        auto d = conv2.backward(bn2.backward(relu2.backward(drop2.backward(dy))));
        return conv1.backward(bn1.backward(relu1.backward(drop1.backward(d))));
    }
};

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
    bool learned;  // false for batch-norm running buffers
};

// 2D U-Net: encoder stages (DoubleConv + 2x2 maxpool), bottleneck, decoder
// stages (nearest 2x upsample + 3x3 conv, skip concat, DoubleConv), 1x1 head.
// No final activation; the training candidate supplies it. Inputs whose
// spatial dims are not divisible by 2^depth are reflect-padded for the pass
// and the output is cropped back.
template <typename T>
class UNet {
public:
    UNet(const UNetConfig& cfg, uint64_t seed) : cfg_(cfg), dropout_rng_(derive_seed(seed, {kStreamDropout})) {
        cfg.validate();
        const T drop = static_cast<T>(cfg.dropout_rate);
        int ch = cfg.in_channels;
        for (int i = 0; i < cfg.depth; ++i) {
            const int f = cfg.base_filters << i;
            enc_.emplace_back(ch, f, drop);
            ch = f;
        }
        pools_.resize(cfg.depth);
        const int fb = cfg.base_filters << cfg.depth;
        bottleneck_ = DoubleConv<T>(ch, fb, drop);
        ch = fb;
        for (int i = cfg.depth - 1; i >= 0; --i) {
            const int f = cfg.base_filters << i;
            up_convs_.emplace_back(ch, f, 3);
            up_bns_.emplace_back(f);
            up_relus_.emplace_back();
            up_drops_.emplace_back();
            up_drops_.back().rate = drop;
            dec_.emplace_back(2 * f, f, drop);
            ch = f;
        }
        ups_.resize(cfg.depth);
        head_ = Conv2d<T>(cfg.base_filters, 1, 1);
        pad_.multiple = 1 << cfg.depth;

        Rng init_rng(derive_seed(seed, {kStreamInit}));
        for (auto& e : enc_) e.init(init_rng);
        bottleneck_.init(init_rng);
        for (size_t i = 0; i < up_convs_.size(); ++i) {
            up_convs_[i].init(init_rng);
            dec_[i].init(init_rng);
        }
        head_.init(init_rng);
    }

    const UNetConfig& config() const { return cfg_; }

    void reseed_dropout(uint64_t seed) { dropout_rng_ = Rng(seed); }

    // Returns pre-activation logits [N,1,H,W] with H,W equal to the input.
    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (x.shape.size() != 4 || x.shape[1] != cfg_.in_channels)
            throw ShapeError("unet expects [N," + std::to_string(cfg_.in_channels) + ",H,W], got " + shape_str(x.shape));
        forward_ran_ = true;
        padded_ = pad_.needed(x);
        Tensor<T> a = padded_ ? pad_.forward(x) : x;
        std::vector<Tensor<T>> skips;
        for (int i = 0; i < cfg_.depth; ++i) {
            a = enc_[i].forward(a, training, &dropout_rng_);
            skips.push_back(a);
            a = pools_[i].forward(a);
        }
        a = bottleneck_.forward(a, training, &dropout_rng_);
        for (int i = 0; i < cfg_.depth; ++i) {
            a = ups_[i].forward(a);
            a = up_drops_[i].forward(
                up_relus_[i].forward(up_bns_[i].forward(up_convs_[i].forward(a), training)), training,
                &dropout_rng_);
            a = concat_channels(skips[cfg_.depth - 1 - i], a);
            a = dec_[i].forward(a, training, &dropout_rng_);
        }
        skip_channels_.clear();
        for (int i = 0; i < cfg_.depth; ++i) skip_channels_.push_back(cfg_.base_filters << i);
        Tensor<T> logits = head_.forward(a);
        return padded_ ? pad_.crop(logits) : logits;
    }

    // Accumulates parameter gradients from d(loss)/d(logits).
    void backward(const Tensor<T>& dlogits) {
        if (!forward_ran_) throw StateError("backward called before forward");
        Tensor<T> d = padded_ ? pad_.embed_grad(dlogits) : dlogits;
        d = head_.backward(d);
        std::vector<Tensor<T>> dskips(cfg_.depth);
        for (int i = cfg_.depth - 1; i >= 0; --i) {
            d = dec_[i].backward(d);
            auto [dskip, dup] = split_channels(d, skip_channels_[cfg_.depth - 1 - i]);
            dskips[cfg_.depth - 1 - i] = std::move(dskip);
            d = up_convs_[i].backward(
                up_bns_[i].backward(up_relus_[i].backward(up_drops_[i].backward(dup))));
            d = ups_[i].backward(d);
        }
        d = bottleneck_.backward(d);
        for (int i = cfg_.depth - 1; i >= 0; --i) {
            d = pools_[i].backward(d);
            for (size_t k = 0; k < d.numel(); ++k) d.values[k] += dskips[i].values[k];
            d = enc_[i].backward(d);
        }
        if (padded_) (void)pad_.backward(d);  // input gradient not propagated further
    }

    void zero_grad() {
        for (auto& p : params())
            if (p.learned) p.tensor->zero_grad();
    }

    // Deterministic parameter/buffer listing; order defines the checkpoint layout.
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        auto add_dc = [&out](const std::string& prefix, DoubleConv<T>& dc) {
            out.push_back({prefix + ".conv1.weight", &dc.conv1.weight, true});
            out.push_back({prefix + ".conv1.bias", &dc.conv1.bias, true});
            out.push_back({prefix + ".bn1.gamma", &dc.bn1.gamma, true});
            out.push_back({prefix + ".bn1.beta", &dc.bn1.beta, true});
            out.push_back({prefix + ".bn1.running_mean", &dc.bn1.running_mean, false});
            out.push_back({prefix + ".bn1.running_var", &dc.bn1.running_var, false});
            out.push_back({prefix + ".conv2.weight", &dc.conv2.weight, true});
            out.push_back({prefix + ".conv2.bias", &dc.conv2.bias, true});
            out.push_back({prefix + ".bn2.gamma", &dc.bn2.gamma, true});
            out.push_back({prefix + ".bn2.beta", &dc.bn2.beta, true});
            out.push_back({prefix + ".bn2.running_mean", &dc.bn2.running_mean, false});
            out.push_back({prefix + ".bn2.running_var", &dc.bn2.running_var, false});
        };
        for (int i = 0; i < cfg_.depth; ++i) add_dc("enc" + std::to_string(i), enc_[i]);
        add_dc("bottleneck", bottleneck_);
        for (int i = 0; i < cfg_.depth; ++i) {
            const std::string p = "up" + std::to_string(i);
            out.push_back({p + ".conv.weight", &up_convs_[i].weight, true});
            out.push_back({p + ".conv.bias", &up_convs_[i].bias, true});
            out.push_back({p + ".bn.gamma", &up_bns_[i].gamma, true});
            out.push_back({p + ".bn.beta", &up_bns_[i].beta, true});
            out.push_back({p + ".bn.running_mean", &up_bns_[i].running_mean, false});
            out.push_back({p + ".bn.running_var", &up_bns_[i].running_var, false});
            add_dc("dec" + std::to_string(i), dec_[i]);
        }
        out.push_back({"head.weight", &head_.weight, true});
        out.push_back({"head.bias", &head_.bias, true});
        return out;
    }

private:
    UNetConfig cfg_;
    std::vector<DoubleConv<T>> enc_;
    std::vector<MaxPool2x2<T>> pools_;
    DoubleConv<T> bottleneck_;
    std::vector<Conv2d<T>> up_convs_;
    std::vector<BatchNorm2d<T>> up_bns_;
    std::vector<ReLU<T>> up_relus_;
    std::vector<Dropout<T>> up_drops_;
    std::vector<UpsampleNearest2x<T>> ups_;
    std::vector<DoubleConv<T>> dec_;
    Conv2d<T> head_;
    ReflectPadToMultiple<T> pad_;
    Rng dropout_rng_;
    std::vector<int> skip_channels_;
    bool forward_ran_ = false;
    bool padded_ = false;
};

}  // namespace softseg::nn
