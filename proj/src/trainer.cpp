#include "softseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softseg/csvio.hpp"
#include "softseg/optim.hpp"

namespace softseg {

std::vector<CandidateConfig> canonical_candidates(const obj::AWingParams& awing) {
    using obj::ActivationKind;
    using obj::LossKind;
    std::vector<CandidateConfig> out;
    out.push_back({"Hard-Sig-Dice", true, ActivationKind::Sigmoid, LossKind::Dice, awing});
    out.push_back({"Hard-ReLU-Wing", true, ActivationKind::NormReLU, LossKind::AdaptiveWing, awing});
    out.push_back({"Soft-Sig-Wing", false, ActivationKind::Sigmoid, LossKind::AdaptiveWing, awing});
    out.push_back({"Soft-ReLU-Dice", false, ActivationKind::NormReLU, LossKind::Dice, awing});
    out.push_back({"Soft-ReLU-Wing", false, ActivationKind::NormReLU, LossKind::AdaptiveWing, awing});
    return out;
}

CandidateConfig candidate_by_name(const std::string& name, const obj::AWingParams& awing) {
    auto all = canonical_candidates(awing);
    for (auto& c : all)
        if (c.name == name) return c;
    std::string valid;
    for (const auto& c : all) valid += (valid.empty() ? "" : ", ") + c.name;
    throw ConfigError("unknown candidate '" + name + "'; valid names: " + valid);
}

void TrainHistory::save_csv(const std::string& path) const {
    csv::Table t;
    t.header = {"epoch", "train_loss", "val_loss", "lr"};
    for (size_t e = 0; e < train_loss.size(); ++e)
        t.rows.push_back({std::to_string(e), csv::fmt(train_loss[e]), csv::fmt(val_loss[e]), csv::fmt(lr[e])});
    t.save(path);
}

namespace {

// One 2D training sample: per-contrast image slices plus the gt slice.
struct SliceSample {
    std::vector<Slice2D> images;
    Slice2D gt;
};

std::vector<SliceSample> collect_slices(const std::vector<ProcessedSubject>& subjects) {
    std::vector<SliceSample> out;
    for (const auto& s : subjects) {
        std::vector<std::vector<Slice2D>> per_contrast;
        for (const auto& im : s.images) per_contrast.push_back(slices(im));
        const auto gt_slices = slices(s.gt);
        for (size_t z = 0; z < gt_slices.size(); ++z) {
            SliceSample sample;
            for (auto& pc : per_contrast) sample.images.push_back(pc[z]);
            sample.gt = gt_slices[z];
            out.push_back(std::move(sample));
        }
    }
    return out;
}

void fill_batch(nn::Tensor<float>& xb, nn::Tensor<float>& yb, int row, const std::vector<Slice2D>& images,
                const Slice2D& gt) {
    const int C = xb.shape[1], H = xb.shape[2], W = xb.shape[3];
    for (int c = 0; c < C; ++c)
        std::copy(images[c].data.begin(), images[c].data.end(),
                  xb.values.begin() + xb.offset4(row, c, 0, 0));
    (void)H;
    (void)W;
    std::copy(gt.data.begin(), gt.data.end(), yb.values.begin() + yb.offset4(row, 0, 0, 0));
}

std::vector<std::vector<float>> snapshot_params(nn::UNet<float>& model) {
    std::vector<std::vector<float>> out;
    for (auto& p : model.params()) out.push_back(p.tensor->values);
    return out;
}

void restore_params(nn::UNet<float>& model, const std::vector<std::vector<float>>& snap) {
    auto params = model.params();
    for (size_t i = 0; i < params.size(); ++i) params[i].tensor->values = snap[i];
}

}  // namespace

TrainResult train(const std::vector<ProcessedSubject>& train_subjects,
                  const std::vector<ProcessedSubject>& val_subjects, const CandidateConfig& candidate,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_subjects.empty() || val_subjects.empty())
        throw ConfigError("training needs non-empty train and validation sets");

    const auto train_samples = collect_slices(train_subjects);
    const auto val_samples = collect_slices(val_subjects);
    const int C = static_cast<int>(train_samples[0].images.size());
    if (C != cfg.unet.in_channels)
        throw ShapeError("unet expects " + std::to_string(cfg.unet.in_channels) + " contrasts, dataset has " +
                         std::to_string(C));
    const int W = train_samples[0].gt.width, H = train_samples[0].gt.height;

    TrainResult result;
    result.model = std::make_unique<nn::UNet<float>>(cfg.unet, cfg.seed);
    nn::UNet<float>& model = *result.model;
    model.reseed_dropout(derive_seed(cfg.seed, {kStreamDropout}));
    nn::Adam<float> adam(model.params());
    Rng shuffle_rng(derive_seed(cfg.seed, {kStreamShuffle}));
    Rng augment_rng(derive_seed(cfg.seed, {kStreamAugment}));

    // validation targets are fixed: no augmentation, but the candidate's gt
    // convention still applies
    std::vector<Slice2D> val_gts;
    for (const auto& s : val_samples) val_gts.push_back(aug::finalize_mask(s.gt, candidate.binarize_after_aug));

    TrainHistory& hist = result.history;
    double best_tracked = std::numeric_limits<double>::infinity();  // patience reference
    double best_val = std::numeric_limits<double>::infinity();      // checkpoint reference
    std::vector<std::vector<float>> best_snapshot = snapshot_params(model);
    hist.best_epoch = -1;
    int since_improvement = 0;
    bool diverged = false;

    std::vector<size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = nn::cosine_annealing_lr(epoch, cfg.lr0, cfg.max_epochs);
        shuffle_rng.shuffle(order);

        double train_total = 0;
        size_t train_count = 0;
        for (size_t b0 = 0; b0 < order.size() && !diverged; b0 += cfg.batch_size) {
            const int B = static_cast<int>(std::min<size_t>(cfg.batch_size, order.size() - b0));
            nn::Tensor<float> xb({B, C, H, W}), yb({B, 1, H, W});
            for (int i = 0; i < B; ++i) {
                const SliceSample& s = train_samples[order[b0 + i]];
                const auto params = aug::sample_affine(augment_rng, cfg.augment);
                std::vector<Slice2D> imgs;
                imgs.reserve(s.images.size());
                for (const auto& im : s.images) imgs.push_back(aug::apply_affine(im, params, false));
                Slice2D gt = aug::finalize_mask(aug::apply_affine(s.gt, params, true),
                                                candidate.binarize_after_aug);
                fill_batch(xb, yb, i, imgs, gt);
            }
            nn::Tensor<float> logits = model.forward(xb, true);
            nn::Tensor<float> pred = obj::apply_activation(candidate.activation, logits);
            const double loss = obj::loss_value(candidate.loss, pred, yb, candidate.awing, candidate.dice_variant);
            if (!std::isfinite(loss)) {
                diverged = true;
                break;
            }
            nn::Tensor<float> dpred = obj::loss_gradient(candidate.loss, pred, yb, candidate.awing, candidate.dice_variant);
            nn::Tensor<float> dlogits = obj::activation_backward(candidate.activation, logits, pred, dpred);
            model.zero_grad();
            model.backward(dlogits);
            try {
                adam.step(lr);
            } catch (const NumericError&) {
                diverged = true;
                break;
            }
            train_total += loss * B;
            train_count += B;
        }
        if (diverged) {
            hist.stop_reason = "diverged";
            hist.converged = false;
            hist.stop_epoch = epoch;
            break;
        }

        double val_total = 0;
        size_t val_count = 0;
        for (size_t b0 = 0; b0 < val_samples.size(); b0 += cfg.batch_size) {
            const int B = static_cast<int>(std::min<size_t>(cfg.batch_size, val_samples.size() - b0));
            nn::Tensor<float> xb({B, C, H, W}), yb({B, 1, H, W});
            for (int i = 0; i < B; ++i)
                fill_batch(xb, yb, i, val_samples[b0 + i].images, val_gts[b0 + i]);
            nn::Tensor<float> logits = model.forward(xb, false);
            nn::Tensor<float> pred = obj::apply_activation(candidate.activation, logits);
            const double loss = obj::loss_value(candidate.loss, pred, yb, candidate.awing, candidate.dice_variant);
            val_total += loss * B;
            val_count += B;
        }
        const double train_loss = train_total / static_cast<double>(train_count);
        const double val_loss = val_total / static_cast<double>(val_count);
        hist.train_loss.push_back(train_loss);
        hist.val_loss.push_back(val_loss);
        hist.lr.push_back(lr);
        hist.stop_epoch = epoch + 1;

        if (!std::isfinite(val_loss)) {
            hist.stop_reason = "diverged";
            hist.converged = false;
            break;
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            best_snapshot = snapshot_params(model);
            hist.best_epoch = epoch;
        }
        if (val_loss < best_tracked - cfg.min_improvement) {
            best_tracked = val_loss;
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (since_improvement >= cfg.patience) {
            hist.stop_reason = "early_stop";
            hist.converged = true;
            break;
        }
    }
    if (hist.stop_reason.empty()) {
        hist.stop_reason = diverged ? "diverged" : "budget";
        hist.converged = !diverged;
    }
    hist.best_val_loss = best_val;
    restore_params(*result.model, best_snapshot);
    return result;
}

SoftMask predict_processed(nn::UNet<float>& model, const CandidateConfig& candidate,
                           const ProcessedSubject& subject) {
    const int C = static_cast<int>(subject.images.size());
    if (C != model.config().in_channels) throw ShapeError("contrast count does not match the model");
    std::vector<std::vector<Slice2D>> per_contrast;
    for (const auto& im : subject.images) per_contrast.push_back(slices(im));
    const int nz = subject.gt.dims[2];
    const int W = subject.gt.dims[0], H = subject.gt.dims[1];

    std::vector<Slice2D> out_slices;
    for (int z = 0; z < nz; ++z) {
        nn::Tensor<float> x({1, C, H, W});
        for (int c = 0; c < C; ++c)
            std::copy(per_contrast[c][z].data.begin(), per_contrast[c][z].data.end(),
                      x.values.begin() + x.offset4(0, c, 0, 0));
        nn::Tensor<float> logits = model.forward(x, false);
        nn::Tensor<float> pred = obj::apply_activation(candidate.activation, logits);
        Slice2D s;
        s.width = W;
        s.height = H;
        s.data.assign(pred.values.begin(), pred.values.end());
        out_slices.push_back(std::move(s));
    }
    Volume vol = reassemble(out_slices, subject.gt.spacing_mm);
    SoftMask pred(vol, /*clamp=*/true);
    return pred;
}

SoftMask predict_subject(nn::UNet<float>& model, const CandidateConfig& candidate, const Subject& subject,
                         const TrainConfig& cfg) {
    const ProcessedSubject ps = preprocess_subject(subject, cfg.target_spacing, cfg.crop);
    const SoftMask on_processed = predict_processed(model, candidate, ps);
    return to_native(on_processed, ps.record);
}

}  // namespace softseg
