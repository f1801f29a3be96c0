#pragma once

#include <memory>
#include <string>
#include <vector>

#include "softseg/augment.hpp"
#include "softseg/candidate.hpp"
#include "softseg/unet.hpp"
#include "softseg/volio.hpp"

namespace softseg {

struct TrainConfig {
    int batch_size = 8;
    int max_epochs = 200;
    int patience = 50;
    double min_improvement = 0.001;
    double lr0 = 0.001;
    nn::UNetConfig unet;
    std::array<int, 2> crop{128, 128};
    std::array<float, 3> target_spacing{0.25f, 0.25f, 2.f};
    aug::AugmentRanges augment;
    uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (patience < 1 || patience > max_epochs) throw ConfigError("patience must be in [1, max_epochs]");
        if (lr0 <= 0) throw ConfigError("lr0 must be positive");
        unet.validate();
    }
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss, lr;
    int stop_epoch = 0;  // completed epochs
    std::string stop_reason;  // "budget" | "early_stop" | "diverged"
    int best_epoch = -1;
    double best_val_loss = 0;
    bool converged = false;

    void save_csv(const std::string& path) const;
};

struct TrainResult {
    std::unique_ptr<nn::UNet<float>> model;  // best-validation weights
    TrainHistory history;
};

// One candidate training run over preprocessed subjects. All randomness comes
// from cfg.seed through per-concern streams (init, shuffle, augment, dropout),
// so two candidates sharing a seed see identical data order and noise; the
// hard/soft switch changes nothing but finalize_mask.
TrainResult train(const std::vector<ProcessedSubject>& train_subjects,
                  const std::vector<ProcessedSubject>& val_subjects, const CandidateConfig& candidate,
                  const TrainConfig& cfg);

// Slice-wise inference on an already-preprocessed subject; prediction on the
// processed grid, activation applied per slice.
SoftMask predict_processed(nn::UNet<float>& model, const CandidateConfig& candidate,
                           const ProcessedSubject& subject);

// Full path: preprocess, slice-wise inference, map back to the native grid.
SoftMask predict_subject(nn::UNet<float>& model, const CandidateConfig& candidate, const Subject& subject,
                         const TrainConfig& cfg);

}  // namespace softseg
