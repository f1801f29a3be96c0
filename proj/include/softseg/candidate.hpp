#pragma once

#include <string>
#include <vector>

#include "softseg/objective.hpp"

namespace softseg {

// One (ground-truth binarization, final activation, loss) training approach.
struct CandidateConfig {
    std::string name;
    bool binarize_after_aug = true;
    obj::ActivationKind activation = obj::ActivationKind::Sigmoid;
    obj::LossKind loss = obj::LossKind::Dice;
    obj::AWingParams awing;
    obj::DiceVariant dice_variant = obj::DiceVariant::SumDenominator;
};

// The five canonical candidates, conventional first, fully-soft last.
std::vector<CandidateConfig> canonical_candidates(const obj::AWingParams& awing = {});

// Lookup by canonical name; throws listing the valid names.
CandidateConfig candidate_by_name(const std::string& name, const obj::AWingParams& awing = {});

}  // namespace softseg
