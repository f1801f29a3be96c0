#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softseg/unet.hpp"

namespace softseg::nn {

// Flat checkpoint container: a text header line (JSON: unet config + seed),
// then named arrays as (name, dims, raw little-endian float32).
void save_checkpoint(UNet<float>& model, uint64_t seed, const std::string& path);

struct LoadedCheckpoint {
    UNetConfig config;
    uint64_t seed = 0;
    // model restored with saved weights and buffers
    std::unique_ptr<UNet<float>> model;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace softseg::nn
