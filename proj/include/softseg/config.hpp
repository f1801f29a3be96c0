#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "softseg/phantom.hpp"
#include "softseg/trainer.hpp"

namespace softseg {

// Everything one experiment needs, loadable from a JSON config file. Defaults
// are a small-object segmentation profile (fine in-plane resampling, 128x128
// crops). Unknown keys anywhere in the document are rejected; see
// docs/config.schema.json.
struct RunConfig {
    std::string dataset_manifest;
    std::string split_scheme = "center";  // center | patient
    std::string task = "blob";            // blob | lesion (lesion adds LTPR/LFDR)
    TrainConfig train;                    // crop, spacing, augment, unet, optimizer budget
    obj::AWingParams awing;
    std::string dice_variant = "sum";     // sum | squared denominator
    std::vector<std::string> candidates;  // default: all five canonical rows
    int n_iterations = 1;
    uint64_t base_seed = 0;
    int jobs = 1;
    std::string output_dir = "runs";

    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

// Phantom generation spec file: centers plus shape parameters.
struct PhantomConfig {
    phantom::PhantomSpec spec;
    std::vector<phantom::CenterProfile> centers;
    int n_per_center = 10;
};

PhantomConfig phantom_config_from_json(const nlohmann::json& j);
PhantomConfig load_phantom_config(const std::string& path);

// FNV-1a over the canonical serialized config; keys experiment run stores.
uint64_t config_hash(const nlohmann::json& j);

// Default output root: SOFTSEG_OUTPUT_ROOT when set, else the current dir.
std::string output_root();

}  // namespace softseg
