#include "softseg/config.hpp"

#include <cstdlib>
#include <fstream>

namespace softseg {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_f3(const json& j, const char* key, std::array<float, 3>& out) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(std::string(key) + ": expected three numbers");
    for (int i = 0; i < 3; ++i) out[i] = a[i].get<float>();
}

void read_i2(const json& j, const char* key, std::array<int, 2>& out) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(key) + ": expected two integers");
    for (int i = 0; i < 2; ++i) out[i] = a[i].get<int>();
}

}  // namespace

void RunConfig::validate() const {
    if (dataset_manifest.empty()) throw ConfigError("dataset.manifest is required");
    if (split_scheme != "center" && split_scheme != "patient")
        throw ConfigError("dataset.split_scheme must be 'center' or 'patient'");
    if (task != "blob" && task != "lesion") throw ConfigError("dataset.task must be 'blob' or 'lesion'");
    if (dice_variant != "sum" && dice_variant != "squared")
        throw ConfigError("training.dice_variant must be 'sum' or 'squared'");
    if (n_iterations < 1) throw ConfigError("experiment.n_iterations must be >= 1");
    if (jobs < 1) throw ConfigError("experiment.jobs must be >= 1");
    if (candidates.empty()) throw ConfigError("experiment.candidates must not be empty");
    for (const auto& c : candidates) (void)candidate_by_name(c, awing);
    train.validate();
    awing.validate();
}

RunConfig run_config_from_json(const json& j) {
    reject_unknown(j, {"dataset", "preprocessing", "augmentation", "model", "training", "adaptive_wing",
                       "experiment", "output_dir"},
                   "config");
    RunConfig c;
    c.candidates.clear();
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        reject_unknown(d, {"manifest", "split_scheme", "task"}, "dataset");
        read(d, "manifest", c.dataset_manifest);
        read(d, "split_scheme", c.split_scheme);
        read(d, "task", c.task);
    }
    if (j.contains("preprocessing")) {
        const auto& p = j.at("preprocessing");
        reject_unknown(p, {"resample_mm", "crop"}, "preprocessing");
        read_f3(p, "resample_mm", c.train.target_spacing);
        read_i2(p, "crop", c.train.crop);
    }
    if (j.contains("augmentation")) {
        const auto& a = j.at("augmentation");
        reject_unknown(a, {"rotation_deg", "translate_frac", "scale_frac"}, "augmentation");
        read(a, "rotation_deg", c.train.augment.max_rotation_deg);
        read(a, "translate_frac", c.train.augment.max_translate_frac);
        read(a, "scale_frac", c.train.augment.max_scale_frac);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, {"depth", "base_filters", "dropout_rate", "in_channels"}, "model");
        read(m, "depth", c.train.unet.depth);
        read(m, "base_filters", c.train.unet.base_filters);
        read(m, "dropout_rate", c.train.unet.dropout_rate);
        read(m, "in_channels", c.train.unet.in_channels);
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        reject_unknown(t, {"batch_size", "max_epochs", "patience", "min_improvement", "lr0", "dice_variant"},
                       "training");
        read(t, "dice_variant", c.dice_variant);
        read(t, "batch_size", c.train.batch_size);
        read(t, "max_epochs", c.train.max_epochs);
        read(t, "patience", c.train.patience);
        read(t, "min_improvement", c.train.min_improvement);
        read(t, "lr0", c.train.lr0);
    }
    if (j.contains("adaptive_wing")) {
        const auto& w = j.at("adaptive_wing");
        reject_unknown(w, {"epsilon", "alpha", "theta", "omega"}, "adaptive_wing");
        read(w, "epsilon", c.awing.epsilon);
        read(w, "alpha", c.awing.alpha);
        read(w, "theta", c.awing.theta);
        read(w, "omega", c.awing.omega);
    }
    if (j.contains("experiment")) {
        const auto& e = j.at("experiment");
        reject_unknown(e, {"candidates", "n_iterations", "base_seed", "jobs"}, "experiment");
        read(e, "candidates", c.candidates);
        read(e, "n_iterations", c.n_iterations);
        read(e, "base_seed", c.base_seed);
        read(e, "jobs", c.jobs);
    }
    read(j, "output_dir", c.output_dir);
    if (c.candidates.empty())
        for (const auto& cand : canonical_candidates(c.awing)) c.candidates.push_back(cand.name);
    c.validate();
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json j;
    j["dataset"] = {{"manifest", c.dataset_manifest}, {"split_scheme", c.split_scheme}, {"task", c.task}};
    j["preprocessing"] = {
        {"resample_mm", {c.train.target_spacing[0], c.train.target_spacing[1], c.train.target_spacing[2]}},
        {"crop", {c.train.crop[0], c.train.crop[1]}}};
    j["augmentation"] = {{"rotation_deg", c.train.augment.max_rotation_deg},
                         {"translate_frac", c.train.augment.max_translate_frac},
                         {"scale_frac", c.train.augment.max_scale_frac}};
    j["model"] = {{"depth", c.train.unet.depth},
                  {"base_filters", c.train.unet.base_filters},
                  {"dropout_rate", c.train.unet.dropout_rate},
                  {"in_channels", c.train.unet.in_channels}};
    j["training"] = {{"batch_size", c.train.batch_size},
                     {"max_epochs", c.train.max_epochs},
                     {"patience", c.train.patience},
                     {"min_improvement", c.train.min_improvement},
                     {"lr0", c.train.lr0},
                     {"dice_variant", c.dice_variant}};
    j["adaptive_wing"] = {
        {"epsilon", c.awing.epsilon}, {"alpha", c.awing.alpha}, {"theta", c.awing.theta}, {"omega", c.awing.omega}};
    j["experiment"] = {{"candidates", c.candidates},
                       {"n_iterations", c.n_iterations},
                       {"base_seed", c.base_seed},
                       {"jobs", c.jobs}};
    j["output_dir"] = c.output_dir;
    return j;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

PhantomConfig phantom_config_from_json(const json& j) {
    reject_unknown(j, {"seed", "task", "n_per_center", "phantom", "centers"}, "phantom config");
    PhantomConfig c;
    read(j, "seed", c.spec.seed);
    std::string task = "blob";
    read(j, "task", task);
    if (task == "blob")
        c.spec.task = phantom::PhantomTask::SingleBlob;
    else if (task == "lesion")
        c.spec.task = phantom::PhantomTask::MultiLesion;
    else
        throw ConfigError("task must be 'blob' or 'lesion'");
    read(j, "n_per_center", c.n_per_center);
    if (j.contains("phantom")) {
        const auto& p = j.at("phantom");
        reject_unknown(p,
                       {"extent_mm", "num_slices", "min_size_mm", "max_size_mm", "min_objects", "max_objects",
                        "supersample"},
                       "phantom");
        read(p, "extent_mm", c.spec.extent_mm);
        read(p, "num_slices", c.spec.num_slices);
        read(p, "min_size_mm", c.spec.min_size_mm);
        read(p, "max_size_mm", c.spec.max_size_mm);
        read(p, "min_objects", c.spec.min_objects);
        read(p, "max_objects", c.spec.max_objects);
        read(p, "supersample", c.spec.supersample);
    }
    if (!j.contains("centers") || !j.at("centers").is_array() || j.at("centers").empty())
        throw ConfigError("centers: at least one center profile is required");
    for (const auto& cj : j.at("centers")) {
        reject_unknown(cj, {"id", "spacing_mm", "intensity_bg", "intensity_obj", "noise_std", "contrast_scale"},
                       "center");
        phantom::CenterProfile p;
        read(cj, "id", p.id);
        if (p.id.empty()) throw ConfigError("center: id is required");
        read_f3(cj, "spacing_mm", p.spacing_mm);
        read(cj, "intensity_bg", p.intensity_bg);
        read(cj, "intensity_obj", p.intensity_obj);
        read(cj, "noise_std", p.noise_std);
        read(cj, "contrast_scale", p.contrast_scale);
        p.validate();
        c.centers.push_back(p);
    }
    c.spec.validate();
    if (c.n_per_center < 1) throw ConfigError("n_per_center must be >= 1");
    return c;
}

PhantomConfig load_phantom_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open phantom spec " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("phantom spec " + path + ": " + e.what());
    }
    return phantom_config_from_json(j);
}

uint64_t config_hash(const json& j) {
    const std::string s = j.dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string output_root() {
    const char* env = std::getenv("SOFTSEG_OUTPUT_ROOT");
    return env && *env ? env : ".";
}

}  // namespace softseg
