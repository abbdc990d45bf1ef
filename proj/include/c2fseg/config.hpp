#pragma once

#include <json.hpp>

#include <string>

#include "c2fseg/losses.hpp"
#include "c2fseg/networks.hpp"
#include "c2fseg/phantom.hpp"
#include "c2fseg/preprocess.hpp"
#include "c2fseg/sampler.hpp"

namespace c2fseg {

/// Full-resolution prediction settings.
struct InferenceConfig {
    Vec3 coarse_spacing{2.0, 2.0, 2.0};
    int roi_margin = 8;
    Interp prob_upsample = Interp::linear;
    int slice_chunk = 8;  // axial slices labeled per Net2 pass
};

struct StepPlan {
    int step_id = 1;
    int epochs = 50;
    int iterations_per_epoch = 4;
    std::string frozen = "none";  // net1 | net2 | none

    int64_t iterations() const { return int64_t(epochs) * iterations_per_epoch; }
};

struct TrainSchedule {
    std::vector<StepPlan> steps;
    double learning_rate = 1e-4;
    uint64_t seed = 0;
    int64_t checkpoint_every = 0;  // 0 = checkpoint at step boundaries only

    int64_t total_iterations() const;
    void validate() const;  // step 1 freezes net2, step 4 freezes net1
    static TrainSchedule desk_default();
    static TrainSchedule paper_default();  // 4 x 200 x 16 = 12800 iterations
};

/// How the trainer obtains its dataset.
struct DataConfig {
    std::string source = "phantom";  // phantom | manifest
    std::string manifest;            // for source = manifest
    int num_train = 1;
    int num_holdout = 0;
    uint64_t seed_base = 100;
};

struct ExperimentConfig {
    PhantomConfig phantom;
    DataConfig data;
    LossConfig loss;
    SamplerConfig sampler;
    Net1Config net1;
    Net2Config net2;
    TrainSchedule schedule;
    InferenceConfig inference;

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace c2fseg
