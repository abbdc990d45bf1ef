#pragma once

#include <torch/torch.h>

#include <map>
#include <string>

#include "c2fseg/config.hpp"

namespace c2fseg {

/// Self-describing, versioned checkpoint: a JSON block holding the full
/// experiment configuration plus named float32 parameter tensors for
/// both networks ("net1.*" / "net2.*").
struct Checkpoint {
    int version = 1;
    ExperimentConfig config;
    int completed_step = 0;
    std::map<std::string, torch::Tensor> tensors;
};

Checkpoint make_checkpoint(const ExperimentConfig& cfg, int completed_step, Net1 net1, Net2 net2);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Nets rebuilt from a checkpoint's config with its parameters loaded.
struct TrainedModel {
    ExperimentConfig config;
    int completed_step = 0;
    Net1 net1{nullptr};
    Net2 net2{nullptr};
};

TrainedModel restore_model(const Checkpoint& ckpt);
TrainedModel load_model(const std::string& path);

/// FNV-1a hash over the raw bytes of all parameters (freeze audits).
uint64_t parameter_checksum(const torch::nn::Module& m);

}  // namespace c2fseg
