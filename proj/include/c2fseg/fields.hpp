#pragma once

#include <torch/torch.h>

#include <vector>

#include "c2fseg/volume.hpp"

namespace c2fseg {

/// Ground-truth one-hot expansion: data is (C+1, z, y, x) float {0,1},
/// exactly one 1 across the class axis at every voxel. class_counts[c]
/// holds N_c.
struct OneHotField {
    torch::Tensor data;
    std::vector<int64_t> class_counts;

    int64_t num_classes() const { return data.size(0); }
};

/// Per-voxel class probabilities from a softmax head, (C+1, z, y, x).
/// source_net records which network produced it (1 or 2).
struct ProbabilityField {
    torch::Tensor data;
    int source_net = 1;
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
};

/// Intensity volume as a (z, y, x) float32 tensor (shares the x-fastest
/// layout, so this is a plain copy).
torch::Tensor to_tensor(const IntensityVolume& v);

/// Label volume as a (z, y, x) int64 tensor.
torch::Tensor to_tensor(const LabelVolume& v);

OneHotField one_hot(const LabelVolume& l);

/// Argmax over the class axis of a (C+1, z, y, x) probability tensor.
LabelVolume argmax_labels(const torch::Tensor& probs, const Vec3& spacing, const Vec3& origin);

}  // namespace c2fseg
