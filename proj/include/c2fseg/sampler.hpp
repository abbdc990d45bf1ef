#pragma once

#include <torch/torch.h>

#include <optional>
#include <utility>
#include <vector>

#include "c2fseg/rng.hpp"
#include "c2fseg/volume.hpp"

namespace c2fseg {

struct AugmentConfig {
    bool enabled = true;
    double rotation_deg_max = 10.0;
    double translation_vox_max = 5.0;
    double shear_max = 0.1;
    std::array<double, 2> scale_range{0.9, 1.1};
    double flip_axes_prob = 0.5;
    int elastic_control_grid = 4;
    double elastic_sigma = 1.0;  // displacement std in voxels

    void validate() const;
};

struct SamplerConfig {
    std::vector<int64_t> subvolume_sizes{16, 32, 48};
    int volumes_per_batch = 2;
    uint64_t rng_seed = 0;
    AugmentConfig augmentation;

    void validate() const;  // every size >= 8 and even
};

/// Per-class flat voxel index lists for one label volume; backs the
/// hierarchical class-balanced center sampling.
class ClassVoxelIndex {
public:
    explicit ClassVoxelIndex(const LabelVolume& labels);

    /// Uniform class over present classes, uniform voxel within the class.
    std::pair<int, Dims3> sample_center(Rng& rng) const;

    const std::vector<int>& present_classes() const { return present_; }

private:
    Dims3 dims_;
    std::vector<std::vector<int64_t>> voxels_;  // per class
    std::vector<int> present_;
};

std::pair<int, Dims3> sample_center(const LabelVolume& labels, Rng& rng);

/// Patch of `size` voxels per axis centered on `center` (out-of-bounds
/// regions padded: intensity -1, label 0). The patch voxel at size/2 per
/// axis is the center voxel.
std::pair<IntensityVolume, LabelVolume> extract_subvolume(const IntensityVolume& iv,
                                                          const LabelVolume& lv,
                                                          const Dims3& center, const Dims3& size);

/// One random affine (rotation, translation, shear, scale, flips) plus an
/// optional elastic displacement field, applied to both patches; intensity
/// warped linearly, labels nearest.
std::pair<IntensityVolume, LabelVolume> augment(const IntensityVolume& iv, const LabelVolume& lv,
                                                const AugmentConfig& cfg, Rng& rng);

/// One dataset volume with cached per-class voxel lists and an optional
/// precomputed Net1 label channel (native grid, used by step-4 batches).
struct TrainingSample {
    IntensityVolume image;  // already rescaled to [-1, 1]
    LabelVolume labels;
    std::optional<Volume<uint8_t>> roi_channel;
    std::shared_ptr<ClassVoxelIndex> index;
};

struct TrainingSet {
    std::vector<TrainingSample> samples;
    int num_classes = 0;
};

TrainingSet make_training_set(std::vector<std::pair<IntensityVolume, LabelVolume>> pairs);

/// Inputs/targets for one optimization step. Tensors are (N, C, z, y, x);
/// targets are one-hot. Padded regions carry intensity -1 / label 0.
struct Batch {
    int step = 0;
    torch::Tensor intensity;    // (N, 1, z, y, x)
    torch::Tensor target;       // (N, C+1, z, y, x); z = 1 for step 4
    torch::Tensor roi_channel;  // (N, 1, K, y, x), step 4 only
};

/// step 1: one full volume resampled to coarse_spacing (padded to the
///         Net1 divisibility); steps 2-3: class-balanced subvolumes with
///         per-axis sizes drawn from the configured set; step 4: K full
///         axial slices around a sampled center slice (edge-replicated
///         at the volume ends), target = the central slice.
Batch make_batch(const TrainingSet& set, int step, const SamplerConfig& cfg, Rng& rng,
                 const Vec3& coarse_spacing, int K, int64_t divisibility = 16);

}  // namespace c2fseg
