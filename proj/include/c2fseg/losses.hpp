#pragma once

#include <torch/torch.h>

#include <map>
#include <optional>
#include <string>

namespace c2fseg {

enum class WeightingMode { literal, normalized_inverse_count, uniform };
enum class RoiMode { literal, unit };

WeightingMode weighting_mode_from_string(const std::string& s);
RoiMode roi_mode_from_string(const std::string& s);

struct LossConfig {
    double epsilon = 1.0;
    WeightingMode weighting_mode = WeightingMode::normalized_inverse_count;
    RoiMode roi_mode = RoiMode::unit;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("loss epsilon must be > 0");
    }
};

/// All loss inputs are probability/one-hot tensor pairs of equal shape.
/// Class axis is dim 0 for (C, ...) tensors and dim 1 for batched
/// (N, C, ...) tensors; sums run over every voxel of every batch item.

/// Per-class soft Dice score S_c = (2*sum t*p + eps) / (sum (t+p) + eps).
torch::Tensor soft_dice_per_class(const torch::Tensor& p, const torch::Tensor& t, double epsilon);

/// Weighted multi-class Dice loss over all C+1 classes.
///  literal:    1 - sum_c S_c / N_c, classes with N_c = 0 skipped
///  normalized: 1 - sum_c w_c S_c, w_c = (1/N_c) / sum over present classes,
///              classes with N_c = 0 excluded
///  uniform:    1 - sum_c S_c / (C+1) over all classes
torch::Tensor multiclass_dice_loss(const torch::Tensor& p, const torch::Tensor& t,
                                   const LossConfig& cfg);

/// Reversed-label foreground score
/// S_ROI = (2*sum (1-t0)(1-p0) + eps) / (sum (2 - t0 - p0) + eps).
torch::Tensor foreground_score(const torch::Tensor& p, const torch::Tensor& t,
                               const LossConfig& cfg);

/// unit: 1 - S_ROI; literal: 1 - S_ROI / N_0.
torch::Tensor foreground_loss(const torch::Tensor& p, const torch::Tensor& t,
                              const LossConfig& cfg);

/// Per-step composition:
///   step 1: l_roi            step 2: l_roi + l1
///   step 3: l1 + l2          step 4: l2
/// p1/t1 live on Net1's grid, p2/t2 on Net2's output slices.
struct StepLossResult {
    torch::Tensor total;
    std::map<std::string, double> terms;  // "l_roi", "l1", "l2" as present
};

StepLossResult step_loss(int step, const std::optional<torch::Tensor>& p1,
                         const std::optional<torch::Tensor>& p2,
                         const std::optional<torch::Tensor>& t1,
                         const std::optional<torch::Tensor>& t2, const LossConfig& cfg);

}  // namespace c2fseg
