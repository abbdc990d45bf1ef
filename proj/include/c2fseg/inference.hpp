#pragma once

#include "c2fseg/checkpoint.hpp"
#include "c2fseg/fields.hpp"

namespace c2fseg {

/// Coarse pass: resample the (already [-1,1] rescaled) intensity volume
/// to the coarse grid, pad to the Net1 divisibility, run Net1, upsample
/// the per-class probabilities back to the native grid and renormalize.
ProbabilityField predict_coarse(const IntensityVolume& rescaled, Net1 net1,
                                const InferenceConfig& icfg);

/// Fine pass: for every axial slice inside the ROI, assemble the K-slice
/// two-channel neighborhood (edge-replicated along z) and label the slice
/// with Net2. Voxels outside the ROI are background. The output is the
/// native grid; no interpolation touches the emitted labels.
LabelVolume predict_fine(const IntensityVolume& rescaled, const ProbabilityField& p1_native,
                         Net2 net2, const Box3& roi, const InferenceConfig& icfg);

/// Full pipeline on a raw intensity volume (applies the [-1,1] rescale):
/// predict_coarse -> dynamic_tile -> predict_fine.
LabelVolume predict(const IntensityVolume& raw, const TrainedModel& model);

}  // namespace c2fseg
