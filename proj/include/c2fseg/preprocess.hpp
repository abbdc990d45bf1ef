#pragma once

#include "c2fseg/volume.hpp"

namespace c2fseg {

enum class Interp { linear, nearest, bspline2 };

Interp interp_from_string(const std::string& s);
std::string to_string(Interp m);

/// Affine rescale to [-1, 1]. A constant volume maps to all zeros.
IntensityVolume rescale_intensity(const IntensityVolume& v);

/// Resample to target_spacing. Output dims per axis are
/// max(1, round(in_dim * in_spacing / target_spacing)).
IntensityVolume resample(const IntensityVolume& v, const Vec3& target_spacing,
                         Interp mode = Interp::linear);

/// Labels must use nearest interpolation.
LabelVolume resample(const LabelVolume& v, const Vec3& target_spacing,
                     Interp mode = Interp::nearest);

/// Resample a whole stack of channels (e.g. per-class probabilities) onto
/// a grid with the given dims, channel by channel. `channels` is a list
/// of equally-shaped volumes sharing geometry.
IntensityVolume resample_to_dims(const IntensityVolume& v, const Dims3& target_dims,
                                 Interp mode);

}  // namespace c2fseg
