#pragma once

#include <string>

#include "c2fseg/volume.hpp"

namespace c2fseg {

/// Minimal NIfTI-1 reader/writer for .nii and .nii.gz single files.
/// Intensities are stored as float32, labels as uint8. Spacing comes
/// from pixdim, origin from the sform (qoffset fallback). Little-endian
/// files only.

IntensityVolume load_intensity(const std::string& path);

/// Load a file flagged as a label map. Values must be non-negative
/// integers below num_classes_declared when that is > 0.
LabelVolume load_labels(const std::string& path, int num_classes_declared = 0);

void save_volume(const IntensityVolume& v, const std::string& path);
void save_volume(const LabelVolume& v, const std::string& path);

}  // namespace c2fseg
