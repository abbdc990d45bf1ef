#pragma once

#include <string>
#include <vector>

#include "c2fseg/volume.hpp"

namespace c2fseg {

/// Per-class evaluation of hard label volumes. ASD is the symmetric
/// average surface distance in physical mm; NaN is the undefined
/// sentinel (exactly one of the two masks empty).
struct ClassMetrics {
    double dice = 0.0;
    double jaccard = 0.0;
    double asd_mm = 0.0;
};

struct MetricReport {
    std::vector<int> classes;  // foreground classes 1..C
    std::vector<ClassMetrics> per_class;
    ClassMetrics aggregate;  // mean over foreground classes (ASD over defined values)
};

double binary_dice(const LabelVolume& pred, const LabelVolume& truth, int cls);
double binary_jaccard(const LabelVolume& pred, const LabelVolume& truth, int cls);

/// Symmetric mean over both 6-connectivity surface voxel sets of the
/// distance to the nearest voxel of the other surface. Both masks
/// empty -> 0; exactly one empty -> NaN.
double average_surface_distance(const LabelVolume& pred, const LabelVolume& truth, int cls);

MetricReport evaluate_volume(const LabelVolume& pred, const LabelVolume& truth);

/// Fixed-header CSV: class,dice,jaccard,asd_mm with a trailing mean row.
std::string to_csv(const MetricReport& report);

/// Squared Euclidean distance transform of a binary site mask, exact,
/// with per-axis spacing in mm. Exposed for the surface-distance tests.
std::vector<double> squared_distance_transform(const std::vector<uint8_t>& sites,
                                               const Dims3& dims, const Vec3& spacing);

}  // namespace c2fseg
