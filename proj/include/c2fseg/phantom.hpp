#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "c2fseg/volume.hpp"

namespace c2fseg {

/// Deterministic synthetic multi-class volume: C nested ellipsoidal
/// structures with distinct mean intensities on a darker background.
struct PhantomConfig {
    Dims3 shape{64, 64, 64};
    Vec3 spacing{1.0, 1.0, 1.0};
    int num_foreground_classes = 4;
    double noise_sigma = 0.05;
    uint64_t seed = 0;
    double structure_scale = 0.8;  // outer ellipsoid radii relative to half-extent

    void validate() const;
};

std::pair<IntensityVolume, LabelVolume> generate_phantom(const PhantomConfig& cfg);

/// n phantoms with seeds seed_base .. seed_base+n-1.
std::vector<std::pair<IntensityVolume, LabelVolume>> generate_dataset(const PhantomConfig& cfg,
                                                                      int n, uint64_t seed_base);

/// Plain-text key-value manifest describing a written dataset.
struct ManifestEntry {
    std::string image_path;
    std::string label_path;
    uint64_t seed = 0;
    std::vector<int64_t> class_counts;
};

void write_manifest(const std::string& path, int num_classes,
                    const std::vector<ManifestEntry>& entries);
std::pair<int, std::vector<ManifestEntry>> read_manifest(const std::string& path);

}  // namespace c2fseg
