#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2fseg {

using Dims3 = std::array<int64_t, 3>;
using Vec3 = std::array<double, 3>;

/// 3D scalar grid with physical geometry. Data is stored x-fastest
/// (index = x + nx*(y + ny*z)), matching the NIfTI on-disk order.
/// Values are immutable by convention once a volume is built and shared.
template <typename T>
struct Volume {
    Dims3 dims{0, 0, 0};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    std::vector<T> data;

    Volume() = default;
    Volume(Dims3 d, Vec3 s = {1.0, 1.0, 1.0}, Vec3 o = {0.0, 0.0, 0.0}, T fill = T{})
        : dims(d), spacing(s), origin(o), data(static_cast<size_t>(d[0] * d[1] * d[2]), fill) {
        for (double sp : spacing)
            if (!(sp > 0.0)) throw std::invalid_argument("volume spacing must be positive");
    }

    int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    int64_t index(int64_t x, int64_t y, int64_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }

    T& at(int64_t x, int64_t y, int64_t z) { return data[static_cast<size_t>(index(x, y, z))]; }
    const T& at(int64_t x, int64_t y, int64_t z) const {
        return data[static_cast<size_t>(index(x, y, z))];
    }

    bool in_bounds(int64_t x, int64_t y, int64_t z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }

    bool same_grid(const Volume& other) const {
        return dims == other.dims && spacing == other.spacing;
    }
};

using IntensityVolume = Volume<float>;

/// Integer class labels in {0,...,C}; class 0 is background.
/// num_classes holds C+1.
struct LabelVolume : Volume<uint8_t> {
    int num_classes = 0;

    LabelVolume() = default;
    LabelVolume(Dims3 d, int nc, Vec3 s = {1.0, 1.0, 1.0}, Vec3 o = {0.0, 0.0, 0.0})
        : Volume<uint8_t>(d, s, o, 0), num_classes(nc) {}

    void validate_labels() const {
        for (uint8_t v : data)
            if (v >= num_classes)
                throw std::runtime_error("label value " + std::to_string(int(v)) +
                                         " out of range for num_classes=" +
                                         std::to_string(num_classes));
    }
};

/// Half-open per-axis index ranges [lo, hi).
struct Box3 {
    Dims3 lo{0, 0, 0};
    Dims3 hi{0, 0, 0};

    Dims3 extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
    int64_t volume() const {
        auto e = extent();
        return e[0] * e[1] * e[2];
    }
    bool contains(const Box3& inner) const {
        for (int a = 0; a < 3; ++a)
            if (inner.lo[a] < lo[a] || inner.hi[a] > hi[a]) return false;
        return true;
    }
};

/// Copy the in-bounds part of `box` and fill the rest with `pad_value`.
/// The box may extend past the volume on any face; output shape equals
/// the box extent. Spacing is inherited, origin shifts with the box.
template <typename T>
Volume<T> crop_or_pad(const Volume<T>& v, const Box3& box, T pad_value) {
    const Dims3 ext = box.extent();
    for (int a = 0; a < 3; ++a)
        if (ext[a] <= 0) throw std::invalid_argument("crop_or_pad: box extent must be positive");
    Volume<T> out(ext, v.spacing,
                  {v.origin[0] + box.lo[0] * v.spacing[0], v.origin[1] + box.lo[1] * v.spacing[1],
                   v.origin[2] + box.lo[2] * v.spacing[2]},
                  pad_value);
    const int64_t x0 = std::max<int64_t>(box.lo[0], 0), x1 = std::min<int64_t>(box.hi[0], v.dims[0]);
    const int64_t y0 = std::max<int64_t>(box.lo[1], 0), y1 = std::min<int64_t>(box.hi[1], v.dims[1]);
    const int64_t z0 = std::max<int64_t>(box.lo[2], 0), z1 = std::min<int64_t>(box.hi[2], v.dims[2]);
    for (int64_t z = z0; z < z1; ++z)
        for (int64_t y = y0; y < y1; ++y)
            for (int64_t x = x0; x < x1; ++x)
                out.at(x - box.lo[0], y - box.lo[1], z - box.lo[2]) = v.at(x, y, z);
    return out;
}

inline LabelVolume crop_or_pad(const LabelVolume& v, const Box3& box) {
    LabelVolume out;
    static_cast<Volume<uint8_t>&>(out) = crop_or_pad<uint8_t>(v, box, uint8_t{0});
    out.num_classes = v.num_classes;
    return out;
}

inline IntensityVolume crop_or_pad(const IntensityVolume& v, const Box3& box) {
    return crop_or_pad<float>(v, box, -1.0f);
}

}  // namespace c2fseg
