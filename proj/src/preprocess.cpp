#include "c2fseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace c2fseg {

Interp interp_from_string(const std::string& s) {
    if (s == "linear") return Interp::linear;
    if (s == "nearest") return Interp::nearest;
    if (s == "bspline2") return Interp::bspline2;
    throw std::invalid_argument("unknown interpolation mode: " + s);
}

std::string to_string(Interp m) {
    switch (m) {
        case Interp::linear: return "linear";
        case Interp::nearest: return "nearest";
        default: return "bspline2";
    }
}

IntensityVolume rescale_intensity(const IntensityVolume& v) {
    if (v.voxel_count() == 0) throw std::invalid_argument("rescale_intensity: empty volume");
    const auto [mn_it, mx_it] = std::minmax_element(v.data.begin(), v.data.end());
    const float mn = *mn_it, mx = *mx_it;
    IntensityVolume out = v;
    if (mx == mn) {
        std::fill(out.data.begin(), out.data.end(), 0.0f);
        return out;
    }
    const float scale = 2.0f / (mx - mn);
    for (auto& x : out.data) x = (x - mn) * scale - 1.0f;
    return out;
}

namespace {

Dims3 output_dims(const Dims3& in_dims, const Vec3& in_sp, const Vec3& out_sp) {
    Dims3 d;
    for (int a = 0; a < 3; ++a) {
        if (!(out_sp[a] > 0.0))
            throw std::invalid_argument("resample: target spacing must be positive");
        d[a] = std::max<int64_t>(1, llround(in_dims[a] * in_sp[a] / out_sp[a]));
    }
    return d;
}

inline int64_t clampi(int64_t x, int64_t lo, int64_t hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

float sample_nearest(const IntensityVolume& v, double ux, double uy, double uz) {
    const int64_t x = clampi(llround(ux), 0, v.dims[0] - 1);
    const int64_t y = clampi(llround(uy), 0, v.dims[1] - 1);
    const int64_t z = clampi(llround(uz), 0, v.dims[2] - 1);
    return v.at(x, y, z);
}

float sample_linear(const IntensityVolume& v, double ux, double uy, double uz) {
    const int64_t x0 = clampi(static_cast<int64_t>(std::floor(ux)), 0, v.dims[0] - 1);
    const int64_t y0 = clampi(static_cast<int64_t>(std::floor(uy)), 0, v.dims[1] - 1);
    const int64_t z0 = clampi(static_cast<int64_t>(std::floor(uz)), 0, v.dims[2] - 1);
    const int64_t x1 = clampi(x0 + 1, 0, v.dims[0] - 1);
    const int64_t y1 = clampi(y0 + 1, 0, v.dims[1] - 1);
    const int64_t z1 = clampi(z0 + 1, 0, v.dims[2] - 1);
    const double fx = std::clamp(ux - x0, 0.0, 1.0);
    const double fy = std::clamp(uy - y0, 0.0, 1.0);
    const double fz = std::clamp(uz - z0, 0.0, 1.0);
    auto lerp = [](double a, double b, double f) { return a + (b - a) * f; };
    const double c00 = lerp(v.at(x0, y0, z0), v.at(x1, y0, z0), fx);
    const double c10 = lerp(v.at(x0, y1, z0), v.at(x1, y1, z0), fx);
    const double c01 = lerp(v.at(x0, y0, z1), v.at(x1, y0, z1), fx);
    const double c11 = lerp(v.at(x0, y1, z1), v.at(x1, y1, z1), fx);
    return static_cast<float>(lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz));
}

// Quadratic B-spline prefilter (pole 2*sqrt(2)-3), mirror boundaries.
// Turns samples into spline coefficients so that evaluation interpolates.
void bspline2_prefilter_line(std::vector<double>& c) {
    const double z1 = std::sqrt(8.0) - 3.0;
    const size_t n = c.size();
    if (n < 2) return;
    const double lambda = (1.0 - z1) * (1.0 - 1.0 / z1);
    for (auto& x : c) x *= lambda;
    // causal init: truncated sum of the mirrored signal
    double sum = c[0];
    double zn = z1;
    const int horizon = std::min<size_t>(n, static_cast<size_t>(std::ceil(std::log(1e-12) / std::log(std::abs(z1)))));
    for (int k = 1; k < horizon; ++k) {
        sum += zn * c[static_cast<size_t>(k)];
        zn *= z1;
    }
    c[0] = sum;
    for (size_t i = 1; i < n; ++i) c[i] += z1 * c[i - 1];
    // anticausal init
    c[n - 1] = (z1 / (z1 * z1 - 1.0)) * (z1 * c[n - 2] + c[n - 1]);
    for (size_t i = n - 1; i-- > 0;) c[i] = z1 * (c[i + 1] - c[i]);
}

struct Bspline2Field {
    Dims3 dims;
    std::vector<double> coef;

    explicit Bspline2Field(const IntensityVolume& v) : dims(v.dims) {
        coef.assign(v.data.begin(), v.data.end());
        std::vector<double> line;
        // x lines
        line.resize(static_cast<size_t>(dims[0]));
        for (int64_t z = 0; z < dims[2]; ++z)
            for (int64_t y = 0; y < dims[1]; ++y) {
                const size_t base = static_cast<size_t>(v.index(0, y, z));
                for (int64_t x = 0; x < dims[0]; ++x) line[x] = coef[base + x];
                bspline2_prefilter_line(line);
                for (int64_t x = 0; x < dims[0]; ++x) coef[base + x] = line[x];
            }
        // y lines
        line.resize(static_cast<size_t>(dims[1]));
        for (int64_t z = 0; z < dims[2]; ++z)
            for (int64_t x = 0; x < dims[0]; ++x) {
                for (int64_t y = 0; y < dims[1]; ++y) line[y] = coef[v.index(x, y, z)];
                bspline2_prefilter_line(line);
                for (int64_t y = 0; y < dims[1]; ++y) coef[v.index(x, y, z)] = line[y];
            }
        // z lines
        line.resize(static_cast<size_t>(dims[2]));
        for (int64_t y = 0; y < dims[1]; ++y)
            for (int64_t x = 0; x < dims[0]; ++x) {
                for (int64_t z = 0; z < dims[2]; ++z) line[z] = coef[v.index(x, y, z)];
                bspline2_prefilter_line(line);
                for (int64_t z = 0; z < dims[2]; ++z) coef[v.index(x, y, z)] = line[z];
            }
    }

    // 3-tap weights of the quadratic B-spline around u.
    static void weights(double u, int64_t& base, double w[3]) {
        base = static_cast<int64_t>(std::floor(u + 0.5)) - 1;
        const double t = u - (base + 1);
        w[0] = 0.5 * (0.5 - t) * (0.5 - t);
        w[2] = 0.5 * (0.5 + t) * (0.5 + t);
        w[1] = 1.0 - w[0] - w[2];
    }

    // mirror index into [0, n)
    static int64_t mirror(int64_t i, int64_t n) {
        if (n == 1) return 0;
        const int64_t period = 2 * (n - 1);
        i = std::abs(i) % period;
        return i < n ? i : period - i;
    }

    double eval(double ux, double uy, double uz) const {
        int64_t bx, by, bz;
        double wx[3], wy[3], wz[3];
        weights(ux, bx, wx);
        weights(uy, by, wy);
        weights(uz, bz, wz);
        double acc = 0.0;
        for (int kz = 0; kz < 3; ++kz) {
            const int64_t z = mirror(bz + kz, dims[2]);
            for (int ky = 0; ky < 3; ++ky) {
                const int64_t y = mirror(by + ky, dims[1]);
                const double wyz = wy[ky] * wz[kz];
                for (int kx = 0; kx < 3; ++kx) {
                    const int64_t x = mirror(bx + kx, dims[0]);
                    acc += coef[static_cast<size_t>(x + dims[0] * (y + dims[1] * z))] * wx[kx] * wyz;
                }
            }
        }
        return acc;
    }
};

IntensityVolume resample_grid(const IntensityVolume& v, const Dims3& out_dims,
                              const Vec3& out_spacing, Interp mode) {
    if (out_dims == v.dims && out_spacing == v.spacing) return v;
    IntensityVolume out(out_dims, out_spacing, v.origin);
    const Vec3 step = {out_spacing[0] / v.spacing[0], out_spacing[1] / v.spacing[1],
                       out_spacing[2] / v.spacing[2]};
    std::unique_ptr<Bspline2Field> field;
    if (mode == Interp::bspline2) field = std::make_unique<Bspline2Field>(v);
    for (int64_t z = 0; z < out_dims[2]; ++z) {
        const double uz = z * step[2];
        for (int64_t y = 0; y < out_dims[1]; ++y) {
            const double uy = y * step[1];
            for (int64_t x = 0; x < out_dims[0]; ++x) {
                const double ux = x * step[0];
                float val;
                switch (mode) {
                    case Interp::nearest: val = sample_nearest(v, ux, uy, uz); break;
                    case Interp::linear: val = sample_linear(v, ux, uy, uz); break;
                    default: val = static_cast<float>(field->eval(ux, uy, uz)); break;
                }
                out.at(x, y, z) = val;
            }
        }
    }
    return out;
}

}  // namespace

IntensityVolume resample(const IntensityVolume& v, const Vec3& target_spacing, Interp mode) {
    return resample_grid(v, output_dims(v.dims, v.spacing, target_spacing), target_spacing, mode);
}

IntensityVolume resample_to_dims(const IntensityVolume& v, const Dims3& target_dims, Interp mode) {
    Vec3 sp;
    for (int a = 0; a < 3; ++a) sp[a] = v.spacing[a] * static_cast<double>(v.dims[a]) / target_dims[a];
    return resample_grid(v, target_dims, sp, mode);
}

LabelVolume resample(const LabelVolume& v, const Vec3& target_spacing, Interp mode) {
    if (mode != Interp::nearest)
        throw std::invalid_argument("label volumes must be resampled with nearest interpolation");
    const Dims3 out_dims = output_dims(v.dims, v.spacing, target_spacing);
    LabelVolume out(out_dims, v.num_classes, target_spacing, v.origin);
    const Vec3 step = {target_spacing[0] / v.spacing[0], target_spacing[1] / v.spacing[1],
                       target_spacing[2] / v.spacing[2]};
    for (int64_t z = 0; z < out_dims[2]; ++z)
        for (int64_t y = 0; y < out_dims[1]; ++y)
            for (int64_t x = 0; x < out_dims[0]; ++x) {
                const int64_t sx = clampi(llround(x * step[0]), 0, v.dims[0] - 1);
                const int64_t sy = clampi(llround(y * step[1]), 0, v.dims[1] - 1);
                const int64_t sz = clampi(llround(z * step[2]), 0, v.dims[2] - 1);
                out.at(x, y, z) = v.at(sx, sy, sz);
            }
    return out;
}

}  // namespace c2fseg
