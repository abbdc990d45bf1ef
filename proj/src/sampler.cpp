#include "c2fseg/sampler.hpp"

#include <cmath>

#include "c2fseg/fields.hpp"
#include "c2fseg/preprocess.hpp"

namespace c2fseg {

void AugmentConfig::validate() const {
    if (rotation_deg_max < 0 || translation_vox_max < 0 || shear_max < 0 || elastic_sigma < 0 ||
        flip_axes_prob < 0 || flip_axes_prob > 1)
        throw std::invalid_argument("augmentation ranges must be non-negative");
    if (!(scale_range[0] > 0 && scale_range[1] < 2 && scale_range[0] <= scale_range[1]))
        throw std::invalid_argument("scale_range must lie within (0, 2)");
    if (elastic_control_grid < 2 && elastic_sigma > 0)
        throw std::invalid_argument("elastic control grid needs at least 2 points per axis");
}

void SamplerConfig::validate() const {
    if (subvolume_sizes.empty()) throw std::invalid_argument("subvolume_sizes must be nonempty");
    for (int64_t s : subvolume_sizes)
        if (s < 8 || s % 2 != 0)
            throw std::invalid_argument("every subvolume size must be >= 8 and even");
    if (volumes_per_batch < 1) throw std::invalid_argument("volumes_per_batch must be >= 1");
    augmentation.validate();
}

ClassVoxelIndex::ClassVoxelIndex(const LabelVolume& labels) : dims_(labels.dims) {
    if (labels.voxel_count() == 0) throw std::invalid_argument("empty label volume");
    voxels_.resize(static_cast<size_t>(labels.num_classes));
    for (int64_t i = 0; i < labels.voxel_count(); ++i) {
        const uint8_t c = labels.data[static_cast<size_t>(i)];
        if (c >= labels.num_classes)
            throw std::runtime_error("label out of range in ClassVoxelIndex");
        voxels_[c].push_back(i);
    }
    for (size_t c = 0; c < voxels_.size(); ++c)
        if (!voxels_[c].empty()) present_.push_back(static_cast<int>(c));
}

std::pair<int, Dims3> ClassVoxelIndex::sample_center(Rng& rng) const {
    const int cls = present_[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(present_.size())))];
    const auto& list = voxels_[static_cast<size_t>(cls)];
    const int64_t flat = list[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(list.size())))];
    Dims3 v;
    v[0] = flat % dims_[0];
    v[1] = (flat / dims_[0]) % dims_[1];
    v[2] = flat / (dims_[0] * dims_[1]);
    return {cls, v};
}

std::pair<int, Dims3> sample_center(const LabelVolume& labels, Rng& rng) {
    return ClassVoxelIndex(labels).sample_center(rng);
}

std::pair<IntensityVolume, LabelVolume> extract_subvolume(const IntensityVolume& iv,
                                                          const LabelVolume& lv,
                                                          const Dims3& center, const Dims3& size) {
    Box3 box;
    for (int a = 0; a < 3; ++a) {
        box.lo[a] = center[a] - size[a] / 2;
        box.hi[a] = box.lo[a] + size[a];
    }
    return {crop_or_pad(iv, box), crop_or_pad(lv, box)};
}

namespace {

struct Affine {
    double m[3][3];
    Vec3 t;
};

Affine identity_affine() {
    Affine a{};
    a.m[0][0] = a.m[1][1] = a.m[2][2] = 1.0;
    return a;
}

Affine compose(const Affine& a, const Affine& b) {
    // (a ∘ b)(x) = a.m * (b.m * x + b.t) + a.t
    Affine r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r.m[i][j] += a.m[i][k] * b.m[k][j];
    for (int i = 0; i < 3; ++i) {
        r.t[i] = a.t[i];
        for (int k = 0; k < 3; ++k) r.t[i] += a.m[i][k] * b.t[k];
    }
    return r;
}

Affine rotation_affine(double ax, double ay, double az) {
    const double cx = std::cos(ax), sx = std::sin(ax);
    const double cy = std::cos(ay), sy = std::sin(ay);
    const double cz = std::cos(az), sz = std::sin(az);
    Affine rx = identity_affine(), ry = identity_affine(), rz = identity_affine();
    rx.m[1][1] = cx; rx.m[1][2] = -sx; rx.m[2][1] = sx; rx.m[2][2] = cx;
    ry.m[0][0] = cy; ry.m[0][2] = sy;  ry.m[2][0] = -sy; ry.m[2][2] = cy;
    rz.m[0][0] = cz; rz.m[0][1] = -sz; rz.m[1][0] = sz;  rz.m[1][1] = cz;
    return compose(rz, compose(ry, rx));
}

float sample_intensity_linear(const IntensityVolume& v, double x, double y, double z, float pad) {
    const int64_t x0 = static_cast<int64_t>(std::floor(x));
    const int64_t y0 = static_cast<int64_t>(std::floor(y));
    const int64_t z0 = static_cast<int64_t>(std::floor(z));
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                if (w == 0.0) continue;
                const int64_t xx = x0 + dx, yy = y0 + dy, zz = z0 + dz;
                const double val = v.in_bounds(xx, yy, zz) ? v.at(xx, yy, zz) : pad;
                acc += w * val;
            }
    return static_cast<float>(acc);
}

uint8_t sample_label_nearest(const LabelVolume& v, double x, double y, double z) {
    const int64_t xx = llround(x), yy = llround(y), zz = llround(z);
    return v.in_bounds(xx, yy, zz) ? v.at(xx, yy, zz) : uint8_t{0};
}

}  // namespace

std::pair<IntensityVolume, LabelVolume> augment(const IntensityVolume& iv, const LabelVolume& lv,
                                                const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    if (iv.dims != lv.dims) throw std::invalid_argument("augment: patch shape mismatch");
    const double deg = M_PI / 180.0;
    const Affine rot = rotation_affine(rng.uniform(-cfg.rotation_deg_max, cfg.rotation_deg_max) * deg,
                                       rng.uniform(-cfg.rotation_deg_max, cfg.rotation_deg_max) * deg,
                                       rng.uniform(-cfg.rotation_deg_max, cfg.rotation_deg_max) * deg);
    Affine shear = identity_affine();
    shear.m[0][1] = rng.uniform(-cfg.shear_max, cfg.shear_max);
    shear.m[0][2] = rng.uniform(-cfg.shear_max, cfg.shear_max);
    shear.m[1][2] = rng.uniform(-cfg.shear_max, cfg.shear_max);
    Affine scale = identity_affine();
    for (int a = 0; a < 3; ++a)
        scale.m[a][a] = rng.uniform(cfg.scale_range[0], cfg.scale_range[1]);
    Affine flip = identity_affine();
    for (int a = 0; a < 3; ++a)
        if (rng.bernoulli(cfg.flip_axes_prob)) flip.m[a][a] = -1.0;
    Vec3 shift;
    for (int a = 0; a < 3; ++a)
        shift[a] = rng.uniform(-cfg.translation_vox_max, cfg.translation_vox_max);

    Affine map = compose(rot, compose(shear, compose(scale, flip)));
    map.t = {map.t[0] + shift[0], map.t[1] + shift[1], map.t[2] + shift[2]};

    // elastic displacement field on a coarse control grid, in voxels
    const bool elastic = cfg.elastic_sigma > 0.0 && cfg.elastic_control_grid >= 2;
    const int g = cfg.elastic_control_grid;
    std::vector<double> disp;
    if (elastic) {
        disp.resize(static_cast<size_t>(3 * g * g * g));
        for (auto& d : disp) d = rng.normal(0.0, cfg.elastic_sigma);
    }
    auto elastic_at = [&](int axis, double x, double y, double z, const Dims3& dims) {
        const double gx = x / std::max<int64_t>(dims[0] - 1, 1) * (g - 1);
        const double gy = y / std::max<int64_t>(dims[1] - 1, 1) * (g - 1);
        const double gz = z / std::max<int64_t>(dims[2] - 1, 1) * (g - 1);
        const int x0 = std::clamp(static_cast<int>(gx), 0, g - 2);
        const int y0 = std::clamp(static_cast<int>(gy), 0, g - 2);
        const int z0 = std::clamp(static_cast<int>(gz), 0, g - 2);
        const double fx = gx - x0, fy = gy - y0, fz = gz - z0;
        double acc = 0.0;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const double w =
                        (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                    const size_t i = static_cast<size_t>(
                        axis + 3 * ((x0 + dx) + g * ((y0 + dy) + g * (z0 + dz))));
                    acc += w * disp[i];
                }
        return acc;
    };

    const Vec3 center = {(iv.dims[0] - 1) / 2.0, (iv.dims[1] - 1) / 2.0, (iv.dims[2] - 1) / 2.0};
    IntensityVolume out_i(iv.dims, iv.spacing, iv.origin);
    LabelVolume out_l(lv.dims, lv.num_classes, lv.spacing, lv.origin);
    for (int64_t z = 0; z < iv.dims[2]; ++z)
        for (int64_t y = 0; y < iv.dims[1]; ++y)
            for (int64_t x = 0; x < iv.dims[0]; ++x) {
                const double dx = x - center[0], dy = y - center[1], dz = z - center[2];
                double sx = center[0] + map.m[0][0] * dx + map.m[0][1] * dy + map.m[0][2] * dz + map.t[0];
                double sy = center[1] + map.m[1][0] * dx + map.m[1][1] * dy + map.m[1][2] * dz + map.t[1];
                double sz = center[2] + map.m[2][0] * dx + map.m[2][1] * dy + map.m[2][2] * dz + map.t[2];
                if (elastic) {
                    sx += elastic_at(0, double(x), double(y), double(z), iv.dims);
                    sy += elastic_at(1, double(x), double(y), double(z), iv.dims);
                    sz += elastic_at(2, double(x), double(y), double(z), iv.dims);
                }
                out_i.at(x, y, z) = sample_intensity_linear(iv, sx, sy, sz, -1.0f);
                out_l.at(x, y, z) = sample_label_nearest(lv, sx, sy, sz);
            }
    return {std::move(out_i), std::move(out_l)};
}

TrainingSet make_training_set(std::vector<std::pair<IntensityVolume, LabelVolume>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("training set must be nonempty");
    TrainingSet set;
    set.num_classes = pairs.front().second.num_classes;
    for (auto& [iv, lv] : pairs) {
        if (lv.num_classes != set.num_classes)
            throw std::invalid_argument("training volumes disagree on num_classes");
        TrainingSample s;
        s.image = rescale_intensity(iv);
        s.labels = std::move(lv);
        s.index = std::make_shared<ClassVoxelIndex>(s.labels);
        set.samples.push_back(std::move(s));
    }
    return set;
}

namespace {

int64_t pad_up(int64_t n, int64_t mult) { return ((n + mult - 1) / mult) * mult; }

// one-hot target tensor (C+1, z, y, x) from a label patch
torch::Tensor one_hot_target(const LabelVolume& l) { return one_hot(l).data; }

}  // namespace

Batch make_batch(const TrainingSet& set, int step, const SamplerConfig& cfg, Rng& rng,
                 const Vec3& coarse_spacing, int K, int64_t divisibility) {
    cfg.validate();
    if (set.samples.empty()) throw std::invalid_argument("make_batch: empty dataset");
    if (step < 1 || step > 4) throw std::invalid_argument("make_batch: step must be in 1..4");
    Batch batch;
    batch.step = step;

    if (step == 1) {
        const auto& s = set.samples[static_cast<size_t>(
            rng.uniform_int(static_cast<int64_t>(set.samples.size())))];
        auto coarse_i = resample(s.image, coarse_spacing, Interp::linear);
        auto coarse_l = resample(s.labels, coarse_spacing, Interp::nearest);
        Box3 padded{{0, 0, 0},
                    {pad_up(coarse_i.dims[0], divisibility), pad_up(coarse_i.dims[1], divisibility),
                     pad_up(coarse_i.dims[2], divisibility)}};
        coarse_i = crop_or_pad(coarse_i, padded);
        coarse_l = crop_or_pad(coarse_l, padded);
        batch.intensity = to_tensor(coarse_i).unsqueeze(0).unsqueeze(0);
        batch.target = one_hot_target(coarse_l).unsqueeze(0);
        return batch;
    }

    if (step == 2 || step == 3) {
        Dims3 size;
        for (int a = 0; a < 3; ++a)
            size[a] = cfg.subvolume_sizes[static_cast<size_t>(
                rng.uniform_int(static_cast<int64_t>(cfg.subvolume_sizes.size())))];
        if (step == 3)  // depth must cover K slices and stay Net1-compatible
            size[2] = std::max<int64_t>(size[2], pad_up(K, divisibility));
        std::vector<torch::Tensor> images, targets;
        for (int i = 0; i < cfg.volumes_per_batch; ++i) {
            const auto& s = set.samples[static_cast<size_t>(
                rng.uniform_int(static_cast<int64_t>(set.samples.size())))];
            const auto [cls, center] = s.index->sample_center(rng);
            auto [pi, pl] = extract_subvolume(s.image, s.labels, center, size);
            if (cfg.augmentation.enabled) {
                auto aug = augment(pi, pl, cfg.augmentation, rng);
                pi = std::move(aug.first);
                pl = std::move(aug.second);
            }
            images.push_back(to_tensor(pi).unsqueeze(0));
            targets.push_back(one_hot_target(pl));
        }
        batch.intensity = torch::stack(images, 0);
        batch.target = torch::stack(targets, 0);
        return batch;
    }

    // step 4: K full axial slices around a sampled center slice
    const int h = (K - 1) / 2;
    std::vector<torch::Tensor> images, rois, targets;
    for (int i = 0; i < cfg.volumes_per_batch; ++i) {
        const auto& s = set.samples[static_cast<size_t>(
            rng.uniform_int(static_cast<int64_t>(set.samples.size())))];
        const auto [cls, center] = s.index->sample_center(rng);
        const int64_t zc = center[2];
        const int64_t nx = s.image.dims[0], ny = s.image.dims[1], nz = s.image.dims[2];
        const int64_t px = pad_up(nx, divisibility), py = pad_up(ny, divisibility);
        auto img = torch::full({1, K, py, px}, -1.0f, torch::kFloat32);
        auto roi = torch::zeros({1, K, py, px}, torch::kFloat32);
        const double fg = std::max(1, set.num_classes - 1);
        auto ia = img.accessor<float, 4>();
        auto ra = roi.accessor<float, 4>();
        for (int k = 0; k < K; ++k) {
            const int64_t z = std::clamp<int64_t>(zc - h + k, 0, nz - 1);  // edge replication
            for (int64_t y = 0; y < ny; ++y)
                for (int64_t x = 0; x < nx; ++x) {
                    ia[0][k][y][x] = s.image.at(x, y, z);
                    if (s.roi_channel)
                        ra[0][k][y][x] = static_cast<float>(s.roi_channel->at(x, y, z) / fg);
                }
        }
        LabelVolume target_slice({px, py, 1}, set.num_classes, s.labels.spacing);
        for (int64_t y = 0; y < ny; ++y)
            for (int64_t x = 0; x < nx; ++x) target_slice.at(x, y, 0) = s.labels.at(x, y, zc);
        images.push_back(img);
        rois.push_back(roi);
        targets.push_back(one_hot_target(target_slice));
    }
    batch.intensity = torch::stack(images, 0);
    batch.roi_channel = torch::stack(rois, 0);
    batch.target = torch::stack(targets, 0);
    return batch;
}

}  // namespace c2fseg
