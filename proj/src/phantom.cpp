#include "c2fseg/phantom.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "c2fseg/rng.hpp"

namespace c2fseg {

void PhantomConfig::validate() const {
    for (int a = 0; a < 3; ++a)
        if (shape[a] < 16) throw std::invalid_argument("phantom shape must be >= 16 per axis");
    for (int a = 0; a < 3; ++a)
        if (!(spacing[a] > 0.0)) throw std::invalid_argument("phantom spacing must be positive");
    if (num_foreground_classes < 1)
        throw std::invalid_argument("phantom needs at least one foreground class");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
    if (!(structure_scale > 0.0 && structure_scale < 1.0))
        throw std::invalid_argument("structure_scale must be in (0, 1)");
}

namespace {

struct Mat3 {
    double m[3][3];
};

Mat3 rotation_zyx(double az, double ay, double ax) {
    const double cz = std::cos(az), sz = std::sin(az);
    const double cy = std::cos(ay), sy = std::sin(ay);
    const double cx = std::cos(ax), sx = std::sin(ax);
    // R = Rz * Ry * Rx
    Mat3 r;
    r.m[0][0] = cz * cy;
    r.m[0][1] = cz * sy * sx - sz * cx;
    r.m[0][2] = cz * sy * cx + sz * sx;
    r.m[1][0] = sz * cy;
    r.m[1][1] = sz * sy * sx + cz * cx;
    r.m[1][2] = sz * sy * cx - cz * sx;
    r.m[2][0] = -sy;
    r.m[2][1] = cy * sx;
    r.m[2][2] = cy * cx;
    return r;
}

struct Ellipsoid {
    Vec3 center;    // voxel coordinates
    Vec3 semi_axes; // voxel units
    Mat3 rot;       // world->body is rot^T

    bool contains(double x, double y, double z) const {
        const double dx = x - center[0], dy = y - center[1], dz = z - center[2];
        // body coords: R^T * d
        const double bx = rot.m[0][0] * dx + rot.m[1][0] * dy + rot.m[2][0] * dz;
        const double by = rot.m[0][1] * dx + rot.m[1][1] * dy + rot.m[2][1] * dz;
        const double bz = rot.m[0][2] * dx + rot.m[1][2] * dy + rot.m[2][2] * dz;
        const double q = (bx / semi_axes[0]) * (bx / semi_axes[0]) +
                         (by / semi_axes[1]) * (by / semi_axes[1]) +
                         (bz / semi_axes[2]) * (bz / semi_axes[2]);
        return q <= 1.0;
    }

    // World-axis half extents of the bounding box of a rotated ellipsoid.
    Vec3 bbox_half() const {
        Vec3 h;
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += (rot.m[i][j] * semi_axes[j]) * (rot.m[i][j] * semi_axes[j]);
            h[i] = std::sqrt(s);
        }
        return h;
    }
};

}  // namespace

std::pair<IntensityVolume, LabelVolume> generate_phantom(const PhantomConfig& cfg) {
    cfg.validate();
    Rng rng(splitmix64(cfg.seed ^ 0xc2f5e6u));
    const int C = cfg.num_foreground_classes;

    // One shared orientation; nested ellipsoids share the center up to a
    // containment-safe offset so that every shell stays nonempty.
    const Mat3 rot = rotation_zyx(rng.uniform(0.0, 2.0 * M_PI), rng.uniform(-0.5, 0.5),
                                  rng.uniform(-0.5, 0.5));
    std::vector<Ellipsoid> shells(static_cast<size_t>(C));
    Vec3 half = {cfg.shape[0] / 2.0, cfg.shape[1] / 2.0, cfg.shape[2] / 2.0};
    Vec3 center = {half[0] + rng.uniform(-0.03, 0.03) * cfg.shape[0],
                   half[1] + rng.uniform(-0.03, 0.03) * cfg.shape[1],
                   half[2] + rng.uniform(-0.03, 0.03) * cfg.shape[2]};
    Vec3 axes;
    for (int a = 0; a < 3; ++a)
        axes[a] = cfg.structure_scale * half[a] * rng.uniform(0.85, 1.0);
    for (int c = 0; c < C; ++c) {
        shells[static_cast<size_t>(c)] = Ellipsoid{center, axes, rot};
        if (c + 1 == C) break;
        const double shrink = rng.uniform(0.55, 0.72);
        Vec3 next_axes;
        double max_ratio = 0.0;
        for (int a = 0; a < 3; ++a) {
            next_axes[a] = axes[a] * shrink * rng.uniform(0.9, 1.1);
            max_ratio = std::max(max_ratio, next_axes[a] / axes[a]);
        }
        // normalized offset budget that keeps the next ellipsoid inside
        const double allow = 0.5 * std::max(0.0, 1.0 - max_ratio);
        Vec3 next_center = center;
        for (int a = 0; a < 3; ++a)
            next_center[a] += rng.uniform(-allow, allow) * axes[a] / std::sqrt(3.0);
        center = next_center;
        axes = next_axes;
    }

    // fit checks: outer bounding box inside the volume, innermost nonempty
    {
        const Vec3 bb = shells.front().bbox_half();
        for (int a = 0; a < 3; ++a)
            if (shells.front().center[a] - bb[a] < 0.0 ||
                shells.front().center[a] + bb[a] > cfg.shape[a] - 1.0)
                throw std::runtime_error("phantom structures do not fit at structure_scale=" +
                                         std::to_string(cfg.structure_scale));
        for (int a = 0; a < 3; ++a)
            if (shells.back().semi_axes[a] < 1.0)
                throw std::runtime_error("innermost phantom structure is below one voxel");
    }

    LabelVolume labels(cfg.shape, C + 1, cfg.spacing);
    IntensityVolume image(cfg.shape, cfg.spacing);
    // class means evenly spaced in (0.2, 1.0), background at 0
    std::vector<float> mean(static_cast<size_t>(C + 1), 0.0f);
    for (int c = 1; c <= C; ++c)
        mean[static_cast<size_t>(c)] = static_cast<float>(0.2 + 0.8 * c / (C + 1.0));

    for (int64_t z = 0; z < cfg.shape[2]; ++z)
        for (int64_t y = 0; y < cfg.shape[1]; ++y)
            for (int64_t x = 0; x < cfg.shape[0]; ++x) {
                uint8_t lab = 0;
                for (int c = C - 1; c >= 0; --c) {
                    if (shells[static_cast<size_t>(c)].contains(double(x), double(y), double(z))) {
                        lab = static_cast<uint8_t>(c + 1);
                        break;
                    }
                }
                labels.at(x, y, z) = lab;
                image.at(x, y, z) = mean[lab];
            }

    std::vector<int64_t> counts(static_cast<size_t>(C + 1), 0);
    for (uint8_t v : labels.data) ++counts[v];
    for (int c = 0; c <= C; ++c)
        if (counts[static_cast<size_t>(c)] == 0)
            throw std::runtime_error("phantom class " + std::to_string(c) +
                                     " is empty; structures do not fit");

    if (cfg.noise_sigma > 0.0) {
        Rng noise = rng.fork(1);
        for (auto& v : image.data) v += static_cast<float>(noise.normal(0.0, cfg.noise_sigma));
    }
    return {std::move(image), std::move(labels)};
}

std::vector<std::pair<IntensityVolume, LabelVolume>> generate_dataset(const PhantomConfig& cfg,
                                                                      int n, uint64_t seed_base) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    std::vector<std::pair<IntensityVolume, LabelVolume>> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        PhantomConfig c = cfg;
        c.seed = seed_base + static_cast<uint64_t>(i);
        out.push_back(generate_phantom(c));
    }
    return out;
}

void write_manifest(const std::string& path, int num_classes,
                    const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << "count = " << entries.size() << "\n";
    f << "num_classes = " << num_classes << "\n";
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        f << "volume." << i << ".image = " << e.image_path << "\n";
        f << "volume." << i << ".labels = " << e.label_path << "\n";
        f << "volume." << i << ".seed = " << e.seed << "\n";
        f << "volume." << i << ".class_counts =";
        for (int64_t c : e.class_counts) f << " " << c;
        f << "\n";
    }
}

std::pair<int, std::vector<ManifestEntry>> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read manifest: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    const int count = std::stoi(kv.at("count"));
    const int num_classes = std::stoi(kv.at("num_classes"));
    std::vector<ManifestEntry> entries;
    for (int i = 0; i < count; ++i) {
        const std::string p = "volume." + std::to_string(i) + ".";
        ManifestEntry e;
        e.image_path = kv.at(p + "image");
        e.label_path = kv.at(p + "labels");
        if (auto it = kv.find(p + "seed"); it != kv.end()) e.seed = std::stoull(it->second);
        if (auto it = kv.find(p + "class_counts"); it != kv.end()) {
            std::istringstream ss(it->second);
            int64_t v;
            while (ss >> v) e.class_counts.push_back(v);
        }
        entries.push_back(std::move(e));
    }
    return {num_classes, entries};
}

}  // namespace c2fseg
