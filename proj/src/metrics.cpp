#include "c2fseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace c2fseg {

namespace {

constexpr double kFar = 1e20;

void check_compatible(const LabelVolume& pred, const LabelVolume& truth, bool need_spacing) {
    if (pred.dims != truth.dims)
        throw std::invalid_argument("metric inputs must share the grid shape");
    if (need_spacing && pred.spacing != truth.spacing)
        throw std::invalid_argument("metric inputs must share voxel spacing");
}

// 1D lower-envelope distance transform over samples at positions i*s.
void dt_line(std::vector<double>& f, std::vector<int>& v, std::vector<double>& z, double s) {
    const int n = static_cast<int>(f.size());
    static thread_local std::vector<double> d;
    d.resize(static_cast<size_t>(n));
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    for (int q = 1; q < n; ++q) {
        const double xq = q * s;
        while (true) {
            const double xp = v[k] * s;
            const double inter =
                (f[q] + xq * xq - (f[v[k]] + xp * xp)) / (2.0 * xq - 2.0 * xp);
            if (inter <= z[k]) {
                --k;
            } else {
                ++k;
                v[k] = q;
                z[k] = inter;
                z[k + 1] = kFar;
                break;
            }
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = q * s;
        while (z[k + 1] < xq) ++k;
        const double xp = v[k] * s;
        d[q] = (xq - xp) * (xq - xp) + f[v[k]];
    }
    std::copy(d.begin(), d.end(), f.begin());
}

std::vector<uint8_t> surface_mask(const LabelVolume& vol, int cls) {
    const auto& d = vol.dims;
    std::vector<uint8_t> mask(static_cast<size_t>(vol.voxel_count()), 0);
    auto is_cls = [&](int64_t x, int64_t y, int64_t z) {
        return vol.in_bounds(x, y, z) && vol.at(x, y, z) == cls;
    };
    for (int64_t z = 0; z < d[2]; ++z)
        for (int64_t y = 0; y < d[1]; ++y)
            for (int64_t x = 0; x < d[0]; ++x) {
                if (vol.at(x, y, z) != cls) continue;
                const bool boundary = !is_cls(x - 1, y, z) || !is_cls(x + 1, y, z) ||
                                      !is_cls(x, y - 1, z) || !is_cls(x, y + 1, z) ||
                                      !is_cls(x, y, z - 1) || !is_cls(x, y, z + 1);
                if (boundary) mask[static_cast<size_t>(vol.index(x, y, z))] = 1;
            }
    return mask;
}

int64_t count_class(const LabelVolume& v, int cls) {
    int64_t n = 0;
    for (uint8_t x : v.data) n += (x == cls);
    return n;
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<uint8_t>& sites,
                                               const Dims3& dims, const Vec3& spacing) {
    if (sites.size() != static_cast<size_t>(dims[0] * dims[1] * dims[2]))
        throw std::invalid_argument("distance transform: size mismatch");
    std::vector<double> f(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) f[i] = sites[i] ? 0.0 : kFar;

    const int64_t nx = dims[0], ny = dims[1], nz = dims[2];
    auto idx = [&](int64_t x, int64_t y, int64_t z) { return x + nx * (y + ny * z); };
    std::vector<double> line;
    std::vector<int> v;
    std::vector<double> z;
    auto prep = [&](int64_t n) {
        line.resize(static_cast<size_t>(n));
        v.resize(static_cast<size_t>(n));
        z.resize(static_cast<size_t>(n) + 1);
    };

    prep(nx);
    for (int64_t zz = 0; zz < nz; ++zz)
        for (int64_t yy = 0; yy < ny; ++yy) {
            for (int64_t xx = 0; xx < nx; ++xx) line[xx] = f[idx(xx, yy, zz)];
            dt_line(line, v, z, spacing[0]);
            for (int64_t xx = 0; xx < nx; ++xx) f[idx(xx, yy, zz)] = line[xx];
        }
    prep(ny);
    for (int64_t zz = 0; zz < nz; ++zz)
        for (int64_t xx = 0; xx < nx; ++xx) {
            for (int64_t yy = 0; yy < ny; ++yy) line[yy] = f[idx(xx, yy, zz)];
            dt_line(line, v, z, spacing[1]);
            for (int64_t yy = 0; yy < ny; ++yy) f[idx(xx, yy, zz)] = line[yy];
        }
    prep(nz);
    for (int64_t yy = 0; yy < ny; ++yy)
        for (int64_t xx = 0; xx < nx; ++xx) {
            for (int64_t zz = 0; zz < nz; ++zz) line[zz] = f[idx(xx, yy, zz)];
            dt_line(line, v, z, spacing[2]);
            for (int64_t zz = 0; zz < nz; ++zz) f[idx(xx, yy, zz)] = line[zz];
        }
    return f;
}

double binary_dice(const LabelVolume& pred, const LabelVolume& truth, int cls) {
    check_compatible(pred, truth, false);
    int64_t inter = 0, a = 0, b = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool pa = pred.data[i] == cls;
        const bool pb = truth.data[i] == cls;
        inter += (pa && pb);
        a += pa;
        b += pb;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

double binary_jaccard(const LabelVolume& pred, const LabelVolume& truth, int cls) {
    check_compatible(pred, truth, false);
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool pa = pred.data[i] == cls;
        const bool pb = truth.data[i] == cls;
        inter += (pa && pb);
        uni += (pa || pb);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double average_surface_distance(const LabelVolume& pred, const LabelVolume& truth, int cls) {
    check_compatible(pred, truth, true);
    const int64_t na = count_class(pred, cls);
    const int64_t nb = count_class(truth, cls);
    if (na == 0 && nb == 0) return 0.0;
    if (na == 0 || nb == 0) return std::numeric_limits<double>::quiet_NaN();

    const auto sa = surface_mask(pred, cls);
    const auto sb = surface_mask(truth, cls);
    const auto da = squared_distance_transform(sa, pred.dims, pred.spacing);
    const auto db = squared_distance_transform(sb, pred.dims, pred.spacing);

    double sum = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < sa.size(); ++i) {
        if (sa[i]) {
            sum += std::sqrt(db[i]);
            ++count;
        }
        if (sb[i]) {
            sum += std::sqrt(da[i]);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

MetricReport evaluate_volume(const LabelVolume& pred, const LabelVolume& truth) {
    check_compatible(pred, truth, true);
    if (pred.num_classes != truth.num_classes)
        throw std::invalid_argument("evaluate_volume: class-count mismatch (" +
                                    std::to_string(pred.num_classes) + " vs " +
                                    std::to_string(truth.num_classes) + ")");
    MetricReport r;
    double dice_sum = 0.0, jacc_sum = 0.0, asd_sum = 0.0;
    int asd_defined = 0;
    for (int c = 1; c < truth.num_classes; ++c) {
        ClassMetrics m;
        m.dice = binary_dice(pred, truth, c);
        m.jaccard = binary_jaccard(pred, truth, c);
        m.asd_mm = average_surface_distance(pred, truth, c);
        r.classes.push_back(c);
        r.per_class.push_back(m);
        dice_sum += m.dice;
        jacc_sum += m.jaccard;
        if (!std::isnan(m.asd_mm)) {
            asd_sum += m.asd_mm;
            ++asd_defined;
        }
    }
    const double n = static_cast<double>(r.per_class.size());
    r.aggregate.dice = n > 0 ? dice_sum / n : 0.0;
    r.aggregate.jaccard = n > 0 ? jacc_sum / n : 0.0;
    r.aggregate.asd_mm =
        asd_defined > 0 ? asd_sum / asd_defined : std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::string to_csv(const MetricReport& report) {
    std::ostringstream out;
    out << "class,dice,jaccard,asd_mm\n";
    out.precision(6);
    out << std::fixed;
    auto row = [&](const std::string& name, const ClassMetrics& m) {
        out << name << ',' << m.dice << ',' << m.jaccard << ',';
        if (std::isnan(m.asd_mm))
            out << "nan";
        else
            out << m.asd_mm;
        out << '\n';
    };
    for (size_t i = 0; i < report.per_class.size(); ++i)
        row(std::to_string(report.classes[i]), report.per_class[i]);
    row("mean", report.aggregate);
    return out.str();
}

}  // namespace c2fseg
