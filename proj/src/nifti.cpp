#include "c2fseg/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

namespace c2fseg {

namespace {

// nifti1.h layout, 348 bytes.
#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "bad NIfTI-1 header packing");

constexpr int16_t DT_UINT8 = 2;
constexpr int16_t DT_INT16 = 4;
constexpr int16_t DT_INT32 = 8;
constexpr int16_t DT_FLOAT32 = 16;
constexpr int16_t DT_FLOAT64 = 64;
constexpr char XYZT_MM = 2;  // NIFTI_UNITS_MM

// gzread/gzwrite handle plain files too, but we only compress when the
// name says so.
bool wants_gzip(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

std::vector<char> read_all(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("file not found: " + path);
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::vector<char> buf;
    char chunk[1 << 16];
    int n;
    while ((n = gzread(f, chunk, sizeof(chunk))) > 0) buf.insert(buf.end(), chunk, chunk + n);
    const bool bad = (n < 0);
    gzclose(f);
    if (bad) throw std::runtime_error("read error (corrupt gzip?): " + path);
    return buf;
}

void write_all(const std::string& path, const char* bytes, size_t n) {
    if (wants_gzip(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("cannot open for write: " + path);
        size_t off = 0;
        while (off < n) {
            const unsigned step = static_cast<unsigned>(std::min<size_t>(n - off, 1u << 24));
            if (gzwrite(f, bytes + off, step) != static_cast<int>(step)) {
                gzclose(f);
                throw std::runtime_error("write error: " + path);
            }
            off += step;
        }
        gzclose(f);
    } else {
        FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("cannot open for write: " + path);
        const bool ok = std::fwrite(bytes, 1, n, f) == n;
        std::fclose(f);
        if (!ok) throw std::runtime_error("write error: " + path);
    }
}

struct Parsed {
    Nifti1Header hdr;
    Dims3 dims;
    Vec3 spacing;
    Vec3 origin;
    const char* payload;
    size_t payload_bytes;
};

Parsed parse(const std::vector<char>& raw, const std::string& path) {
    if (raw.size() < sizeof(Nifti1Header) + 4)
        throw std::runtime_error("truncated NIfTI file: " + path);
    Parsed p;
    std::memcpy(&p.hdr, raw.data(), sizeof(Nifti1Header));
    const auto& h = p.hdr;
    if (h.sizeof_hdr != 348) {
        if (h.sizeof_hdr == 0x5c010000)
            throw std::runtime_error("byte-swapped NIfTI not supported: " + path);
        throw std::runtime_error("unreadable NIfTI header (sizeof_hdr): " + path);
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0)
        throw std::runtime_error("not a single-file NIfTI-1 (magic): " + path);
    if (h.dim[0] < 3 || h.dim[0] > 4 || (h.dim[0] == 4 && h.dim[4] != 1))
        throw std::runtime_error("expected a 3D volume: " + path);
    p.dims = {h.dim[1], h.dim[2], h.dim[3]};
    for (int a = 0; a < 3; ++a)
        if (p.dims[a] <= 0) throw std::runtime_error("non-positive dimension in header: " + path);
    p.spacing = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};
    for (int a = 0; a < 3; ++a)
        if (!(p.spacing[a] > 0.f)) throw std::runtime_error("non-positive spacing in header: " + path);
    if (h.sform_code > 0) {
        p.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    } else if (h.qform_code > 0) {
        p.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    } else {
        p.origin = {0.0, 0.0, 0.0};
    }
    const size_t offset = static_cast<size_t>(h.vox_offset);
    if (offset < 348 || offset > raw.size())
        throw std::runtime_error("bad vox_offset: " + path);
    p.payload = raw.data() + offset;
    p.payload_bytes = raw.size() - offset;
    return p;
}

size_t dtype_size(int16_t dt, const std::string& path) {
    switch (dt) {
        case DT_UINT8: return 1;
        case DT_INT16: return 2;
        case DT_INT32: return 4;
        case DT_FLOAT32: return 4;
        case DT_FLOAT64: return 8;
        default:
            throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(dt) + ": " + path);
    }
}

template <typename Out, typename Fn>
void convert_payload(const Parsed& p, const std::string& path, std::vector<Out>& out, Fn per_value) {
    const int64_t n = p.dims[0] * p.dims[1] * p.dims[2];
    const size_t vsz = dtype_size(p.hdr.datatype, path);
    if (p.payload_bytes < static_cast<size_t>(n) * vsz)
        throw std::runtime_error("truncated voxel data: " + path);
    out.resize(static_cast<size_t>(n));
    const char* src = p.payload;
    auto loop = [&](auto tag) {
        using In = decltype(tag);
        for (int64_t i = 0; i < n; ++i) {
            In v;
            std::memcpy(&v, src + i * sizeof(In), sizeof(In));
            out[static_cast<size_t>(i)] = per_value(static_cast<double>(v));
        }
    };
    switch (p.hdr.datatype) {
        case DT_UINT8: loop(uint8_t{}); break;
        case DT_INT16: loop(int16_t{}); break;
        case DT_INT32: loop(int32_t{}); break;
        case DT_FLOAT32: loop(float{}); break;
        case DT_FLOAT64: loop(double{}); break;
    }
}

Nifti1Header make_header(const Dims3& dims, const Vec3& spacing, const Vec3& origin,
                         int16_t datatype, int16_t bitpix) {
    Nifti1Header h;
    std::memset(&h, 0, sizeof(h));
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<int16_t>(dims[0]);
    h.dim[2] = static_cast<int16_t>(dims[1]);
    h.dim[3] = static_cast<int16_t>(dims[2]);
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.f;
    for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(spacing[a]);
    h.vox_offset = 352.f;
    h.scl_slope = 1.f;
    h.xyzt_units = XYZT_MM;
    h.qform_code = 1;
    h.sform_code = 1;
    h.qoffset_x = static_cast<float>(origin[0]);
    h.qoffset_y = static_cast<float>(origin[1]);
    h.qoffset_z = static_cast<float>(origin[2]);
    h.srow_x[0] = static_cast<float>(spacing[0]);
    h.srow_x[3] = static_cast<float>(origin[0]);
    h.srow_y[1] = static_cast<float>(spacing[1]);
    h.srow_y[3] = static_cast<float>(origin[1]);
    h.srow_z[2] = static_cast<float>(spacing[2]);
    h.srow_z[3] = static_cast<float>(origin[2]);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

void write_volume_bytes(const std::string& path, const Nifti1Header& h, const char* voxels,
                        size_t nbytes) {
    std::vector<char> blob(352 + nbytes, 0);
    std::memcpy(blob.data(), &h, sizeof(h));
    std::memcpy(blob.data() + 352, voxels, nbytes);
    write_all(path, blob.data(), blob.size());
}

}  // namespace

IntensityVolume load_intensity(const std::string& path) {
    const auto raw = read_all(path);
    const Parsed p = parse(raw, path);
    const double slope = (p.hdr.scl_slope == 0.f) ? 1.0 : p.hdr.scl_slope;
    const double inter = p.hdr.scl_inter;
    IntensityVolume v(p.dims, p.spacing, p.origin);
    convert_payload<float>(p, path, v.data, [&](double x) {
        return static_cast<float>(slope * x + inter);
    });
    return v;
}

LabelVolume load_labels(const std::string& path, int num_classes_declared) {
    const auto raw = read_all(path);
    const Parsed p = parse(raw, path);
    if (p.hdr.scl_slope != 0.f && (p.hdr.scl_slope != 1.f || p.hdr.scl_inter != 0.f))
        throw std::runtime_error("label map carries an intensity scaling: " + path);
    LabelVolume v(p.dims, 0, p.spacing, p.origin);
    int max_label = 0;
    convert_payload<uint8_t>(p, path, v.data, [&](double x) {
        if (x < 0.0 || x > 255.0 || x != std::floor(x))
            throw std::runtime_error("non-integer value in label map: " + path);
        max_label = std::max(max_label, static_cast<int>(x));
        return static_cast<uint8_t>(x);
    });
    v.num_classes = (num_classes_declared > 0) ? num_classes_declared : max_label + 1;
    if (max_label >= v.num_classes)
        throw std::runtime_error("label value " + std::to_string(max_label) +
                                 " out of range for num_classes=" +
                                 std::to_string(v.num_classes) + ": " + path);
    return v;
}

void save_volume(const IntensityVolume& v, const std::string& path) {
    const auto h = make_header(v.dims, v.spacing, v.origin, DT_FLOAT32, 32);
    write_volume_bytes(path, h, reinterpret_cast<const char*>(v.data.data()),
                       v.data.size() * sizeof(float));
}

void save_volume(const LabelVolume& v, const std::string& path) {
    const auto h = make_header(v.dims, v.spacing, v.origin, DT_UINT8, 8);
    write_volume_bytes(path, h, reinterpret_cast<const char*>(v.data.data()), v.data.size());
}

}  // namespace c2fseg
