#include "c2fseg/fields.hpp"

namespace c2fseg {

torch::Tensor to_tensor(const IntensityVolume& v) {
    auto t = torch::from_blob(const_cast<float*>(v.data.data()),
                              {v.dims[2], v.dims[1], v.dims[0]}, torch::kFloat32);
    return t.clone();
}

torch::Tensor to_tensor(const LabelVolume& v) {
    auto t = torch::from_blob(const_cast<uint8_t*>(v.data.data()),
                              {v.dims[2], v.dims[1], v.dims[0]}, torch::kUInt8);
    return t.to(torch::kInt64);
}

OneHotField one_hot(const LabelVolume& l) {
    if (l.num_classes < 1) throw std::invalid_argument("one_hot: num_classes must be >= 1");
    l.validate_labels();
    const int64_t C1 = l.num_classes;
    OneHotField field;
    field.data = torch::zeros({C1, l.dims[2], l.dims[1], l.dims[0]}, torch::kFloat32);
    field.class_counts.assign(static_cast<size_t>(C1), 0);
    auto acc = field.data.accessor<float, 4>();
    for (int64_t z = 0; z < l.dims[2]; ++z)
        for (int64_t y = 0; y < l.dims[1]; ++y)
            for (int64_t x = 0; x < l.dims[0]; ++x) {
                const uint8_t c = l.at(x, y, z);
                acc[c][z][y][x] = 1.0f;
                ++field.class_counts[c];
            }
    return field;
}

LabelVolume argmax_labels(const torch::Tensor& probs, const Vec3& spacing, const Vec3& origin) {
    TORCH_CHECK(probs.dim() == 4, "argmax_labels expects (C, z, y, x)");
    const auto cls = probs.argmax(0).to(torch::kUInt8).contiguous();
    LabelVolume out({probs.size(3), probs.size(2), probs.size(1)},
                    static_cast<int>(probs.size(0)), spacing, origin);
    std::memcpy(out.data.data(), cls.data_ptr<uint8_t>(), out.data.size());
    return out;
}

}  // namespace c2fseg
