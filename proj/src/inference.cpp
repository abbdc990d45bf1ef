#include "c2fseg/inference.hpp"

#include "c2fseg/preprocess.hpp"

namespace c2fseg {

namespace {

int64_t pad_up(int64_t n, int64_t mult) { return ((n + mult - 1) / mult) * mult; }

}  // namespace

ProbabilityField predict_coarse(const IntensityVolume& rescaled, Net1 net1,
                                const InferenceConfig& icfg) {
    torch::NoGradGuard no_grad;
    net1->eval();
    auto coarse = resample(rescaled, icfg.coarse_spacing, Interp::linear);
    const int64_t div = net1->cfg.divisibility();
    const Box3 padded{{0, 0, 0},
                      {pad_up(coarse.dims[0], div), pad_up(coarse.dims[1], div),
                       pad_up(coarse.dims[2], div)}};
    const Dims3 coarse_dims = coarse.dims;
    const auto input = to_tensor(crop_or_pad(coarse, padded)).unsqueeze(0).unsqueeze(0);
    auto probs = net1->forward(input).squeeze(0);  // (C+1, zp, yp, xp)
    probs = probs
                .narrow(1, 0, coarse_dims[2])
                .narrow(2, 0, coarse_dims[1])
                .narrow(3, 0, coarse_dims[0])
                .contiguous();

    const int64_t num_classes = probs.size(0);
    auto native = torch::empty({num_classes, rescaled.dims[2], rescaled.dims[1], rescaled.dims[0]},
                               torch::kFloat32);
    for (int64_t c = 0; c < num_classes; ++c) {
        IntensityVolume channel(coarse_dims, coarse.spacing, coarse.origin);
        const auto src = probs[c].contiguous();
        std::memcpy(channel.data.data(), src.data_ptr<float>(),
                    channel.data.size() * sizeof(float));
        const auto up = resample_to_dims(channel, rescaled.dims, icfg.prob_upsample);
        std::memcpy(native[c].data_ptr<float>(), up.data.data(),
                    up.data.size() * sizeof(float));
    }
    native = native.clamp_min(0.0);
    native = native / native.sum(0, /*keepdim=*/true).clamp_min(1e-12);

    ProbabilityField field;
    field.data = native;
    field.source_net = 1;
    field.spacing = rescaled.spacing;
    field.origin = rescaled.origin;
    return field;
}

LabelVolume predict_fine(const IntensityVolume& rescaled, const ProbabilityField& p1_native,
                         Net2 net2, const Box3& roi, const InferenceConfig& icfg) {
    torch::NoGradGuard no_grad;
    net2->eval();
    const int K = net2->cfg.K;
    const int h = (K - 1) / 2;
    const int64_t div = net2->cfg.divisibility();
    if (roi.extent()[2] < 1) throw std::invalid_argument("predict_fine: ROI thinner than 1 slice");

    // labels from the coarse field, scaled to [0,1] for channel 1
    const auto p1_labels = p1_native.data.argmax(0).to(torch::kFloat32) /
                           static_cast<double>(std::max<int64_t>(p1_native.data.size(0) - 1, 1));

    // crop the in-plane ROI once (padding -1 / 0 beyond the volume), full z
    Box3 plane = roi;
    plane.lo[2] = 0;
    plane.hi[2] = rescaled.dims[2];
    plane.hi[0] = plane.lo[0] + pad_up(plane.hi[0] - plane.lo[0], div);
    plane.hi[1] = plane.lo[1] + pad_up(plane.hi[1] - plane.lo[1], div);
    const auto roi_intensity = crop_or_pad(rescaled, plane);
    const int64_t px = plane.hi[0] - plane.lo[0];
    const int64_t py = plane.hi[1] - plane.lo[1];
    const int64_t nz = rescaled.dims[2];

    auto intensity_t = to_tensor(roi_intensity);  // (nz, py, px)
    auto labels_t = torch::zeros({nz, py, px}, torch::kFloat32);
    {
        const int64_t cx = std::min(plane.hi[0], rescaled.dims[0]) - plane.lo[0];
        const int64_t cy = std::min(plane.hi[1], rescaled.dims[1]) - plane.lo[1];
        labels_t.narrow(1, 0, cy).narrow(2, 0, cx) =
            p1_labels.narrow(1, plane.lo[1], cy).narrow(2, plane.lo[0], cx);
    }

    LabelVolume out(rescaled.dims, static_cast<int>(p1_native.data.size(0)), rescaled.spacing,
                    rescaled.origin);
    const int64_t chunk = std::max(1, icfg.slice_chunk);
    for (int64_t z0 = roi.lo[2]; z0 < roi.hi[2]; z0 += chunk) {
        const int64_t zn = std::min(chunk, roi.hi[2] - z0);
        const int64_t zin = zn + K - 1;
        auto in = torch::empty({1, 2, zin, py, px}, torch::kFloat32);
        for (int64_t k = 0; k < zin; ++k) {
            const int64_t z = std::clamp<int64_t>(z0 - h + k, 0, nz - 1);  // edge replication
            in[0][0][k] = intensity_t[z];
            in[0][1][k] = labels_t[z];
        }
        const auto probs = net2->forward(in).squeeze(0);  // (C+1, zn, py, px)
        const auto cls = probs.argmax(0).to(torch::kUInt8).contiguous();
        auto acc = cls.accessor<uint8_t, 3>();
        const int64_t x1 = std::min(plane.hi[0], rescaled.dims[0]);
        const int64_t y1 = std::min(plane.hi[1], rescaled.dims[1]);
        for (int64_t dz = 0; dz < zn; ++dz)
            for (int64_t y = plane.lo[1]; y < y1; ++y)
                for (int64_t x = plane.lo[0]; x < x1; ++x)
                    out.at(x, y, z0 + dz) = acc[dz][y - plane.lo[1]][x - plane.lo[0]];
    }
    return out;
}

LabelVolume predict(const IntensityVolume& raw, const TrainedModel& model) {
    const auto rescaled = rescale_intensity(raw);
    const auto p1 = predict_coarse(rescaled, model.net1, model.config.inference);
    const auto roi = dynamic_tile(p1.data, model.config.inference.roi_margin, rescaled.dims,
                                  model.net2->cfg.divisibility());
    return predict_fine(rescaled, p1, model.net2, roi, model.config.inference);
}

}  // namespace c2fseg
