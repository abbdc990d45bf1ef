#include "c2fseg/losses.hpp"

namespace c2fseg {

WeightingMode weighting_mode_from_string(const std::string& s) {
    if (s == "literal") return WeightingMode::literal;
    if (s == "normalized_inverse_count") return WeightingMode::normalized_inverse_count;
    if (s == "uniform") return WeightingMode::uniform;
    throw std::invalid_argument("unknown weighting_mode: " + s);
}

RoiMode roi_mode_from_string(const std::string& s) {
    if (s == "literal") return RoiMode::literal;
    if (s == "unit") return RoiMode::unit;
    throw std::invalid_argument("unknown roi_mode: " + s);
}

namespace {

int64_t class_dim(const torch::Tensor& t) { return t.dim() == 5 ? 1 : 0; }

void check_pair(const torch::Tensor& p, const torch::Tensor& t) {
    TORCH_CHECK(p.sizes() == t.sizes(), "probability/one-hot shape mismatch: ", p.sizes(), " vs ",
                t.sizes());
    TORCH_CHECK(p.dim() == 4 || p.dim() == 5, "expected (C, x, y, z) or (N, C, ...) tensors");
}

// Flatten to (C, n_voxels) with the class axis first.
torch::Tensor flat(const torch::Tensor& x) {
    const int64_t cd = class_dim(x);
    auto t = (cd == 0) ? x : x.transpose(0, 1);
    return t.reshape({t.size(0), -1});
}

}  // namespace

torch::Tensor soft_dice_per_class(const torch::Tensor& p, const torch::Tensor& t, double epsilon) {
    check_pair(p, t);
    const auto pf = flat(p);
    const auto tf = flat(t);
    const auto inter = (tf * pf).sum(1);
    const auto denom = (tf + pf).sum(1);
    return (2.0 * inter + epsilon) / (denom + epsilon);
}

torch::Tensor multiclass_dice_loss(const torch::Tensor& p, const torch::Tensor& t,
                                   const LossConfig& cfg) {
    cfg.validate();
    const auto scores = soft_dice_per_class(p, t, cfg.epsilon);
    const auto counts = flat(t).sum(1).detach();
    const int64_t num_classes = scores.size(0);
    switch (cfg.weighting_mode) {
        case WeightingMode::literal: {
            const auto present = counts.gt(0.0);
            const auto safe = torch::where(present, counts, torch::ones_like(counts));
            const auto terms = torch::where(present, scores / safe, torch::zeros_like(scores));
            return 1.0 - terms.sum();
        }
        case WeightingMode::normalized_inverse_count: {
            const auto present = counts.gt(0.0);
            auto inv = torch::where(present, 1.0 / counts.clamp_min(1.0), torch::zeros_like(counts));
            const auto total = inv.sum();
            TORCH_CHECK(total.item<double>() > 0.0, "no class present in the target");
            const auto w = inv / total;
            return 1.0 - (w * scores).sum();
        }
        case WeightingMode::uniform:
        default:
            return 1.0 - scores.sum() / static_cast<double>(num_classes);
    }
}

torch::Tensor foreground_score(const torch::Tensor& p, const torch::Tensor& t,
                               const LossConfig& cfg) {
    cfg.validate();
    check_pair(p, t);
    const auto p0 = flat(p)[0];
    const auto t0 = flat(t)[0];
    const auto inter = ((1.0 - t0) * (1.0 - p0)).sum();
    const auto denom = (2.0 - t0 - p0).sum();
    return (2.0 * inter + cfg.epsilon) / (denom + cfg.epsilon);
}

torch::Tensor foreground_loss(const torch::Tensor& p, const torch::Tensor& t,
                              const LossConfig& cfg) {
    const auto s = foreground_score(p, t, cfg);
    if (cfg.roi_mode == RoiMode::unit) return 1.0 - s;
    const double n0 = flat(t)[0].sum().item<double>();
    return 1.0 - s / std::max(n0, 1.0);
}

StepLossResult step_loss(int step, const std::optional<torch::Tensor>& p1,
                         const std::optional<torch::Tensor>& p2,
                         const std::optional<torch::Tensor>& t1,
                         const std::optional<torch::Tensor>& t2, const LossConfig& cfg) {
    TORCH_CHECK(step >= 1 && step <= 4, "step must be in 1..4");
    StepLossResult r;
    auto need = [](const std::optional<torch::Tensor>& t, const char* what) -> const torch::Tensor& {
        TORCH_CHECK(t.has_value(), "step_loss: missing ", what);
        return *t;
    };
    switch (step) {
        case 1: {
            r.total = foreground_loss(need(p1, "p1"), need(t1, "t1"), cfg);
            r.terms["l_roi"] = r.total.item<double>();
            break;
        }
        case 2: {
            const auto roi = foreground_loss(need(p1, "p1"), need(t1, "t1"), cfg);
            const auto l1 = multiclass_dice_loss(*p1, *t1, cfg);
            r.total = roi + l1;
            r.terms["l_roi"] = roi.item<double>();
            r.terms["l1"] = l1.item<double>();
            break;
        }
        case 3: {
            const auto l1 = multiclass_dice_loss(need(p1, "p1"), need(t1, "t1"), cfg);
            const auto l2 = multiclass_dice_loss(need(p2, "p2 (required for steps 3-4)"),
                                                 need(t2, "t2"), cfg);
            r.total = l1 + l2;
            r.terms["l1"] = l1.item<double>();
            r.terms["l2"] = l2.item<double>();
            break;
        }
        case 4:
        default: {
            r.total = multiclass_dice_loss(need(p2, "p2 (required for steps 3-4)"),
                                           need(t2, "t2"), cfg);
            r.terms["l2"] = r.total.item<double>();
            break;
        }
    }
    return r;
}

}  // namespace c2fseg
