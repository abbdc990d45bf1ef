#include "c2fseg/networks.hpp"

#include <sstream>

namespace c2fseg {

void Net1Config::validate() const {
    if (blocks_per_path < 1) throw std::invalid_argument("net1: blocks_per_path must be >= 1");
    if (kernel % 2 == 0) throw std::invalid_argument("net1: kernel must be odd");
    if (static_cast<int>(dilation_contracting.size()) != blocks_per_path)
        throw std::invalid_argument("net1: need one dilation per contracting block");
    for (int n = 1; n <= blocks_per_path; ++n)
        if (dilation_contracting[static_cast<size_t>(n - 1)] != 2 * n)
            throw std::invalid_argument("net1: dilation at contracting block n must equal 2n");
    if (base_width < 1) throw std::invalid_argument("net1: base_width must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("net1: num_classes must be >= 2");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("net1: dropout_rate must be in [0, 1)");
    if (pool != 2) throw std::invalid_argument("net1: pool must be 2");
}

void Net2Config::validate() const {
    if (blocks_per_path < 1) throw std::invalid_argument("net2: blocks_per_path must be >= 1");
    if (K < 1 || K % 2 == 0) throw std::invalid_argument("net2: K must be odd and >= 1");
    if (kernel_contracting % 2 == 0 || kernel_expansive % 2 == 0)
        throw std::invalid_argument("net2: kernels must be odd");
    if (base_width < 1) throw std::invalid_argument("net2: base_width must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("net2: num_classes must be >= 2");
    if (input_channels != 2) throw std::invalid_argument("net2: input_channels must be 2");
}

DilatedBlockImpl::DilatedBlockImpl(int in_ch, int out_ch, int kernel, int dilation,
                                   double dropout_rate) {
    const int64_t pad = static_cast<int64_t>(kernel - 1) / 2 * dilation;
    conv1 = register_module(
        "conv1", torch::nn::Conv3d(
                     torch::nn::Conv3dOptions(in_ch, out_ch, kernel).padding(pad).dilation(dilation)));
    conv2 = register_module(
        "conv2", torch::nn::Conv3d(
                     torch::nn::Conv3dOptions(out_ch, out_ch, kernel).padding(pad).dilation(dilation)));
    use_dropout = dropout_rate > 0.0;
    if (use_dropout)
        drop = register_module("drop", torch::nn::Dropout(torch::nn::DropoutOptions(dropout_rate)));
}

torch::Tensor DilatedBlockImpl::forward(torch::Tensor x) {
    x = torch::relu(conv1(x));
    x = torch::relu(conv2(x));
    if (use_dropout) x = drop(x);
    return x;
}

Net1Impl::Net1Impl(Net1Config c) : cfg(std::move(c)) {
    cfg.validate();
    const int B = cfg.blocks_per_path;
    const int w = cfg.base_width;
    pool = register_module("pool", torch::nn::MaxPool3d(torch::nn::MaxPool3dOptions(cfg.pool)));
    int in_ch = 1;
    for (int n = 1; n <= B; ++n) {
        const int out_ch = w << (n - 1);
        enc.push_back(register_module(
            "enc" + std::to_string(n),
            DilatedBlock(in_ch, out_ch, cfg.kernel, cfg.dilation_contracting[n - 1],
                         cfg.dropout_rate)));
        in_ch = out_ch;
    }
    const int bott_ch = w << B;
    bottleneck = register_module("bottleneck",
                                 DilatedBlock(in_ch, bott_ch, cfg.kernel, 1, cfg.dropout_rate));
    const auto exp_dil = dilation_expansive();
    int cur = bott_ch;
    for (int i = 0; i < B; ++i) {
        const int skip_ch = w << (B - 1 - i);
        up.push_back(register_module(
            "up" + std::to_string(i + 1),
            torch::nn::ConvTranspose3d(
                torch::nn::ConvTranspose3dOptions(cur, skip_ch, 2).stride(2))));
        dec.push_back(register_module(
            "dec" + std::to_string(i + 1),
            DilatedBlock(2 * skip_ch, skip_ch, cfg.kernel, exp_dil[static_cast<size_t>(i)],
                         cfg.dropout_rate)));
        cur = skip_ch;
    }
    head = register_module("head",
                           torch::nn::Conv3d(torch::nn::Conv3dOptions(cur, cfg.num_classes, 1)));
}

torch::Tensor Net1Impl::forward_logits(torch::Tensor x) {
    TORCH_CHECK(x.dim() == 5 && x.size(1) == 1, "net1 expects (N, 1, z, y, x), got ", x.sizes());
    const int64_t div = cfg.divisibility();
    for (int d = 2; d < 5; ++d)
        TORCH_CHECK(x.size(d) % div == 0, "net1 input dims must be divisible by ", div,
                    " (caller must pad), got ", x.sizes());
    std::vector<torch::Tensor> skips;
    for (auto& block : enc) {
        x = block(x);
        skips.push_back(x);
        x = pool(x);
    }
    x = bottleneck(x);
    for (size_t i = 0; i < up.size(); ++i) {
        x = up[i](x);
        x = torch::cat({skips[skips.size() - 1 - i], x}, 1);
        x = dec[i](x);
    }
    return head(x);
}

torch::Tensor Net1Impl::forward(torch::Tensor x) {
    return torch::softmax(forward_logits(std::move(x)), 1);
}

PlaneBlockImpl::PlaneBlockImpl(int in_ch, int out_ch, int kernel) {
    const int64_t p = (kernel - 1) / 2;
    const auto pad = torch::ExpandingArray<3>({0, p, p});
    const auto k = torch::ExpandingArray<3>({1, kernel, kernel});
    conv1 = register_module("conv1",
                            torch::nn::Conv3d(torch::nn::Conv3dOptions(in_ch, out_ch, k).padding(pad)));
    conv2 = register_module(
        "conv2", torch::nn::Conv3d(torch::nn::Conv3dOptions(out_ch, out_ch, k).padding(pad)));
}

torch::Tensor PlaneBlockImpl::forward(torch::Tensor x) {
    x = torch::relu(conv1(x));
    return torch::relu(conv2(x));
}

Net2Impl::Net2Impl(Net2Config c) : cfg(std::move(c)) {
    cfg.validate();
    const int B = cfg.blocks_per_path;
    const int w = cfg.base_width;
    pool = register_module(
        "pool", torch::nn::MaxPool3d(torch::nn::MaxPool3dOptions({1, 2, 2}).stride({1, 2, 2})));
    int in_ch = cfg.input_channels;
    for (int n = 1; n <= B; ++n) {
        const int out_ch = w << (n - 1);
        const int64_t p = (cfg.kernel_contracting - 1) / 2;
        torch::nn::Sequential block(
            torch::nn::Conv3d(
                torch::nn::Conv3dOptions(in_ch, out_ch, cfg.kernel_contracting).padding(p)),
            torch::nn::ReLU(),
            torch::nn::Conv3d(
                torch::nn::Conv3dOptions(out_ch, out_ch, cfg.kernel_contracting).padding(p)),
            torch::nn::ReLU());
        enc.push_back(register_module("enc" + std::to_string(n), block));
        in_ch = out_ch;
    }
    // slice-collapse block: a 1x1xK valid convolution removes the K-1
    // neighbor slices, followed by a 1x1x1 mixing convolution
    const int bott_ch = w << B;
    collapse = register_module(
        "collapse",
        torch::nn::Sequential(
            torch::nn::Conv3d(torch::nn::Conv3dOptions(in_ch, bott_ch,
                                                       torch::ExpandingArray<3>({cfg.K, 1, 1}))),
            torch::nn::ReLU(),
            torch::nn::Conv3d(torch::nn::Conv3dOptions(bott_ch, bott_ch, 1)), torch::nn::ReLU()));
    int cur = bott_ch;
    for (int i = 0; i < B; ++i) {
        const int skip_ch = w << (B - 1 - i);
        up.push_back(register_module(
            "up" + std::to_string(i + 1),
            torch::nn::ConvTranspose3d(torch::nn::ConvTranspose3dOptions(
                                           cur, skip_ch, torch::ExpandingArray<3>({1, 2, 2}))
                                           .stride(torch::ExpandingArray<3>({1, 2, 2})))));
        dec.push_back(register_module("dec" + std::to_string(i + 1),
                                      PlaneBlock(2 * skip_ch, skip_ch, cfg.kernel_expansive)));
        cur = skip_ch;
    }
    head = register_module("head",
                           torch::nn::Conv3d(torch::nn::Conv3dOptions(cur, cfg.num_classes, 1)));
}

torch::Tensor Net2Impl::forward_logits(torch::Tensor x) {
    TORCH_CHECK(x.dim() == 5 && x.size(1) == cfg.input_channels, "net2 expects (N, ",
                cfg.input_channels, ", z, y, x), got ", x.sizes());
    TORCH_CHECK(x.size(2) >= cfg.K, "net2 input depth ", x.size(2), " is smaller than K=", cfg.K);
    const int64_t div = cfg.divisibility();
    TORCH_CHECK(x.size(3) % div == 0 && x.size(4) % div == 0,
                "net2 in-plane dims must be divisible by ", div, ", got ", x.sizes());
    std::vector<torch::Tensor> skips;
    for (auto& block : enc) {
        x = block->forward(x);
        skips.push_back(x);
        x = pool(x);
    }
    x = collapse->forward(x);
    const int64_t z_out = x.size(2);
    const int64_t z_off = (cfg.K - 1) / 2;
    for (size_t i = 0; i < up.size(); ++i) {
        x = up[i](x);
        // skips are 3D with full depth; take the z-centered window so each
        // output slice sees the features of its own center slice
        auto skip = skips[skips.size() - 1 - i].narrow(2, z_off, z_out);
        x = torch::cat({skip, x}, 1);
        x = dec[i](x);
    }
    return head(x);
}

torch::Tensor Net2Impl::forward(torch::Tensor x) {
    return torch::softmax(forward_logits(std::move(x)), 1);
}

torch::Tensor compose_net2_input(const torch::Tensor& intensity, const torch::Tensor& p1_probs) {
    TORCH_CHECK(intensity.dim() == 5 && p1_probs.dim() == 5,
                "compose_net2_input expects batched (N, C, z, y, x) tensors");
    TORCH_CHECK(intensity.sizes().slice(2) == p1_probs.sizes().slice(2),
                "intensity/probability spatial shape mismatch: ", intensity.sizes(), " vs ",
                p1_probs.sizes());
    const int64_t fg_classes = p1_probs.size(1) - 1;
    TORCH_CHECK(fg_classes >= 1, "need at least one foreground class");
    const auto labels = p1_probs.argmax(1, /*keepdim=*/true).detach().to(intensity.dtype());
    return torch::cat({intensity, labels / static_cast<double>(fg_classes)}, 1);
}

Box3 dynamic_tile(const torch::Tensor& p1, int64_t margin_vox, const Dims3& volume_dims,
                  int64_t multiple) {
    TORCH_CHECK(p1.dim() == 4, "dynamic_tile expects (C, z, y, x)");
    const Box3 full{{0, 0, 0}, volume_dims};
    const auto fg = p1.argmax(0).ge(1);
    if (!fg.any().item<bool>()) return full;
    const auto nz = fg.nonzero();  // (k, 3) in (z, y, x) order
    const auto mins = std::get<0>(nz.min(0));
    const auto maxs = std::get<0>(nz.max(0));
    Box3 box;
    for (int a = 0; a < 3; ++a) {
        const int64_t lo = mins[2 - a].item<int64_t>();
        const int64_t hi = maxs[2 - a].item<int64_t>();
        box.lo[a] = std::max<int64_t>(0, lo - margin_vox);
        box.hi[a] = std::min<int64_t>(volume_dims[a], hi + margin_vox + 1);
    }
    // round in-plane extents up to the pooling multiple, re-center, clamp
    for (int a = 0; a < 2; ++a) {
        const int64_t dim = volume_dims[a];
        int64_t ext = box.hi[a] - box.lo[a];
        int64_t target = ((ext + multiple - 1) / multiple) * multiple;
        if (target >= dim) {
            box.lo[a] = 0;
            box.hi[a] = dim;
            continue;
        }
        const int64_t grow = target - ext;
        box.lo[a] -= grow / 2;
        box.hi[a] += grow - grow / 2;
        if (box.lo[a] < 0) {
            box.hi[a] -= box.lo[a];
            box.lo[a] = 0;
        }
        if (box.hi[a] > dim) {
            box.lo[a] -= box.hi[a] - dim;
            box.hi[a] = dim;
        }
    }
    return box;
}

void init_parameters(torch::nn::Module& m, double gain) {
    torch::NoGradGuard no_grad;
    for (const auto& mod : m.modules(/*include_self=*/false)) {
        torch::Tensor weight, bias;
        if (auto* c = mod->as<torch::nn::Conv3d>()) {
            weight = c->weight;
            bias = c->bias;
        } else if (auto* t = mod->as<torch::nn::ConvTranspose3d>()) {
            weight = t->weight;
            bias = t->bias;
        } else {
            continue;
        }
        const int64_t fan_in = weight.numel() / weight.size(0);
        weight.normal_(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
        if (bias.defined()) bias.zero_();
    }
}

ModelSummary summarize(torch::nn::Module& m) {
    ModelSummary s;
    for (const auto& item : m.named_modules("", false)) {
        const auto& mod = item.value();
        std::ostringstream row;
        if (auto* c = mod->as<torch::nn::Conv3d>()) {
            const auto& o = c->options;
            row << item.key() << "  Conv3d " << o.in_channels() << "->" << o.out_channels()
                << " k=" << (*o.kernel_size())[0] << "x" << (*o.kernel_size())[1] << "x"
                << (*o.kernel_size())[2] << " dil=" << (*o.dilation())[0]
                << " params=" << c->weight.numel() + (c->bias.defined() ? c->bias.numel() : 0);
            ++s.conv_layers;
        } else if (auto* t = mod->as<torch::nn::ConvTranspose3d>()) {
            const auto& o = t->options;
            row << item.key() << "  ConvTranspose3d " << o.in_channels() << "->"
                << o.out_channels() << " k=" << (*o.kernel_size())[0] << "x"
                << (*o.kernel_size())[1] << "x" << (*o.kernel_size())[2]
                << " params=" << t->weight.numel() + (t->bias.defined() ? t->bias.numel() : 0);
            ++s.transposed_conv_layers;
        } else {
            continue;
        }
        s.rows.push_back(row.str());
    }
    for (const auto& p : m.parameters()) s.total_params += p.numel();
    if (auto* n1 = m.as<Net1Impl>()) {
        s.contracting_dilations = n1->cfg.dilation_contracting;
        s.expansive_dilations = n1->cfg.dilation_expansive();
    }
    return s;
}

std::string render(const ModelSummary& s, const std::string& title) {
    std::ostringstream os;
    os << title << "\n";
    for (const auto& r : s.rows) os << "  " << r << "\n";
    os << "  convolutional layers: " << s.conv_layers << " (+" << s.transposed_conv_layers
       << " transposed)\n";
    os << "  trainable parameters: " << s.total_params << "\n";
    if (!s.contracting_dilations.empty()) {
        os << "  dilations contracting: [";
        for (size_t i = 0; i < s.contracting_dilations.size(); ++i)
            os << (i ? "," : "") << s.contracting_dilations[i];
        os << "]  expansive: [";
        for (size_t i = 0; i < s.expansive_dilations.size(); ++i)
            os << (i ? "," : "") << s.expansive_dilations[i];
        os << "]\n";
    }
    return os.str();
}

}  // namespace c2fseg
