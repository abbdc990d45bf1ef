#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "c2fseg/volume.hpp"

namespace c2fseg {

/// Dilated volumetric encoder-decoder (coarse localization net).
struct Net1Config {
    int blocks_per_path = 4;
    int kernel = 5;
    std::vector<int> dilation_contracting{2, 4, 6, 8};  // rate 2n at block n
    int pool = 2;
    int base_width = 8;
    double dropout_rate = 0.2;
    int num_classes = 2;  // C+1

    void validate() const;
    std::vector<int> dilation_expansive() const {
        return {dilation_contracting.rbegin(), dilation_contracting.rend()};
    }
    /// Input dims must be divisible by this (pooling depth).
    int64_t divisibility() const { return int64_t(1) << blocks_per_path; }
};

/// 3D-to-2D slice classifier: 3D contracting path, slice-collapse block,
/// 2D expansive path. For input depth z the output depth is z - K + 1.
struct Net2Config {
    int blocks_per_path = 4;
    int kernel_contracting = 3;
    int kernel_expansive = 5;  // in-plane 5x5
    int K = 9;                 // odd slice-neighborhood size
    int base_width = 8;
    int num_classes = 2;
    int input_channels = 2;

    void validate() const;
    int64_t divisibility() const { return int64_t(1) << blocks_per_path; }
};

/// Two 5x5x5 dilated convolutions with rectified-linear activations and
/// an optional block-level dropout, shape preserving.
struct DilatedBlockImpl : torch::nn::Module {
    DilatedBlockImpl(int in_ch, int out_ch, int kernel, int dilation, double dropout_rate);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::Conv3d conv1{nullptr}, conv2{nullptr};
    torch::nn::Dropout drop{nullptr};
    bool use_dropout = false;
};
TORCH_MODULE(DilatedBlock);

struct Net1Impl : torch::nn::Module {
    explicit Net1Impl(Net1Config cfg);

    /// (N, 1, z, y, x) -> per-voxel class probabilities (N, C+1, z, y, x).
    /// Spatial dims must be divisible by 2^blocks (caller pads).
    torch::Tensor forward(torch::Tensor x);
    torch::Tensor forward_logits(torch::Tensor x);

    Net1Config cfg;
    std::vector<DilatedBlock> enc, dec;
    DilatedBlock bottleneck{nullptr};
    std::vector<torch::nn::ConvTranspose3d> up;
    torch::nn::MaxPool3d pool{nullptr};
    torch::nn::Conv3d head{nullptr};
};
TORCH_MODULE(Net1);

/// Two in-plane convolutions (kernel (1,k,k)) with activations.
struct PlaneBlockImpl : torch::nn::Module {
    PlaneBlockImpl(int in_ch, int out_ch, int kernel);
    torch::Tensor forward(torch::Tensor x);
    torch::nn::Conv3d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(PlaneBlock);

struct Net2Impl : torch::nn::Module {
    explicit Net2Impl(Net2Config cfg);

    /// (N, 2, z, y, x) -> (N, C+1, z-K+1, y, x); y/x divisible by 2^blocks,
    /// z >= K.
    torch::Tensor forward(torch::Tensor x);
    torch::Tensor forward_logits(torch::Tensor x);

    Net2Config cfg;
    std::vector<torch::nn::Sequential> enc;  // 3x3x3 blocks
    torch::nn::Sequential collapse{nullptr};
    std::vector<PlaneBlock> dec;
    std::vector<torch::nn::ConvTranspose3d> up;
    torch::nn::MaxPool3d pool{nullptr};
    torch::nn::Conv3d head{nullptr};
};
TORCH_MODULE(Net2);

/// Net2 input: channel 0 = intensity in [-1,1], channel 1 = argmax label
/// of the Net1 probability field scaled to [0,1] by division by C.
/// The label channel is detached (argmax carries no gradient).
torch::Tensor compose_net2_input(const torch::Tensor& intensity, const torch::Tensor& p1_probs);

/// Tight bounding box of predicted foreground (argmax >= 1), expanded by
/// margin_vox per face, clamped, in-plane extents rounded up to multiples
/// of `multiple`. Full volume when no foreground is predicted.
Box3 dynamic_tile(const torch::Tensor& p1, int64_t margin_vox, const Dims3& volume_dims,
                  int64_t multiple = 16);

/// Fan-in-scaled normal init for every convolution; zero biases.
void init_parameters(torch::nn::Module& m, double gain = 2.0);

struct ModelSummary {
    std::vector<std::string> rows;  // rendered layer table rows
    int64_t total_params = 0;
    int conv_layers = 0;
    int transposed_conv_layers = 0;
    std::vector<int> contracting_dilations;
    std::vector<int> expansive_dilations;
};

ModelSummary summarize(torch::nn::Module& m);
std::string render(const ModelSummary& s, const std::string& title);

}  // namespace c2fseg
