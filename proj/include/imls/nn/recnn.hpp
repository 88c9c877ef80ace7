#pragma once

#include <torch/torch.h>

#include <json.hpp>

#include "imls/nn/unet.hpp"

namespace imls {

enum class RecNNKind { SuperRes, Foveated };
std::string to_string(RecNNKind k);
RecNNKind parse_recnn_kind(const std::string& s);

struct RecNNConfig {
    RecNNKind kind = RecNNKind::SuperRes;
    int scale = 4;               // superres
    int blocks = 10;             // superres residual blocks
    int channels = 32;           // superres feature width
    int output_resolution = 512; // m
    UNetConfig wnet{3, 16, 4, 3};  // each half of the foveated W-Net
    std::string provenance = "trained_here";

    void validate() const;
    [[nodiscard]] int input_resolution() const {
        return kind == RecNNKind::SuperRes ? output_resolution / scale : output_resolution;
    }
};
void to_json(nlohmann::json& j, const RecNNConfig& c);
void from_json(const nlohmann::json& j, RecNNConfig& c);

class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(int channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d a_{nullptr}, b_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Conv head, residual blocks, pixel-shuffle upsampler, plus a bilinear skip of the input.
class SuperResNetImpl : public torch::nn::Module {
public:
    explicit SuperResNetImpl(const RecNNConfig& cfg);
    torch::Tensor forward(const torch::Tensor& c_image);

private:
    int scale_;
    torch::nn::Conv2d head_{nullptr}, tail_{nullptr};
    torch::nn::Sequential body_{nullptr};
    torch::nn::PixelShuffle shuffle_{nullptr};
};
TORCH_MODULE(SuperResNet);

/// Two stacked U-Nets over (image, pattern mask).
class FoveatedNetImpl : public torch::nn::Module {
public:
    explicit FoveatedNetImpl(const RecNNConfig& cfg);
    torch::Tensor forward(const torch::Tensor& pr_image, const torch::Tensor& mask);

private:
    UNet first_{nullptr}, second_{nullptr};
};
TORCH_MODULE(FoveatedNet);

/// Reconstruction network with a kind-independent call signature. `mask` is
/// the B x 1 x m x m pattern for the foveated kind and ignored otherwise.
class RecNNImpl : public torch::nn::Module {
public:
    explicit RecNNImpl(const RecNNConfig& cfg);

    /// Raw output during training; clamped to [0,1] in eval mode.
    torch::Tensor forward(const torch::Tensor& input, const torch::Tensor& mask = {});

    [[nodiscard]] const RecNNConfig& config() const { return cfg_; }

private:
    RecNNConfig cfg_;
    SuperResNet sr_{nullptr};
    FoveatedNet fov_{nullptr};
};
TORCH_MODULE(RecNN);

}  // namespace imls
