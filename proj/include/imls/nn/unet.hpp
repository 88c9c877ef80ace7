#pragma once

#include <torch/torch.h>

#include <json.hpp>

namespace imls {

struct UNetConfig {
    int depth = 5;
    int base_channels = 32;
    int in_channels = 3;
    int out_channels = 1;

    /// Throws ConfigError on bad fields or when `resolution` is not divisible by 2^depth.
    void validate(int resolution) const;
    void validate() const;
};
void to_json(nlohmann::json& j, const UNetConfig& c);
void from_json(const nlohmann::json& j, UNetConfig& c);

/// conv3x3-BN-ReLU twice.
class ConvBlockImpl : public torch::nn::Module {
public:
    ConvBlockImpl(int in, int out);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Stride-2 convolutions down, transposed convolutions up, channel-concat skips.
/// Channel width doubles per level starting from base_channels.
class UNetImpl : public torch::nn::Module {
public:
    explicit UNetImpl(const UNetConfig& cfg);

    torch::Tensor forward(const torch::Tensor& x);
    /// Outputs of the first `levels` encoder blocks (full resolution first).
    std::vector<torch::Tensor> encoder_features(const torch::Tensor& x, int levels);

    [[nodiscard]] const UNetConfig& config() const { return cfg_; }

private:
    UNetConfig cfg_;
    std::vector<ConvBlock> enc_;
    std::vector<torch::nn::Sequential> down_;
    std::vector<torch::nn::Sequential> up_;
    std::vector<ConvBlock> dec_;
    ConvBlock bottleneck_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNet);

std::int64_t parameter_count(torch::nn::Module& m);

}  // namespace imls
