#include "imls/nn/unet.hpp"

#include "imls/errors.hpp"

namespace imls {

namespace nnf = torch::nn::functional;

void UNetConfig::validate() const {
    if (depth < 1) throw ConfigError("UNet depth must be >= 1");
    if (base_channels < 1 || in_channels < 1 || out_channels < 1)
        throw ConfigError("UNet channel counts must be positive");
}

void UNetConfig::validate(int resolution) const {
    validate();
    if (resolution <= 0 || resolution % (1 << depth) != 0)
        throw ConfigError("UNet input resolution " + std::to_string(resolution) + " is not divisible by 2^" +
                          std::to_string(depth));
}

void to_json(nlohmann::json& j, const UNetConfig& c) {
    j = {{"depth", c.depth}, {"base_channels", c.base_channels}, {"in_channels", c.in_channels},
         {"out_channels", c.out_channels}};
}

void from_json(const nlohmann::json& j, UNetConfig& c) {
    c.depth = j.value("depth", c.depth);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
}

namespace {

torch::nn::Sequential conv_bn_relu(int in, int out, int stride) {
    return torch::nn::Sequential(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)),
        torch::nn::BatchNorm2d(out), torch::nn::ReLU(true));
}

}  // namespace

ConvBlockImpl::ConvBlockImpl(int in, int out) {
    body_ = register_module("body", torch::nn::Sequential());
    for (const auto& part : {conv_bn_relu(in, out, 1), conv_bn_relu(out, out, 1)})
        for (const auto& layer : *part) body_->push_back(layer);
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return body_->forward(x); }

UNetImpl::UNetImpl(const UNetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    int ch = cfg.base_channels;
    int in = cfg.in_channels;
    for (int d = 0; d < cfg.depth; ++d) {
        enc_.push_back(register_module("enc" + std::to_string(d), ConvBlock(in, ch)));
        down_.push_back(register_module("down" + std::to_string(d), conv_bn_relu(ch, 2 * ch, 2)));
        in = 2 * ch;
        ch *= 2;
    }
    bottleneck_ = register_module("bottleneck", ConvBlock(ch, ch));
    for (int d = cfg.depth - 1; d >= 0; --d) {
        const int half = ch / 2;
        up_.push_back(register_module(
            "up" + std::to_string(d),
            torch::nn::Sequential(
                torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(ch, half, 2).stride(2).bias(false)),
                torch::nn::BatchNorm2d(half), torch::nn::ReLU(true))));
        dec_.push_back(register_module("dec" + std::to_string(d), ConvBlock(2 * half, half)));
        ch = half;
    }
    head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, cfg.out_channels, 1)));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != cfg_.in_channels)
        throw ShapeError("UNet expects B x " + std::to_string(cfg_.in_channels) + " x H x W input");
    if (x.size(2) != x.size(3)) throw ShapeError("UNet expects square inputs");
    cfg_.validate(static_cast<int>(x.size(2)));
    std::vector<torch::Tensor> skips;
    auto h = x;
    for (int d = 0; d < cfg_.depth; ++d) {
        h = enc_[d]->forward(h);
        skips.push_back(h);
        h = down_[d]->forward(h);
    }
    h = bottleneck_->forward(h);
    for (int k = 0; k < cfg_.depth; ++k) {
        h = up_[k]->forward(h);
        h = dec_[k]->forward(torch::cat({skips[cfg_.depth - 1 - k], h}, 1));
    }
    return head_->forward(h);
}

std::vector<torch::Tensor> UNetImpl::encoder_features(const torch::Tensor& x, int levels) {
    std::vector<torch::Tensor> out;
    auto h = x;
    for (int d = 0; d < std::min(levels, cfg_.depth); ++d) {
        h = enc_[d]->forward(h);
        out.push_back(h);
        if (d + 1 < levels) h = down_[d]->forward(h);
    }
    return out;
}

std::int64_t parameter_count(torch::nn::Module& m) {
    std::int64_t n = 0;
    for (const auto& p : m.parameters()) n += p.numel();
    return n;
}

}  // namespace imls
