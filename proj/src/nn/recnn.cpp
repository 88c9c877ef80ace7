#include "imls/nn/recnn.hpp"

#include "imls/errors.hpp"

namespace imls {

namespace nnf = torch::nn::functional;

std::string to_string(RecNNKind k) { return k == RecNNKind::SuperRes ? "superres" : "foveated"; }

RecNNKind parse_recnn_kind(const std::string& s) {
    if (s == "superres") return RecNNKind::SuperRes;
    if (s == "foveated") return RecNNKind::Foveated;
    throw ConfigError("unknown RecNN kind '" + s + "'");
}

void RecNNConfig::validate() const {
    if (output_resolution < 1) throw ConfigError("RecNN output resolution must be positive");
    if (kind == RecNNKind::SuperRes) {
        if (scale != 2 && scale != 4) throw ConfigError("super-resolution scale must be 2 or 4");
        if (blocks < 1) throw ConfigError("super-resolution needs at least one residual block");
        if (channels < 1) throw ConfigError("super-resolution channel count must be positive");
        if (output_resolution % scale != 0) throw ConfigError("output resolution is not a multiple of the scale");
    } else {
        if (wnet.in_channels != 4 || wnet.out_channels != 3) throw ConfigError("W-Net halves map 4 channels to 3");
        wnet.validate(output_resolution);
    }
}

void to_json(nlohmann::json& j, const RecNNConfig& c) {
    j = {{"kind", to_string(c.kind)}, {"scale", c.scale}, {"blocks", c.blocks}, {"channels", c.channels},
         {"output_resolution", c.output_resolution}, {"wnet", c.wnet}, {"provenance", c.provenance}};
}

void from_json(const nlohmann::json& j, RecNNConfig& c) {
    if (j.contains("kind")) c.kind = parse_recnn_kind(j.at("kind").get<std::string>());
    c.scale = j.value("scale", c.scale);
    c.blocks = j.value("blocks", c.blocks);
    c.channels = j.value("channels", c.channels);
    c.output_resolution = j.value("output_resolution", c.output_resolution);
    if (j.contains("wnet")) c.wnet = j.at("wnet").get<UNetConfig>();
    c.wnet.in_channels = 4;
    c.wnet.out_channels = 3;
    c.provenance = j.value("provenance", c.provenance);
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
    a_ = register_module("a", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
    b_ = register_module("b", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    return x + b_->forward(torch::relu(a_->forward(x)));
}

SuperResNetImpl::SuperResNetImpl(const RecNNConfig& cfg) : scale_(cfg.scale) {
    head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, cfg.channels, 3).padding(1)));
    body_ = register_module("body", torch::nn::Sequential());
    for (int b = 0; b < cfg.blocks; ++b) body_->push_back(ResidualBlock(cfg.channels));
    tail_ = register_module(
        "tail", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.channels, 3 * cfg.scale * cfg.scale, 3).padding(1)));
    shuffle_ = register_module("shuffle", torch::nn::PixelShuffle(cfg.scale));
}

torch::Tensor SuperResNetImpl::forward(const torch::Tensor& c_image) {
    auto h = torch::relu(head_->forward(c_image));
    h = h + body_->forward(h);
    auto detail = shuffle_->forward(tail_->forward(h));
    auto base = nnf::interpolate(c_image, nnf::InterpolateFuncOptions()
                                              .scale_factor(std::vector<double>{double(scale_), double(scale_)})
                                              .mode(torch::kBilinear)
                                              .align_corners(false));
    return base + detail;
}

FoveatedNetImpl::FoveatedNetImpl(const RecNNConfig& cfg) {
    first_ = register_module("first", UNet(cfg.wnet));
    second_ = register_module("second", UNet(cfg.wnet));
}

torch::Tensor FoveatedNetImpl::forward(const torch::Tensor& pr_image, const torch::Tensor& mask) {
    auto y = pr_image + first_->forward(torch::cat({pr_image, mask}, 1));
    return y + second_->forward(torch::cat({y, mask}, 1));
}

RecNNImpl::RecNNImpl(const RecNNConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.kind == RecNNKind::SuperRes)
        sr_ = register_module("superres", SuperResNet(cfg_));
    else
        fov_ = register_module("foveated", FoveatedNet(cfg_));
}

torch::Tensor RecNNImpl::forward(const torch::Tensor& input, const torch::Tensor& mask) {
    if (input.dim() != 4 || input.size(1) != 3) throw ShapeError("RecNN expects B x 3 x H x W input");
    const int expected = cfg_.input_resolution();
    if (input.size(2) != expected || input.size(3) != expected)
        throw ConfigError("RecNN input is " + std::to_string(input.size(2)) + "x" + std::to_string(input.size(3)) +
                          ", configured for " + std::to_string(expected));
    torch::Tensor out;
    if (cfg_.kind == RecNNKind::SuperRes) {
        out = sr_->forward(input);
    } else {
        if (!mask.defined() || mask.dim() != 4 || mask.size(1) != 1 || mask.size(0) != input.size(0) ||
            mask.size(2) != input.size(2) || mask.size(3) != input.size(3))
            throw ShapeError("foveated RecNN needs a B x 1 x m x m pattern mask");
        out = fov_->forward(input, mask.to(input.scalar_type()));
    }
    return is_training() ? out : out.clamp(0.0, 1.0);
}

}  // namespace imls
