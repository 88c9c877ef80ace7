#include "imls/nn/ims.hpp"

#include "imls/errors.hpp"

namespace imls {

namespace nnf = torch::nn::functional;

void GeneratorConfig::validate() const {
    if (layers < 1 || layers > 12) throw ConfigError("generator layer count must be in [1, 12]");
    if (base_channels < 1 || latent < 1 || max_channels < base_channels)
        throw ConfigError("generator channel counts are inconsistent");
    if (!(orbit_radius > 0.0)) throw ConfigError("orbit radius must be positive");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"layers", c.layers}, {"base_channels", c.base_channels}, {"max_channels", c.max_channels},
         {"latent", c.latent}, {"orbit_radius", c.orbit_radius}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.layers = j.value("layers", c.layers);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.max_channels = j.value("max_channels", c.max_channels);
    c.latent = j.value("latent", c.latent);
    c.orbit_radius = j.value("orbit_radius", c.orbit_radius);
}

void DiscriminatorConfig::validate() const {
    if (resolution < 8 || (resolution & (resolution - 1)) != 0)
        throw ConfigError("discriminator resolution must be a power of two >= 8");
    if (base_channels < 1 || max_channels < base_channels)
        throw ConfigError("discriminator channel counts are inconsistent");
}

int DiscriminatorConfig::conv_layers() const {
    int k = 0;
    for (int r = resolution; r > 4; r /= 2) ++k;
    return k;
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"base_channels", c.base_channels}, {"max_channels", c.max_channels}, {"resolution", c.resolution}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.base_channels = j.value("base_channels", c.base_channels);
    c.max_channels = j.value("max_channels", c.max_channels);
    c.resolution = j.value("resolution", c.resolution);
}

torch::Tensor view_tensor(const std::vector<ViewParams>& views, double orbit_radius) {
    auto t = torch::empty({static_cast<std::int64_t>(views.size()), 9}, torch::kFloat32);
    auto acc = t.accessor<float, 2>();
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto a = views[i].to_array();
        for (int k = 0; k < 9; ++k) acc[i][k] = static_cast<float>(a[k] / orbit_radius);
    }
    return t;
}

GeneratorImpl::GeneratorImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    project_ = register_module("project", torch::nn::Linear(9, cfg_.latent));
    body_ = register_module("body", torch::nn::Sequential());
    int in = cfg_.latent;
    for (int k = 0; k < cfg_.layers; ++k) {
        const bool last = k + 1 == cfg_.layers;
        const int out = last ? 1 : std::min(cfg_.max_channels, cfg_.base_channels << (cfg_.layers - 2 - k));
        body_->push_back(torch::nn::ConvTranspose2d(
            torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(last)));
        if (!last) {
            body_->push_back(torch::nn::BatchNorm2d(out));
            body_->push_back(torch::nn::ReLU(true));
        }
        in = out;
    }
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& views) {
    if (views.dim() != 2 || views.size(1) != 9) throw ShapeError("generator expects B x 9 view floats");
    auto seed = torch::relu(project_->forward(views)).view({views.size(0), cfg_.latent, 1, 1});
    return torch::tanh(body_->forward(seed));
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    body_ = register_module("body", torch::nn::Sequential());
    int in = 1;
    const int layers = cfg_.conv_layers();
    for (int k = 0; k < layers; ++k) {
        const int out = std::min(cfg_.max_channels, cfg_.base_channels << k);
        body_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(k == 0)));
        if (k > 0) body_->push_back(torch::nn::BatchNorm2d(out));
        body_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
        in = out;
    }
    head_ = register_module("head", torch::nn::Linear(in * 16, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& im) {
    if (im.dim() != 4 || im.size(1) != 1 || im.size(2) != cfg_.resolution || im.size(3) != cfg_.resolution)
        throw ShapeError("discriminator expects B x 1 x " + std::to_string(cfg_.resolution) + " x " +
                         std::to_string(cfg_.resolution));
    auto h = body_->forward(im).flatten(1);
    return torch::sigmoid(head_->forward(h)).squeeze(1);
}

torch::Tensor scale_label(const torch::Tensor& im) { return im * 2.0 - 1.0; }

torch::Tensor binarize_im(const torch::Tensor& im_pred, const torch::Tensor& valid) {
    auto b = (im_pred > 0).to(torch::kFloat32);
    return valid.defined() ? b * valid.to(torch::kFloat32) : b;
}

BoolGrid binarize_im(const torch::Tensor& im_pred, const BoolGrid& valid) {
    auto flat = im_pred.detach().to(torch::kCPU, torch::kFloat32).squeeze().contiguous();
    if (flat.dim() != 2 || flat.size(0) != valid.size || flat.size(1) != valid.size)
        throw ShapeError("binarize_im: prediction and slot grid differ in size");
    BoolGrid g(valid.size);
    const float* p = flat.data_ptr<float>();
    for (std::size_t k = 0; k < g.cells.size(); ++k) g.cells[k] = p[k] > 0.0f && valid.cells[k];
    return g;
}

GanLosses gan_losses(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    constexpr double eps = 1e-7;
    auto r = d_real.clamp(eps, 1.0 - eps);
    auto f = d_fake.clamp(eps, 1.0 - eps);
    return {(-torch::log(r) - torch::log(1.0 - f)).mean(), (-torch::log(f)).mean()};
}

EncoderFeatures::EncoderFeatures(UNet encoder, int levels) : encoder_(std::move(encoder)), levels_(levels) {
    encoder_->eval();
    for (auto& p : encoder_->parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> EncoderFeatures::features(const torch::Tensor& x) {
    auto taps = encoder_->encoder_features(x, levels_);
    taps.insert(taps.begin(), x);
    return taps;
}

void EncoderFeatures::to(torch::Dtype dtype) { encoder_->to(dtype); }

RandomConvFeatures::RandomConvFeatures(std::uint64_t seed, std::vector<int> widths) {
    torch::manual_seed(seed);
    int in = 3;
    for (int w : widths) {
        stages_.emplace_back(torch::nn::Conv2dOptions(in, w, 3).stride(2).padding(1));
        for (auto& p : stages_.back()->parameters()) p.set_requires_grad(false);
        in = w;
    }
}

std::vector<torch::Tensor> RandomConvFeatures::features(const torch::Tensor& x) {
    std::vector<torch::Tensor> taps{x};
    auto h = x;
    for (auto& s : stages_) {
        h = torch::relu(s->forward(h));
        taps.push_back(h);
    }
    return taps;
}

void RandomConvFeatures::to(torch::Dtype dtype) {
    for (auto& s : stages_) s->to(dtype);
}

torch::Tensor perceptual_loss(FeatureExtractor& extractor, const torch::Tensor& pred_im,
                              const torch::Tensor& label_im) {
    if (pred_im.sizes() != label_im.sizes()) throw ShapeError("perceptual_loss: mask shapes differ");
    if (pred_im.dim() != 4 || pred_im.size(1) != 1) throw ShapeError("perceptual_loss expects B x 1 x n x n masks");
    const auto fp = extractor.features(pred_im.expand({-1, 3, -1, -1}));
    const auto fl = extractor.features(label_im.expand({-1, 3, -1, -1}));
    auto total = torch::zeros({}, pred_im.options());
    for (std::size_t k = 0; k < fp.size(); ++k) total = total + nnf::mse_loss(fp[k], fl[k]);
    return total;
}

}  // namespace imls
