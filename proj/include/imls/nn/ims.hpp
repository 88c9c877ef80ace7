#pragma once

#include <torch/torch.h>

#include <memory>
#include <json.hpp>

#include "imls/camera.hpp"
#include "imls/image.hpp"
#include "imls/nn/unet.hpp"

namespace imls {

struct GeneratorConfig {
    int layers = 8;            // transposed convolutions; output is 2^layers square
    int base_channels = 16;    // width of the last hidden layer, doubling towards the seed
    int max_channels = 256;
    int latent = 128;          // channels of the 1x1 seed
    double orbit_radius = 3.0; // view floats are divided by this

    void validate() const;
    [[nodiscard]] int resolution() const { return 1 << layers; }
};
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct DiscriminatorConfig {
    int base_channels = 16;
    int max_channels = 128;
    int resolution = 64;

    void validate() const;
    /// Stride-2 convolutions from resolution down to 4x4.
    [[nodiscard]] int conv_layers() const;
};
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// B x 9 tensor of view floats divided by the orbit radius.
torch::Tensor view_tensor(const std::vector<ViewParams>& views, double orbit_radius);

/// Dense projection to a 1x1 seed, then transposed convolutions (BN + ReLU)
/// doubling the resolution per layer, tanh tail. Output B x 1 x n x n in [-1,1].
class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const GeneratorConfig& cfg);
    torch::Tensor forward(const torch::Tensor& views);
    [[nodiscard]] const GeneratorConfig& config() const { return cfg_; }

private:
    GeneratorConfig cfg_;
    torch::nn::Linear project_{nullptr};
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Generator);

/// Strided convolutions with LeakyReLU(0.2) and BN, sigmoid probability tail.
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const DiscriminatorConfig& cfg);
    /// B x 1 x n x n in [-1,1] -> B probabilities.
    torch::Tensor forward(const torch::Tensor& im);

private:
    DiscriminatorConfig cfg_;
    torch::nn::Sequential body_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Discriminator);

/// {0,1} -> {-1,1}.
torch::Tensor scale_label(const torch::Tensor& im);
/// 1 where the prediction is strictly positive; `valid` (optional) zeroes padding.
torch::Tensor binarize_im(const torch::Tensor& im_pred, const torch::Tensor& valid = {});
BoolGrid binarize_im(const torch::Tensor& im_pred, const BoolGrid& valid);

struct GanLosses {
    torch::Tensor discriminator;  // -log D_real - log(1 - D_fake)
    torch::Tensor generator;      // -log D_fake (non-saturating)
};
/// Probabilities are clamped to [1e-7, 1 - 1e-7]; batch means.
GanLosses gan_losses(const torch::Tensor& d_real, const torch::Tensor& d_fake);

inline constexpr double kPerceptualWeight = 1.0;
inline constexpr double kAdversarialWeight = 0.01;

/// Frozen feature stack for the perceptual loss. Input is B x 3 x n x n.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<torch::Tensor> features(const torch::Tensor& x) = 0;
    virtual std::string name() const = 0;
    virtual void to(torch::Dtype dtype) = 0;
};

/// Taps the input itself and the first `levels` blocks of a trained IML encoder.
class EncoderFeatures : public FeatureExtractor {
public:
    EncoderFeatures(UNet encoder, int levels);
    std::vector<torch::Tensor> features(const torch::Tensor& x) override;
    std::string name() const override { return "iml_encoder"; }
    void to(torch::Dtype dtype) override;

private:
    UNet encoder_;
    int levels_;
};

/// Fixed randomly initialized conv + ReLU stack (seeded); taps the input and every stage.
class RandomConvFeatures : public FeatureExtractor {
public:
    explicit RandomConvFeatures(std::uint64_t seed, std::vector<int> widths = {8, 16});
    std::vector<torch::Tensor> features(const torch::Tensor& x) override;
    std::string name() const override { return "random_conv"; }
    void to(torch::Dtype dtype) override;

private:
    std::vector<torch::nn::Conv2d> stages_;
};

/// Sum over taps of the MSE between feature maps of the two masks (each
/// replicated to 3 channels).
torch::Tensor perceptual_loss(FeatureExtractor& extractor, const torch::Tensor& pred_im,
                              const torch::Tensor& label_im);

}  // namespace imls
