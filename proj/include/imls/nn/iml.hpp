#pragma once

#include <torch/torch.h>

#include <json.hpp>

#include "imls/nn/unet.hpp"
#include "imls/sampling.hpp"

namespace imls {

struct NormalizationParams {
    double u = 0.2;       // prescribed mean
    double l = 0.0;       // lower bound
    double delta = 1e-7;  // zero-mean guard
    double alpha = 50.0;  // sigmoid steepness of the soft mask

    void validate() const;
};
void to_json(nlohmann::json& j, const NormalizationParams& p);
void from_json(const nlohmann::json& j, NormalizationParams& p);

/// PIM' = l + PIM * (u - l) / (mean(PIM) + delta), mean taken per sample
/// (over all non-batch dims; a 2-D input is one sample).
torch::Tensor normalize_pim(const torch::Tensor& pim, const NormalizationParams& p);

enum class MaskMode { Hard, Soft };

/// Hard: 1 where PIM' > P. Soft: sigmoid(alpha * (PIM' - P)).
torch::Tensor rejection_sample(const torch::Tensor& pim_normalized, const torch::Tensor& p, MaskMode mode,
                               double alpha);

/// IM broadcast over channels. IM is B x 1 x n x n (or n x n against C x n x n).
torch::Tensor apply_mask(const torch::Tensor& im, const torch::Tensor& c_image);

/// MSE; throws ShapeError unless shapes match exactly.
torch::Tensor compaction_loss(const torch::Tensor& reconstruction, const torch::Tensor& c_image);
/// 0.5 * MSE(compact) + 0.5 * MSE(full).
torch::Tensor end_to_end_loss(const torch::Tensor& recon_c, const torch::Tensor& c_image,
                              const torch::Tensor& recon_full, const torch::Tensor& gt_full);

/// 1 x 1 x n x n tensor of a random pattern's values.
torch::Tensor pattern_tensor(const RandomPattern& p);

struct IMLConfig {
    UNetConfig encoder{5, 32, 3, 1};
    UNetConfig decoder{5, 32, 3, 3};
    NormalizationParams norm{};
    int resolution = 64;  // n
    std::uint64_t inference_seed = 7;

    void validate() const;
};
void to_json(nlohmann::json& j, const IMLConfig& c);
void from_json(const nlohmann::json& j, IMLConfig& c);

struct IMLOutput {
    torch::Tensor pim;             // B x 1 x n x n, >= 0
    torch::Tensor pim_normalized;  // B x 1 x n x n
    torch::Tensor im;              // B x 1 x n x n
    torch::Tensor pr_c_image;      // B x 3 x n x n
    torch::Tensor reconstruction;  // B x 3 x n x n
};

/// Encoder -> normalization -> rejection sampling -> masking -> decoder.
class IMLNetImpl : public torch::nn::Module {
public:
    explicit IMLNetImpl(const IMLConfig& cfg);

    /// Softplus-tailed encoder output.
    torch::Tensor encode(const torch::Tensor& c_image);
    /// In-painting decoder; predicts a correction added to its input.
    /// Clamped to [0,1] outside training.
    torch::Tensor decode(const torch::Tensor& pr_c_image);
    /// Rendered slots (im = 1) pass through; the decoder fills the rest.
    torch::Tensor fill(const torch::Tensor& pr_c_image, const torch::Tensor& im);

    /// `valid` (1 x 1 x n x n, optional) zeroes the mask on padded slots.
    IMLOutput forward(const torch::Tensor& c_image, const torch::Tensor& p, MaskMode mode,
                      const torch::Tensor& valid = {});
    /// Eval-mode forward with hard sampling against the fixed inference pattern;
    /// the reconstruction keeps the sampled slots as given.
    IMLOutput infer(const torch::Tensor& c_image, const torch::Tensor& valid = {});

    [[nodiscard]] const IMLConfig& config() const { return cfg_; }
    [[nodiscard]] const torch::Tensor& inference_pattern() const { return p_fixed_; }

    UNet encoder{nullptr};
    UNet decoder{nullptr};

private:
    IMLConfig cfg_;
    torch::Tensor p_fixed_;
};
TORCH_MODULE(IMLNet);

}  // namespace imls
