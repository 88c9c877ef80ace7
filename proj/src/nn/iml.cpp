#include "imls/nn/iml.hpp"

#include "imls/errors.hpp"

namespace imls {

namespace nnf = torch::nn::functional;

void NormalizationParams::validate() const {
    if (!(u > 0.0 && u <= 1.0)) throw ParameterError("mean value u must lie in (0, 1]");
    if (!(delta > 0.0)) throw ParameterError("delta must be positive");
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (l < 0.0 || l >= u) throw ParameterError("lower bound l must satisfy 0 <= l < u");
}

void to_json(nlohmann::json& j, const NormalizationParams& p) {
    j = {{"u", p.u}, {"l", p.l}, {"delta", p.delta}, {"alpha", p.alpha}};
}

void from_json(const nlohmann::json& j, NormalizationParams& p) {
    p.u = j.value("u", p.u);
    p.l = j.value("l", p.l);
    p.delta = j.value("delta", p.delta);
    p.alpha = j.value("alpha", p.alpha);
}

torch::Tensor normalize_pim(const torch::Tensor& pim, const NormalizationParams& p) {
    torch::Tensor mean;
    if (pim.dim() <= 2) {
        mean = pim.mean();
    } else {
        std::vector<std::int64_t> dims;
        for (std::int64_t d = 1; d < pim.dim(); ++d) dims.push_back(d);
        mean = pim.mean(dims, /*keepdim=*/true);
    }
    return p.l + pim * (p.u - p.l) / (mean + p.delta);
}

torch::Tensor rejection_sample(const torch::Tensor& pim_normalized, const torch::Tensor& p, MaskMode mode,
                               double alpha) {
    if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
    if (pim_normalized.size(-1) != p.size(-1) || pim_normalized.size(-2) != p.size(-2))
        throw ShapeError("rejection_sample: PIM' and P differ in size");
    if (mode == MaskMode::Hard) return (pim_normalized > p).to(pim_normalized.scalar_type());
    return torch::sigmoid(alpha * (pim_normalized - p));
}

torch::Tensor apply_mask(const torch::Tensor& im, const torch::Tensor& c_image) {
    const bool batched = im.dim() == 4 && c_image.dim() == 4 && im.size(0) == c_image.size(0) && im.size(1) == 1;
    const bool single = im.dim() == 2 && c_image.dim() == 3;
    if (!batched && !single) throw ParameterError("apply_mask: mask and image ranks do not match");
    if (im.size(-1) != c_image.size(-1) || im.size(-2) != c_image.size(-2))
        throw ParameterError("apply_mask: mask and image differ in size");
    return im * c_image;
}

namespace {

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw ShapeError(std::string(what) + ": shapes differ");
}

}  // namespace

torch::Tensor compaction_loss(const torch::Tensor& reconstruction, const torch::Tensor& c_image) {
    require_same(reconstruction, c_image, "compaction_loss");
    return nnf::mse_loss(reconstruction, c_image);
}

torch::Tensor end_to_end_loss(const torch::Tensor& recon_c, const torch::Tensor& c_image,
                              const torch::Tensor& recon_full, const torch::Tensor& gt_full) {
    require_same(recon_c, c_image, "end_to_end_loss");
    require_same(recon_full, gt_full, "end_to_end_loss");
    return 0.5 * nnf::mse_loss(recon_c, c_image) + 0.5 * nnf::mse_loss(recon_full, gt_full);
}

torch::Tensor pattern_tensor(const RandomPattern& p) {
    auto t = torch::empty({1, 1, p.size, p.size}, torch::kFloat32);
    float* d = t.data_ptr<float>();
    for (std::size_t k = 0; k < p.values.size(); ++k) d[k] = static_cast<float>(p.values[k]);
    return t;
}

void IMLConfig::validate() const {
    if (encoder.in_channels != 3 || encoder.out_channels != 1)
        throw ConfigError("IML encoder must map 3 channels to 1");
    if (decoder.in_channels != 3 || decoder.out_channels != 3)
        throw ConfigError("IML decoder must map 3 channels to 3");
    encoder.validate(resolution);
    decoder.validate(resolution);
    norm.validate();
}

void to_json(nlohmann::json& j, const IMLConfig& c) {
    j = {{"encoder", c.encoder}, {"decoder", c.decoder}, {"norm", c.norm}, {"resolution", c.resolution},
         {"inference_seed", c.inference_seed}};
}

void from_json(const nlohmann::json& j, IMLConfig& c) {
    if (j.contains("encoder")) c.encoder = j.at("encoder").get<UNetConfig>();
    if (j.contains("decoder")) c.decoder = j.at("decoder").get<UNetConfig>();
    if (j.contains("norm")) c.norm = j.at("norm").get<NormalizationParams>();
    c.resolution = j.value("resolution", c.resolution);
    c.inference_seed = j.value("inference_seed", c.inference_seed);
    c.encoder.in_channels = 3;
    c.encoder.out_channels = 1;
    c.decoder.in_channels = 3;
    c.decoder.out_channels = 3;
}

IMLNetImpl::IMLNetImpl(const IMLConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    encoder = register_module("encoder", UNet(cfg_.encoder));
    decoder = register_module("decoder", UNet(cfg_.decoder));
    p_fixed_ = register_buffer(
        "p_fixed", pattern_tensor(plastic_pattern(cfg_.resolution, cranley_patterson_offset(cfg_.inference_seed, 0))));
}

torch::Tensor IMLNetImpl::encode(const torch::Tensor& c_image) {
    return nnf::softplus(encoder->forward(c_image));
}

torch::Tensor IMLNetImpl::decode(const torch::Tensor& pr_c_image) {
    auto out = pr_c_image + decoder->forward(pr_c_image);
    return is_training() ? out : out.clamp(0.0, 1.0);
}

torch::Tensor IMLNetImpl::fill(const torch::Tensor& pr_c_image, const torch::Tensor& im) {
    const auto keep = im.to(pr_c_image.scalar_type());
    return pr_c_image * keep + decode(pr_c_image) * (1 - keep);
}

IMLOutput IMLNetImpl::forward(const torch::Tensor& c_image, const torch::Tensor& p, MaskMode mode,
                              const torch::Tensor& valid) {
    IMLOutput o;
    o.pim = encode(c_image);
    o.pim_normalized = normalize_pim(o.pim, cfg_.norm);
    o.im = rejection_sample(o.pim_normalized, p.to(o.pim.scalar_type()), mode, cfg_.norm.alpha);
    if (valid.defined()) o.im = o.im * valid.to(o.im.scalar_type());
    o.pr_c_image = apply_mask(o.im, c_image);
    o.reconstruction = decode(o.pr_c_image);
    return o;
}

IMLOutput IMLNetImpl::infer(const torch::Tensor& c_image, const torch::Tensor& valid) {
    // Only toggles mode when needed so that eval-mode modules stay read-only.
    const bool was_training = is_training();
    if (was_training) eval();
    torch::NoGradGuard guard;
    auto o = forward(c_image, p_fixed_, MaskMode::Hard, valid);
    o.reconstruction = fill(o.pr_c_image, o.im);
    if (was_training) train(true);
    return o;
}

}  // namespace imls
