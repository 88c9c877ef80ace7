#include "../support/doctest_torch.hpp"

#include <cmath>

#include "../support/gradient_suite.hpp"
#include "imls/errors.hpp"
#include "imls/nn/compaction_ops.hpp"
#include "imls/nn/iml.hpp"
#include "imls/nn/ims.hpp"
#include "imls/nn/recnn.hpp"
#include "imls/nn/tensor_io.hpp"
#include "imls/nn/unet.hpp"
#include "imls/sampling.hpp"

using namespace imls;

namespace {

const auto kDouble = torch::TensorOptions().dtype(torch::kDouble);

torch::Tensor mat2(double a, double b, double c, double d) {
    return torch::tensor({a, b, c, d}, kDouble).reshape({2, 2});
}

}  // namespace

TEST_CASE("normalize_pim worked example and mean control") {
    NormalizationParams p;
    p.u = 0.5;
    p.delta = 0.0;
    const auto out = normalize_pim(mat2(0.2, 0.6, 0.2, 0.6), p);
    CHECK(out[0][0].item<double>() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out[0][1].item<double>() == doctest::Approx(0.75).epsilon(1e-12));

    NormalizationParams q;
    q.u = 0.3;
    torch::manual_seed(4);
    for (int t = 0; t < 20; ++t) {
        const auto pim = torch::rand({16, 16}, kDouble) * (t + 1);
        const double u_pim = pim.mean().item<double>();
        const double expected = q.u * u_pim / (u_pim + q.delta);
        CHECK(std::abs(normalize_pim(pim, q).mean().item<double>() - expected) < 1e-9);
    }
}

TEST_CASE("normalize_pim is per-sample in a batch") {
    NormalizationParams p;
    p.u = 0.4;
    auto batch = torch::rand({3, 1, 8, 8}, kDouble);
    batch[1] *= 10.0;
    const auto out = normalize_pim(batch, p);
    for (int b = 0; b < 3; ++b) CHECK(out[b].mean().item<double>() == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("rejection sampling modes") {
    const auto pimn = torch::tensor({0.6}, kDouble).reshape({1, 1});
    const auto pat = torch::tensor({0.5}, kDouble).reshape({1, 1});
    CHECK(rejection_sample(pimn, pat, MaskMode::Soft, 50.0).item<double>() == doctest::Approx(0.993307149).epsilon(1e-8));
    CHECK(rejection_sample(pimn, pat, MaskMode::Hard, 50.0).item<double>() == 1.0);
    CHECK(rejection_sample(pat, pat, MaskMode::Hard, 50.0).item<double>() == 0.0);
    CHECK_THROWS_AS(rejection_sample(pimn, pat, MaskMode::Soft, 0.0), ParameterError);
    CHECK_THROWS_AS(rejection_sample(torch::zeros({4, 4}), torch::zeros({3, 3}), MaskMode::Hard, 1.0), ShapeError);
}

TEST_CASE("apply_mask and the IML losses") {
    const auto im = torch::ones({1, 1, 4, 4});
    const auto c = torch::full({1, 3, 4, 4}, 0.5);
    CHECK(torch::allclose(apply_mask(im, c), c));
    CHECK_THROWS_AS(apply_mask(torch::ones({1, 2, 4, 4}), c), ParameterError);
    CHECK_THROWS_AS(apply_mask(torch::ones({1, 1, 5, 5}), c), ParameterError);

    const auto a = torch::zeros({1, 3, 4, 4});
    const auto b = torch::full({1, 3, 4, 4}, 0.1);
    CHECK(compaction_loss(a, b).item<double>() == doctest::Approx(0.01).epsilon(1e-6));
    const auto big = torch::zeros({1, 3, 8, 8});
    CHECK(end_to_end_loss(a, b, big, big).item<double>() == doctest::Approx(0.005).epsilon(1e-6));
    CHECK_THROWS_AS(compaction_loss(a, big), ShapeError);
    CHECK_THROWS_AS(end_to_end_loss(a, b, big, a), ShapeError);
}

TEST_CASE("GAN loss identities") {
    const auto half = torch::full({4}, 0.5, kDouble);
    auto l = gan_losses(half, half);
    CHECK(std::abs(l.discriminator.item<double>() - 2.0 * std::log(2.0)) < 1e-9);
    CHECK(std::abs(l.generator.item<double>() - std::log(2.0)) < 1e-9);
    // Perfect discriminator, then perfect generator (up to the 1e-7 clamp).
    l = gan_losses(torch::ones({4}, kDouble), torch::zeros({4}, kDouble));
    CHECK(l.discriminator.item<double>() < 1e-6);
    l = gan_losses(torch::ones({4}, kDouble), torch::ones({4}, kDouble));
    CHECK(l.generator.item<double>() < 1e-6);
}

TEST_CASE("gradient suite") {
    for (const auto& check : test::gradient_suite(20, 5)) {
        INFO(check.name);
        CHECK(check.result.coords == 20);
        CHECK(check.result.max_rel_error < 1e-4);
    }
}

TEST_CASE("UNet shapes and validation") {
    UNet net(UNetConfig{3, 4, 3, 1});
    net->eval();
    const auto y = net->forward(torch::rand({2, 3, 16, 16}));
    CHECK(y.sizes() == torch::IntArrayRef({2, 1, 16, 16}));
    const auto feats = net->encoder_features(torch::rand({1, 3, 16, 16}), 2);
    REQUIRE(feats.size() == 2);
    CHECK(feats[0].size(2) == 16);
    CHECK(feats[1].size(2) == 8);
    CHECK_THROWS_AS(UNetConfig({3, 4, 3, 1}).validate(12), ConfigError);
    CHECK_THROWS_AS(UNetConfig({0, 4, 3, 1}).validate(), ConfigError);
}

TEST_CASE("IML forward: ranges, determinism and padding") {
    IMLConfig cfg;
    cfg.encoder = {2, 4, 3, 1};
    cfg.decoder = {2, 4, 3, 3};
    cfg.resolution = 16;
    cfg.norm.u = 0.3;
    torch::manual_seed(1);
    IMLNet net(cfg);
    net->eval();
    const auto c = torch::rand({2, 3, 16, 16});
    auto valid = torch::ones({1, 1, 16, 16});
    valid.index_put_({0, 0, 15}, 0.0);

    const auto a = net->infer(c, valid);
    const auto b = net->infer(c, valid);
    CHECK(torch::equal(a.im, b.im));
    CHECK(torch::equal(a.reconstruction, b.reconstruction));
    CHECK(a.pim.min().item<float>() >= 0.0f);
    CHECK(a.reconstruction.min().item<float>() >= 0.0f);
    CHECK(a.reconstruction.max().item<float>() <= 1.0f);
    CHECK(a.im.index({torch::indexing::Slice(), 0, 15}).sum().item<float>() == 0.0f);
    const auto vals = std::get<0>(at::_unique(a.im));
    CHECK(vals.numel() <= 2);
    CHECK(torch::equal(net->inference_pattern(), pattern_tensor(plastic_pattern(16, cranley_patterson_offset(7, 0)))));
}

TEST_CASE("inference keeps sampled slots and decodes the rest") {
    IMLConfig cfg;
    cfg.encoder = {2, 4, 3, 1};
    cfg.decoder = {2, 4, 3, 3};
    cfg.resolution = 16;
    torch::manual_seed(2);
    IMLNet net(cfg);
    net->eval();
    const auto c = torch::rand({1, 3, 16, 16});
    const auto o = net->infer(c);
    const auto keep = o.im.expand_as(c) > 0.5;
    CHECK(torch::equal(o.reconstruction.masked_select(keep), c.masked_select(keep)));
    const auto decoded = net->decode(o.pr_c_image);
    CHECK(torch::allclose(o.reconstruction.masked_select(~keep), decoded.masked_select(~keep)));

    // A full mask passes the C-image through untouched.
    const auto ones = torch::ones({1, 1, 16, 16});
    CHECK(torch::equal(net->fill(c, ones), c));
}

TEST_CASE("super-resolution RecNN shapes and input check") {
    RecNNConfig cfg;
    cfg.scale = 2;
    cfg.blocks = 1;
    cfg.channels = 4;
    cfg.output_resolution = 16;
    RecNN net(cfg);
    net->eval();
    const auto y = net->forward(torch::rand({2, 3, 8, 8}), {});
    CHECK(y.sizes() == torch::IntArrayRef({2, 3, 16, 16}));
    CHECK(y.min().item<float>() >= 0.0f);
    CHECK_THROWS_AS(net->forward(torch::rand({1, 3, 16, 16}), {}), ConfigError);
}

TEST_CASE("foveated RecNN keeps output finite with an empty pattern") {
    RecNNConfig cfg;
    cfg.kind = RecNNKind::Foveated;
    cfg.output_resolution = 16;
    cfg.wnet = {2, 4, 4, 3};
    RecNN net(cfg);
    net->eval();
    const auto y = net->forward(torch::zeros({1, 3, 16, 16}), torch::zeros({1, 1, 16, 16}));
    CHECK(y.sizes() == torch::IntArrayRef({1, 3, 16, 16}));
    CHECK(torch::isfinite(y).all().item<bool>());
}

TEST_CASE("generator and discriminator shapes") {
    GeneratorConfig g;
    g.layers = 4;
    g.base_channels = 4;
    g.max_channels = 16;
    g.latent = 8;
    Generator gen(g);
    gen->eval();
    const auto views = std::vector<ViewParams>{ViewParams{}, ViewParams{}};
    const auto out = gen->forward(view_tensor(views, g.orbit_radius));
    CHECK(out.sizes() == torch::IntArrayRef({2, 1, 16, 16}));
    CHECK(out.abs().max().item<float>() <= 1.0f);

    DiscriminatorConfig d;
    d.base_channels = 4;
    d.max_channels = 8;
    d.resolution = 16;
    Discriminator disc(d);
    const auto p = disc->forward(out);
    CHECK(p.sizes() == torch::IntArrayRef({2}));
    CHECK(p.min().item<float>() >= 0.0f);
    CHECK(p.max().item<float>() <= 1.0f);
}

TEST_CASE("binarize is strictly positive and respects padding") {
    const auto pred = torch::tensor({-0.5f, 0.0f, 0.2f, 0.9f}).reshape({1, 1, 2, 2});
    BoolGrid valid(2);
    valid.cells = {1, 1, 1, 0};
    const auto g = binarize_im(pred, valid);
    CHECK(g.cells == std::vector<std::uint8_t>{0, 0, 1, 0});
    CHECK(torch::equal(scale_label(torch::tensor({0.0f, 1.0f})), torch::tensor({-1.0f, 1.0f})));
}

TEST_CASE("tensor compaction matches the image version and is differentiable") {
    const auto pattern = downsampling_pattern(8, 2);
    const auto map = build_compaction_map(pattern, 4);
    Image img(8, 8, 3);
    for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] = static_cast<float>(k % 17) / 17.0f;
    const auto c_ref = compact(map, img);
    const auto c = compact_tensor(map, to_tensor(img).unsqueeze(0));
    CHECK(to_image(c).data == c_ref.data);
    CHECK(to_image(decompact_tensor(map, c)).data == decompact(map, c_ref).data);

    auto x = torch::rand({1, 3, 4, 4}, torch::requires_grad());
    decompact_tensor(map, x).sum().backward();
    CHECK(x.grad().sum().item<float>() == doctest::Approx(48.0f));
    CHECK(valid_slot_tensor(map).sum().item<float>() == 16.0f);
}
