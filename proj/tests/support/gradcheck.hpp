#pragma once

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace imls::test {

struct GradCheck {
    double max_rel_error = 0.0;
    int coords = 0;
};

/// Compares autograd against central differences at `coords` random entries of
/// `x` (double precision). `f` must return a scalar tensor. The relative error
/// uses max(|analytic|, |numeric|, floor) as the denominator so that exact
/// zeros compare cleanly.
inline GradCheck gradcheck(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& x0,
                           int coords, std::uint64_t seed, double h = 1e-6, double floor = 1e-5) {
    auto x = x0.detach().to(torch::kDouble).clone().requires_grad_(true);
    auto y = f(x);
    y.backward();
    const auto grad = x.grad().contiguous();
    const double* g = grad.data_ptr<double>();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(0, x.numel() - 1);
    GradCheck out;
    torch::NoGradGuard guard;
    for (int k = 0; k < coords; ++k) {
        const auto i = pick(rng);
        auto xp = x.detach().clone();
        auto xm = x.detach().clone();
        xp.view(-1)[i] += h;
        xm.view(-1)[i] -= h;
        const double numeric = (f(xp).item<double>() - f(xm).item<double>()) / (2.0 * h);
        const double analytic = g[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
        ++out.coords;
    }
    return out;
}

/// Random weights turning a tensor-valued function into a scalar one.
inline torch::Tensor probe_weights(torch::IntArrayRef sizes, std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    return torch::randn(sizes, gen, torch::TensorOptions().dtype(torch::kDouble));
}

}  // namespace imls::test
