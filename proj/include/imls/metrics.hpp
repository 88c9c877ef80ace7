#pragma once

#include "imls/image.hpp"
#include "imls/sampling.hpp"

namespace imls {

inline constexpr double kPsnrCap = 100.0;

double mse(const Image& a, const Image& b);

/// 10 log10(1/MSE) for images in [0,1]; kPsnrCap when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, valid-region windows, averaged over channels.
double ssim(const Image& a, const Image& b, Execution exec = Execution::Parallel);

/// Binary-mask intersection over union; two empty masks score 1.
double iou(const BoolGrid& a, const BoolGrid& b);

}  // namespace imls
