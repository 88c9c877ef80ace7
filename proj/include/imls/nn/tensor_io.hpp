#pragma once

#include <torch/torch.h>

#include <vector>

#include "imls/image.hpp"

namespace imls {

/// HWC Image -> CHW float tensor.
torch::Tensor to_tensor(const Image& img);
/// Stacks same-shaped images into B x C x H x W.
torch::Tensor stack_images(const std::vector<const Image*>& imgs);
torch::Tensor stack_images(const std::vector<Image>& imgs);

/// CHW (or 1 x C x H x W) tensor -> HWC Image.
Image to_image(const torch::Tensor& t);

/// 1 x n x n float tensor, 1 on set cells.
torch::Tensor grid_to_tensor(const BoolGrid& g);
/// Cells set where t > threshold. Accepts n x n, 1 x n x n or 1 x 1 x n x n.
BoolGrid tensor_to_grid(const torch::Tensor& t, float threshold = 0.5f);

}  // namespace imls
