#pragma once

#include "imls/image.hpp"

namespace imls {

/// Catmull-Rom bicubic upscaling by an integer factor (pixel-center aligned, edge clamped).
Image bicubic_upscale(const Image& low, int factor);

/// Fills unmasked pixels with the value of the nearest masked pixel
/// (Euclidean, ties to the lowest raster index). An empty mask yields zeros.
Image nearest_infill(const Image& img, const BoolGrid& known);

}  // namespace imls
