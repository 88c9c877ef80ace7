#pragma once

#include <torch/torch.h>

#include "imls/compaction.hpp"

namespace imls {

/// Differentiable counterparts of compact/decompact on B x C x H x W tensors.
torch::Tensor compact_tensor(const CompactionMap& map, const torch::Tensor& pr);
torch::Tensor decompact_tensor(const CompactionMap& map, const torch::Tensor& c);

/// 1 x 1 x n x n, 1 on non-padding slots.
torch::Tensor valid_slot_tensor(const CompactionMap& map);

}  // namespace imls
