#include "imls/nn/compaction_ops.hpp"

#include "imls/errors.hpp"
#include "imls/nn/tensor_io.hpp"

namespace imls {

namespace {

torch::Tensor source_index(const CompactionMap& map) {
    auto idx = torch::empty({static_cast<std::int64_t>(map.source.size())}, torch::kInt64);
    auto* p = idx.data_ptr<std::int64_t>();
    for (std::size_t k = 0; k < map.source.size(); ++k) p[k] = map.source[k];
    return idx;
}

}  // namespace

torch::Tensor compact_tensor(const CompactionMap& map, const torch::Tensor& pr) {
    const int m = map.full_resolution, n = map.compact_resolution;
    if (pr.dim() != 4 || pr.size(2) != m || pr.size(3) != m) throw ShapeError("compact_tensor: expected B x C x m x m");
    const auto b = pr.size(0), c = pr.size(1);
    auto gathered = pr.reshape({b, c, m * m}).index_select(2, source_index(map));
    auto out = torch::zeros({b, c, static_cast<std::int64_t>(n) * n}, pr.options());
    out = out.index_copy(2, torch::arange(static_cast<std::int64_t>(map.source.size())), gathered);
    return out.view({b, c, n, n});
}

torch::Tensor decompact_tensor(const CompactionMap& map, const torch::Tensor& c_img) {
    const int m = map.full_resolution, n = map.compact_resolution;
    if (c_img.dim() != 4 || c_img.size(2) != n || c_img.size(3) != n)
        throw ShapeError("decompact_tensor: expected B x C x n x n");
    const auto b = c_img.size(0), c = c_img.size(1);
    auto slots = c_img.reshape({b, c, static_cast<std::int64_t>(n) * n})
                     .narrow(2, 0, static_cast<std::int64_t>(map.source.size()));
    auto out = torch::zeros({b, c, static_cast<std::int64_t>(m) * m}, c_img.options());
    return out.index_copy(2, source_index(map), slots).view({b, c, m, m});
}

torch::Tensor valid_slot_tensor(const CompactionMap& map) { return grid_to_tensor(map.valid_slots()).unsqueeze(0); }

}  // namespace imls
