#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "imls/image.hpp"
#include "imls/sampling.hpp"

namespace imls {

/// Gather list from pattern pixels (raster order) to compact-image slots.
/// Slot k < pad_start() holds full-resolution pixel source[k]; the rest is padding.
struct CompactionMap {
    int full_resolution = 0;     // m
    int compact_resolution = 0;  // n
    std::vector<std::uint32_t> source;

    [[nodiscard]] std::size_t pad_start() const { return source.size(); }
    [[nodiscard]] std::size_t capacity() const {
        return static_cast<std::size_t>(compact_resolution) * compact_resolution;
    }
    /// n x n grid, true on non-padding slots.
    [[nodiscard]] BoolGrid valid_slots() const;

    void save(const std::filesystem::path& path) const;
    static CompactionMap load(const std::filesystem::path& path);
    bool operator==(const CompactionMap&) const = default;
};

/// Throws CapacityError (naming the required n) when the pattern does not fit.
CompactionMap build_compaction_map(const SamplingPattern& pattern, int n);

/// Gathers pattern pixels into slots; padding is zero.
Image compact(const CompactionMap& map, const Image& pr_image, Execution exec = Execution::Parallel);
/// Scatters slots back; non-pattern pixels are zero, padding values are dropped.
Image decompact(const CompactionMap& map, const Image& c_image, Execution exec = Execution::Parallel);

/// Full-resolution render mask selecting the pattern pixels of the chosen slots.
BoolGrid decompact_mask(const CompactionMap& map, const BoolGrid& slot_mask);
/// Raster indices of the full-resolution pixels behind the chosen slots, in slot order.
std::vector<std::uint32_t> selected_sources(const CompactionMap& map, const BoolGrid& slot_mask);

}  // namespace imls
