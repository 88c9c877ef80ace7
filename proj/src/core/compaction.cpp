#include "imls/compaction.hpp"

#include <cmath>
#include <fstream>

#include "imls/errors.hpp"

namespace imls {

BoolGrid CompactionMap::valid_slots() const {
    BoolGrid g(compact_resolution);
    for (std::size_t k = 0; k < pad_start(); ++k) g.cells[k] = 1;
    return g;
}

CompactionMap build_compaction_map(const SamplingPattern& pattern, int n) {
    if (n <= 0) throw ParameterError("compact resolution must be positive");
    const std::size_t count = pattern.count();
    const std::size_t cap = static_cast<std::size_t>(n) * n;
    if (count > cap) {
        const auto need = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(count))));
        throw CapacityError("sampling pattern has " + std::to_string(count) + " pixels but a " + std::to_string(n) +
                            "x" + std::to_string(n) + " compact image holds " + std::to_string(cap) +
                            "; requires n >= " + std::to_string(need));
    }
    CompactionMap map;
    map.full_resolution = pattern.resolution();
    map.compact_resolution = n;
    map.source.reserve(count);
    for (std::size_t k = 0; k < pattern.grid.cells.size(); ++k)
        if (pattern.grid.cells[k]) map.source.push_back(static_cast<std::uint32_t>(k));
    return map;
}

Image compact(const CompactionMap& map, const Image& pr, Execution exec) {
    if (pr.height != map.full_resolution || pr.width != map.full_resolution)
        throw ShapeError("compact: image is not m x m");
    const int c = pr.channels;
    Image out(map.compact_resolution, map.compact_resolution, c, 0.0f);
    const long count = static_cast<long>(map.pad_start());
    if (exec == Execution::Serial) {
        for (long k = 0; k < count; ++k)
            for (int ch = 0; ch < c; ++ch)
                out.data[static_cast<std::size_t>(k) * c + ch] = pr.data[static_cast<std::size_t>(map.source[k]) * c + ch];
        return out;
    }
#pragma omp parallel for schedule(static)
    for (long k = 0; k < count; ++k)
        for (int ch = 0; ch < c; ++ch)
            out.data[static_cast<std::size_t>(k) * c + ch] = pr.data[static_cast<std::size_t>(map.source[k]) * c + ch];
    return out;
}

Image decompact(const CompactionMap& map, const Image& cimg, Execution exec) {
    if (cimg.height != map.compact_resolution || cimg.width != map.compact_resolution)
        throw ShapeError("decompact: image is not n x n");
    const int c = cimg.channels;
    Image out(map.full_resolution, map.full_resolution, c, 0.0f);
    const long count = static_cast<long>(map.pad_start());
    if (exec == Execution::Serial) {
        for (long k = 0; k < count; ++k)
            for (int ch = 0; ch < c; ++ch)
                out.data[static_cast<std::size_t>(map.source[k]) * c + ch] = cimg.data[static_cast<std::size_t>(k) * c + ch];
        return out;
    }
    // Sources are distinct, so the scatter is race-free.
#pragma omp parallel for schedule(static)
    for (long k = 0; k < count; ++k)
        for (int ch = 0; ch < c; ++ch)
            out.data[static_cast<std::size_t>(map.source[k]) * c + ch] = cimg.data[static_cast<std::size_t>(k) * c + ch];
    return out;
}

BoolGrid decompact_mask(const CompactionMap& map, const BoolGrid& slot_mask) {
    if (slot_mask.size != map.compact_resolution) throw ShapeError("slot mask is not n x n");
    BoolGrid out(map.full_resolution);
    for (std::size_t k = 0; k < map.pad_start(); ++k)
        if (slot_mask.cells[k]) out.cells[map.source[k]] = 1;
    return out;
}

std::vector<std::uint32_t> selected_sources(const CompactionMap& map, const BoolGrid& slot_mask) {
    if (slot_mask.size != map.compact_resolution) throw ShapeError("slot mask is not n x n");
    std::vector<std::uint32_t> out;
    for (std::size_t k = 0; k < map.pad_start(); ++k)
        if (slot_mask.cells[k]) out.push_back(map.source[k]);
    return out;
}

void CompactionMap::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    const std::uint32_t header[3] = {static_cast<std::uint32_t>(full_resolution),
                                     static_cast<std::uint32_t>(compact_resolution),
                                     static_cast<std::uint32_t>(source.size())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(source.data()),
              static_cast<std::streamsize>(source.size() * sizeof(std::uint32_t)));
    if (!out) throw FormatError("cannot write compaction map " + path.string());
}

CompactionMap CompactionMap::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint32_t header[3];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) throw FormatError("truncated compaction map");
    CompactionMap map;
    map.full_resolution = static_cast<int>(header[0]);
    map.compact_resolution = static_cast<int>(header[1]);
    if (static_cast<std::size_t>(header[2]) > map.capacity()) throw FormatError("compaction map count exceeds n^2");
    map.source.resize(header[2]);
    if (!in.read(reinterpret_cast<char*>(map.source.data()),
                 static_cast<std::streamsize>(map.source.size() * sizeof(std::uint32_t))))
        throw FormatError("truncated compaction map");
    const std::uint64_t full = static_cast<std::uint64_t>(map.full_resolution) * map.full_resolution;
    for (std::size_t k = 0; k < map.source.size(); ++k)
        if (map.source[k] >= full || (k > 0 && map.source[k] <= map.source[k - 1]))
            throw FormatError("compaction map indices must be increasing and inside the image");
    return map;
}

}  // namespace imls
