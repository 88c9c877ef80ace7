#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace imls {

/// 64-bit FNV-1a. Stable across platforms, used for config and content hashes.
class Fnv1a {
public:
    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    template <class T>
    void update(std::span<const T> s) { update(s.data(), s.size_bytes()); }

    [[nodiscard]] std::uint64_t digest() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
    Fnv1a h;
    h.update(s);
    return h.digest();
}

}  // namespace imls
