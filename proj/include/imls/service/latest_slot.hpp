#pragma once

#include <condition_variable>
#include <mutex>
#include <optional>

namespace imls {

/// Single-item mailbox that keeps only the newest value. A `put` over an
/// unconsumed value replaces it and counts it as dropped.
template <typename T>
class LatestSlot {
public:
    void put(T value) {
        {
            std::lock_guard lock(mu_);
            if (value_) ++dropped_;
            value_ = std::move(value);
        }
        cv_.notify_one();
    }

    /// Blocks until a value is available or the slot is closed (then nullopt).
    std::optional<T> take() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return value_.has_value() || closed_; });
        if (!value_) return std::nullopt;
        std::optional<T> out = std::move(value_);
        value_.reset();
        return out;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
            value_.reset();
        }
        cv_.notify_all();
    }

    [[nodiscard]] std::size_t dropped() const {
        std::lock_guard lock(mu_);
        return dropped_;
    }

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::optional<T> value_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
};

}  // namespace imls
