#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace tmtcg::harness {

/// Millisecond time source shared by a broker and the sessions talking to it.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
    /// Virtual clocks move forward only through advance(); real clocks ignore it.
    virtual void advance(std::int64_t ms) = 0;
    virtual bool is_virtual() const = 0;
};

class VirtualClock final : public Clock {
public:
    std::int64_t now_ms() const override { return now_.load(); }
    void advance(std::int64_t ms) override { now_.fetch_add(ms); }
    bool is_virtual() const override { return true; }

private:
    std::atomic<std::int64_t> now_{0};
};

class SteadyClock final : public Clock {
public:
    SteadyClock() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t now_ms() const override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
    }
    void advance(std::int64_t) override {}
    bool is_virtual() const override { return false; }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace tmtcg::harness
