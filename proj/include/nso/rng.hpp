#pragma once

#include <cstdint>
#include <string_view>

namespace nso {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a label; stable across platforms.
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based random stream keyed by (seed, stream_id).
///
/// Word n of the stream is a pure function of (seed, stream_id, n), so any
/// shard of work can be reproduced without replaying the others. Normal
/// deviates come from Box-Muller pairs; the spare deviate is cached, which
/// makes a stream a single-owner value.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t position() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double normal() noexcept;
    /// +1 or -1 with equal probability.
    double rademacher() noexcept { return (next_u64() >> 63) ? 1.0 : -1.0; }
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Independent child stream under the same seed.
    RngStream child(std::string_view purpose, std::uint64_t index) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t stream_id_for(std::string_view purpose, std::uint64_t index) noexcept;

RngStream derive_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) noexcept;

}  // namespace nso
