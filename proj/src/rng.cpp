#include "nso/rng.hpp"

#include <cmath>
#include <numbers>

namespace nso {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kOdd = 0xd1b54a32d192ed03ULL;
}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : seed_(seed), stream_id_(stream_id), key_(mix64(mix64(seed + kGolden) ^ (stream_id * kOdd + kGolden))) {}

std::uint64_t RngStream::next_u64() noexcept {
    const std::uint64_t n = counter_++;
    return mix64(mix64(key_ ^ (n * kGolden)) + key_);
}

double RngStream::uniform() noexcept {
    // 53 random mantissa bits, shifted by half an ulp so 0 is never produced.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t RngStream::below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        const std::uint64_t x = next_u64();
        if (x < limit) return x % bound;
    }
}

RngStream RngStream::child(std::string_view purpose, std::uint64_t index) const noexcept {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(stream_id_for(purpose, index) + kOdd)));
}

std::uint64_t stream_id_for(std::string_view purpose, std::uint64_t index) noexcept {
    return mix64(hash_label(purpose) ^ mix64(index + kGolden));
}

RngStream derive_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) noexcept {
    return RngStream(seed, stream_id_for(purpose, index));
}

}  // namespace nso
