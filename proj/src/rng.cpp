#include "usdiff/rng.hpp"

#include <cmath>

namespace usdiff {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kLabelSalt = 0xD1B54A32D192ED03ull;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

namespace detail {

std::uint64_t splitmix64_mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

std::uint64_t rng_value_at(std::uint64_t key, std::uint64_t counter) {
    return splitmix64_mix(key + (counter + 1) * kGamma);
}

double gaussian_at(std::uint64_t key, std::uint64_t counter_pair_base) {
    // (0,1] for the radius term so log() never sees zero; [0,1) for the angle.
    const double u1 =
        (static_cast<double>(rng_value_at(key, counter_pair_base) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 =
        static_cast<double>(rng_value_at(key, counter_pair_base + 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace detail

RngStream::RngStream(std::uint64_t seed)
    : key_(detail::splitmix64_mix(seed + kGamma)), counter_(0) {}

RngStream::RngStream(std::uint64_t key, std::uint64_t counter, int)
    : key_(key), counter_(counter) {}

RngStream RngStream::child(std::uint64_t label) const {
    const std::uint64_t child_key =
        detail::splitmix64_mix(key_ ^ detail::splitmix64_mix(label + kLabelSalt));
    return RngStream(child_key, 0, 0);
}

RngStream RngStream::child_path(std::initializer_list<std::uint64_t> labels) const {
    RngStream s = *this;
    for (std::uint64_t l : labels) s = s.child(l);
    return s;
}

std::uint64_t RngStream::next_u64() {
    return detail::rng_value_at(key_, counter_++);
}

double RngStream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_unit_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    const double z = detail::gaussian_at(key_, counter_);
    counter_ += 2;
    return z;
}

std::uint64_t RngStream::next_index(std::uint64_t n) {
    return next_u64() % n;
}

ImageGrid gaussian_field(RngStream& rng, int height, int width) {
    ImageGrid out(height, width);
    const std::uint64_t key = rng.key();
    const std::uint64_t base = rng.counter();
    const std::int64_t n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] =
            detail::gaussian_at(key, base + 2 * static_cast<std::uint64_t>(i));
    }
    rng.skip(2 * static_cast<std::uint64_t>(n));
    return out;
}

}  // namespace usdiff
