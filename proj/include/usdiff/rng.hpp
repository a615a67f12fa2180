#pragma once

#include <cstdint>
#include <initializer_list>

#include "usdiff/grid.hpp"

namespace usdiff {

// Counter-based splittable PRNG. A stream is identified by (seed, path),
// where the path is the ordered list of child labels taken from the root.
// Output i of a stream is splitmix64_mix(key + (i+1) * GAMMA) with the key
// derived from (seed, path) by hash folding, so any output can be computed
// independently of the others. That makes field generation order-free:
// element k of a Gaussian field only ever touches counters 2k and 2k+1,
// which is what keeps parallel and serial fills bit-identical.
//
// The generator family (SplitMix64 mixing + Box-Muller normals) is part of
// the reproducibility contract; see README. Do not change it silently.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    // Independent substream for `label`. Derivation ignores how much of this
    // stream has been consumed: (seed, path) alone identifies the child.
    RngStream child(std::uint64_t label) const;
    RngStream child_path(std::initializer_list<std::uint64_t> labels) const;

    std::uint64_t next_u64();
    double next_unit();        // uniform in [0, 1)
    double next_unit_open();   // uniform in (0, 1], safe under log()
    double next_gaussian();    // standard normal, consumes two counters
    // Uniform index in [0, n). 64-bit modulo; bias is ~n/2^64, negligible.
    std::uint64_t next_index(std::uint64_t n);
    // Skip-ahead: counter-based streams jump in O(1).
    void skip(std::uint64_t n) { counter_ += n; }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    RngStream(std::uint64_t key, std::uint64_t counter, int tag);

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// H x W field of i.i.d. standard normal draws. Consumes 2*H*W counters from
// the stream. Deterministic in (seed, path); identical bits whether the fill
// runs serially or OpenMP-parallel.
ImageGrid gaussian_field(RngStream& rng, int height, int width);

namespace detail {
std::uint64_t splitmix64_mix(std::uint64_t z);
std::uint64_t rng_value_at(std::uint64_t key, std::uint64_t counter);
double gaussian_at(std::uint64_t key, std::uint64_t counter_pair_base);
}  // namespace detail

}  // namespace usdiff
