#pragma once

// Portable deterministic random numbers.
//
// Every stochastic choice in this library flows through xoshiro256++ seeded
// via splitmix64, so datasets, initializations, and shuffles are reproducible
// bit-for-bit across platforms and across reimplementations in other
// languages. std::mt19937 + std::*_distribution are deliberately avoided:
// the distributions are implementation-defined.
//
// Conventions (part of the repo's data contract):
//   - uniform():   53-bit mantissa construction, (next() >> 11) * 2^-53, in [0,1)
//   - gaussian():  Box-Muller, r = sqrt(-2 ln u1) with u1 in (0,1], angle from u2;
//                  no cached spare, each call consumes exactly two outputs
//   - bounded(n):  Lemire multiply-shift reduction, no rejection
//   - shuffle:     Fisher-Yates from the back using bounded()

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cagm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes a stream tag into a base seed so independent consumers (data split,
// model init, manifold map, ...) get decorrelated streams from one run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t s = base ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL);
    splitmix64(s);
    return splitmix64(s);
}

class Xoshiro256pp {
public:
    using State = std::array<std::uint64_t, 4>;

    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    explicit Xoshiro256pp(const State& state) : state_(state) {}

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; consumes exactly two raw outputs.
    double gaussian() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [0, n). Lemire reduction; bias < 2^-64, accepted for
    // the portability of a rejection-free sequence.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n)) >> 64);
    }

    const State& state() const { return state_; }
    void set_state(const State& state) { state_ = state; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    State state_;
};

template <typename T>
void shuffle(std::vector<T>& items, Xoshiro256pp& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace cagm
