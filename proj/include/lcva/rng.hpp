#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace lcva {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based deterministic RNG. A value is a pure function of
// (seed, counter), so derived streams never perturb the parent stream
// and identical seed + call sequence reproduces the stream exactly.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed)
        : seed_(seed), offset_(detail::mix64(seed + 0x9E3779B97F4A7C15ULL)), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        return detail::mix64(offset_ + (++counter_) * 0x9E3779B97F4A7C15ULL);
    }

    // Independent child stream; does not advance this stream's counter.
    SeededRng derive(std::uint64_t stream) const {
        return SeededRng(detail::mix64(offset_ ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL)));
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via the Marsaglia polar method (no cached spare, so the
    // stream consumed per call is self-contained).
    double normal() {
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> out(n);
        for (auto& x : out) x = normal();
        return out;
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r < limit) return r % n;
        }
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t seed_;
    std::uint64_t offset_;
    std::uint64_t counter_;
};

}  // namespace lcva
