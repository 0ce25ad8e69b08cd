// Counter-based splittable random streams.
//
// Every stream is identified by a 64-bit seed and a hierarchical path of
// indices (column index, replicate index, ...).  Streams with distinct paths
// are statistically independent and reproducible from (seed, path) alone,
// which keeps parallel scans bit-identical regardless of thread count.
#ifndef PAS_RNG_HPP
#define PAS_RNG_HPP

#include <cstdint>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace pas {

// Finalizer from SplitMix64 (Steele, Lea & Flood 2014; Vigna's constants).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : key_(mix64(seed ^ 0x5ca1ab1e0ddba11ULL)) {}

    // Derived stream for one path element; chain calls for deeper paths.
    RngStream child(std::uint64_t path) const {
        RngStream s(*this);
        s.key_ = mix64(key_ ^ mix64(path + 0x9e3779b97f4a7c15ULL));
        s.ctr_ = 0;
        return s;
    }
    RngStream child(std::initializer_list<std::uint64_t> path) const {
        RngStream s(*this);
        for (std::uint64_t p : path) s = s.child(p);
        return s;
    }

    std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

    // Uniform in [0,1) with 53 random bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound); bound > 0.  Rejection keeps it unbiased.
    std::uint64_t next_below(std::uint64_t bound) {
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Binomial(n, p) by center-out inversion from the mode; expected cost
    // O(sqrt(n p q)), exact in distribution.
    std::uint64_t binomial(std::uint64_t n, double p) {
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        if (p > 0.5) return n - binomial(n, 1.0 - p);
        const double q = 1.0 - p, lp = std::log(p), lq = std::log(q);
        const std::uint64_t mode = std::uint64_t((double(n) + 1.0) * p);
        double lpm = std::lgamma(double(n) + 1.0) - std::lgamma(double(mode) + 1.0) -
                     std::lgamma(double(n - mode) + 1.0) + double(mode) * lp +
                     double(n - mode) * lq;
        const double pm = std::exp(lpm);
        const double u = next_double();
        double cum = pm;
        if (u < cum) return mode;
        // Walk outward, always taking the larger remaining neighbour first.
        double plo = pm, phi = pm;
        std::uint64_t lo = mode, hi = mode;
        while (lo > 0 || hi < n) {
            double next_lo = lo > 0 ? plo * (double(lo) / double(n - lo + 1)) * (q / p) : -1.0;
            double next_hi = hi < n ? phi * (double(n - hi) / double(hi + 1)) * (p / q) : -1.0;
            if (next_hi >= next_lo) {
                ++hi;
                phi = next_hi;
                cum += phi;
                if (u < cum) return hi;
            } else {
                --lo;
                plo = next_lo;
                cum += plo;
                if (u < cum) return lo;
            }
        }
        return mode;
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

// Multinomial counts as sequential conditional binomials (Devroye 1996).
inline std::vector<std::uint64_t> multinomial_counts(std::uint64_t n_trials,
                                                     std::span<const double> probs,
                                                     RngStream& rng) {
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("multinomial_counts: negative probability");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw std::invalid_argument("multinomial_counts: probabilities must sum to 1");
    std::vector<std::uint64_t> counts(probs.size(), 0);
    std::uint64_t left = n_trials;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < probs.size() && left > 0; ++i) {
        double cond = mass > 0.0 ? probs[i] / mass : 1.0;
        std::uint64_t c = rng.binomial(left, cond < 1.0 ? cond : 1.0);
        counts[i] = c;
        left -= c;
        mass -= probs[i];
    }
    if (!counts.empty()) counts.back() += left;
    return counts;
}

}  // namespace pas

#endif
