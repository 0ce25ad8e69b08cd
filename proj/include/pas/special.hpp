// Numeric special functions backing the scores and the significance tests:
// log factorials (exact table up to 2e4, Stirling series beyond), binomial
// coefficients, the regularized incomplete gamma for chi-square tails, and
// the Kolmogorov distribution.
#ifndef PAS_SPECIAL_HPP
#define PAS_SPECIAL_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pas {

// ln(n!).  The table is accumulated in long double once; above the table the
// Stirling series with three correction terms is accurate to ~1e-16 relative.
inline double log_factorial(std::uint64_t n) {
    static constexpr std::uint64_t kTable = 20000;
    static const std::vector<double> table = [] {
        std::vector<double> t(kTable + 1, 0.0);
        long double acc = 0.0L;
        for (std::uint64_t k = 1; k <= kTable; ++k) {
            acc += std::log((long double)k);
            t[k] = double(acc);
        }
        return t;
    }();
    if (n <= kTable) return table[n];
    const double x = double(n);
    return x * std::log(x) - x + 0.5 * std::log(2.0 * M_PI * x) + 1.0 / (12.0 * x) -
           1.0 / (360.0 * x * x * x) + 1.0 / (1260.0 * x * x * x * x * x);
}

inline double log_choose(std::uint64_t n, std::uint64_t k) {
    if (k > n) return -std::numeric_limits<double>::infinity();
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// Regularized upper incomplete gamma Q(a, x), series/continued-fraction split
// as in Numerical Recipes.
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // P(a,x) by series, return 1-P.
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ++ap;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Q(a,x) by modified Lentz continued fraction.
    const double kFpMin = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / kFpMin, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = b + an / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

// Upper tail of the chi-square distribution with df degrees of freedom.
inline double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * df, 0.5 * x);
}

// Survival function of the Kolmogorov distribution, Q(lambda).
inline double kolmogorov_sf(double lambda) {
    if (lambda < 0.03) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    double q = 2.0 * sum;
    return q < 0.0 ? 0.0 : (q > 1.0 ? 1.0 : q);
}

// One-sample KS test of sorted values against Uniform(0,1).
inline double ks_distance_uniform(const std::vector<double>& sorted) {
    const std::size_t n = sorted.size();
    if (n == 0) throw std::invalid_argument("ks_distance_uniform: empty sample");
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double lo = double(i) / double(n), hi = double(i + 1) / double(n);
        d = std::max(d, std::fabs(sorted[i] - lo));
        d = std::max(d, std::fabs(sorted[i] - hi));
    }
    return d;
}

inline double ks_test_uniform_pvalue(const std::vector<double>& sorted) {
    const double n = double(sorted.size());
    const double d = ks_distance_uniform(sorted);
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    return kolmogorov_sf(lambda);
}

// Two-sided KS test of a sorted sample against an arbitrary cdf given as a
// callable x -> F(x).
template <class Cdf>
double ks_test_pvalue(const std::vector<double>& sorted, Cdf cdf) {
    const std::size_t n = sorted.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = cdf(sorted[i]);
        d = std::max(d, std::fabs(f - double(i) / double(n)));
        d = std::max(d, std::fabs(f - double(i + 1) / double(n)));
    }
    const double rn = std::sqrt(double(n));
    return kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d);
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace pas

#endif
