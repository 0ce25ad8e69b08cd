// Exact and numeric predictions for the pairwise-match distribution:
// finite-population and infinite-row match probabilities, naive binomial
// references, multinomial-covariance contrasts, two-step sparse-multinomial
// simulation, brute-force null likelihood tables for tiny matrices, pure
// n-way chi-square partitioning sums, and the five-column reference tests.
#ifndef PAS_THEORY_HPP
#define PAS_THEORY_HPP

#include <array>
#include <map>
#include <sstream>

#include "pas/inference.hpp"

namespace pas {

struct MatchDistribution {
    std::vector<double> probs;  // index m = 0..L
    double m1 = 0.0;            // mean matches
    double m2 = 0.0;            // variance of matches

    void finish() {
        m1 = 0.0;
        for (std::size_t m = 0; m < probs.size(); ++m) m1 += double(m) * probs[m];
        m2 = 0.0;
        for (std::size_t m = 0; m < probs.size(); ++m)
            m2 += (double(m) - m1) * (double(m) - m1) * probs[m];
    }
};

// Exact finite-population counts of pairwise comparisons with m matches when
// every one of the S^L sequence types is present exactly n times.  For
// m < L the count is n^2 S^L C(L,m) (S-1)^(L-m) / 2 (pairs of distinct
// types); for m = L it is n(n-1) S^L / 2 (pairs within a type).
struct UniformMatchCounts {
    std::vector<std::uint64_t> counts;  // m = 0..L
    std::uint64_t total = 0;
};

inline UniformMatchCounts uniform_match_counts(int L, int S, int n_copies) {
    if (S < 2 || n_copies < 1 || L < 1) throw ValidationError("uniform_match_counts: bad args");
    using u128 = unsigned __int128;
    constexpr std::uint64_t kMax = ~std::uint64_t(0);
    auto powc = [&](u128 b, int e) {
        u128 r = 1;
        while (e-- > 0) {
            r *= b;
            if (r > u128(kMax) * kMax) throw ResourceGuardError("uniform_match_counts: overflow");
        }
        return r;
    };
    const u128 SL = powc(S, L);
    // Pascal row for C(L, m), exact.
    std::vector<u128> choose(L + 1, 0);
    choose[0] = 1;
    for (int i = 1; i <= L; ++i)
        for (int j = i; j >= 1; --j) choose[j] += choose[j - 1];
    UniformMatchCounts out;
    out.counts.resize(L + 1);
    const u128 n = n_copies;
    for (int m = 0; m < L; ++m) {
        u128 v = n * n * SL * choose[m] * powc(S - 1, L - m) / 2;
        if (v > kMax) throw ResourceGuardError("uniform_match_counts: counts exceed 64-bit range");
        out.counts[m] = std::uint64_t(v);
    }
    u128 last = n * (n - 1) * SL / 2;
    u128 total = n * SL * (n * SL - 1) / 2;
    if (total > kMax) throw ResourceGuardError("uniform_match_counts: total exceeds 64-bit range");
    out.counts[L] = std::uint64_t(last);
    out.total = std::uint64_t(total);
    return out;
}

inline double prob_m_uniform(int L, int S, int n_copies, int m) {
    if (m < 0 || m > L) throw ValidationError("prob_m_uniform: m out of range");
    const double denom = double(n_copies) * std::pow(double(S), L) - 1.0;
    if (m == L) return double(n_copies - 1) / denom;
    return double(n_copies) * std::exp(log_choose(L, m) + double(L - m) * std::log(double(S - 1))) /
           denom;
}

// Infinite-row binary match distribution by exhaustive combinatorial
// bookkeeping over ordered pairs of sequence classes; the doubling factor
// applies only when the two compared classes differ (j != k).
inline MatchDistribution prob_m_binary_dist(int L, double p, int max_l = 400) {
    if (p <= 0.0 || p >= 1.0) throw ValidationError("prob_m_binary: p in (0,1)");
    if (L > max_l) throw ResourceGuardError("prob_m_binary: L exceeds the evaluation limit");
    const double lp = std::log(p), lq = std::log1p(-p);
    MatchDistribution d;
    d.probs.assign(L + 1, 0.0);
    for (int r = 0; r <= L; ++r) {
        const double lc_r = log_choose(L, r);
        for (int k = 0; k <= r; ++k) {
            const double lc_k = log_choose(r, k);
            for (int j = k; j <= L - r; ++j) {
                const int m = L - j - k;
                const double a = j != k ? 2.0 : 1.0;
                const double lt = lc_r + lc_k + log_choose(L - r, j) +
                                  double(2 * (L - r) - j + k) * lp + double(2 * r + j - k) * lq;
                d.probs[m] += a * std::exp(lt);
            }
        }
    }
    d.finish();
    return d;
}

inline double prob_m_binary(int L, double p, int m) {
    return prob_m_binary_dist(L, p).probs[m];
}

// Binomial reference with per-column match probability sum(f_s^2); exact
// only when same-column marker frequencies are equal.
inline MatchDistribution naive_binomial(int L, std::span<const double> freqs) {
    double match = 0.0;
    for (double f : freqs) match += f * f;
    MatchDistribution d;
    d.probs.assign(L + 1, 0.0);
    for (int m = 0; m <= L; ++m)
        d.probs[m] = std::exp(log_choose(L, m) + double(m) * std::log(match) +
                              double(L - m) * std::log1p(-match));
    d.finish();
    return d;
}

// Covariances of the per-m pairwise-comparison counts across simulated PMs
// against those of matched multinomial draws.
struct CovarianceContrast {
    int L = 0;
    std::vector<double> empirical;    // (L+1) x (L+1)
    std::vector<double> multinomial;  // (L+1) x (L+1)
    std::vector<double> difference;
    std::vector<double> mean_freqs;  // average frequency of each m
};

inline CovarianceContrast multinomial_covariance_contrast(int R, int L,
                                                          std::span<const double> freqs,
                                                          int iters, const RngStream& rng) {
    const int bins = L + 1;
    const std::size_t W = pair_count(R);
    std::vector<double> sum(bins, 0.0), sumsq(std::size_t(bins) * bins, 0.0);
    std::vector<std::vector<double>> counts(iters, std::vector<double>(bins, 0.0));
    for (int it = 0; it < iters; ++it) {
        RngStream rs = rng.child({1, std::uint64_t(it)});
        DataMatrix dm(R, L);
        for (int c = 0; c < L; ++c) {
            RngStream cs = rs.child(std::uint64_t(c));
            auto cnt = multinomial_counts(std::uint64_t(R), freqs, cs);
            std::vector<std::uint8_t> pool;
            for (std::size_t s = 0; s < cnt.size(); ++s)
                pool.insert(pool.end(), std::size_t(cnt[s]), std::uint8_t(s));
            cs.shuffle(pool);
            std::copy(pool.begin(), pool.end(), dm.column(c));
        }
        dm.finalize();
        PairwiseSummary s = total_matches(dm);
        for (auto t : s.total_matches) counts[it][t] += 1.0;
    }
    CovarianceContrast out;
    out.L = L;
    auto accumulate = [&](const std::vector<std::vector<double>>& samples,
                          std::vector<double>& cov) {
        std::vector<double> mean(bins, 0.0);
        for (auto& c : samples)
            for (int m = 0; m < bins; ++m) mean[m] += c[m];
        for (int m = 0; m < bins; ++m) mean[m] /= double(samples.size());
        cov.assign(std::size_t(bins) * bins, 0.0);
        for (auto& c : samples)
            for (int a = 0; a < bins; ++a)
                for (int b = 0; b < bins; ++b)
                    cov[std::size_t(a) * bins + b] += (c[a] - mean[a]) * (c[b] - mean[b]);
        for (auto& v : cov) v /= double(samples.size() - 1);
        return mean;
    };
    auto mean = accumulate(counts, out.empirical);
    out.mean_freqs.resize(bins);
    double fsum = 0.0;
    for (int m = 0; m < bins; ++m) {
        out.mean_freqs[m] = mean[m] / double(W);
        fsum += out.mean_freqs[m];
    }
    for (auto& f : out.mean_freqs) f /= fsum;
    // Matched multinomial trials with the empirical mean frequencies.
    std::vector<std::vector<double>> draws(iters, std::vector<double>(bins, 0.0));
    for (int it = 0; it < iters; ++it) {
        RngStream rs = rng.child({2, std::uint64_t(it)});
        auto cnt = multinomial_counts(W, out.mean_freqs, rs);
        for (int m = 0; m < bins; ++m) draws[it][m] = double(cnt[m]);
    }
    accumulate(draws, out.multinomial);
    out.difference.resize(out.empirical.size());
    for (std::size_t i = 0; i < out.difference.size(); ++i)
        out.difference[i] = out.empirical[i] - out.multinomial[i];
    return out;
}

// Two-round multinomial simulation of m^1 and m^2 for the sparse case where
// only a few of the S^R possible 1-column patterns ever appear: round one
// samples the count of columns in each minor-marker weight class, round two
// places each column's minor markers uniformly among the C(R,i) vertical
// arrangements.
struct TwoStepResult {
    double m1 = 0.0, m2 = 0.0;
    double var_m1 = 0.0, var_m2 = 0.0;  // sample variances across iterations
};

inline TwoStepResult two_step_numeric(int R, int L, double p, int iters, const RngStream& rng) {
    const std::size_t W = pair_count(R);
    std::vector<double> class_probs(R + 1);
    for (int i = 0; i <= R; ++i)
        class_probs[i] = std::exp(log_choose(R, i) + double(i) * std::log(p) +
                                  double(R - i) * std::log1p(-p));
    double norm = 0.0;
    for (double c : class_probs) norm += c;
    for (double& c : class_probs) c /= norm;
    std::vector<double> m1s(iters), m2s(iters);
    std::vector<int> rows_idx(R);
    std::vector<std::uint16_t> t(W);
    std::vector<std::uint8_t> col(R);
    for (int it = 0; it < iters; ++it) {
        RngStream rs = rng.child(std::uint64_t(it));
        auto class_counts = multinomial_counts(std::uint64_t(L), class_probs, rs);
        std::fill(t.begin(), t.end(), 0);
        std::uint64_t col_id = 0;
        for (int i = 0; i <= R; ++i) {
            for (std::uint64_t k = 0; k < class_counts[i]; ++k) {
                RngStream cs = rs.child({7, col_id++});
                std::fill(col.begin(), col.end(), 0);
                std::iota(rows_idx.begin(), rows_idx.end(), 0);
                for (int pick = 0; pick < i; ++pick) {
                    std::size_t j = pick + std::size_t(cs.next_below(R - pick));
                    std::swap(rows_idx[pick], rows_idx[j]);
                    col[rows_idx[pick]] = 1;
                }
                std::size_t w = 0;
                for (int a = 0; a < R; ++a)
                    for (int b = a + 1; b < R; ++b, ++w) t[w] += (col[a] == col[b]);
            }
        }
        double mean = 0.0;
        for (auto v : t) mean += v;
        mean /= double(W);
        double var = 0.0;
        for (auto v : t) var += (double(v) - mean) * (double(v) - mean);
        var /= double(W);
        m1s[it] = mean;
        m2s[it] = var;
    }
    auto mean_var = [&](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= double(xs.size());
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        v /= double(xs.size() - 1);
        return std::pair<double, double>{m, v};
    };
    TwoStepResult out;
    std::tie(out.m1, out.var_m1) = mean_var(m1s);
    std::tie(out.m2, out.var_m2) = mean_var(m2s);
    return out;
}

// Likelihood of the independent-random-columns null given an observed sorted
// vector of per-pair match totals, as an exact polynomial in the marker
// frequencies: for each vector, a map from marker-count exponents to the
// integer number of matrices realizing it.
struct VectorLikelihoodTable {
    int R = 0, L = 0, S = 2;
    std::map<std::vector<int>, std::map<std::vector<int>, std::uint64_t>> table;

    double likelihood(const std::vector<int>& vec, std::span<const double> freqs) const {
        auto it = table.find(vec);
        if (it == table.end()) return 0.0;
        double total = 0.0;
        for (auto& [expo, coeff] : it->second) {
            double term = double(coeff);
            for (int s = 0; s < S; ++s) term *= std::pow(freqs[s], expo[s]);
            total += term;
        }
        return total;
    }
    double total_probability(std::span<const double> freqs) const {
        double t = 0.0;
        for (auto& [vec, poly] : table) t += likelihood(vec, freqs);
        return t;
    }
    // Canonical text: one line per vector, exponents in marker order.
    std::string canonical_text() const {
        std::ostringstream os;
        for (auto& [vec, poly] : table) {
            os << "Lik(";
            for (int v : vec) os << v;
            os << ")";
            for (auto& [expo, coeff] : poly) {
                os << "\t" << coeff;
                for (int s = 0; s < S; ++s) os << ":" << expo[s];
            }
            os << "\n";
        }
        return os.str();
    }
};

inline VectorLikelihoodTable brute_force_likelihoods(int R, int L, int S) {
    if (R < 2 || L < 1 || S < 2) throw ValidationError("brute_force_likelihoods: bad sizes");
    const double n_dms = std::pow(double(S), double(R) * L);
    if (n_dms > 2e7) throw ResourceGuardError(
        "brute_force_likelihoods: S^(R*L) exceeds the enumeration budget (~1e7)");
    VectorLikelihoodTable out;
    out.R = R;
    out.L = L;
    out.S = S;
    std::vector<std::uint8_t> cell(std::size_t(R) * L, 0);  // column-major digits
    const std::size_t W = pair_count(R);
    std::vector<int> vec(W);
    std::vector<int> expo(S);
    for (std::uint64_t id = 0;; ++id) {
        std::fill(vec.begin(), vec.end(), 0);
        std::size_t w = 0;
        for (int a = 0; a < R; ++a)
            for (int b = a + 1; b < R; ++b, ++w)
                for (int c = 0; c < L; ++c)
                    vec[w] += cell[std::size_t(c) * R + a] == cell[std::size_t(c) * R + b];
        std::vector<int> key = vec;
        std::sort(key.begin(), key.end());
        std::fill(expo.begin(), expo.end(), 0);
        for (auto d : cell) ++expo[d];
        ++out.table[key][expo];
        // odometer
        std::size_t pos = 0;
        while (pos < cell.size() && cell[pos] == S - 1) cell[pos++] = 0;
        if (pos == cell.size()) break;
        ++cell[pos];
    }
    return out;
}

struct LikelihoodMoments {
    double m1 = 0.0, m2 = 0.0;
    double var_m1 = 0.0, var_m2 = 0.0;
};

inline LikelihoodMoments likelihood_moments(const VectorLikelihoodTable& table,
                                            std::span<const double> freqs) {
    LikelihoodMoments out;
    double e1 = 0.0, e1sq = 0.0, e2 = 0.0, e2sq = 0.0, mass = 0.0;
    for (auto& [vec, poly] : table.table) {
        const double p = table.likelihood(vec, freqs);
        double mean = 0.0;
        for (int v : vec) mean += v;
        mean /= double(vec.size());
        double var = 0.0;
        for (int v : vec) var += (v - mean) * (v - mean);
        var /= double(vec.size());
        mass += p;
        e1 += p * mean;
        e1sq += p * mean * mean;
        e2 += p * var;
        e2sq += p * var * var;
    }
    out.m1 = e1 / mass;
    out.m2 = e2 / mass;
    out.var_m1 = e1sq / mass - out.m1 * out.m1;
    out.var_m2 = e2sq / mass - out.m2 * out.m2;
    return out;
}

// ---- contingency machinery shared by the partition sums and the reference
// tests ----

// Chi-square over the joint marker-combination table of the given columns,
// with expected counts R * prod(per-column marginal frequencies).  Cells
// with zero expected count are skipped.
inline double product_expected_chi2(const DataMatrix& dm, std::span<const int> cols,
                                    std::size_t cell_guard = std::size_t(1) << 22) {
    std::size_t cells = 1;
    for (int c : cols) {
        cells *= std::size_t(dm.arity(c));
        if (cells > cell_guard)
            throw ResourceGuardError("contingency table exceeds the cell budget");
    }
    const int R = dm.rows();
    std::vector<double> expected(cells, double(R));
    std::size_t stride = 1;
    for (int c : cols) {
        const int S = dm.arity(c);
        std::vector<double> freq(S, 0.0);
        const std::uint8_t* col = dm.column(c);
        for (int r = 0; r < R; ++r) freq[col[r]] += 1.0;
        for (auto& f : freq) f /= double(R);
        // expand in place: iterate cells already built (stride), scale
        std::vector<double> next(stride * S);
        for (std::size_t base = 0; base < stride; ++base)
            for (int s = 0; s < S; ++s) next[std::size_t(s) * stride + base] = expected[base] * freq[s];
        expected.assign(next.begin(), next.end());
        stride *= S;
    }
    std::vector<std::int64_t> obs(cells, 0);
    for (int r = 0; r < R; ++r) {
        std::size_t idx = 0, st = 1;
        for (int c : cols) {
            idx += std::size_t(dm.at(r, c)) * st;
            st *= std::size_t(dm.arity(c));
        }
        ++obs[idx];
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        if (expected[i] <= 0.0) continue;
        const double d = double(obs[i]) - expected[i];
        chi2 += d * d / expected[i];
    }
    return chi2;
}

// Sum over every n-column subset containing each column of the "pure" n-way
// chi-square: the plain n-column chi-square minus every internal pure
// lower-order chi-square.  Returns one sum per column.
inline std::vector<double> pure_chi2_sums_all(const DataMatrix& dm, int order,
                                              double op_budget = 2e10) {
    const int L = dm.cols();
    if (order < 2 || order > 4) throw ValidationError("pure_chi2_sums: order must be 2..4");
    auto subsets = [&](int n) {
        double c = 1.0;
        for (int i = 0; i < n; ++i) c *= double(L - i) / double(i + 1);
        return c;
    };
    if (subsets(order) * dm.rows() > op_budget)
        throw ResourceGuardError("pure_chi2_sums: subset enumeration exceeds the budget");

    std::vector<double> sums(L, 0.0);
    std::vector<double> pure2(std::size_t(L) * L, 0.0);
    for (int a = 0; a < L; ++a)
        for (int b = a + 1; b < L; ++b) {
            int cols[2] = {a, b};
            const double v = product_expected_chi2(dm, cols);
            pure2[std::size_t(a) * L + b] = pure2[std::size_t(b) * L + a] = v;
            if (order == 2) {
                sums[a] += v;
                sums[b] += v;
            }
        }
    if (order == 2) return sums;

    auto pure3 = [&](int a, int b, int c) {
        int cols[3] = {a, b, c};
        return product_expected_chi2(dm, cols) - pure2[std::size_t(a) * L + b] -
               pure2[std::size_t(a) * L + c] - pure2[std::size_t(b) * L + c];
    };
    if (order == 3) {
        for (int a = 0; a < L; ++a)
            for (int b = a + 1; b < L; ++b)
                for (int c = b + 1; c < L; ++c) {
                    const double v = pure3(a, b, c);
                    sums[a] += v;
                    sums[b] += v;
                    sums[c] += v;
                }
        return sums;
    }
    // order == 4: memoize the pure 3-way values.
    std::map<std::array<int, 3>, double> p3;
    for (int a = 0; a < L; ++a)
        for (int b = a + 1; b < L; ++b)
            for (int c = b + 1; c < L; ++c) p3[{a, b, c}] = pure3(a, b, c);
    for (int a = 0; a < L; ++a)
        for (int b = a + 1; b < L; ++b)
            for (int c = b + 1; c < L; ++c)
                for (int d = c + 1; d < L; ++d) {
                    int cols[4] = {a, b, c, d};
                    double v = product_expected_chi2(dm, cols);
                    v -= p3[{a, b, c}] + p3[{a, b, d}] + p3[{a, c, d}] + p3[{b, c, d}];
                    v -= pure2[std::size_t(a) * L + b] + pure2[std::size_t(a) * L + c] +
                         pure2[std::size_t(a) * L + d] + pure2[std::size_t(b) * L + c] +
                         pure2[std::size_t(b) * L + d] + pure2[std::size_t(c) * L + d];
                    sums[a] += v;
                    sums[b] += v;
                    sums[c] += v;
                    sums[d] += v;
                }
    return sums;
}

inline double pure_chi2_sums(const DataMatrix& dm, const PairwiseSummary&, int focal, int order) {
    return pure_chi2_sums_all(dm, order)[focal];
}

// ---- the five-column reference tests ----

// Helpers for the overall chi-square: joint counts over all columns with
// product-of-marginal expecteds; expecteds are invariant under single-column
// permutations, so only the observed counts are rescored.
class OverallChi2 {
  public:
    explicit OverallChi2(const DataMatrix& dm, std::size_t cell_guard = std::size_t(1) << 22)
        : dm_(&dm) {
        cells_ = 1;
        strides_.resize(dm.cols());
        for (int c = 0; c < dm.cols(); ++c) {
            strides_[c] = cells_;
            cells_ *= std::size_t(dm.arity(c));
            if (cells_ > cell_guard)
                throw ResourceGuardError("fig3 test: combination table exceeds the cell budget");
        }
        expected_.assign(cells_, double(dm.rows()));
        std::size_t stride = 1;
        for (int c = 0; c < dm.cols(); ++c) {
            const int S = dm.arity(c);
            std::vector<double> freq(S, 0.0);
            for (int r = 0; r < dm.rows(); ++r) freq[dm.at(r, c)] += 1.0;
            for (auto& f : freq) f /= double(dm.rows());
            std::vector<double> next(stride * S);
            for (std::size_t base = 0; base < stride; ++base)
                for (int s = 0; s < S; ++s)
                    next[std::size_t(s) * stride + base] = expected_[base] * freq[s];
            expected_.assign(next.begin(), next.end());
            stride *= S;
        }
        base_idx_.resize(dm.rows());
        for (int r = 0; r < dm.rows(); ++r) {
            std::size_t idx = 0;
            for (int c = 0; c < dm.cols(); ++c) idx += std::size_t(dm.at(r, c)) * strides_[c];
            base_idx_[r] = idx;
        }
    }

    std::size_t cells() const { return cells_; }
    int df() const {
        int k = 0;
        for (int c = 0; c < dm_->cols(); ++c) k += dm_->arity(c) - 1;
        return int(cells_) - k - 1;
    }

    // Chi-square with one column's markers replaced (same multiset).
    double value(int replaced_col = -1, const std::uint8_t* codes = nullptr) const {
        std::vector<std::int64_t> obs(cells_, 0);
        if (replaced_col < 0) {
            for (std::size_t idx : base_idx_) ++obs[idx];
        } else {
            const std::size_t st = strides_[replaced_col];
            const std::uint8_t* orig = dm_->column(replaced_col);
            for (int r = 0; r < dm_->rows(); ++r)
                ++obs[base_idx_[r] - std::size_t(orig[r]) * st + std::size_t(codes[r]) * st];
        }
        double chi2 = 0.0;
        for (std::size_t i = 0; i < cells_; ++i) {
            if (expected_[i] <= 0.0) continue;
            const double d = double(obs[i]) - expected_[i];
            chi2 += d * d / expected_[i];
        }
        return chi2;
    }

    // P value from permuting one column's markers vertically.
    double column_pvalue(int col, int perms, const RngStream& rng) const {
        const double orig = value();
        auto codes = dm_->column_copy(col);
        int hits = 0;
        for (int k = 0; k < perms; ++k) {
            RngStream rs = rng.child(std::uint64_t(k) + 1);
            std::vector<std::uint8_t> shuffled = codes;
            rs.shuffle(shuffled);
            if (value(col, shuffled.data()) >= orig - 1e-12) ++hits;
        }
        return double(1 + hits) / double(1 + perms);
    }

  private:
    const DataMatrix* dm_;
    std::size_t cells_ = 0;
    std::vector<std::size_t> strides_;
    std::vector<double> expected_;
    std::vector<std::size_t> base_idx_;
};

struct Fig3Result {
    double overall_chi2 = 0.0;
    int df = 0;
    double table_p = 1.0;               // chi-square tail at df
    double dv_p = 1.0;                  // DV-permutation P value
    std::vector<double> iv_dependent_p; // nested per-IV P values
};

// The reference battery: overall chi-square over all marker-combination
// cells, its table P value, the DV-permutation P value, and per-IV nested
// "IV-dependent" P values (permute the IV, re-estimate the DV P value each
// time, count how often it is no larger than the original).
inline Fig3Result fig3_tests(const DataMatrix& dm, int dv_perms, int iv_outer, int iv_inner,
                             const RngStream& rng) {
    if (!dm.has_dv()) throw ValidationError("fig3_tests: matrix has no DV");
    OverallChi2 test(dm);
    Fig3Result out;
    out.overall_chi2 = test.value();
    out.df = test.df();
    out.table_p = chi2_sf(out.overall_chi2, double(out.df));
    out.dv_p = test.column_pvalue(dm.dv_index(), dv_perms, rng.child(0xd0));

    if (iv_outer > 0) {
        // Reference DV P value at the inner effort so ranks are comparable.
        const double dv_p_ref = test.column_pvalue(dm.dv_index(), iv_inner, rng.child(0xd1));
        for (int iv = 0; iv < dm.cols(); ++iv) {
            if (iv == dm.dv_index()) continue;
            auto codes = dm.column_copy(iv);
            int hits = 0;
            for (int k = 0; k < iv_outer; ++k) {
                RngStream rs = rng.child({0xd2, std::uint64_t(iv), std::uint64_t(k)});
                std::vector<std::uint8_t> shuffled = codes;
                rs.shuffle(shuffled);
                DataMatrix perm = dm;
                std::copy(shuffled.begin(), shuffled.end(), perm.column(iv));
                OverallChi2 ptest(perm);
                const double p = ptest.column_pvalue(perm.dv_index(), iv_inner,
                                                     rs.child(0xd3));
                if (p <= dv_p_ref + 1e-12) ++hits;
            }
            out.iv_dependent_p.push_back(double(1 + hits) / double(1 + iv_outer));
        }
    }
    return out;
}

}  // namespace pas

#endif
