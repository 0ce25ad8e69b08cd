// Single-focal-column scores over the conditional sets: moment scores Mom^n,
// the chi-square-style CHIx, the pairing likelihoods LKx / LKm / maxLKm, the
// Kolmogorov-Smirnov score, and the column-exclusion score meePAS.
#ifndef PAS_PAS_SCORES_HPP
#define PAS_PAS_SCORES_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pas/pairwise.hpp"
#include "pas/special.hpp"

namespace pas {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

// How the fully specified pairwise states are pooled before scoring.
enum class StatePool {
    Match,      // one group: any match (the "M" conditioning)
    Generic,    // two groups: match, mismatch
    PerMarker,  // one group per (i,i) match; mismatches pooled, not scored by moments
    FullPairs,  // every unordered pair state separately (the "ij" scoring)
};

// Count rows (over m) for the groups of a pooling of ConditionalSets states.
inline std::vector<std::vector<std::int64_t>> pooled_rows(const ConditionalSets& cs,
                                                          StatePool pool) {
    const int S = cs.arity;
    auto pooled = [&](auto&& want) {
        std::vector<std::int64_t> row(cs.L, 0);
        for (int s = 0; s < cs.n_states; ++s)
            if (want(s))
                for (int m = 0; m < cs.L; ++m) row[m] += cs.row(s)[m];
        return row;
    };
    switch (pool) {
        case StatePool::Match:
            return {pooled([&](int s) { return s < S; })};
        case StatePool::Generic:
            return {pooled([&](int s) { return s < S; }), pooled([&](int s) { return s >= S; })};
        case StatePool::PerMarker: {
            std::vector<std::vector<std::int64_t>> rows;
            for (int i = 0; i < S; ++i)
                rows.emplace_back(cs.row(i), cs.row(i) + cs.L);
            rows.push_back(pooled([&](int s) { return s >= S; }));
            return rows;
        }
        case StatePool::FullPairs: {
            std::vector<std::vector<std::int64_t>> rows;
            for (int s = 0; s < cs.n_states; ++s)
                rows.emplace_back(cs.row(s), cs.row(s) + cs.L);
            return rows;
        }
    }
    return {};
}

// Mean for n = 1, n-th central (unstandardized) moment for n >= 2, of the m
// distribution given by one count row.  Empty rows yield the NaN sentinel.
inline double count_row_moment(const std::vector<std::int64_t>& counts, int order) {
    std::int64_t total = 0;
    double mean = 0.0;
    for (std::size_t m = 0; m < counts.size(); ++m) {
        total += counts[m];
        mean += double(m) * double(counts[m]);
    }
    if (total == 0) return kUndefined;
    mean /= double(total);
    if (order == 1) return mean;
    double acc = 0.0;
    for (std::size_t m = 0; m < counts.size(); ++m)
        if (counts[m]) acc += std::pow(double(m) - mean, order) * double(counts[m]);
    return acc / double(total);
}

enum class MomCond { M, PerMarker };

struct MomentScore {
    int order = 1;
    MomCond conditioning = MomCond::M;
    std::vector<double> values;         // one per conditioning cell; NaN = empty cell
    std::vector<std::int64_t> weights;  // pair counts behind each cell

    // Raw-sum aggregation: empty cells contribute 0.
    double sum() const {
        double s = 0.0;
        bool any = false;
        for (double v : values)
            if (!std::isnan(v)) {
                s += v;
                any = true;
            }
        return any ? s : kUndefined;
    }
};

inline MomentScore mom(const ConditionalSets& cs, int order, MomCond cond) {
    if (order < 1) throw ValidationError("mom: order must be >= 1");
    MomentScore out;
    out.order = order;
    out.conditioning = cond;
    auto rows = pooled_rows(cs, cond == MomCond::M ? StatePool::Match : StatePool::PerMarker);
    if (cond == MomCond::PerMarker) rows.pop_back();  // mismatch pool is not a moment cell
    for (auto& r : rows) {
        std::int64_t w = 0;
        for (auto c : r) w += c;
        out.weights.push_back(w);
        out.values.push_back(count_row_moment(r, order));
    }
    return out;
}

enum class ChixMode { M, IJ };

// Chi-square-style departure of {S_i..M_m} from the margin product; cells
// with zero expected count are skipped.
inline double chix_rows(const std::vector<std::vector<std::int64_t>>& rows, std::size_t W) {
    const std::size_t L = rows.empty() ? 0 : rows.front().size();
    std::vector<std::int64_t> m_counts(L, 0);
    std::vector<std::int64_t> s_counts(rows.size(), 0);
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t m = 0; m < L; ++m) {
            s_counts[s] += rows[s][m];
            m_counts[m] += rows[s][m];
        }
    double total = 0.0;
    for (std::size_t s = 0; s < rows.size(); ++s) {
        if (s_counts[s] == 0) continue;
        for (std::size_t m = 0; m < L; ++m) {
            if (m_counts[m] == 0) continue;
            const double expected = double(s_counts[s]) * double(m_counts[m]) / double(W);
            const double d = double(rows[s][m]) - expected;
            total += d * d / expected;
        }
    }
    return total;
}

inline double chix(const ConditionalSets& cs, ChixMode mode) {
    return chix_rows(pooled_rows(cs, mode == ChixMode::M ? StatePool::Generic
                                                         : StatePool::FullPairs),
                     cs.W);
}

struct LkxBundle {
    double log_lkx = 0.0;     // hypergeometric pairing probability of {S_i..M_m}
    double log_lkm = 0.0;     // multinomial (with-replacement) variant
    double log_maxlkm = 0.0;  // maximum-likelihood PM-level H1
};

// Formula family: favorable/possible multinomial coefficients over the
// pairings of focal pairwise states with non-focal match totals.
inline LkxBundle lkx_rows(const std::vector<std::vector<std::int64_t>>& rows, std::size_t W) {
    const std::size_t L = rows.empty() ? 0 : rows.front().size();
    std::vector<std::int64_t> m_counts(L, 0);
    std::vector<std::int64_t> s_counts(rows.size(), 0);
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t m = 0; m < L; ++m) {
            s_counts[s] += rows[s][m];
            m_counts[m] += rows[s][m];
        }
    double log_s_fact = 0.0, log_m_fact = 0.0, log_joint_fact = 0.0;
    double s_freq_term = 0.0, m_freq_term = 0.0, max_term = 0.0;
    for (auto c : s_counts) {
        log_s_fact += log_factorial(std::uint64_t(c));
        if (c > 0) s_freq_term += double(c) * std::log(double(c) / double(W));
    }
    for (auto c : m_counts) {
        log_m_fact += log_factorial(std::uint64_t(c));
        if (c > 0) m_freq_term += double(c) * std::log(double(c) / double(W));
    }
    for (auto& r : rows)
        for (auto c : r) {
            log_joint_fact += log_factorial(std::uint64_t(c));
            if (c > 0) max_term += double(c) * std::log(double(c) / double(W));
        }
    LkxBundle b;
    const double log_w_fact = log_factorial(W);
    b.log_lkx = log_s_fact + log_m_fact - log_w_fact - log_joint_fact;
    b.log_lkm = b.log_lkx + s_freq_term + m_freq_term;
    b.log_maxlkm = log_w_fact - log_joint_fact + max_term;
    return b;
}

inline LkxBundle lkx(const ConditionalSets& cs, ChixMode mode = ChixMode::IJ) {
    return lkx_rows(pooled_rows(cs, mode == ChixMode::M ? StatePool::Generic
                                                        : StatePool::FullPairs),
                    cs.W);
}

// Null conditional c.d.f.s of m per conditioning group, estimated by the
// inference module from permutation replicates.
struct NullCdfs {
    std::vector<std::vector<double>> cdf;  // group x (m support), running c.d.f.
};

// Sum over conditioning groups of the sup-norm distance between the observed
// conditional c.d.f. of m and the null c.d.f.  Empty observed groups are
// skipped; a populated group without a null c.d.f. is an error.
inline double ks_rows(const std::vector<std::vector<std::int64_t>>& rows, const NullCdfs& null) {
    if (null.cdf.size() < rows.size())
        throw ValidationError("ks: null c.d.f. group count does not match conditioning");
    double total = 0.0;
    for (std::size_t g = 0; g < rows.size(); ++g) {
        std::int64_t n = 0;
        for (auto c : rows[g]) n += c;
        if (n == 0) continue;
        if (null.cdf[g].empty()) throw ValidationError("ks: missing null c.d.f. for populated state");
        double acc = 0.0, d = 0.0;
        for (std::size_t m = 0; m < rows[g].size(); ++m) {
            acc += double(rows[g][m]) / double(n);
            d = std::max(d, std::fabs(acc - null.cdf[g][m]));
        }
        total += d;
    }
    return total;
}

inline double ks(const ConditionalSets& cs, const NullCdfs& null, MomCond cond) {
    auto rows = pooled_rows(cs, cond == MomCond::M ? StatePool::Generic : StatePool::PerMarker);
    if (cond == MomCond::PerMarker) rows.pop_back();
    return ks_rows(rows, null);
}

// Maximal exclusion effect: for every focal column, the largest change in
// its Mom^n-M caused by excluding any single other column, the change's
// sign, and the excluding column.  The change is measured on the conditional
// moment in excess of the unconditional one, so a column that matches in
// every pair shifts nothing.
struct MeeResult {
    double delta = 0.0;  // signed change with largest magnitude
    int arg_col = -1;    // the excluded column causing it
};

namespace detail {
// Central (or plain mean) moment over groups of shifted histogram values:
// each entry is (histogram over t, shift applied to t).
inline double grouped_moment(
    const std::vector<std::pair<const std::int64_t*, int>>& groups, int bins, int order) {
    std::int64_t n = 0;
    double mean = 0.0;
    for (auto& [h, shift] : groups)
        for (int v = 0; v < bins; ++v) {
            n += h[v];
            mean += double(h[v]) * double(v + shift);
        }
    if (n == 0) return kUndefined;
    mean /= double(n);
    if (order == 1) return mean;
    double acc = 0.0;
    for (auto& [h, shift] : groups)
        for (int v = 0; v < bins; ++v)
            if (h[v]) acc += double(h[v]) * std::pow(double(v + shift) - mean, order);
    return acc / double(n);
}
}  // namespace detail

std::vector<MeeResult> mee_pas(const DataMatrix& dm, const PairwiseSummary& summary, int order);

}  // namespace pas

#include "pas/mee_impl.hpp"

#endif
