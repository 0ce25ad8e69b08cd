// meePAS implementation: one pass over all row pairs accumulates, for every
// column pair (f, c), the histogram over total matches t of the pairs
// matching at both columns.  Everything the exclusion deltas need follows
// from those histograms, the per-column diagonal, and the global t
// histogram, so the quadratic cost stays a single sweep of the PM.
#ifndef PAS_MEE_IMPL_HPP
#define PAS_MEE_IMPL_HPP

#include <thread>

#include "pas/parallel.hpp"

namespace pas {

inline std::vector<MeeResult> mee_pas(const DataMatrix& dm, const PairwiseSummary& summary,
                                      int order) {
    const int R = dm.rows(), L = dm.cols();
    if (L < 2) throw ValidationError("mee_pas: need at least 2 columns");
    if (order < 1) throw ValidationError("mee_pas: order must be >= 1");
    const int bins = L + 1;
    const std::size_t hist_bytes = std::size_t(L) * L * bins * sizeof(std::int64_t);
    if (hist_bytes > (std::size_t(1) << 28))
        throw ResourceGuardError("mee_pas: column count exceeds the histogram budget");

    int planes = 1;
    for (int c = 0; c < L; ++c)
        while ((1 << planes) < dm.arity(c)) ++planes;
    const std::size_t nw = std::size_t(L + 63) / 64;
    std::vector<std::uint64_t> bits(std::size_t(R) * planes * nw, 0);
    auto row_plane = [&](int r, int p) { return bits.data() + (std::size_t(r) * planes + p) * nw; };
    for (int c = 0; c < L; ++c) {
        const std::uint8_t* col = dm.column(c);
        for (int r = 0; r < R; ++r)
            for (int p = 0; p < planes; ++p)
                if (col[r] >> p & 1) row_plane(r, p)[c >> 6] |= 1ULL << (c & 63);
    }

    const unsigned threads = std::min(default_threads(), 8u);
    // co[f][c][t] for f <= c; diagonal co[f][f][t] is the f-match histogram.
    std::vector<std::vector<std::int64_t>> co_parts(threads);
    std::vector<std::vector<std::int64_t>> g_parts(threads);
    auto co_at = [&](std::vector<std::int64_t>& co, int f, int c) {
        return co.data() + (std::size_t(f) * L + c) * bins;
    };

    parallel_for(threads, threads, [&](std::size_t tid) {
        auto& co = co_parts[tid];
        auto& g = g_parts[tid];
        co.assign(std::size_t(L) * L * bins, 0);
        g.assign(bins, 0);
        std::vector<int> idx(L);
        for (int a = int(tid); a < R; a += int(threads)) {
            for (int b = a + 1; b < R; ++b) {
                int n_match = 0;
                for (std::size_t k = 0; k < nw; ++k) {
                    std::uint64_t d = 0;
                    for (int p = 0; p < planes; ++p)
                        d |= row_plane(a, p)[k] ^ row_plane(b, p)[k];
                    std::uint64_t same = ~d;
                    if (k == nw - 1 && (L & 63)) same &= (1ULL << (L & 63)) - 1;
                    while (same) {
                        idx[n_match++] = int(k << 6) + std::countr_zero(same);
                        same &= same - 1;
                    }
                }
                ++g[n_match];
                for (int i = 0; i < n_match; ++i) {
                    std::int64_t* base = co_at(co, idx[i], 0) + n_match;
                    for (int j = i; j < n_match; ++j) ++base[std::size_t(idx[j]) * bins];
                }
            }
        }
    });
    std::vector<std::int64_t> co(std::size_t(L) * L * bins, 0);
    std::vector<std::int64_t> g(bins, 0);
    for (unsigned t = 0; t < threads; ++t) {
        for (std::size_t i = 0; i < co.size(); ++i) co[i] += co_parts[t][i];
        for (int i = 0; i < bins; ++i) g[i] += g_parts[t][i];
        co_parts[t].clear();
        co_parts[t].shrink_to_fit();
    }

    auto pair_hist = [&](int f, int c) {
        return co.data() + (f <= c ? (std::size_t(f) * L + c) : (std::size_t(c) * L + f)) * bins;
    };
    std::vector<std::int64_t> scratch_f(bins), scratch_c(bins), scratch_n(bins);
    std::vector<MeeResult> out(L);
    for (int f = 0; f < L; ++f) {
        const std::int64_t* hf = pair_hist(f, f);
        using Groups = std::vector<std::pair<const std::int64_t*, int>>;
        const double base_cond = detail::grouped_moment(Groups{{hf, -1}}, bins, order);
        for (int v = 0; v < bins; ++v) scratch_n[v] = g[v] - hf[v];
        const double base_unc =
            detail::grouped_moment(Groups{{hf, -1}, {scratch_n.data(), 0}}, bins, order);
        const double base = base_cond - base_unc;
        MeeResult best;
        for (int c = 0; c < L; ++c) {
            if (c == f) continue;
            const std::int64_t* hfc = pair_hist(f, c);
            const std::int64_t* hc = pair_hist(c, c);
            for (int v = 0; v < bins; ++v) {
                scratch_f[v] = hf[v] - hfc[v];
                scratch_c[v] = hc[v] - hfc[v];
                scratch_n[v] = g[v] - hf[v] - hc[v] + hfc[v];
            }
            const double cond =
                detail::grouped_moment(Groups{{hfc, -2}, {scratch_f.data(), -1}}, bins, order);
            const double unc = detail::grouped_moment(Groups{{hfc, -2},
                                                             {scratch_f.data(), -1},
                                                             {scratch_c.data(), -1},
                                                             {scratch_n.data(), 0}},
                                                      bins, order);
            if (std::isnan(cond) || std::isnan(base)) continue;
            const double delta = (cond - unc) - base;
            if (best.arg_col < 0 || std::fabs(delta) > std::fabs(best.delta)) {
                best.delta = delta;
                best.arg_col = c;
            }
        }
        out[f] = best;
    }
    (void)summary;
    return out;
}

}  // namespace pas

#endif
