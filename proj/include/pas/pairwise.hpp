// The pairwise matrix PM, kept implicit: per-pair total match counts scored
// once per matrix, fast per-column pairwise patterns, and the conditional /
// hybrid count sets every score consumes.
//
// Pairs (a, b) with a < b are ordered lexicographically, a-major, everywhere:
// w(a, b) = a*R - a*(a+1)/2 + (b - a - 1).
#ifndef PAS_PAIRWISE_HPP
#define PAS_PAIRWISE_HPP

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "pas/matrix_core.hpp"

namespace pas {

struct PairwiseSummary {
    int rows = 0, cols = 0;
    std::vector<std::uint16_t> total_matches;    // length W, pair order
    std::vector<double> per_column_match_freq;   // fraction of matching pairs

    std::size_t W() const { return total_matches.size(); }
};

inline std::size_t pair_count(int rows) {
    return std::size_t(rows) * (rows - 1) / 2;
}

// Per-pair total matches via bit-plane packed rows: a pair matches at a
// column iff every bit plane agrees there.
inline PairwiseSummary total_matches(const DataMatrix& dm) {
    const int R = dm.rows(), L = dm.cols();
    if (L > 65535) throw ResourceGuardError("total_matches: more than 65535 columns");
    int planes = 1;
    for (int c = 0; c < L; ++c)
        while ((1 << planes) < dm.arity(c)) ++planes;
    const std::size_t nw = std::size_t(L + 63) / 64;
    std::vector<std::uint64_t> bits(std::size_t(R) * planes * nw, 0);
    auto row_plane = [&](int r, int p) { return bits.data() + (std::size_t(r) * planes + p) * nw; };
    for (int c = 0; c < L; ++c) {
        const std::uint8_t* col = dm.column(c);
        for (int r = 0; r < R; ++r) {
            std::uint8_t v = col[r];
            for (int p = 0; p < planes; ++p)
                if (v >> p & 1) row_plane(r, p)[c >> 6] |= 1ULL << (c & 63);
        }
    }
    PairwiseSummary s;
    s.rows = R;
    s.cols = L;
    s.total_matches.resize(pair_count(R));
    std::size_t w = 0;
    for (int a = 0; a < R; ++a) {
        for (int b = a + 1; b < R; ++b) {
            int matches = L;
            const std::uint64_t* a0 = row_plane(a, 0);
            const std::uint64_t* b0 = row_plane(b, 0);
            if (planes == 1) {
                for (std::size_t k = 0; k < nw; ++k)
                    matches -= std::popcount(a0[k] ^ b0[k]);
            } else if (planes == 2) {
                const std::uint64_t* a1 = row_plane(a, 1);
                const std::uint64_t* b1 = row_plane(b, 1);
                for (std::size_t k = 0; k < nw; ++k)
                    matches -= std::popcount((a0[k] ^ b0[k]) | (a1[k] ^ b1[k]));
            } else {
                for (std::size_t k = 0; k < nw; ++k) {
                    std::uint64_t d = 0;
                    for (int p = 0; p < planes; ++p)
                        d |= row_plane(a, p)[k] ^ row_plane(b, p)[k];
                    matches -= std::popcount(d);
                }
            }
            s.total_matches[w++] = std::uint16_t(matches);
        }
    }
    // Matching pair count per column from marker counts: sum_s C(n_s, 2).
    s.per_column_match_freq.resize(L);
    const double W = double(s.total_matches.size());
    for (int c = 0; c < L; ++c) {
        std::vector<std::int64_t> n(dm.arity(c), 0);
        const std::uint8_t* col = dm.column(c);
        for (int r = 0; r < R; ++r) ++n[col[r]];
        double pairs = 0.0;
        for (std::int64_t k : n) pairs += double(k) * double(k - 1) / 2.0;
        s.per_column_match_freq[c] = pairs / W;
    }
    return s;
}

// PM column of one marker column with R-1 tract copies instead of the usual
// W comparisons: tract i covers pairs (i, i+1..R-1).  For a binary column the
// tract is a direct copy of the markers below row i when marker i is 1, the
// boolean-negated copy when it is 0; for higher arity it is the equality
// mask against marker i.  Output is 1 = match, pair order as above.
inline std::vector<std::uint8_t> pm_column_fast(std::span<const std::uint8_t> column) {
    const int R = int(column.size());
    std::vector<std::uint8_t> out(pair_count(R));
    bool binary = true;
    for (int r = 0; r < R; ++r)
        if (column[r] > 1) binary = false;
    std::size_t w = 0;
    for (int i = 0; i < R - 1; ++i) {
        const std::uint8_t mi = column[i];
        if (binary) {
            if (mi) {
                for (int b = i + 1; b < R; ++b) out[w++] = column[b];
            } else {
                for (int b = i + 1; b < R; ++b) out[w++] = std::uint8_t(1 - column[b]);
            }
        } else {
            for (int b = i + 1; b < R; ++b) out[w++] = std::uint8_t(column[b] == mi);
        }
    }
    return out;
}

// Unordered pairwise-state table for one column of arity S: states 0..S-1 are
// the (i,i) matches, states S.. are the distinct (i,j) mismatch pairs in
// lexicographic order.
struct PairStateTable {
    int arity = 0;
    int n_states = 0;
    std::vector<std::uint8_t> idx;  // arity x arity

    explicit PairStateTable(int S) : arity(S), n_states(S * (S + 1) / 2), idx(S * S) {
        int next = S;
        for (int i = 0; i < S; ++i) {
            idx[i * S + i] = std::uint8_t(i);
            for (int j = i + 1; j < S; ++j) {
                idx[i * S + j] = idx[j * S + i] = std::uint8_t(next++);
            }
        }
    }
    int state(std::uint8_t a, std::uint8_t b) const { return idx[a * arity + b]; }
    bool is_match(int state) const { return state < arity; }
};

// Counts of the pairings of focal pairwise states with non-focal match
// totals: {S_i}, {M_m}, and the joint {S_i..M_m}.  States are kept fully
// specified (all unordered marker pairs); the score functions pool them into
// generic or per-marker views.
struct ConditionalSets {
    int focal = -1;
    int L = 0;              // columns in the matrix; m ranges over 0..L-1
    int arity = 0;          // focal column arity
    int n_states = 0;       // arity*(arity+1)/2, diagonal states first
    std::size_t W = 0;
    std::vector<std::int64_t> joint;     // n_states x L
    std::vector<std::int64_t> s_counts;  // per state
    std::vector<std::int64_t> m_counts;  // per m

    const std::int64_t* row(int state) const { return joint.data() + std::size_t(state) * L; }

    void fill_margins() {
        s_counts.assign(n_states, 0);
        m_counts.assign(L, 0);
        for (int s = 0; s < n_states; ++s) {
            const std::int64_t* r = row(s);
            for (int m = 0; m < L; ++m) {
                s_counts[s] += r[m];
                m_counts[m] += r[m];
            }
        }
    }
};

// Reusable per-focal scan: non-focal match totals are fixed under any
// rearrangement of the focal column, so they are derived once from the
// cached totals and only the focal pairwise states are rescored.
class FocalScan {
  public:
    FocalScan(const DataMatrix& dm, const PairwiseSummary& summary, int focal)
        : rows_(dm.rows()), L_(dm.cols()), arity_(dm.arity(focal)), focal_(focal) {
        const std::uint8_t* col = dm.column(focal);
        m0_.resize(summary.W());
        std::size_t w = 0;
        for (int a = 0; a < rows_; ++a) {
            const std::uint8_t ca = col[a];
            for (int b = a + 1; b < rows_; ++b, ++w)
                m0_[w] = std::uint16_t(summary.total_matches[w] - (ca == col[b] ? 1 : 0));
        }
    }

    int rows() const { return rows_; }
    int focal() const { return focal_; }

    // Sets for any marker arrangement of the focal column (same arity).
    ConditionalSets sets_for(std::span<const std::uint8_t> codes) const {
        PairStateTable tbl(arity_);
        ConditionalSets cs;
        cs.focal = focal_;
        cs.L = L_;
        cs.arity = arity_;
        cs.n_states = tbl.n_states;
        cs.W = m0_.size();
        cs.joint.assign(std::size_t(cs.n_states) * L_, 0);
        const std::uint8_t* tab = tbl.idx.data();
        std::int64_t* joint = cs.joint.data();
        std::size_t w = 0;
        for (int a = 0; a < rows_; ++a) {
            const std::uint8_t* base = tab + std::size_t(codes[a]) * arity_;
            for (int b = a + 1; b < rows_; ++b, ++w)
                ++joint[std::size_t(base[codes[b]]) * L_ + m0_[w]];
        }
        cs.fill_margins();
        return cs;
    }

  private:
    int rows_, L_, arity_, focal_;
    std::vector<std::uint16_t> m0_;
};

inline ConditionalSets conditional_sets(const DataMatrix& dm, const PairwiseSummary& summary,
                                        int focal) {
    if (focal < 0 || focal >= dm.cols()) throw ValidationError("conditional_sets: bad focal");
    FocalScan scan(dm, summary, focal);
    return scan.sets_for({dm.column(focal), std::size_t(dm.rows())});
}

// Counts over (state at S, state at E, matches at all other columns); the
// fragment marginal {M_m..E_k} comes with it.  Double mismatches are not
// phase-distinguished (unordered pairs on both sides).
struct HybridSets {
    int s_col = -1, e_col = -1;
    int L = 0;  // m ranges over 0..L-2
    int s_arity = 0, e_arity = 0;
    int n_s_states = 0, n_e_states = 0;
    std::size_t W = 0;
    std::vector<std::int64_t> joint;        // n_s_states x n_e_states x (L-1)
    std::vector<std::int64_t> me_marginal;  // n_e_states x (L-1)
    std::vector<std::int64_t> s_counts;

    std::size_t stride() const { return std::size_t(n_e_states) * (L - 1); }
    const std::int64_t* block(int s_state) const { return joint.data() + s_state * stride(); }
    std::int64_t cell(int s_state, int e_state, int m) const {
        return joint[s_state * stride() + std::size_t(e_state) * (L - 1) + m];
    }

    void fill_margins() {
        s_counts.assign(n_s_states, 0);
        me_marginal.assign(stride(), 0);
        for (int s = 0; s < n_s_states; ++s) {
            const std::int64_t* b = block(s);
            for (std::size_t k = 0; k < stride(); ++k) {
                s_counts[s] += b[k];
                me_marginal[k] += b[k];
            }
        }
    }
};

// Reusable two-focus scan keyed on the to-be-permuted column S (usually the
// DV).  Per pair the E state and the match total outside both foci are fixed;
// only the S states are rescored per permutation.
class HybridScan {
  public:
    HybridScan(const DataMatrix& dm, const PairwiseSummary& summary, int s_col, int e_col)
        : rows_(dm.rows()),
          L_(dm.cols()),
          s_col_(s_col),
          e_col_(e_col),
          s_arity_(dm.arity(s_col)),
          e_arity_(dm.arity(e_col)) {
        if (s_col == e_col) throw ValidationError("hybrid scan: S and E must differ");
        PairStateTable etbl(e_arity_);
        key_.resize(summary.W());
        const std::uint8_t* scol = dm.column(s_col);
        const std::uint8_t* ecol = dm.column(e_col);
        const std::size_t mstride = std::size_t(L_ - 1);
        std::size_t w = 0;
        for (int a = 0; a < rows_; ++a) {
            const std::uint8_t sa = scol[a], ea = ecol[a];
            for (int b = a + 1; b < rows_; ++b, ++w) {
                int m2 = summary.total_matches[w] - (sa == scol[b] ? 1 : 0) -
                         (ea == ecol[b] ? 1 : 0);
                key_[w] = std::uint32_t(etbl.state(ea, ecol[b]) * mstride + m2);
            }
        }
    }

    HybridSets sets_for(std::span<const std::uint8_t> s_codes) const {
        PairStateTable stbl(s_arity_);
        HybridSets hs;
        hs.s_col = s_col_;
        hs.e_col = e_col_;
        hs.L = L_;
        hs.s_arity = s_arity_;
        hs.e_arity = e_arity_;
        hs.n_s_states = stbl.n_states;
        hs.n_e_states = e_arity_ * (e_arity_ + 1) / 2;
        hs.W = key_.size();
        hs.joint.assign(std::size_t(hs.n_s_states) * hs.stride(), 0);
        const std::uint8_t* tab = stbl.idx.data();
        std::int64_t* joint = hs.joint.data();
        const std::size_t stride = hs.stride();
        std::size_t w = 0;
        for (int a = 0; a < rows_; ++a) {
            const std::uint8_t* base = tab + std::size_t(s_codes[a]) * s_arity_;
            for (int b = a + 1; b < rows_; ++b, ++w)
                ++joint[std::size_t(base[s_codes[b]]) * stride + key_[w]];
        }
        hs.fill_margins();
        return hs;
    }

  private:
    int rows_, L_, s_col_, e_col_, s_arity_, e_arity_;
    std::vector<std::uint32_t> key_;
};

inline HybridSets hybrid_sets(const DataMatrix& dm, const PairwiseSummary& summary, int s_col,
                              int e_col) {
    HybridScan scan(dm, summary, s_col, e_col);
    return scan.sets_for({dm.column(s_col), std::size_t(dm.rows())});
}

// Scan for the plain dv scores: E stays the focal column of ordinary
// ConditionalSets while the permuted column S only moves its own match in
// and out of the m totals.
class DvPlainScan {
  public:
    DvPlainScan(const DataMatrix& dm, const PairwiseSummary& summary, int s_col, int e_col)
        : rows_(dm.rows()), L_(dm.cols()), e_col_(e_col), e_arity_(dm.arity(e_col)) {
        if (s_col == e_col) throw ValidationError("dv plain scan: S and E must differ");
        PairStateTable etbl(e_arity_);
        key_.resize(summary.W());
        const std::uint8_t* scol = dm.column(s_col);
        const std::uint8_t* ecol = dm.column(e_col);
        std::size_t w = 0;
        for (int a = 0; a < rows_; ++a) {
            const std::uint8_t sa = scol[a], ea = ecol[a];
            for (int b = a + 1; b < rows_; ++b, ++w) {
                int base = summary.total_matches[w] - (sa == scol[b] ? 1 : 0) -
                           (ea == ecol[b] ? 1 : 0);
                key_[w] = std::uint32_t(etbl.state(ea, ecol[b])) * std::uint32_t(L_) +
                          std::uint32_t(base);
            }
        }
    }

    // Conditional sets of E when the S column holds `s_codes`.
    ConditionalSets sets_for(std::span<const std::uint8_t> s_codes) const {
        ConditionalSets cs;
        cs.focal = e_col_;
        cs.L = L_;
        cs.arity = e_arity_;
        cs.n_states = e_arity_ * (e_arity_ + 1) / 2;
        cs.W = key_.size();
        cs.joint.assign(std::size_t(cs.n_states) * L_, 0);
        std::int64_t* joint = cs.joint.data();
        std::size_t w = 0;
        for (int a = 0; a < rows_; ++a) {
            const std::uint8_t sa = s_codes[a];
            for (int b = a + 1; b < rows_; ++b, ++w)
                ++joint[key_[w] + (sa == s_codes[b] ? 1 : 0)];
        }
        cs.fill_margins();
        return cs;
    }

  private:
    int rows_, L_, e_col_, e_arity_;
    std::vector<std::uint32_t> key_;
};

}  // namespace pas

#endif
