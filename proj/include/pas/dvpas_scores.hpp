// Dependent-variable-focused scores over the hybrid sets: dvMom^n (MM and
// ik conditionings), dvCHIx (MM, ijkl) and the dvLKx family.  The plain
// dvMom^n is structurally the Mom^n of the IV's own conditional sets with
// the DV merely driving the permutation null, so it lives in pas_scores.
#ifndef PAS_DVPAS_SCORES_HPP
#define PAS_DVPAS_SCORES_HPP

#include "pas/pas_scores.hpp"

namespace pas {

enum class DvMomCond { MM, IK };
enum class DvChixMode { MM, IJKL };

// Pools the (S-state x E-state x m) counts into (s_group) rows over a
// flattened (e_group, m) axis, so the chi-square and likelihood kernels of
// pas_scores can be reused unchanged: the flattened axis plays the role of
// the hybrid fragments {M_m..E_k}.
inline std::vector<std::vector<std::int64_t>> pooled_hybrid(const HybridSets& hs,
                                                            StatePool s_pool, StatePool e_pool) {
    auto groups_of = [](int arity, int n_states, StatePool pool) {
        std::vector<std::vector<int>> groups;
        switch (pool) {
            case StatePool::Match: {
                groups.emplace_back();
                for (int s = 0; s < arity; ++s) groups.back().push_back(s);
                break;
            }
            case StatePool::Generic: {
                groups.emplace_back();
                for (int s = 0; s < arity; ++s) groups.back().push_back(s);
                groups.emplace_back();
                for (int s = arity; s < n_states; ++s) groups.back().push_back(s);
                break;
            }
            case StatePool::PerMarker: {
                for (int s = 0; s < arity; ++s) groups.push_back({s});
                break;
            }
            case StatePool::FullPairs: {
                for (int s = 0; s < n_states; ++s) groups.push_back({s});
                break;
            }
        }
        return groups;
    };
    const auto s_groups = groups_of(hs.s_arity, hs.n_s_states, s_pool);
    const auto e_groups = groups_of(hs.e_arity, hs.n_e_states, e_pool);
    const int ml = hs.L - 1;
    std::vector<std::vector<std::int64_t>> rows(s_groups.size(),
                                                std::vector<std::int64_t>(e_groups.size() * ml, 0));
    for (std::size_t gi = 0; gi < s_groups.size(); ++gi)
        for (int s : s_groups[gi])
            for (std::size_t ge = 0; ge < e_groups.size(); ++ge)
                for (int e : e_groups[ge]) {
                    const std::int64_t* cell =
                        hs.joint.data() + s * hs.stride() + std::size_t(e) * ml;
                    std::int64_t* dst = rows[gi].data() + ge * ml;
                    for (int m = 0; m < ml; ++m) dst[m] += cell[m];
                }
    return rows;
}

// dvMom^n: MM conditions on generic matches at both foci (one cell); ik
// conditions on an (i,i) match at the DV and a (k,k) match at the IV, one
// cell per (i,k), with all mismatch pairs ignored.
inline MomentScore dv_mom(const HybridSets& hs, int order, DvMomCond cond) {
    if (order < 1) throw ValidationError("dv_mom: order must be >= 1");
    MomentScore out;
    out.order = order;
    out.conditioning = MomCond::PerMarker;
    const int ml = hs.L - 1;
    if (cond == DvMomCond::MM) {
        std::vector<std::int64_t> row(ml, 0);
        for (int i = 0; i < hs.s_arity; ++i)
            for (int k = 0; k < hs.e_arity; ++k)
                for (int m = 0; m < ml; ++m) row[m] += hs.cell(i, k, m);
        std::int64_t w = 0;
        for (auto c : row) w += c;
        out.conditioning = MomCond::M;
        out.weights.push_back(w);
        out.values.push_back(count_row_moment(row, order));
        return out;
    }
    std::vector<std::int64_t> row(ml);
    for (int i = 0; i < hs.s_arity; ++i) {
        for (int k = 0; k < hs.e_arity; ++k) {
            std::int64_t w = 0;
            for (int m = 0; m < ml; ++m) {
                row[m] = hs.cell(i, k, m);
                w += row[m];
            }
            out.weights.push_back(w);
            out.values.push_back(count_row_moment(row, order));
        }
    }
    return out;
}

inline double dv_chix(const HybridSets& hs, DvChixMode mode) {
    const StatePool pool = mode == DvChixMode::MM ? StatePool::Generic : StatePool::FullPairs;
    return chix_rows(pooled_hybrid(hs, pool, pool), hs.W);
}

// Hypergeometric pairing likelihood of the S states against the observed
// hybrid fragments, with the multinomial and max-likelihood variants.
inline LkxBundle dv_lkx(const HybridSets& hs) {
    return lkx_rows(pooled_hybrid(hs, StatePool::FullPairs, StatePool::FullPairs), hs.W);
}

}  // namespace pas

#endif
