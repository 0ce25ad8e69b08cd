// Permutation inference: P values and Z values for any score, Sidak
// correction, Fisher combination, marginal-effect testing and erasure, and
// the added-random-IV erasure-threshold tuning workflow.
#ifndef PAS_INFERENCE_HPP
#define PAS_INFERENCE_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <variant>

#include "pas/dvpas_scores.hpp"
#include "pas/parallel.hpp"
#include "pas/pas_scores.hpp"

namespace pas {

// One score requested by name, e.g. "mom1iz", "chix-ij", "dvmom2i",
// "dvmom1ikz", "dvchix-ijkl", "dvlkx", "ks-m", "dvks-i".
struct ScoreSpec {
    enum class Family { Mom, Chix, Lkx, Ks };
    enum class Cond { M, I, IZ, MM, IK, IKZ, IJ, IJKL };

    Family family = Family::Mom;
    Cond cond = Cond::I;
    int order = 1;    // mom only
    bool dv = false;  // permute the DV instead of the focal column

    bool z_valued() const { return cond == Cond::IZ || cond == Cond::IKZ; }
    bool hybrid() const { return cond == Cond::MM || cond == Cond::IK || cond == Cond::IKZ ||
                                 cond == Cond::IJKL; }

    static ScoreSpec parse(const std::string& name);
    std::string to_string() const;
};

inline ScoreSpec ScoreSpec::parse(const std::string& name) {
    std::string s;
    for (char c : name)
        if (c != '-' && c != '_') s += char(std::tolower(c));
    ScoreSpec spec;
    if (s.rfind("dv", 0) == 0) {
        spec.dv = true;
        s = s.substr(2);
    }
    auto take = [&](const char* prefix) {
        std::string p(prefix);
        if (s.rfind(p, 0) == 0) {
            s = s.substr(p.size());
            return true;
        }
        return false;
    };
    if (take("mom")) {
        spec.family = Family::Mom;
        if (s.empty() || !std::isdigit(s[0]))
            throw UsageError("score '" + name + "': mom needs an order, e.g. mom1iz");
        spec.order = 0;
        while (!s.empty() && std::isdigit(s[0])) {
            spec.order = spec.order * 10 + (s[0] - '0');
            s = s.substr(1);
        }
        if (spec.order < 1 || spec.order > 8)
            throw UsageError("score '" + name + "': order out of range");
        if (s.empty()) s = "i";
    } else if (take("chix")) {
        spec.family = Family::Chix;
        if (s.empty()) s = spec.dv ? "ijkl" : "ij";
    } else if (take("lkx")) {
        spec.family = Family::Lkx;
        if (s.empty()) s = spec.dv ? "ijkl" : "ij";
    } else if (take("ks")) {
        spec.family = Family::Ks;
        if (s.empty()) s = "i";
    } else {
        throw UsageError("unknown score '" + name + "'");
    }
    static const std::pair<const char*, Cond> conds[] = {
        {"m", Cond::M},   {"i", Cond::I},       {"iz", Cond::IZ},   {"mm", Cond::MM},
        {"ik", Cond::IK}, {"ikz", Cond::IKZ},   {"ij", Cond::IJ},   {"ijkl", Cond::IJKL},
    };
    bool found = false;
    for (auto& [txt, c] : conds)
        if (s == txt) {
            spec.cond = c;
            found = true;
        }
    if (!found) throw UsageError("score '" + name + "': unknown conditioning '" + s + "'");
    const bool ok = [&] {
        switch (spec.family) {
            case Family::Mom:
                if (spec.dv)
                    return spec.cond == Cond::M || spec.cond == Cond::I || spec.cond == Cond::IZ ||
                           spec.cond == Cond::MM || spec.cond == Cond::IK || spec.cond == Cond::IKZ;
                return spec.cond == Cond::M || spec.cond == Cond::I || spec.cond == Cond::IZ;
            case Family::Chix:
                if (spec.dv) return spec.cond == Cond::MM || spec.cond == Cond::IJKL;
                return spec.cond == Cond::M || spec.cond == Cond::IJ;
            case Family::Lkx:
                if (spec.dv) return spec.cond == Cond::IJKL;
                return spec.cond == Cond::M || spec.cond == Cond::IJ;
            case Family::Ks:
                return spec.cond == Cond::M || spec.cond == Cond::I;
        }
        return false;
    }();
    if (!ok) throw UsageError("score '" + name + "': conditioning not valid for this family");
    return spec;
}

inline std::string ScoreSpec::to_string() const {
    std::string s = dv ? "dv" : "";
    switch (family) {
        case Family::Mom: s += "mom" + std::to_string(order); break;
        case Family::Chix: s += "chix"; break;
        case Family::Lkx: s += "lkx"; break;
        case Family::Ks: s += "ks"; break;
    }
    switch (cond) {
        case Cond::M: s += "-m"; break;
        case Cond::I: s += "-i"; break;
        case Cond::IZ: s += "-iz"; break;
        case Cond::MM: s += "-mm"; break;
        case Cond::IK: s += "-ik"; break;
        case Cond::IKZ: s += "-ikz"; break;
        case Cond::IJ: s += "-ij"; break;
        case Cond::IJKL: s += "-ijkl"; break;
    }
    return s;
}

enum class Tail { Upper, TwoSided };

struct PValueEstimate {
    double score = kUndefined;  // observed aggregate
    double p = 1.0;
    double z = 0.0;  // observed aggregate against the permutation null
    int n_perms = 0;
    Tail tail = Tail::Upper;
    bool undetectable = false;
    std::vector<double> cell_z;  // per-cell Z values (iz / ikz aggregations)
};

namespace detail {

// Everything one replicate produces before aggregation.
struct Replicate {
    std::vector<double> cells;                    // per-cell raw values (NaN = empty)
    std::vector<std::vector<std::int64_t>> rows;  // KS only: conditional count rows
    double direct = kUndefined;                   // chix / lkx aggregate
};

// Rescans one column's sets under permutations of the target column and
// evaluates the configured score.
class ColumnScorer {
  public:
    ColumnScorer(const DataMatrix& dm, const PairwiseSummary& summary, const ScoreSpec& spec,
                 int column)
        : spec_(spec) {
        if (spec.dv) {
            if (!dm.has_dv()) throw ValidationError("score " + spec.to_string() + " needs a DV");
            target_ = dm.dv_index();
            if (column == target_)
                throw ValidationError("dv score: tested column is the DV itself");
            if (spec.hybrid())
                hybrid_.emplace(dm, summary, target_, column);
            else
                dvplain_.emplace(dm, summary, target_, column);
        } else {
            target_ = column;
            focal_.emplace(dm, summary, column);
        }
    }

    int target() const { return target_; }

    Replicate evaluate(std::span<const std::uint8_t> target_codes) const {
        Replicate rep;
        if (hybrid_) {
            HybridSets hs = hybrid_->sets_for(target_codes);
            switch (spec_.family) {
                case ScoreSpec::Family::Mom: {
                    auto ms = dv_mom(hs, spec_.order,
                                     spec_.cond == ScoreSpec::Cond::MM ? DvMomCond::MM
                                                                       : DvMomCond::IK);
                    rep.cells = std::move(ms.values);
                    break;
                }
                case ScoreSpec::Family::Chix:
                    rep.direct = dv_chix(hs, spec_.cond == ScoreSpec::Cond::MM
                                                 ? DvChixMode::MM
                                                 : DvChixMode::IJKL);
                    break;
                case ScoreSpec::Family::Lkx:
                    rep.direct = -dv_lkx(hs).log_lkx;
                    break;
                case ScoreSpec::Family::Ks:
                    throw UsageError("ks is not a hybrid score");
            }
            return rep;
        }
        ConditionalSets cs = focal_ ? focal_->sets_for(target_codes)
                                    : dvplain_->sets_for(target_codes);
        switch (spec_.family) {
            case ScoreSpec::Family::Mom: {
                auto ms = mom(cs, spec_.order,
                              spec_.cond == ScoreSpec::Cond::M ? MomCond::M : MomCond::PerMarker);
                rep.cells = std::move(ms.values);
                break;
            }
            case ScoreSpec::Family::Chix:
                rep.direct = chix(cs, spec_.cond == ScoreSpec::Cond::M ? ChixMode::M
                                                                       : ChixMode::IJ);
                break;
            case ScoreSpec::Family::Lkx:
                rep.direct = -lkx(cs, spec_.cond == ScoreSpec::Cond::M ? ChixMode::M
                                                                       : ChixMode::IJ)
                                  .log_lkx;
                break;
            case ScoreSpec::Family::Ks: {
                rep.rows = pooled_rows(cs, spec_.cond == ScoreSpec::Cond::M
                                               ? StatePool::Generic
                                               : StatePool::PerMarker);
                if (spec_.cond != ScoreSpec::Cond::M) rep.rows.pop_back();
                break;
            }
        }
        return rep;
    }

  private:
    ScoreSpec spec_;
    int target_ = -1;
    std::optional<FocalScan> focal_;
    std::optional<HybridScan> hybrid_;
    std::optional<DvPlainScan> dvplain_;
};

// Collapses replicate evaluations into per-replicate aggregates.  Index 0 is
// the observed arrangement; per-cell means/sds for Z-valuing and the pooled
// KS null c.d.f.s are taken over all replicates including it, which keeps
// the (observed, permuted) aggregates exchangeable under the null.
inline std::vector<double> aggregate_replicates(const ScoreSpec& spec,
                                                std::vector<Replicate>& reps,
                                                std::vector<double>* cell_z_out) {
    const std::size_t n = reps.size();
    std::vector<double> agg(n, kUndefined);
    if (spec.family == ScoreSpec::Family::Chix || spec.family == ScoreSpec::Family::Lkx) {
        for (std::size_t r = 0; r < n; ++r) agg[r] = reps[r].direct;
        return agg;
    }
    if (spec.family == ScoreSpec::Family::Ks) {
        const std::size_t groups = reps[0].rows.size();
        NullCdfs null;
        null.cdf.resize(groups);
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t bins = reps[0].rows[g].size();
            std::vector<double> pooled(bins, 0.0);
            double total = 0.0;
            for (auto& rep : reps)
                for (std::size_t m = 0; m < bins; ++m) {
                    pooled[m] += double(rep.rows[g][m]);
                    total += double(rep.rows[g][m]);
                }
            if (total > 0.0) {
                double acc = 0.0;
                null.cdf[g].resize(bins);
                for (std::size_t m = 0; m < bins; ++m) {
                    acc += pooled[m] / total;
                    null.cdf[g][m] = acc;
                }
            }
        }
        for (std::size_t r = 0; r < n; ++r) agg[r] = ks_rows(reps[r].rows, null);
        return agg;
    }
    // Moment scores: raw sum or Z-valued sum over cells.
    if (!spec.z_valued()) {
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            bool any = false;
            for (double v : reps[r].cells)
                if (!std::isnan(v)) {
                    s += v;
                    any = true;
                }
            agg[r] = any ? s : kUndefined;
        }
        return agg;
    }
    const std::size_t n_cells = reps[0].cells.size();
    std::vector<double> mean(n_cells, 0.0), sd(n_cells, 0.0);
    std::vector<std::size_t> defined(n_cells, 0);
    for (auto& rep : reps)
        for (std::size_t c = 0; c < n_cells; ++c)
            if (!std::isnan(rep.cells[c])) {
                mean[c] += rep.cells[c];
                ++defined[c];
            }
    for (std::size_t c = 0; c < n_cells; ++c)
        if (defined[c]) mean[c] /= double(defined[c]);
    for (auto& rep : reps)
        for (std::size_t c = 0; c < n_cells; ++c)
            if (!std::isnan(rep.cells[c])) {
                const double d = rep.cells[c] - mean[c];
                sd[c] += d * d;
            }
    for (std::size_t c = 0; c < n_cells; ++c)
        sd[c] = defined[c] > 1 ? std::sqrt(sd[c] / double(defined[c] - 1)) : 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        bool any = false;
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (std::isnan(reps[r].cells[c])) continue;
            any = true;
            if (sd[c] > 0.0) s += (reps[r].cells[c] - mean[c]) / sd[c];
        }
        agg[r] = any ? s : kUndefined;
        if (r == 0 && cell_z_out) {
            cell_z_out->assign(n_cells, 0.0);
            for (std::size_t c = 0; c < n_cells; ++c)
                if (!std::isnan(reps[0].cells[c]) && sd[c] > 0.0)
                    (*cell_z_out)[c] = (reps[0].cells[c] - mean[c]) / sd[c];
        }
    }
    return agg;
}

}  // namespace detail

// Permutation P value of one column's score.  The target column (the focal
// column, or the DV for dv scores) is permuted n_perms times with one
// sub-stream per replicate; the identity arrangement is never drawn as a
// replicate and the (1+k)/(1+N) smoothing accounts for it.
inline PValueEstimate permute_pvalue(const DataMatrix& dm, const PairwiseSummary& summary,
                                     const ScoreSpec& spec, int column, int n_perms, Tail tail,
                                     const RngStream& rng, unsigned threads = 1) {
    if (n_perms < 1) throw ValidationError("permute_pvalue: need at least one permutation");
    detail::ColumnScorer scorer(dm, summary, spec, column);
    const auto base_codes = dm.column_copy(scorer.target());
    std::vector<detail::Replicate> reps(std::size_t(n_perms) + 1);
    reps[0] = scorer.evaluate({base_codes.data(), base_codes.size()});
    parallel_for(std::size_t(n_perms), threads, [&](std::size_t r) {
        RngStream rs = rng.child(r + 1);
        std::vector<std::uint8_t> codes = base_codes;
        rs.shuffle(codes);
        reps[r + 1] = scorer.evaluate({codes.data(), codes.size()});
    });

    PValueEstimate est;
    est.n_perms = n_perms;
    est.tail = tail;
    std::vector<double> agg =
        detail::aggregate_replicates(spec, reps, spec.z_valued() ? &est.cell_z : nullptr);
    est.score = agg[0];
    if (std::isnan(est.score)) {
        est.undetectable = true;
        return est;
    }
    double pm = 0.0, psd = 0.0;
    int n_def = 0;
    for (int r = 1; r <= n_perms; ++r)
        if (!std::isnan(agg[r])) {
            pm += agg[r];
            ++n_def;
        }
    if (n_def == 0) {
        est.undetectable = true;
        return est;
    }
    pm /= double(n_def);
    for (int r = 1; r <= n_perms; ++r)
        if (!std::isnan(agg[r])) psd += (agg[r] - pm) * (agg[r] - pm);
    psd = n_def > 1 ? std::sqrt(psd / double(n_def - 1)) : 0.0;
    est.z = psd > 0.0 ? (est.score - pm) / psd : 0.0;

    // Exchangeable rank: for the two-sided tail, fold around the mean of all
    // replicates including the observed one.
    double center = 0.0;
    if (tail == Tail::TwoSided) {
        int n_all = 0;
        for (double a : agg)
            if (!std::isnan(a)) {
                center += a;
                ++n_all;
            }
        center /= double(n_all);
    }
    auto stat = [&](double a) { return tail == Tail::Upper ? a : std::fabs(a - center); };
    int hits = 0;
    const double obs = stat(agg[0]);
    for (int r = 1; r <= n_perms; ++r)
        if (!std::isnan(agg[r]) && stat(agg[r]) >= obs - 1e-12) ++hits;
    est.p = double(1 + hits) / double(1 + n_perms);
    return est;
}

// Per-test cutoff 1 - (1-alpha)^(1/n).
inline double sidak_cutoff(double alpha, int n_tests) {
    if (alpha <= 0.0 || alpha >= 1.0) throw ValidationError("sidak_cutoff: alpha in (0,1)");
    if (n_tests < 1) throw ValidationError("sidak_cutoff: n_tests >= 1");
    return -std::expm1(std::log1p(-alpha) / double(n_tests));
}

struct FisherResult {
    double statistic = 0.0;  // sum of -2 ln p_i
    double p = 1.0;          // chi-square upper tail, 2n d.f.
};

inline FisherResult fisher_combine(std::span<const double> pvals) {
    if (pvals.empty()) throw ValidationError("fisher_combine: no P values");
    FisherResult r;
    for (double p : pvals) {
        if (p <= 0.0 || p > 1.0) throw ValidationError("fisher_combine: P values must be in (0,1]");
        r.statistic += -2.0 * std::log(p);
    }
    r.p = chi2_sf(r.statistic, 2.0 * double(pvals.size()));
    return r;
}

struct MarginalChi2 {
    double chi2 = 0.0;
    double p = 1.0;
    int df = 0;
};

// Classical contingency chi-square of IV markers x DV categories.
inline MarginalChi2 marginal_chi2(const DataMatrix& dm, int dv, int iv) {
    const int S = dm.arity(iv);
    const int R = dm.rows();
    std::vector<std::int64_t> table(2 * S, 0), row_tot(2, 0), col_tot(S, 0);
    const std::uint8_t* dvc = dm.column(dv);
    const std::uint8_t* ivc = dm.column(iv);
    for (int r = 0; r < R; ++r) {
        ++table[dvc[r] * S + ivc[r]];
        ++row_tot[dvc[r]];
        ++col_tot[ivc[r]];
    }
    MarginalChi2 out;
    out.df = S - 1;
    for (int g = 0; g < 2; ++g)
        for (int s = 0; s < S; ++s) {
            const double e = double(row_tot[g]) * double(col_tot[s]) / double(R);
            if (e <= 0.0) continue;
            const double d = double(table[g * S + s]) - e;
            out.chi2 += d * d / e;
        }
    out.p = out.df > 0 ? chi2_sf(out.chi2, double(out.df)) : 1.0;
    return out;
}

struct ToggleRecord {
    int iv = -1;
    int category = 0;
    int from_marker = 0;
    int to_marker = 0;
    int count = 0;
};

struct ToggleLog {
    std::vector<ToggleRecord> records;
    int treated_ivs = 0;
};

// Erases marginal effects: at every IV whose marginal chi-square P value is
// no larger than the threshold, minimal numbers of randomly chosen
// excess-marker cells are toggled to deficit markers, per DV category, until
// the category counts match the pooled-frequency expectation within
// rounding.
inline std::pair<DataMatrix, ToggleLog> erase_marginals(const DataMatrix& dm, double p_threshold,
                                                        RngStream& rng) {
    if (!dm.has_dv()) throw ValidationError("erase_marginals: matrix has no DV");
    const int dv = dm.dv_index();
    const int R = dm.rows();
    DataMatrix out = dm;
    ToggleLog log;
    std::vector<std::vector<int>> cat_rows(2);
    const std::uint8_t* dvc = dm.column(dv);
    for (int r = 0; r < R; ++r) cat_rows[dvc[r]].push_back(r);

    for (int iv = 0; iv < dm.cols(); ++iv) {
        if (iv == dv) continue;
        if (marginal_chi2(dm, dv, iv).p > p_threshold) continue;
        ++log.treated_ivs;
        const int S = dm.arity(iv);
        std::vector<std::int64_t> pooled(S, 0);
        const std::uint8_t* col = dm.column(iv);
        for (int r = 0; r < R; ++r) ++pooled[col[r]];
        for (int cat = 0; cat < 2; ++cat) {
            RngStream cs = rng.child({std::uint64_t(iv), std::uint64_t(cat)});
            const auto& rows = cat_rows[cat];
            const int n = int(rows.size());
            // Largest-remainder apportionment of the pooled frequencies.
            std::vector<int> target(S, 0);
            std::vector<std::pair<double, int>> rem;
            int assigned = 0;
            for (int s = 0; s < S; ++s) {
                const double want = double(n) * double(pooled[s]) / double(R);
                target[s] = int(std::floor(want + 1e-9));
                assigned += target[s];
                rem.push_back({-(want - target[s]), s});
            }
            std::sort(rem.begin(), rem.end());
            for (int k = 0; k < n - assigned; ++k) ++target[rem[k].second];

            std::vector<int> count(S, 0);
            for (int r : rows) ++count[out.at(r, iv)];
            // Randomly chosen excess cells feed markers in deficit.
            std::vector<int> donors;
            for (int s = 0; s < S; ++s) {
                if (count[s] <= target[s]) continue;
                std::vector<int> holders;
                for (int r : rows)
                    if (out.at(r, iv) == s) holders.push_back(r);
                cs.shuffle(holders);
                for (int k = 0; k < count[s] - target[s]; ++k) donors.push_back(holders[k]);
            }
            cs.shuffle(donors);
            std::size_t next = 0;
            for (int s = 0; s < S && next < donors.size(); ++s) {
                std::vector<std::int64_t> per_from(S, 0);
                while (count[s] < target[s] && next < donors.size()) {
                    const int r = donors[next++];
                    const int from = out.at(r, iv);
                    out.at(r, iv) = std::uint8_t(s);
                    --count[from];
                    ++count[s];
                    ++per_from[from];
                }
                for (int f = 0; f < S; ++f)
                    if (per_from[f])
                        log.records.push_back({iv, cat, f, s, int(per_from[f])});
            }
        }
    }
    out.finalize(dv);
    return {out, log};
}

struct TuneResult {
    double threshold = 1.0;
    bool found = false;
    std::vector<std::pair<double, double>> diagnostics;  // (threshold, uniformity P)
};

inline std::vector<double> default_tune_grid() {
    return {0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0002, 0.0001};
}

// Adds n_added_random independent random IVs, erases marginal effects at a
// candidate threshold, and keeps the largest threshold whose added-IV
// P value c.d.f. passes a KS uniformity test at target_level across
// n_trials re-additions.  The grid is scanned from the largest value down
// because the passing region need not be one-sided.
inline TuneResult tune_erasure(const DataMatrix& dm, int n_added_random,
                               const FrequencyScheme& scheme, double target_level, int n_trials,
                               const ScoreSpec& spec, int n_perms, const RngStream& rng,
                               std::vector<double> grid = default_tune_grid(),
                               unsigned threads = 1) {
    if (!dm.has_dv()) throw ValidationError("tune_erasure: matrix has no DV");
    std::sort(grid.begin(), grid.end(), std::greater<>());
    TuneResult result;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double threshold = grid[gi];
        std::vector<double> pooled;
        for (int trial = 0; trial < n_trials; ++trial) {
            RngStream ts = rng.child({0xadd1ULL, std::uint64_t(trial)});
            DataMatrix work(dm.rows(), dm.cols() + n_added_random);
            for (int c = 0; c < dm.cols(); ++c)
                std::copy(dm.column(c), dm.column(c) + dm.rows(), work.column(c));
            for (int k = 0; k < n_added_random; ++k) {
                RngStream cs = ts.child(std::uint64_t(k));
                auto col = random_column(dm.rows(), scheme.column_freqs(k), cs);
                std::copy(col.begin(), col.end(), work.column(dm.cols() + k));
            }
            work.finalize(dm.dv_index());
            RngStream es = ts.child(0xe7a5eULL).child(std::uint64_t(gi));
            auto [erased, tlog] = erase_marginals(work, threshold, es);
            PairwiseSummary summary = total_matches(erased);
            std::vector<double> ps(n_added_random);
            parallel_for(std::size_t(n_added_random), threads, [&](std::size_t k) {
                ps[k] = permute_pvalue(erased, summary, spec, dm.cols() + int(k), n_perms,
                                       Tail::Upper, ts.child({0x9e95ULL, k}), 1)
                            .p;
            });
            pooled.insert(pooled.end(), ps.begin(), ps.end());
        }
        std::sort(pooled.begin(), pooled.end());
        const double ks_p = ks_test_uniform_pvalue(pooled);
        result.diagnostics.push_back({threshold, ks_p});
        if (ks_p > target_level) {
            result.threshold = threshold;
            result.found = true;
            return result;
        }
    }
    return result;
}

}  // namespace pas

#endif
