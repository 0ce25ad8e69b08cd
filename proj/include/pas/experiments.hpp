// Desk-scale type-I-error and power harnesses: pooled P value c.d.f.s with
// uniformity checks, Sidak family hit rates, 2-P-value products, and the
// detection-sample search (smallest row count at which the target fraction
// of the reference model columns reaches the P value cutoff).
#ifndef PAS_EXPERIMENTS_HPP
#define PAS_EXPERIMENTS_HPP

#include <functional>

#include "pas/simulators.hpp"

namespace pas {

struct CdfGroup {
    std::string label;
    std::vector<double> sorted_p;
    double ks_distance = 0.0;
    double ks_pvalue = 1.0;

    void finish() {
        std::sort(sorted_p.begin(), sorted_p.end());
        if (!sorted_p.empty()) {
            ks_distance = ks_distance_uniform(sorted_p);
            ks_pvalue = ks_test_uniform_pvalue(sorted_p);
        }
    }
};

struct CdfReport {
    std::vector<CdfGroup> groups;            // per tested column plus pooled
    std::vector<double> alphas;
    std::vector<double> family_hit_rate;     // Sidak family hits per alpha
    std::vector<double> sorted_products;     // 2-P-value products, pooled
    int replicates = 0;
    int family_size = 0;
};

struct Type1Config {
    int rows = 500;
    int cols = 50;
    FrequencyScheme scheme = FrequencyScheme::o12345();
    ScoreSpec spec;
    int n_targets = 10;  // first columns tested (IVs when a DV is present)
    int n_perms = 100;
    int replicates = 200;
    std::vector<double> alphas = {0.01, 0.05, 0.1, 0.2};
    unsigned threads = 1;
};

// Null matrices, one per replicate; a binary frequency-0.5 DV is prepended
// as column 0 whenever the score permutes a DV.
inline CdfReport type1_experiment(const Type1Config& cfg, const RngStream& rng) {
    const bool with_dv = cfg.spec.dv;
    CdfReport report;
    report.replicates = cfg.replicates;
    report.family_size = cfg.n_targets;
    report.alphas = cfg.alphas;
    std::vector<std::vector<double>> per_rep(cfg.replicates);
    parallel_for(std::size_t(cfg.replicates), cfg.threads, [&](std::size_t rep) {
        RngStream rs = rng.child(rep);
        DataMatrix dm;
        if (with_dv) {
            DataMatrix ivs = generate_null_dm(cfg.rows, cfg.cols, cfg.scheme, rs.child(1));
            dm = DataMatrix(cfg.rows, cfg.cols + 1);
            std::array<double, 2> hh{0.5, 0.5};
            RngStream ds = rs.child(2);
            auto dvcol = random_column(cfg.rows, hh, ds);
            std::copy(dvcol.begin(), dvcol.end(), dm.column(0));
            for (int c = 0; c < cfg.cols; ++c)
                std::copy(ivs.column(c), ivs.column(c) + cfg.rows, dm.column(c + 1));
            dm.finalize(0);
        } else {
            dm = generate_null_dm(cfg.rows, cfg.cols, cfg.scheme, rs.child(1));
        }
        PairwiseSummary summary = total_matches(dm);
        std::vector<double> ps;
        for (int k = 0; k < cfg.n_targets; ++k) {
            const int col = with_dv ? k + 1 : k;
            ps.push_back(permute_pvalue(dm, summary, cfg.spec, col, cfg.n_perms, Tail::Upper,
                                        rs.child({3, std::uint64_t(col)}), 1)
                             .p);
        }
        per_rep[rep] = std::move(ps);
    });
    report.groups.resize(cfg.n_targets + 1);
    for (int k = 0; k < cfg.n_targets; ++k) report.groups[k].label = "col" + std::to_string(k);
    report.groups.back().label = "pooled";
    for (auto& rep : per_rep)
        for (int k = 0; k < cfg.n_targets; ++k) {
            report.groups[k].sorted_p.push_back(rep[k]);
            report.groups.back().sorted_p.push_back(rep[k]);
        }
    for (auto& g : report.groups) g.finish();
    report.family_hit_rate.assign(cfg.alphas.size(), 0.0);
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        const double cutoff = sidak_cutoff(cfg.alphas[a], cfg.n_targets);
        int hits = 0;
        for (auto& rep : per_rep)
            if (*std::min_element(rep.begin(), rep.end()) <= cutoff + 1e-12) ++hits;
        report.family_hit_rate[a] = double(hits) / double(cfg.replicates);
    }
    const int np = std::min(cfg.n_targets, 5);
    for (auto& rep : per_rep)
        for (int i = 0; i < np; ++i)
            for (int j = i + 1; j < np; ++j)
                report.sorted_products.push_back(rep[i] * rep[j]);
    std::sort(report.sorted_products.begin(), report.sorted_products.end());
    return report;
}

struct PowerConfig {
    ScoreSpec spec;
    int n_perms = 100;
    int replicates = 200;            // minimum per probed row count
    double target_fraction = 0.6;
    double p_cutoff = 0.1;
    int row_min = 50;
    int row_max = 200000;
    std::vector<int> reference_cols;  // detection is pooled over these
    std::vector<int> fp_cols;         // false-positive probes
    unsigned threads = 1;
};

struct PowerProbe {
    int rows = 0;
    double fraction = 0.0;
    std::vector<double> fp_sorted;
};

struct PowerResult {
    bool found = false;
    int detection_rows = 0;
    std::vector<PowerProbe> curve;  // every probed row count, ascending
    std::vector<double> fp_sorted;  // false positives at the detection rows
};

// Detection fraction of the reference columns at one row count; the
// generator receives (rows, replicate stream) and must be deterministic in
// them.
inline PowerProbe power_probe(const std::function<DataMatrix(int, const RngStream&)>& make_dm,
                              const PowerConfig& cfg, int rows, const RngStream& rng) {
    std::vector<int> hits(cfg.replicates, 0), total(cfg.replicates, 0);
    std::vector<std::vector<double>> fps(cfg.replicates);
    parallel_for(std::size_t(cfg.replicates), cfg.threads, [&](std::size_t rep) {
        RngStream rs = rng.child({std::uint64_t(rows), rep});
        DataMatrix dm = make_dm(rows, rs.child(1));
        PairwiseSummary summary = total_matches(dm);
        for (int col : cfg.reference_cols) {
            auto est = permute_pvalue(dm, summary, cfg.spec, col, cfg.n_perms, Tail::Upper,
                                      rs.child({2, std::uint64_t(col)}), 1);
            ++total[rep];
            if (!est.undetectable && est.p <= cfg.p_cutoff + 1e-12) ++hits[rep];
        }
        for (int col : cfg.fp_cols)
            fps[rep].push_back(permute_pvalue(dm, summary, cfg.spec, col, cfg.n_perms,
                                              Tail::Upper, rs.child({2, std::uint64_t(col)}), 1)
                                   .p);
    });
    PowerProbe probe;
    probe.rows = rows;
    long h = 0, t = 0;
    for (int r = 0; r < cfg.replicates; ++r) {
        h += hits[r];
        t += total[r];
        probe.fp_sorted.insert(probe.fp_sorted.end(), fps[r].begin(), fps[r].end());
    }
    probe.fraction = t ? double(h) / double(t) : 0.0;
    std::sort(probe.fp_sorted.begin(), probe.fp_sorted.end());
    return probe;
}

// Bisection over a geometric row grid, then linear refinement, for the
// smallest probed row count whose detection fraction reaches the target.
inline PowerResult power_experiment(const std::function<DataMatrix(int, const RngStream&)>& make_dm,
                                    const PowerConfig& cfg, const RngStream& rng) {
    auto even = [](int r) { return r + (r & 1); };
    PowerResult result;
    std::map<int, PowerProbe> probes;
    auto probe_at = [&](int rows) -> const PowerProbe& {
        rows = even(std::clamp(rows, cfg.row_min, cfg.row_max));
        auto it = probes.find(rows);
        if (it == probes.end())
            it = probes.emplace(rows, power_probe(make_dm, cfg, rows, rng)).first;
        return it->second;
    };

    int lo = even(cfg.row_min);
    const PowerProbe* first = &probe_at(lo);
    int hi = lo;
    if (first->fraction < cfg.target_fraction) {
        bool bracketed = false;
        while (hi < cfg.row_max) {
            hi = even(std::min(cfg.row_max, hi * 2));
            if (probe_at(hi).fraction >= cfg.target_fraction) {
                bracketed = true;
                break;
            }
            lo = hi;
            if (hi == cfg.row_max) break;
        }
        if (!bracketed) {
            for (auto& [r, p] : probes) result.curve.push_back(p);
            return result;  // search bounds exhausted
        }
        // geometric bisection, then linear refinement to ~2% or 2 rows
        while (true) {
            const double ratio = double(hi) / double(lo);
            int mid;
            if (ratio > 1.3)
                mid = even(int(std::sqrt(double(lo) * double(hi))));
            else if (hi - lo > std::max(2, lo / 50))
                mid = even((lo + hi) / 2);
            else
                break;
            if (mid <= lo || mid >= hi) break;
            if (probe_at(mid).fraction >= cfg.target_fraction)
                hi = mid;
            else
                lo = mid;
        }
    }
    result.found = true;
    result.detection_rows = hi;
    result.fp_sorted = probe_at(hi).fp_sorted;
    for (auto& [r, p] : probes) result.curve.push_back(p);
    return result;
}

}  // namespace pas

#endif
