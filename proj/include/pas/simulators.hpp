// Model and structured-matrix generators for the type-I-error and power
// studies: pure n-way association sets, pure DV models, extended in/off
// phase 2-way models, randomly encountered model matrices, multinomial
// expansion, lateral embedding among random columns, haplotype-block
// matrices and their synthetic source sets.
#ifndef PAS_SIMULATORS_HPP
#define PAS_SIMULATORS_HPP

#include <set>
#include <unordered_map>

#include "pas/theory.hpp"

namespace pas {

struct ModelDM {
    enum class Kind { Columns, DvMarginal, DvNoMarginal, PureNway, PureDv, Extended2way };

    DataMatrix matrix;
    Kind kind = Kind::Columns;
    double cutoff = 1.0;           // retention P value at encounter time
    std::vector<double> pvalues;   // per tested column, encounter order
    FrequencyScheme scheme;
    std::uint64_t seed = 0;
    int attempts = 0;

    static const char* kind_name(Kind k) {
        switch (k) {
            case Kind::Columns: return "columns";
            case Kind::DvMarginal: return "dv-marginal";
            case Kind::DvNoMarginal: return "dv-nomarginal";
            case Kind::PureNway: return "pure-nway";
            case Kind::PureDv: return "pure-dv";
            case Kind::Extended2way: return "extended-2way";
        }
        return "?";
    }
    static Kind parse_kind(const std::string& s) {
        for (Kind k : {Kind::Columns, Kind::DvMarginal, Kind::DvNoMarginal, Kind::PureNway,
                       Kind::PureDv, Kind::Extended2way})
            if (s == kind_name(k)) return k;
        throw UsageError("unknown model kind '" + s + "'");
    }
};

// ---- fully specified models ----

// Rows: `copies` of every even-parity n-bit string; every proper-subset
// marginal table is exactly uniform.
inline ModelDM pure_nway(int n, int copies) {
    if (n < 2) throw ValidationError("pure_nway: n must be >= 2");
    if (n > 20) throw ResourceGuardError("pure_nway: n too large");
    ModelDM model;
    model.kind = ModelDM::Kind::PureNway;
    const int distinct = 1 << (n - 1);
    DataMatrix dm(distinct * copies, n);
    int r = 0;
    for (int x = 0; x < (1 << n); ++x) {
        if (std::popcount(unsigned(x)) & 1) continue;
        for (int k = 0; k < copies; ++k, ++r)
            for (int c = 0; c < n; ++c) dm.at(r, c) = std::uint8_t(x >> c & 1);
    }
    dm.finalize();
    model.matrix = std::move(dm);
    return model;
}

enum class PureDvMode { VsRandoms, VsControls };

// Affecteds carry the even-parity set; controls are either random markers or
// the odd-parity complement.  DV prepended (0 = affected), categories equal.
inline ModelDM pure_dv_model(int n, PureDvMode mode, int copies, RngStream& rng) {
    if (n < 2) throw ValidationError("pure_dv_model: n must be >= 2");
    if (n > 20) throw ResourceGuardError("pure_dv_model: n too large");
    const int half = (1 << (n - 1)) * copies;
    DataMatrix dm(2 * half, n + 1);
    int r = 0;
    for (int parity = 0; parity <= 1; ++parity) {
        if (parity == 1 && mode == PureDvMode::VsRandoms) break;
        for (int x = 0; x < (1 << n); ++x) {
            if ((std::popcount(unsigned(x)) & 1) != parity) continue;
            for (int k = 0; k < copies; ++k, ++r) {
                dm.at(r, 0) = std::uint8_t(parity);
                for (int c = 0; c < n; ++c) dm.at(r, c + 1) = std::uint8_t(x >> c & 1);
            }
        }
    }
    if (mode == PureDvMode::VsRandoms) {
        std::array<double, 2> half_half{0.5, 0.5};
        for (int c = 0; c < n; ++c) {
            RngStream cs = rng.child(std::uint64_t(c));
            auto col = random_column(half, half_half, cs);
            for (int k = 0; k < half; ++k) {
                dm.at(half + k, 0) = 1;
                dm.at(half + k, c + 1) = col[k];
            }
        }
    }
    dm.finalize(0);
    ModelDM model;
    model.kind = ModelDM::Kind::PureDv;
    model.matrix = std::move(dm);
    return model;
}

enum class ExtendedPhase { In, Off };

// Extended 2-way DV association over n_ivs columns.  In-phase: one shared
// row subset of affecteds carries whole-width constant runs (all-0 / all-1,
// plus all-2 in the trinary mode), split equally over the run types, on top
// of a balanced background.  Off-phase: the same per-pair boost drawn
// independently at each consecutive IV pair.  Controls reuse the affected
// per-column marker counts in random vertical order, so no marginal effects
// arise.
inline ModelDM extended_2way(int n_ivs, ExtendedPhase phase, double boost,
                             FrequencyScheme::ArityMode arity_mode, int base_rows,
                             RngStream& rng) {
    if (boost <= 0.0 || boost >= 1.0) throw ValidationError("extended_2way: boost in (0,1)");
    if (n_ivs < 2 || n_ivs % 2 != 0)
        throw ValidationError("extended_2way: n_ivs must be even and >= 2");
    if (base_rows % 2 != 0) throw ValidationError("extended_2way: base_rows must be even");
    const bool trinary = arity_mode == FrequencyScheme::ArityMode::TrinaryHW;
    const int run_types = trinary ? 3 : 2;
    const int half = base_rows / 2;
    int n_boost = int(std::lround(boost * half));
    n_boost -= n_boost % run_types;
    if (n_boost <= 0) throw ValidationError("extended_2way: boost too small for these rows");

    DataMatrix dm(base_rows, n_ivs + 1);
    auto draw_cell = [&](RngStream& rs) -> std::uint8_t {
        if (!trinary) return std::uint8_t(rs.next_below(2));
        const double u = rs.next_double();  // H&W of p = 0.5
        return u < 0.25 ? 0 : (u < 0.75 ? 1 : 2);
    };
    RngStream bg_rng = rng.child(1);
    if (phase == ExtendedPhase::In) {
        // Background on the first half-minus-boost rows: balanced exhaustive
        // combinations when they fit, random combinations otherwise; the
        // boost rows carry whole-width runs split over the run types.
        const int bg = half - n_boost;
        int r = 0;
        if (!trinary && n_ivs <= 24 && (1 << n_ivs) <= bg) {
            const int full = 1 << n_ivs;
            const int reps = bg / full;
            for (int rep = 0; rep < reps; ++rep)
                for (int x = 0; x < full; ++x, ++r)
                    for (int c = 0; c < n_ivs; ++c) dm.at(r, c + 1) = std::uint8_t(x >> c & 1);
        }
        for (; r < bg; ++r)
            for (int c = 0; c < n_ivs; ++c) dm.at(r, c + 1) = draw_cell(bg_rng);
        for (int k = 0; k < n_boost; ++k) {
            const std::uint8_t run = std::uint8_t(k % run_types);
            for (int c = 0; c < n_ivs; ++c) dm.at(bg + k, c + 1) = run;
        }
    } else {
        // Off-phase: full random background, then each consecutive IV pair
        // independently overwrites its own boosted row subset with runs.
        for (int r = 0; r < half; ++r)
            for (int c = 0; c < n_ivs; ++c) dm.at(r, c + 1) = draw_cell(bg_rng);
        for (int pair = 0; pair < n_ivs / 2; ++pair) {
            RngStream ps = rng.child({2, std::uint64_t(pair)});
            std::vector<int> rows(half);
            std::iota(rows.begin(), rows.end(), 0);
            ps.shuffle(rows);
            for (int k = 0; k < n_boost; ++k) {
                const std::uint8_t run = std::uint8_t(k % run_types);
                dm.at(rows[k], 2 * pair + 1) = run;
                dm.at(rows[k], 2 * pair + 2) = run;
            }
        }
    }
    // Controls: per IV the affected marker counts in fresh random order.
    for (int c = 0; c < n_ivs; ++c) {
        RngStream cs = rng.child({4, std::uint64_t(c)});
        std::vector<std::uint8_t> pool(dm.column(c + 1), dm.column(c + 1) + half);
        cs.shuffle(pool);
        for (int k = 0; k < half; ++k) dm.at(half + k, c + 1) = pool[k];
    }
    for (int r = 0; r < half; ++r) dm.at(r, 0) = 0;
    for (int r = half; r < base_rows; ++r) dm.at(r, 0) = 1;
    dm.finalize(0);
    ModelDM model;
    model.kind = ModelDM::Kind::Extended2way;
    model.matrix = std::move(dm);
    return model;
}

// ---- randomly encountered models ----

enum class EncounterKind { Columns, DvMarginal, DvNoMarginal };

// Repeatedly generates candidate matrices and keeps the first whose every
// column passes the reference permutation test at the cutoff: the overall
// chi-square is recomputed under vertical permutations of each tested column
// in turn.
inline ModelDM encounter_model(int rows, int cols, const FrequencyScheme& scheme, double cutoff,
                               EncounterKind kind, int perms, const RngStream& rng,
                               int max_attempts = 1000000, unsigned threads = 1) {
    if (cutoff <= 0.0 || cutoff > 1.0) throw ValidationError("encounter_model: cutoff in (0,1]");
    if (kind != EncounterKind::Columns && rows % 2 != 0)
        throw ValidationError("encounter_model: dv kinds need an even row count");

    auto build_candidate = [&](std::uint64_t attempt) {
        RngStream as = rng.child(attempt);
        if (kind == EncounterKind::Columns) return generate_null_dm(rows, cols, scheme, as);
        DataMatrix dm(rows, cols + 1);
        for (int r = 0; r < rows / 2; ++r) dm.at(r, 0) = 0;
        for (int r = rows / 2; r < rows; ++r) dm.at(r, 0) = 1;
        for (int c = 0; c < cols; ++c) {
            RngStream cs = as.child(std::uint64_t(c));
            auto freqs = scheme.column_freqs(c);
            if (kind == EncounterKind::DvMarginal) {
                auto col = random_column(rows, freqs, cs);
                std::copy(col.begin(), col.end(), dm.column(c + 1));
            } else {
                // One half-pool drawn once and dealt to both categories in
                // independent vertical orders: category marker counts are
                // identical by construction.
                auto half_pool = random_column(rows / 2, freqs, cs);
                std::vector<std::uint8_t> top = half_pool, bottom = half_pool;
                RngStream s1 = cs.child(1), s2 = cs.child(2);
                s1.shuffle(top);
                s2.shuffle(bottom);
                std::copy(top.begin(), top.end(), dm.column(c + 1));
                std::copy(bottom.begin(), bottom.end(), dm.column(c + 1) + rows / 2);
            }
        }
        dm.finalize(0);
        return dm;
    };

    auto test_candidate = [&](const DataMatrix& dm, std::uint64_t attempt,
                              std::vector<double>& ps) {
        OverallChi2 test(dm);
        RngStream as = rng.child(attempt);
        ps.clear();
        for (int c = 0; c < dm.cols(); ++c) {
            const double p = test.column_pvalue(c, perms, as.child({0xbeef, std::uint64_t(c)}));
            ps.push_back(p);
            if (p > cutoff) return false;
        }
        return true;
    };

    const int batch = std::max(1u, threads);
    for (int base = 0; base < max_attempts; base += batch) {
        const int n = std::min(batch, max_attempts - base);
        std::vector<int> hit(n, 0);
        std::vector<std::vector<double>> ps(n);
        parallel_for(std::size_t(n), threads, [&](std::size_t i) {
            DataMatrix dm = build_candidate(std::uint64_t(base + i));
            hit[i] = test_candidate(dm, std::uint64_t(base + i), ps[i]) ? 1 : 0;
        });
        for (int i = 0; i < n; ++i) {
            if (!hit[i]) continue;
            ModelDM model;
            model.kind = kind == EncounterKind::Columns
                             ? ModelDM::Kind::Columns
                             : (kind == EncounterKind::DvMarginal ? ModelDM::Kind::DvMarginal
                                                                  : ModelDM::Kind::DvNoMarginal);
            model.matrix = build_candidate(std::uint64_t(base + i));
            model.cutoff = cutoff;
            model.pvalues = ps[i];
            model.scheme = scheme;
            model.attempts = base + i + 1;
            return model;
        }
    }
    throw ResourceGuardError("encounter_model: no candidate retained within max_attempts");
}

// Multinomial expansion of the distinct row types, proportional to their
// model counts; per_category expands each DV category separately to
// target_rows/2 so the categories stay equally numerous.
inline DataMatrix expand_model(const ModelDM& model, int target_rows, bool per_category,
                               RngStream& rng) {
    const DataMatrix& src = model.matrix;
    if (per_category && !src.has_dv())
        throw ValidationError("expand_model: per-category expansion needs a DV");
    if (per_category && target_rows % 2 != 0)
        throw ValidationError("expand_model: per-category expansion needs even target rows");

    std::vector<std::vector<std::uint8_t>> emitted;
    auto expand_rows = [&](const std::vector<int>& rows, int target, RngStream& rs) {
        std::map<std::vector<std::uint8_t>, int> types;
        for (int r : rows) {
            std::vector<std::uint8_t> key(src.cols());
            for (int c = 0; c < src.cols(); ++c) key[c] = src.at(r, c);
            ++types[key];
        }
        std::vector<double> probs;
        for (auto& [k, cnt] : types) probs.push_back(double(cnt) / double(rows.size()));
        auto counts = multinomial_counts(std::uint64_t(target), probs, rs);
        std::size_t i = 0;
        for (auto& [k, cnt] : types) {
            for (std::uint64_t n = 0; n < counts[i]; ++n) emitted.push_back(k);
            ++i;
        }
    };

    if (!per_category) {
        std::vector<int> rows(src.rows());
        std::iota(rows.begin(), rows.end(), 0);
        expand_rows(rows, target_rows, rng);
    } else {
        for (int cat = 0; cat <= 1; ++cat) {
            std::vector<int> rows;
            for (int r = 0; r < src.rows(); ++r)
                if (src.at(r, src.dv_index()) == cat) rows.push_back(r);
            RngStream cs = rng.child(std::uint64_t(cat));
            expand_rows(rows, target_rows / 2, cs);
        }
    }
    DataMatrix out(int(emitted.size()), src.cols());
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out.at(r, c) = emitted[r][c];
    out.set_column_ids(src.column_ids());
    out.finalize();
    if (src.has_dv()) out.set_dv(src.dv_index());
    return out;
}

// Lateral embedding: model columns leftmost (DV first when present), then
// n_random_cols independent random columns generated for all DV categories
// pooled, which lets individual random columns show marginal effects.
inline DataMatrix embed(const DataMatrix& model_matrix, int n_random_cols,
                        const FrequencyScheme& scheme, RngStream& rng) {
    DataMatrix out(model_matrix.rows(), model_matrix.cols() + n_random_cols);
    std::vector<std::string> ids;
    for (int c = 0; c < model_matrix.cols(); ++c) {
        std::copy(model_matrix.column(c), model_matrix.column(c) + model_matrix.rows(),
                  out.column(c));
        ids.push_back(model_matrix.column_id(c));
    }
    for (int k = 0; k < n_random_cols; ++k) {
        RngStream cs = rng.child(std::uint64_t(k));
        auto col = random_column(model_matrix.rows(), scheme.column_freqs(k), cs);
        std::copy(col.begin(), col.end(), out.column(model_matrix.cols() + k));
        ids.push_back("r" + std::to_string(k));
    }
    out.set_column_ids(ids);
    out.finalize();
    if (model_matrix.has_dv()) out.set_dv(model_matrix.dv_index());
    return out;
}

// ---- haplotype-block machinery ----

struct BlockSourceSet {
    std::vector<std::vector<std::uint8_t>> sequences;  // equal length
    int arity = 2;
    std::vector<int> anchor_positions;  // candidate model positions
    std::vector<int> linked_positions;  // model-linked probe positions

    int length() const { return sequences.empty() ? 0 : int(sequences.front().size()); }
    void validate() const {
        if (sequences.empty()) throw ValidationError("block source set: no sequences");
        for (auto& s : sequences) {
            if (int(s.size()) != length()) throw ValidationError("block source set: ragged");
            for (auto v : s)
                if (v >= arity) throw ValidationError("block source set: marker out of arity");
        }
    }
};

// Positions the studies use for 100-marker sources, scaled proportionally to
// other lengths.
inline std::vector<int> scale_positions(std::initializer_list<int> one_based_100, int length) {
    std::vector<int> out;
    for (int p : one_based_100) {
        int scaled = int(std::lround(double(p) * double(length) / 100.0)) - 1;
        scaled = std::clamp(scaled, 0, length - 1);
        if (out.empty() || out.back() != scaled) out.push_back(scaled);
    }
    return out;
}
inline std::vector<int> default_anchor_positions(int length) {
    return scale_positions({5, 35, 49, 66}, length);
}
inline std::vector<int> default_linked_positions(int length) {
    return scale_positions({1, 22, 50, 63, 88}, length);
}

// One guided anchor: rows of `guide_col` in the guide matrix dictate the
// marker sampled at `anchor_index` of this block.
struct AnchorGuide {
    int block = 0;
    int anchor_index = 0;  // index into source.anchor_positions
    int guide_col = 0;     // column of the guide matrix
};

// Block matrix: per block `rows` sequences sampled with replacement from the
// source; guided blocks are rejection-sampled so their anchor markers match
// the guide rows and keep the guide's row alignment, unguided blocks are
// shuffled vertically.  If a requested anchor combination is absent from the
// source, the nearest sequence by Hamming distance is cloned and minimally
// edited; a marker absent from an anchor position altogether is an error.
inline DataMatrix block_dm(const BlockSourceSet& source, int n_blocks, int rows,
                           const DataMatrix* guide, std::span<const AnchorGuide> guides,
                           RngStream& rng, const std::vector<std::uint8_t>* dv_column = nullptr) {
    source.validate();
    if (rows < 2) throw ValidationError("block_dm: rows must be >= 2");
    const int blen = source.length();
    const int dv_off = dv_column ? 1 : 0;
    DataMatrix out(rows, dv_off + n_blocks * blen);
    if (dv_column) {
        if (int(dv_column->size()) != rows) throw ValidationError("block_dm: DV length mismatch");
        std::copy(dv_column->begin(), dv_column->end(), out.column(0));
    }

    // Guides grouped per block.
    std::vector<std::vector<AnchorGuide>> per_block(n_blocks);
    for (const auto& g : guides) {
        if (g.block < 0 || g.block >= n_blocks) throw ValidationError("block_dm: bad guide block");
        if (g.anchor_index < 0 || g.anchor_index >= int(source.anchor_positions.size()))
            throw ValidationError("block_dm: bad anchor index");
        per_block[g.block].push_back(g);
    }

    for (int b = 0; b < n_blocks; ++b) {
        RngStream bs = rng.child(std::uint64_t(b));
        const auto& bg = per_block[b];
        std::vector<std::vector<std::uint8_t>> work;  // local source incl. patches
        const auto& seqs = source.sequences;
        auto sample_plain = [&](RngStream& rs) -> const std::vector<std::uint8_t>& {
            return seqs[rs.next_below(seqs.size())];
        };
        if (bg.empty()) {
            for (int r = 0; r < rows; ++r) {
                const auto& s = sample_plain(bs);
                for (int c = 0; c < blen; ++c) out.at(r, dv_off + b * blen + c) = s[c];
            }
            // independent vertical shuffle of the block rows
            std::vector<int> order(rows);
            std::iota(order.begin(), order.end(), 0);
            bs.shuffle(order);
            std::vector<std::uint8_t> tmp(rows);
            for (int c = 0; c < blen; ++c) {
                std::uint8_t* col = out.column(dv_off + b * blen + c);
                for (int r = 0; r < rows; ++r) tmp[r] = col[order[r]];
                std::copy(tmp.begin(), tmp.end(), col);
            }
            continue;
        }
        // Guided: per-marker availability check, then rejection sampling.
        for (const auto& g : bg) {
            const int pos = source.anchor_positions[g.anchor_index];
            std::set<int> present;
            for (auto& s : seqs) present.insert(s[pos]);
            for (int r = 0; r < rows; ++r) {
                const int want = guide->at(r, g.guide_col);
                if (!present.count(want))
                    throw ValidationError("block_dm: guide marker absent from source at anchor");
            }
        }
        auto matches = [&](const std::vector<std::uint8_t>& s, int r) {
            for (const auto& g : bg)
                if (s[source.anchor_positions[g.anchor_index]] != guide->at(r, g.guide_col))
                    return false;
            return true;
        };
        for (int r = 0; r < rows; ++r) {
            const std::vector<std::uint8_t>* chosen = nullptr;
            const std::size_t pool = seqs.size() + work.size();
            const std::size_t max_tries = 64 * pool;
            for (std::size_t t = 0; t < max_tries; ++t) {
                const std::size_t i = bs.next_below(pool);
                const auto& s = i < seqs.size() ? seqs[i] : work[i - seqs.size()];
                if (matches(s, r)) {
                    chosen = &s;
                    break;
                }
            }
            if (!chosen) {
                // Requested combination absent: clone the nearest sequence at
                // the anchors and edit it minimally.
                std::size_t best = 0;
                int best_d = blen + 1;
                for (std::size_t i = 0; i < seqs.size(); ++i) {
                    int d = 0;
                    for (const auto& g : bg)
                        d += seqs[i][source.anchor_positions[g.anchor_index]] !=
                             guide->at(r, g.guide_col);
                    if (d < best_d) {
                        best_d = d;
                        best = i;
                    }
                }
                std::vector<std::uint8_t> patched = seqs[best];
                for (const auto& g : bg)
                    patched[source.anchor_positions[g.anchor_index]] =
                        std::uint8_t(guide->at(r, g.guide_col));
                work.push_back(std::move(patched));
                chosen = &work.back();
            }
            for (int c = 0; c < blen; ++c) out.at(r, dv_off + b * blen + c) = (*chosen)[c];
        }
    }
    out.finalize();
    if (dv_column) out.set_dv(0);
    return out;
}

// Trinary source from a binary one: every unordered cross pair of sequences
// (no self-pairs), position-wise code = sum of the two binary markers.
inline BlockSourceSet trinary_from_haplotypes(const BlockSourceSet& source) {
    source.validate();
    if (source.arity != 2)
        throw ValidationError("trinary_from_haplotypes: source must be binary");
    BlockSourceSet out;
    out.arity = 3;
    out.anchor_positions = source.anchor_positions;
    out.linked_positions = source.linked_positions;
    const auto& s = source.sequences;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            std::vector<std::uint8_t> t(s[i].size());
            for (std::size_t c = 0; c < t.size(); ++c) t[c] = std::uint8_t(s[i][c] + s[j][c]);
            out.sequences.push_back(std::move(t));
        }
    return out;
}

// Synthetic stand-in for a haplotype source set: Markov-correlated binary
// sequences with tunable neighbour association; retried until every 4-marker
// combination occurs at the anchor quartet.
inline BlockSourceSet synthetic_source(int n_sequences, int length, double block_correlation,
                                       RngStream& rng, int max_retries = 64) {
    if (block_correlation < 0.0 || block_correlation > 1.0)
        throw ValidationError("synthetic_source: correlation in [0,1]");
    if (n_sequences < 2 || length < 8) throw ValidationError("synthetic_source: too small");
    BlockSourceSet out;
    out.arity = 2;
    out.anchor_positions = default_anchor_positions(length);
    out.linked_positions = default_linked_positions(length);
    const bool need_quartet = block_correlation < 1.0 && n_sequences >= 16;
    for (int retry = 0; retry < max_retries; ++retry) {
        out.sequences.clear();
        RngStream ts = rng.child(std::uint64_t(retry));
        for (int i = 0; i < n_sequences; ++i) {
            RngStream ss = ts.child(std::uint64_t(i));
            std::vector<std::uint8_t> s(length);
            s[0] = std::uint8_t(ss.next_below(2));
            for (int c = 1; c < length; ++c)
                s[c] = ss.next_double() < block_correlation ? s[c - 1]
                                                            : std::uint8_t(ss.next_below(2));
            out.sequences.push_back(std::move(s));
        }
        if (!need_quartet) return out;
        std::set<int> combos;
        for (auto& s : out.sequences) {
            int key = 0;
            for (std::size_t a = 0; a < out.anchor_positions.size(); ++a)
                key |= int(s[out.anchor_positions[a]]) << a;
            combos.insert(key);
        }
        if (int(combos.size()) == (1 << int(out.anchor_positions.size()))) return out;
    }
    throw ValidationError("synthetic_source: anchor-diversity constraint unsatisfied");
}

// ---- model I/O: TSV plus a flat key=value sidecar ----

inline void save_model(const ModelDM& model, const std::string& path) {
    std::ofstream m(path);
    if (!m) throw ValidationError("cannot write model matrix '" + path + "'");
    save_dm(model.matrix, m, true);
    std::ofstream meta(path + ".meta");
    if (!meta) throw ValidationError("cannot write model sidecar '" + path + ".meta'");
    meta << "kind=" << ModelDM::kind_name(model.kind) << "\n";
    meta << "cutoff=" << model.cutoff << "\n";
    meta << "scheme=" << model.scheme.to_string() << "\n";
    meta << "seed=" << model.seed << "\n";
    meta << "attempts=" << model.attempts << "\n";
    meta << "dv_index=" << model.matrix.dv_index() << "\n";
    meta << "pvalues=";
    for (std::size_t i = 0; i < model.pvalues.size(); ++i)
        meta << (i ? "," : "") << model.pvalues[i];
    meta << "\n";
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("bad key=value line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline ModelDM load_model(const std::string& path) {
    ModelDM model;
    auto kv = read_kv_file(path + ".meta");
    model.kind = ModelDM::parse_kind(kv.at("kind"));
    model.cutoff = std::stod(kv.at("cutoff"));
    model.scheme = FrequencyScheme::parse(kv.at("scheme"));
    model.seed = std::stoull(kv.at("seed"));
    model.attempts = std::stoi(kv.at("attempts"));
    const int dv = std::stoi(kv.at("dv_index"));
    model.matrix = load_dm_file(path, dv >= 0 ? std::optional<std::string>(std::to_string(dv))
                                              : std::nullopt);
    if (auto it = kv.find("pvalues"); it != kv.end() && !it->second.empty()) {
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) model.pvalues.push_back(std::stod(tok));
    }
    return model;
}

}  // namespace pas

#endif
