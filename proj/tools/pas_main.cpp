// pas: scans data matrices of categorical markers for columns associated
// with other columns or with a dependent variable, with permutation P
// values; also bundles the simulation generators, the exact combinatorial
// reference tables, and the type-I / power harnesses.
//
// Exit codes: 0 ok, 1 usage, 2 data validation (and table diff mismatch),
// 3 resource guard.
#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "pas/experiments.hpp"

namespace {

using namespace pas;

// All floating output: 6 significant digits (half-even via the usual
// correctly rounded binary-to-decimal conversion).
std::string g6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::uint64_t resolve_seed(CLI::Option* opt, std::uint64_t seed) {
    if (opt->count() > 0) return seed;
    std::random_device rd;
    std::uint64_t s = (std::uint64_t(rd()) << 32) ^ rd();
    std::cerr << "seed " << s << "\n";
    return s;
}

struct OutStream {
    std::ofstream file;
    std::ostream* os = &std::cout;
    void open(const std::string& path) {
        if (path.empty() || path == "-") return;
        file.open(path);
        if (!file) throw ValidationError("cannot write output file '" + path + "'");
        os = &file;
    }
    template <class T>
    OutStream& operator<<(const T& v) {
        *os << v;
        return *this;
    }
};

std::vector<int> parse_columns(const std::string& list, const DataMatrix& dm) {
    std::vector<int> cols;
    if (list.empty()) {
        for (int c = 0; c < dm.cols(); ++c)
            if (c != dm.dv_index()) cols.push_back(c);
        return cols;
    }
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        bool named = false;
        for (int c = 0; c < dm.cols(); ++c)
            if (dm.column_id(c) == tok) {
                cols.push_back(c);
                named = true;
            }
        if (!named) {
            try {
                cols.push_back(std::stoi(tok));
            } catch (...) {
                throw ValidationError("unknown column '" + tok + "'");
            }
        }
    }
    for (int c : cols)
        if (c < 0 || c >= dm.cols()) throw ValidationError("column index out of range");
    return cols;
}

struct ScanRow {
    std::string column_id;
    std::string score;
    PValueEstimate est;
};

void run_scan(const DataMatrix& dm, const std::vector<ScoreSpec>& specs,
              const std::vector<int>& cols, int perms, Tail tail, std::uint64_t seed,
              unsigned threads, std::optional<double> sidak_alpha, bool combine_fisher,
              OutStream& out) {
    PairwiseSummary summary = total_matches(dm);
    RngStream root(seed);
    std::vector<ScanRow> rows(specs.size() * cols.size());
    // Parallel over columns; permutations of a shared DV reuse per-replicate
    // streams keyed only by the permuted column, so every IV sees the same
    // DV rearrangements.
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        const ScoreSpec& spec = specs[i / cols.size()];
        const int col = cols[i % cols.size()];
        const int target = spec.dv ? dm.dv_index() : col;
        RngStream rs = root.child({0x5ca9, std::uint64_t(target)});
        ScanRow row;
        row.column_id = dm.column_id(col);
        row.score = spec.to_string();
        row.est = permute_pvalue(dm, summary, spec, col, perms, tail, rs, 1);
        rows[i] = std::move(row);
    });
    out << "column_id\tscore\tvalue\tp\tz\tn_perms\tflag";
    if (sidak_alpha) out << "\tsidak_cutoff\tsidak_pass";
    out << "\n";
    const double cutoff = sidak_alpha ? sidak_cutoff(*sidak_alpha, int(cols.size())) : 0.0;
    for (auto& r : rows) {
        out << r.column_id << "\t" << r.score << "\t" << g6(r.est.score) << "\t" << g6(r.est.p)
            << "\t" << g6(r.est.z) << "\t" << r.est.n_perms << "\t"
            << (r.est.undetectable ? "undetectable" : "ok");
        if (sidak_alpha)
            out << "\t" << g6(cutoff) << "\t" << (r.est.p <= cutoff + 1e-12 ? "1" : "0");
        out << "\n";
    }
    if (combine_fisher && specs.size() > 1) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            std::vector<double> ps;
            for (std::size_t s = 0; s < specs.size(); ++s) {
                const auto& est = rows[s * cols.size() + k].est;
                if (!est.undetectable) ps.push_back(est.p);
            }
            if (ps.empty()) continue;
            auto fr = fisher_combine(ps);
            out << dm.column_id(cols[k]) << "\tfisher\t" << g6(fr.statistic) << "\t" << g6(fr.p)
                << "\t0\t0\tok";
            if (sidak_alpha) out << "\t\t";
            out << "\n";
        }
    }
}

int cmd_verify_diff(const std::string& name, const std::string& text, const std::string& dir) {
    std::ifstream in(dir + "/" + name + ".txt");
    if (!in) throw ValidationError("golden file missing: " + dir + "/" + name + ".txt");
    std::stringstream want;
    want << in.rdbuf();
    if (want.str() == text) return 0;
    std::istringstream a(text), b(want.str());
    std::string la, lb;
    int line = 0;
    while (true) {
        ++line;
        const bool ga = bool(std::getline(a, la));
        const bool gb = bool(std::getline(b, lb));
        if (!ga && !gb) break;
        if (la != lb || ga != gb) {
            std::cerr << name << ": first divergence at line " << line << "\n got: "
                      << (ga ? la : "<eof>") << "\nwant: " << (gb ? lb : "<eof>") << "\n";
            return 2;
        }
    }
    return 2;
}

std::string verify_prob_m(int L, int S, int n) {
    auto counts = uniform_match_counts(L, S, n);
    std::ostringstream os;
    os << "# prob-m L=" << L << " S=" << S << " n=" << n << "\n";
    os << "m\tcount\tfrequency\tprob_m_uniform\n";
    for (int m = 0; m <= L; ++m)
        os << m << "\t" << counts.counts[m] << "\t"
           << g6(double(counts.counts[m]) / double(counts.total)) << "\t"
           << g6(prob_m_uniform(L, S, n, m)) << "\n";
    os << "total\t" << counts.total << "\t1\t1\n";
    return os.str();
}

std::string verify_expr10(int L, double p) {
    auto dist = prob_m_binary_dist(L, p);
    std::vector<double> freqs = {p, 1.0 - p};
    auto binom = naive_binomial(L, freqs);
    std::ostringstream os;
    os << "# expr10 L=" << L << " p=" << g6(p) << "\n";
    os << "m\tprob\tbinomial\n";
    for (int m = 0; m <= L; ++m) os << m << "\t" << g6(dist.probs[m]) << "\t"
                                    << g6(binom.probs[m]) << "\n";
    os << "m1\t" << g6(dist.m1) << "\t" << g6(binom.m1) << "\n";
    os << "m2\t" << g6(dist.m2) << "\t" << g6(binom.m2) << "\n";
    return os.str();
}

std::string verify_formulas(int R, int L, int S) {
    auto table = brute_force_likelihoods(R, L, S);
    std::ostringstream os;
    os << "# formulas R=" << R << " L=" << L << " S=" << S << "\n";
    os << table.canonical_text();
    return os.str();
}

std::string verify_likmoments(int R, int L, int S, double p) {
    auto table = brute_force_likelihoods(R, L, S);
    std::vector<double> freqs;
    if (S == 2)
        freqs = {1.0 - p, p};
    else {
        const double q = 1.0 - p;
        freqs = {q * q, 2 * p * q, p * p};
    }
    auto mom = likelihood_moments(table, freqs);
    std::ostringstream os;
    os << "# likmoments R=" << R << " L=" << L << " S=" << S << " p=" << g6(p) << "\n";
    os << "m1\t" << g6(mom.m1) << "\nm2\t" << g6(mom.m2) << "\nvar_m1\t" << g6(mom.var_m1)
       << "\nvar_m2\t" << g6(mom.var_m2) << "\n";
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"participation-in-association scans over categorical data matrices"};
    app.require_subcommand(1);
    unsigned default_thr = default_threads();

    // ---- scan / dvscan ----
    struct ScanArgs {
        std::string input, out, scores, columns, dv, tail = "upper";
        int perms = 100;
        std::uint64_t seed = 0;
        unsigned threads = 0;
        double sidak = 0.0;
        std::string combine;
        int staged = 0;
        double erase_threshold = 0.001;
    };
    auto add_scan = [&](CLI::App* sc, ScanArgs& a, bool dvscan) {
        sc->add_option("input", a.input, "input matrix (TSV)")->required();
        sc->add_option("--score", a.scores, dvscan ? "comma list, e.g. dvmom2i,dvchix-ijkl"
                                                   : "comma list, e.g. mom1iz,chix-ij")
            ->required();
        sc->add_option("--columns", a.columns, "columns to test (names or indices; default all)");
        sc->add_option("--perms", a.perms, "permutation count")->capture_default_str();
        auto* seed_opt = sc->add_option("--seed", a.seed, "rng seed (64-bit)");
        sc->add_option("--threads", a.threads, "worker threads (default: cores)");
        sc->add_option("--tail", a.tail, "upper|two")->capture_default_str();
        sc->add_option("--sidak", a.sidak, "append the family cutoff at this alpha");
        sc->add_option("--combine", a.combine, "fisher: combined P per column across scores");
        if (dvscan) {
            sc->add_option("--dv", a.dv, "DV column (name or index)")->required();
            sc->add_option("--staged", a.staged, "staged scan up to this order");
            sc->add_option("--erase-threshold", a.erase_threshold,
                           "marginal-effect erasure P threshold for staged mode")
                ->capture_default_str();
        } else {
            sc->add_option("--dv", a.dv, "DV column (name or index)");
        }
        sc->add_option("--out", a.out, "output TSV (default stdout)");
        sc->set_config("--config");
        return seed_opt;
    };
    ScanArgs scan_args, dvscan_args;
    auto* scan_cmd = app.add_subcommand("scan", "score columns against all others");
    auto* scan_seed = add_scan(scan_cmd, scan_args, false);
    auto* dvscan_cmd = app.add_subcommand("dvscan", "score IVs against the DV");
    auto* dvscan_seed = add_scan(dvscan_cmd, dvscan_args, true);

    // ---- simulate ----
    struct SimArgs {
        std::string what, out, scheme = "b12345", mode = "vs_controls", phase = "in";
        int rows = 200, cols = 10, n = 2, copies = 1, blocks = 4, length = 100, sequences = 64;
        double boost = 0.1, correlation = 0.5;
        std::uint64_t seed = 0;
    } sim;
    auto* sim_cmd = app.add_subcommand("simulate", "generate matrices and source sets");
    sim_cmd->add_option("what", sim.what,
                        "null|pure-nway|pure-dv|extended2way|source|blocks")
        ->required();
    sim_cmd->add_option("--out", sim.out, "output path")->required();
    sim_cmd->add_option("--rows", sim.rows);
    sim_cmd->add_option("--cols", sim.cols);
    sim_cmd->add_option("--n", sim.n, "association order / IV count");
    sim_cmd->add_option("--copies", sim.copies);
    sim_cmd->add_option("--scheme", sim.scheme, "e.g. b12345 (binary) or t12345 (trinary HW)");
    sim_cmd->add_option("--mode", sim.mode, "pure-dv: vs_controls|vs_randoms");
    sim_cmd->add_option("--phase", sim.phase, "extended2way: in|off");
    sim_cmd->add_option("--boost", sim.boost);
    sim_cmd->add_option("--blocks", sim.blocks);
    sim_cmd->add_option("--length", sim.length);
    sim_cmd->add_option("--sequences", sim.sequences);
    sim_cmd->add_option("--correlation", sim.correlation);
    auto* sim_seed = sim_cmd->add_option("--seed", sim.seed);
    sim_cmd->set_config("--config");

    // ---- encounter ----
    struct EncArgs {
        std::string out, scheme = "b12345", kind = "columns";
        int rows = 100, cols = 5, perms = 200, max_attempts = 1000000;
        double cutoff = 0.01;
        std::uint64_t seed = 0;
        unsigned threads = 0;
    } enc;
    auto* enc_cmd = app.add_subcommand("encounter", "search for a random model matrix");
    enc_cmd->add_option("--out", enc.out)->required();
    enc_cmd->add_option("--rows", enc.rows);
    enc_cmd->add_option("--cols", enc.cols);
    enc_cmd->add_option("--scheme", enc.scheme);
    enc_cmd->add_option("--kind", enc.kind, "columns|dv-marginal|dv-nomarginal");
    enc_cmd->add_option("--cutoff", enc.cutoff);
    enc_cmd->add_option("--perms", enc.perms);
    enc_cmd->add_option("--max-attempts", enc.max_attempts);
    enc_cmd->add_option("--threads", enc.threads);
    auto* enc_seed = enc_cmd->add_option("--seed", enc.seed);
    enc_cmd->set_config("--config");

    // ---- erase ----
    struct EraseArgs {
        std::string input, out, log, dv;
        double threshold = 0.001;
        std::uint64_t seed = 0;
    } er;
    auto* erase_cmd = app.add_subcommand("erase", "toggle away marginal effects");
    erase_cmd->add_option("input", er.input)->required();
    erase_cmd->add_option("--dv", er.dv)->required();
    erase_cmd->add_option("--threshold", er.threshold)->capture_default_str();
    erase_cmd->add_option("--out", er.out)->required();
    erase_cmd->add_option("--log", er.log, "toggle log TSV");
    auto* erase_seed = erase_cmd->add_option("--seed", er.seed);
    erase_cmd->set_config("--config");

    // ---- tune ----
    struct TuneArgs {
        std::string input, dv, score = "dvmom2i", scheme = "b12345", out;
        int added = 100, trials = 10, perms = 100;
        double level = 0.01;
        std::uint64_t seed = 0;
        unsigned threads = 0;
    } tn;
    auto* tune_cmd = app.add_subcommand("tune", "tune the marginal-erasure threshold");
    tune_cmd->add_option("input", tn.input)->required();
    tune_cmd->add_option("--dv", tn.dv)->required();
    tune_cmd->add_option("--added", tn.added, "user-added random IVs");
    tune_cmd->add_option("--trials", tn.trials, "re-addition trials per threshold");
    tune_cmd->add_option("--score", tn.score);
    tune_cmd->add_option("--scheme", tn.scheme);
    tune_cmd->add_option("--perms", tn.perms);
    tune_cmd->add_option("--level", tn.level, "uniformity test level");
    tune_cmd->add_option("--threads", tn.threads);
    tune_cmd->add_option("--out", tn.out);
    auto* tune_seed = tune_cmd->add_option("--seed", tn.seed);
    tune_cmd->set_config("--config");

    // ---- verify ----
    struct VerifyArgs {
        std::string table, rl = "3x3", diff, out;
        int L = 5, S = 2, n = 1;
        double p = 0.2;
        bool trinary = false;
    } vf;
    auto* verify_cmd = app.add_subcommand("verify", "print the golden reference tables");
    verify_cmd->add_option("table", vf.table, "prob-m|expr10|formulas|likmoments")->required();
    verify_cmd->add_option("--L", vf.L);
    verify_cmd->add_option("--S", vf.S);
    verify_cmd->add_option("--n", vf.n);
    verify_cmd->add_option("--p", vf.p);
    verify_cmd->add_option("--rl", vf.rl, "RxL, e.g. 3x3 or 4x4");
    verify_cmd->add_flag("--trinary", vf.trinary);
    verify_cmd->add_option("--diff", vf.diff, "compare against this golden directory");
    verify_cmd->add_option("--out", vf.out);

    // ---- experiment ----
    struct ExpArgs {
        std::string type, out, scheme = "b12345", score = "mom1iz", model;
        int rows = 500, cols = 50, targets = 10, perms = 100, replicates = 200;
        int n = 2, copies = 1, randoms = 10, row_min = 50, row_max = 100000;
        double target_fraction = 0.6, cutoff = 0.1;
        std::string mode = "vs_controls";
        std::uint64_t seed = 0;
        unsigned threads = 0;
    } ex;
    auto* exp_cmd = app.add_subcommand("experiment", "type-I and power harnesses");
    exp_cmd->add_option("type", ex.type, "type1|power")->required();
    exp_cmd->add_option("--score", ex.score);
    exp_cmd->add_option("--rows", ex.rows);
    exp_cmd->add_option("--cols", ex.cols);
    exp_cmd->add_option("--targets", ex.targets);
    exp_cmd->add_option("--perms", ex.perms);
    exp_cmd->add_option("--replicates", ex.replicates);
    exp_cmd->add_option("--scheme", ex.scheme);
    exp_cmd->add_option("--model", ex.model, "power: model matrix path (with .meta sidecar)");
    exp_cmd->add_option("--n", ex.n, "power: pure model order when no --model");
    exp_cmd->add_option("--mode", ex.mode);
    exp_cmd->add_option("--randoms", ex.randoms, "power: random IVs added laterally");
    exp_cmd->add_option("--row-min", ex.row_min);
    exp_cmd->add_option("--row-max", ex.row_max);
    exp_cmd->add_option("--target-fraction", ex.target_fraction);
    exp_cmd->add_option("--cutoff", ex.cutoff);
    exp_cmd->add_option("--threads", ex.threads);
    exp_cmd->add_option("--out", ex.out);
    auto* exp_seed = exp_cmd->add_option("--seed", ex.seed);
    exp_cmd->set_config("--config");

    try {
        app.parse(argc, argv);

        if (scan_cmd->parsed() || dvscan_cmd->parsed()) {
            const bool dvmode = dvscan_cmd->parsed();
            ScanArgs& a = dvmode ? dvscan_args : scan_args;
            a.seed = resolve_seed(dvmode ? dvscan_seed : scan_seed, a.seed);
            const unsigned threads = a.threads ? a.threads : default_thr;
            DataMatrix dm = load_dm_file(a.input, a.dv.empty()
                                                      ? std::nullopt
                                                      : std::optional<std::string>(a.dv));
            std::vector<ScoreSpec> specs;
            std::stringstream ss(a.scores);
            std::string tok;
            while (std::getline(ss, tok, ',')) specs.push_back(ScoreSpec::parse(tok));
            for (auto& s : specs)
                if (s.dv && !dm.has_dv()) throw ValidationError("score needs --dv");
            const Tail tail = a.tail == "two" ? Tail::TwoSided : Tail::Upper;
            auto cols = parse_columns(a.columns, dm);
            OutStream out;
            out.open(a.out);
            RngStream root(a.seed);

            if (dvmode && a.staged > 0) {
                // Staged workflow: marginal effects first, erased above the
                // threshold, then one moment stage per order.
                DataMatrix work = dm;
                out << "stage\tcolumn_id\tscore\tvalue\tp\tz\tn_perms\tflag\n";
                std::map<int, std::vector<double>> per_iv_p;
                std::set<int> erased_ivs;
                for (int c : cols) {
                    auto mc = marginal_chi2(work, work.dv_index(), c);
                    out << "1\t" << work.column_id(c) << "\tmarginal-chi2\t" << g6(mc.chi2)
                        << "\t" << g6(mc.p) << "\t0\t0\t"
                        << (mc.p <= a.erase_threshold ? "erased-marginal" : "ok") << "\n";
                    per_iv_p[c].push_back(mc.p);
                    if (mc.p <= a.erase_threshold) erased_ivs.insert(c);
                }
                RngStream es = root.child(0xe5a5e);
                auto [erased, tlog] = erase_marginals(work, a.erase_threshold, es);
                work = std::move(erased);
                std::cerr << "stage 1: erased marginal effects at " << tlog.treated_ivs
                          << " IVs (threshold " << g6(a.erase_threshold) << ")\n";
                PairwiseSummary summary = total_matches(work);
                for (int stage = 2; stage <= a.staged; ++stage) {
                    std::vector<ScoreSpec> stage_specs = {
                        ScoreSpec::parse("dvmom" + std::to_string(stage) + "i")};
                    if (stage >= 2)
                        stage_specs.push_back(
                            ScoreSpec::parse("dvmom" + std::to_string(stage - 1) + "ik"));
                    for (auto& spec : stage_specs) {
                        std::vector<PValueEstimate> ests(cols.size());
                        parallel_for(cols.size(), threads, [&](std::size_t i) {
                            RngStream rs = root.child({0x57a6e, std::uint64_t(stage)});
                            ests[i] = permute_pvalue(work, summary, spec, cols[i], a.perms,
                                                     tail, rs, 1);
                        });
                        for (std::size_t i = 0; i < cols.size(); ++i) {
                            out << stage << "\t" << work.column_id(cols[i]) << "\t"
                                << spec.to_string() << "\t" << g6(ests[i].score) << "\t"
                                << g6(ests[i].p) << "\t" << g6(ests[i].z) << "\t" << a.perms
                                << "\t"
                                << (ests[i].undetectable
                                        ? "undetectable"
                                        : (erased_ivs.count(cols[i]) ? "erased-marginal" : "ok"))
                                << "\n";
                            if (!ests[i].undetectable) per_iv_p[cols[i]].push_back(ests[i].p);
                        }
                    }
                }
                for (int c : cols) {
                    auto fr = fisher_combine(per_iv_p[c]);
                    out << "combined\t" << work.column_id(c) << "\tfisher\t" << g6(fr.statistic)
                        << "\t" << g6(fr.p) << "\t0\t0\tok\n";
                }
                return 0;
            }

            run_scan(dm, specs, cols, a.perms, tail, a.seed, threads,
                     a.sidak > 0.0 ? std::optional<double>(a.sidak) : std::nullopt,
                     a.combine == "fisher", out);
            return 0;
        }

        if (sim_cmd->parsed()) {
            sim.seed = resolve_seed(sim_seed, sim.seed);
            RngStream rng(sim.seed);
            FrequencyScheme scheme = FrequencyScheme::parse(sim.scheme);
            auto write_matrix = [&](const DataMatrix& dm) {
                std::ofstream f(sim.out);
                if (!f) throw ValidationError("cannot write '" + sim.out + "'");
                save_dm(dm, f, true);
            };
            if (sim.what == "null") {
                write_matrix(generate_null_dm(sim.rows, sim.cols, scheme, rng));
            } else if (sim.what == "pure-nway") {
                ModelDM m = pure_nway(sim.n, sim.copies);
                m.seed = sim.seed;
                m.scheme = scheme;
                save_model(m, sim.out);
            } else if (sim.what == "pure-dv") {
                ModelDM m = pure_dv_model(sim.n,
                                          sim.mode == "vs_randoms" ? PureDvMode::VsRandoms
                                                                   : PureDvMode::VsControls,
                                          sim.copies, rng);
                m.seed = sim.seed;
                m.scheme = scheme;
                save_model(m, sim.out);
            } else if (sim.what == "extended2way") {
                ModelDM m = extended_2way(sim.n,
                                          sim.phase == "off" ? ExtendedPhase::Off
                                                             : ExtendedPhase::In,
                                          sim.boost, scheme.mode, sim.rows, rng);
                m.seed = sim.seed;
                m.scheme = scheme;
                save_model(m, sim.out);
            } else if (sim.what == "source") {
                auto src = synthetic_source(sim.sequences, sim.length, sim.correlation, rng);
                std::ofstream f(sim.out);
                if (!f) throw ValidationError("cannot write '" + sim.out + "'");
                for (auto& s : src.sequences) {
                    for (auto v : s) f << char('0' + v);
                    f << "\n";
                }
            } else if (sim.what == "blocks") {
                auto src = synthetic_source(sim.sequences, sim.length, sim.correlation,
                                            rng);
                RngStream bs = rng.child(17);
                DataMatrix dm = block_dm(src, sim.blocks, sim.rows, nullptr, {}, bs);
                write_matrix(dm);
            } else {
                throw UsageError("unknown simulate target '" + sim.what + "'");
            }
            return 0;
        }

        if (enc_cmd->parsed()) {
            enc.seed = resolve_seed(enc_seed, enc.seed);
            RngStream rng(enc.seed);
            EncounterKind kind = enc.kind == "columns"
                                     ? EncounterKind::Columns
                                     : (enc.kind == "dv-marginal" ? EncounterKind::DvMarginal
                                                                  : EncounterKind::DvNoMarginal);
            if (enc.kind != "columns" && enc.kind != "dv-marginal" && enc.kind != "dv-nomarginal")
                throw UsageError("unknown encounter kind '" + enc.kind + "'");
            ModelDM m = encounter_model(enc.rows, enc.cols, FrequencyScheme::parse(enc.scheme),
                                        enc.cutoff, kind, enc.perms, rng, enc.max_attempts,
                                        enc.threads ? enc.threads : default_thr);
            m.seed = enc.seed;
            save_model(m, enc.out);
            std::cerr << "retained after " << m.attempts << " attempts\n";
            return 0;
        }

        if (erase_cmd->parsed()) {
            er.seed = resolve_seed(erase_seed, er.seed);
            DataMatrix dm = load_dm_file(er.input, er.dv);
            RngStream rng(er.seed);
            auto [out_dm, log] = erase_marginals(dm, er.threshold, rng);
            std::ofstream f(er.out);
            if (!f) throw ValidationError("cannot write '" + er.out + "'");
            save_dm(out_dm, f, true);
            if (!er.log.empty()) {
                std::ofstream lf(er.log);
                lf << "iv\tcategory\tfrom\tto\tcount\n";
                for (auto& rec : log.records)
                    lf << rec.iv << "\t" << rec.category << "\t" << rec.from_marker << "\t"
                       << rec.to_marker << "\t" << rec.count << "\n";
            }
            std::cerr << "treated " << log.treated_ivs << " IVs\n";
            return 0;
        }

        if (tune_cmd->parsed()) {
            tn.seed = resolve_seed(tune_seed, tn.seed);
            DataMatrix dm = load_dm_file(tn.input, tn.dv);
            RngStream rng(tn.seed);
            auto res = tune_erasure(dm, tn.added, FrequencyScheme::parse(tn.scheme), tn.level,
                                    tn.trials, ScoreSpec::parse(tn.score), tn.perms, rng,
                                    default_tune_grid(), tn.threads ? tn.threads : default_thr);
            OutStream out;
            out.open(tn.out);
            out << "threshold\tuniformity_p\tchosen\n";
            for (auto& [thr, kp] : res.diagnostics)
                out << g6(thr) << "\t" << g6(kp) << "\t"
                    << (res.found && thr == res.threshold ? "1" : "0") << "\n";
            if (!res.found) {
                std::cerr << "no threshold passed the uniformity test\n";
                return 2;
            }
            return 0;
        }

        if (verify_cmd->parsed()) {
            auto parse_rl = [&](const std::string& rl) {
                auto x = rl.find('x');
                if (x == std::string::npos) throw UsageError("--rl wants RxL, e.g. 3x3");
                return std::pair<int, int>{std::stoi(rl.substr(0, x)),
                                           std::stoi(rl.substr(x + 1))};
            };
            std::string name, text;
            if (vf.table == "prob-m") {
                name = "prob-m_L" + std::to_string(vf.L) + "_S" + std::to_string(vf.S) + "_n" +
                       std::to_string(vf.n);
                text = verify_prob_m(vf.L, vf.S, vf.n);
            } else if (vf.table == "expr10") {
                name = "expr10_L" + std::to_string(vf.L);
                text = verify_expr10(vf.L, vf.p);
            } else if (vf.table == "formulas") {
                auto [R, L] = parse_rl(vf.rl);
                const int S = vf.trinary ? 3 : 2;
                name = "formulas_" + vf.rl + (vf.trinary ? "_trinary" : "");
                text = verify_formulas(R, L, S);
            } else if (vf.table == "likmoments") {
                auto [R, L] = parse_rl(vf.rl);
                const int S = vf.trinary ? 3 : 2;
                name = "likmoments_" + vf.rl + (vf.trinary ? "_trinary" : "");
                text = verify_likmoments(R, L, S, vf.p);
            } else {
                throw UsageError("unknown verify table '" + vf.table + "'");
            }
            if (!vf.diff.empty()) return cmd_verify_diff(name, text, vf.diff);
            OutStream out;
            out.open(vf.out);
            out << text;
            return 0;
        }

        if (exp_cmd->parsed()) {
            ex.seed = resolve_seed(exp_seed, ex.seed);
            RngStream rng(ex.seed);
            const unsigned threads = ex.threads ? ex.threads : default_thr;
            FrequencyScheme scheme = FrequencyScheme::parse(ex.scheme);
            OutStream out;
            out.open(ex.out);
            if (ex.type == "type1") {
                Type1Config cfg;
                cfg.rows = ex.rows;
                cfg.cols = ex.cols;
                cfg.scheme = scheme;
                cfg.spec = ScoreSpec::parse(ex.score);
                cfg.n_targets = ex.targets;
                cfg.n_perms = ex.perms;
                cfg.replicates = ex.replicates;
                cfg.threads = threads;
                auto report = type1_experiment(cfg, rng);
                out << "group\tn\tks_distance\tks_pvalue\n";
                for (auto& g : report.groups)
                    out << g.label << "\t" << g.sorted_p.size() << "\t" << g6(g.ks_distance)
                        << "\t" << g6(g.ks_pvalue) << "\n";
                out << "alpha\tfamily_hit_rate\n";
                for (std::size_t a = 0; a < report.alphas.size(); ++a)
                    out << g6(report.alphas[a]) << "\t" << g6(report.family_hit_rate[a]) << "\n";
                return 0;
            }
            if (ex.type == "power") {
                PowerConfig cfg;
                cfg.spec = ScoreSpec::parse(ex.score);
                cfg.n_perms = ex.perms;
                cfg.replicates = ex.replicates;
                cfg.target_fraction = ex.target_fraction;
                cfg.p_cutoff = ex.cutoff;
                cfg.row_min = ex.row_min;
                cfg.row_max = ex.row_max;
                cfg.threads = threads;
                std::function<DataMatrix(int, const RngStream&)> make_dm;
                int model_cols = 0;
                bool has_dv = false;
                if (!ex.model.empty()) {
                    auto model = std::make_shared<ModelDM>(load_model(ex.model));
                    model_cols = model->matrix.cols();
                    has_dv = model->matrix.has_dv();
                    make_dm = [model, &scheme, randoms = ex.randoms](int rows,
                                                                     const RngStream& rs) {
                        RngStream r1 = rs.child(1), r2 = rs.child(2);
                        DataMatrix expanded =
                            expand_model(*model, rows, model->matrix.has_dv(), r1);
                        return embed(expanded, randoms, scheme, r2);
                    };
                } else {
                    has_dv = true;
                    model_cols = ex.n + 1;
                    const auto mode = ex.mode == "vs_randoms" ? PureDvMode::VsRandoms
                                                              : PureDvMode::VsControls;
                    make_dm = [n = ex.n, mode, &scheme, randoms = ex.randoms](
                                  int rows, const RngStream& rs) {
                        RngStream r0 = rs.child(0), r1 = rs.child(1), r2 = rs.child(2);
                        ModelDM base = pure_dv_model(n, mode, 1, r0);
                        DataMatrix expanded = expand_model(base, rows, true, r1);
                        return embed(expanded, randoms, scheme, r2);
                    };
                }
                const int first_iv = has_dv ? 1 : 0;
                cfg.reference_cols = {first_iv, first_iv + 1};
                for (int k = 0; k < std::min(5, ex.randoms); ++k)
                    cfg.fp_cols.push_back(model_cols + k);
                auto res = power_experiment(make_dm, cfg, rng);
                out << "rows\tfraction\n";
                for (auto& p : res.curve) out << p.rows << "\t" << g6(p.fraction) << "\n";
                out << "detection_rows\t" <<(res.found ? std::to_string(res.detection_rows)
                                                        : std::string("none"))
                    << "\n";
                if (res.found && !res.fp_sorted.empty())
                    out << "fp_le_cutoff\t"
                        << g6(double(std::upper_bound(res.fp_sorted.begin(), res.fp_sorted.end(),
                                                      cfg.p_cutoff + 1e-12) -
                                     res.fp_sorted.begin()) /
                              double(res.fp_sorted.size()))
                        << "\n";
                if (!res.found) return 3;
                return 0;
            }
            throw UsageError("unknown experiment type '" + ex.type + "'");
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ResourceGuardError& e) {
        std::cerr << "resource guard: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
