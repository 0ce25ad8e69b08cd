#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "golden_util.hpp"
#include "pas/pas_scores.hpp"

using namespace pas;
using namespace pas_test;

namespace {

DataMatrix identical_rows(int rows, int cols) {
    DataMatrix dm(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) dm.at(r, c) = std::uint8_t(c % 2);
    dm.finalize();
    return dm;
}

DataMatrix random_binary(int rows, int cols, double p, RngStream& rng) {
    DataMatrix dm(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) dm.at(r, c) = std::uint8_t(rng.next_double() < p);
    dm.finalize();
    return dm;
}

// Exact pairing probability of the observed joint counts by enumerating all
// W! permutations of the fragment multiset against the state list.
double pairing_probability(const std::vector<int>& states, const std::vector<int>& frags,
                           int n_states, int n_frags) {
    const std::size_t W = states.size();
    std::vector<std::int64_t> want(std::size_t(n_states) * n_frags, 0);
    for (std::size_t w = 0; w < W; ++w) ++want[states[w] * n_frags + frags[w]];
    std::vector<int> perm = frags;
    std::sort(perm.begin(), perm.end());
    std::int64_t hits = 0, total = 0;
    std::vector<std::int64_t> got(want.size());
    do {
        ++total;
        std::fill(got.begin(), got.end(), 0);
        for (std::size_t w = 0; w < W; ++w) ++got[states[w] * n_frags + perm[w]];
        if (got == want) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // next_permutation over the sorted multiset visits each distinct
    // arrangement exactly once, and all are equally likely under random
    // pairing, so the hit fraction is the probability.
    return double(hits) / double(total);
}

}  // namespace

TEST_CASE("moments: identical rows and hand-built independence") {
    DataMatrix dm = identical_rows(6, 10);
    PairwiseSummary s = total_matches(dm);
    ConditionalSets cs = conditional_sets(dm, s, 0);
    auto m1 = mom(cs, 1, MomCond::M);
    auto m2 = mom(cs, 2, MomCond::M);
    REQUIRE(m1.values[0] == Catch::Approx(9.0));
    REQUIRE(m2.values[0] == Catch::Approx(0.0));

    // joint equal to the outer product of margins: conditional moments all
    // equal the unconditional moment of m
    ConditionalSets ind;
    ind.focal = 0;
    ind.L = 4;
    ind.arity = 2;
    ind.n_states = 3;
    ind.W = 80;
    ind.joint = {
        2, 4, 6, 8,   //
        4, 8, 12, 16, //
        4, 8, 12, 16, //
    };
    ind.fill_margins();
    auto mm = mom(ind, 1, MomCond::M);
    double uncond = 0.0;
    for (int m = 0; m < 4; ++m) uncond += double(m) * double(ind.m_counts[m]);
    uncond /= double(ind.W);
    REQUIRE(mm.values[0] == Catch::Approx(uncond).epsilon(1e-12));
    auto mv = mom(ind, 2, MomCond::M);
    double unvar = 0.0;
    for (int m = 0; m < 4; ++m)
        unvar += (m - uncond) * (m - uncond) * double(ind.m_counts[m]);
    unvar /= double(ind.W);
    REQUIRE(mv.values[0] == Catch::Approx(unvar).epsilon(1e-12));

    REQUIRE(chix(ind, ChixMode::M) == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(chix(ind, ChixMode::IJ) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("a strong pairwise association lifts the conditional mean") {
    // Two columns in perfect association among 100: the associated column's
    // Mom1-M exceeds the ranks of random columns.
    RngStream rng(12);
    int wins = 0;
    const int trials = 60;
    for (int t = 0; t < trials; ++t) {
        RngStream ts = rng.child(std::uint64_t(t));
        DataMatrix dm = random_binary(120, 30, 0.5, ts);
        for (int r = 0; r < dm.rows(); ++r) dm.at(r, 1) = dm.at(r, 0);
        dm.finalize();
        PairwiseSummary s = total_matches(dm);
        const double focal = mom(conditional_sets(dm, s, 0), 1, MomCond::M).values[0];
        bool best = true;
        for (int c = 2; c < dm.cols(); ++c)
            if (mom(conditional_sets(dm, s, c), 1, MomCond::M).values[0] >= focal) best = false;
        wins += best;
    }
    REQUIRE(wins >= trials * 3 / 4);
}

TEST_CASE("lkx on the six-row walkthrough reproduces the factorial arithmetic") {
    DataMatrix dm(6, 9);
    const int rows[6][9] = {
        {0, 1, 0, 1, 0, 1, 0, 0, 1}, {0, 0, 0, 0, 1, 0, 1, 1, 0},
        {1, 0, 0, 0, 1, 1, 0, 0, 1}, {1, 0, 1, 1, 1, 0, 0, 0, 1},
        {1, 1, 1, 1, 0, 1, 1, 1, 0}, {0, 1, 1, 0, 0, 0, 1, 1, 0},
    };
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 9; ++c) dm.at(r, c) = std::uint8_t(rows[r][c]);
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    ConditionalSets cs = conditional_sets(dm, s, 0);
    LkxBundle b = lkx(cs);
    // favorable 15!/(2!*3!); possible [15!/(3!3!9!)] * [15!/(3!3!2!3!3!)]
    auto lf = [](std::initializer_list<int> xs) {
        double t = 0.0;
        for (int x : xs) t += log_factorial(std::uint64_t(x));
        return t;
    };
    const double favorable = log_factorial(15) - lf({2, 3});
    const double possible =
        (log_factorial(15) - lf({3, 3, 9})) + (log_factorial(15) - lf({3, 3, 2, 3, 3, 1}));
    REQUIRE(b.log_lkx == Catch::Approx(favorable - possible).epsilon(1e-12));
    REQUIRE(b.log_lkx <= 0.0);
    REQUIRE(b.log_lkm <= b.log_maxlkm + 1e-12);
    REQUIRE(b.log_maxlkm <= 1e-12);
}

TEST_CASE("lkx collapses to probability one for a monomorphic focal column") {
    DataMatrix dm(8, 5);
    RngStream rng(3);
    for (int c = 1; c < 5; ++c)
        for (int r = 0; r < 8; ++r) dm.at(r, c) = std::uint8_t(rng.next_below(2));
    for (int r = 0; r < 8; ++r) dm.at(r, 0) = 0;
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    LkxBundle b = lkx(conditional_sets(dm, s, 0));
    REQUIRE(b.log_lkx == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("exp(log lkx) equals the exact pairing probability (enumeration)") {
    // all 4-row 3-column binary matrices
    for (int bits = 0; bits < (1 << 12); ++bits) {
        DataMatrix dm(4, 3);
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 4; ++r) dm.at(r, c) = std::uint8_t(bits >> (c * 4 + r) & 1);
        dm.finalize();
        PairwiseSummary s = total_matches(dm);
        ConditionalSets cs = conditional_sets(dm, s, 0);
        // states and fragments per pair
        PairStateTable tbl(dm.arity(0));
        std::vector<int> states, frags;
        std::size_t w = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b, ++w) {
                states.push_back(tbl.state(dm.at(a, 0), dm.at(b, 0)));
                frags.push_back(s.total_matches[w] - (dm.at(a, 0) == dm.at(b, 0) ? 1 : 0));
            }
        const double exact = pairing_probability(states, frags, tbl.n_states, 3);
        REQUIRE(std::exp(lkx(cs).log_lkx) == Catch::Approx(exact).margin(1e-10));
    }
}

TEST_CASE("chix-ij and the pairing likelihood rank permutations almost identically") {
    RngStream rng(9);
    DataMatrix dm = random_binary(120, 25, 0.4, rng);
    PairwiseSummary s = total_matches(dm);
    FocalScan scan(dm, s, 0);
    auto codes = dm.column_copy(0);
    std::vector<double> chis, negs;
    for (int k = 0; k < 1000; ++k) {
        RngStream rs = rng.child({7, std::uint64_t(k)});
        std::vector<std::uint8_t> c = codes;
        rs.shuffle(c);
        ConditionalSets cs = scan.sets_for({c.data(), c.size()});
        chis.push_back(chix(cs, ChixMode::IJ));
        negs.push_back(-lkx(cs).log_lkx);
    }
    REQUIRE(spearman(chis, negs) > 0.99);
}

TEST_CASE("chix becomes chi-square distributed under PM-level state shuffles") {
    RngStream rng(40);
    DataMatrix dm = random_binary(300, 40, 0.5, rng);
    PairwiseSummary s = total_matches(dm);
    ConditionalSets base = conditional_sets(dm, s, 0);
    // materialize per-pair (state, m) and shuffle states within the PM
    PairStateTable tbl(2);
    std::vector<int> states, ms;
    std::size_t w = 0;
    for (int a = 0; a < dm.rows(); ++a)
        for (int b = a + 1; b < dm.rows(); ++b, ++w) {
            states.push_back(tbl.state(dm.at(a, 0), dm.at(b, 0)));
            ms.push_back(s.total_matches[w] - (dm.at(a, 0) == dm.at(b, 0) ? 1 : 0));
        }
    int m_support = 0;
    for (int m = 0; m < base.L; ++m) m_support += base.m_counts[m] > 0;
    const double df = double((2 - 1) * (m_support - 1));  // generic states
    std::vector<double> vals;
    RngStream sh(41);
    for (int k = 0; k < 1000; ++k) {
        sh.shuffle(states);
        ConditionalSets cs;
        cs.focal = 0;
        cs.L = base.L;
        cs.arity = 2;
        cs.n_states = 3;
        cs.W = states.size();
        cs.joint.assign(std::size_t(3) * base.L, 0);
        for (std::size_t i = 0; i < states.size(); ++i)
            ++cs.joint[std::size_t(states[i]) * base.L + ms[i]];
        cs.fill_margins();
        vals.push_back(chix(cs, ChixMode::M));
    }
    std::sort(vals.begin(), vals.end());
    const double ks_p = ks_test_pvalue(vals, [&](double x) { return 1.0 - chi2_sf(x, df); });
    REQUIRE(ks_p > 0.01);
}

TEST_CASE("per-marker moments for i=0 and i=1 are exchangeable at p = 0.5") {
    RngStream rng(60);
    std::vector<double> v0, v1;
    for (int t = 0; t < 200; ++t) {
        RngStream ts = rng.child(std::uint64_t(t));
        DataMatrix dm = random_binary(60, 12, 0.5, ts);
        PairwiseSummary s = total_matches(dm);
        auto ms = mom(conditional_sets(dm, s, 0), 1, MomCond::PerMarker);
        if (!std::isnan(ms.values[0])) v0.push_back(ms.values[0]);
        if (!std::isnan(ms.values[1])) v1.push_back(ms.values[1]);
    }
    // two-sample KS
    std::sort(v0.begin(), v0.end());
    std::sort(v1.begin(), v1.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < v0.size() && j < v1.size()) {
        if (v0[i] <= v1[j]) ++i;
        else ++j;
        d = std::max(d, std::fabs(double(i) / v0.size() - double(j) / v1.size()));
    }
    const double ne = double(v0.size()) * v1.size() / double(v0.size() + v1.size());
    REQUIRE(kolmogorov_sf((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d) > 0.01);
}

TEST_CASE("ks score: zero at the null c.d.f., one per state for an extreme shift") {
    ConditionalSets cs;
    cs.focal = 0;
    cs.L = 3;
    cs.arity = 2;
    cs.n_states = 3;
    cs.W = 12;
    cs.joint = {
        0, 4, 0,  //
        0, 4, 0,  //
        0, 4, 0,  //
    };
    cs.fill_margins();
    NullCdfs null;
    null.cdf = {{0.0, 1.0, 1.0}, {0.0, 1.0, 1.0}};
    REQUIRE(ks(cs, null, MomCond::M) == Catch::Approx(0.0));

    NullCdfs atom;  // null concentrated one unit below the observed
    atom.cdf = {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
    REQUIRE(ks(cs, atom, MomCond::M) == Catch::Approx(2.0));

    NullCdfs missing;
    missing.cdf = {{0.0, 1.0, 1.0}, {}};
    REQUIRE_THROWS_AS(ks(cs, missing, MomCond::M), ValidationError);
}

TEST_CASE("meePAS: a perfect partner is the argmax exclusion; constants do nothing") {
    RngStream rng(70);
    DataMatrix dm = random_binary(200, 10, 0.5, rng);
    for (int r = 0; r < dm.rows(); ++r) {
        dm.at(r, 1) = dm.at(r, 0);  // perfect pair at columns 0 and 1
        dm.at(r, 9) = 1;            // constant column
    }
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    auto mee = mee_pas(dm, s, 1);
    REQUIRE(mee[0].arg_col == 1);
    REQUIRE(mee[1].arg_col == 0);
    REQUIRE(mee[0].delta < 0.0);
    // excluding the constant column must not move any conditional excess
    for (int f = 0; f < 9; ++f) REQUIRE(mee[f].arg_col != 9);
}

TEST_CASE("meePAS: pure 4-way columns carry the largest third-moment deltas") {
    // desk-scaled width: 4 pure columns + 96 random, 4000 rows
    RngStream rng(71);
    const int R = 4000, L = 100;
    DataMatrix dm(R, L);
    for (int r = 0; r < R; ++r) {
        int x;
        RngStream rr = rng.child({1, std::uint64_t(r)});
        do {
            x = int(rr.next_below(16));
        } while (std::popcount(unsigned(x)) & 1);
        for (int c = 0; c < 4; ++c) dm.at(r, c) = std::uint8_t(x >> c & 1);
    }
    for (int c = 4; c < L; ++c) {
        RngStream cs = rng.child({2, std::uint64_t(c)});
        for (int r = 0; r < R; ++r) dm.at(r, c) = std::uint8_t(cs.next_below(2));
    }
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    auto mee = mee_pas(dm, s, 3);
    std::vector<double> mags(L);
    for (int c = 0; c < L; ++c) mags[c] = std::fabs(mee[c].delta);
    std::vector<int> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return mags[a] > mags[b]; });
    std::vector<int> top(order.begin(), order.begin() + 4);
    std::sort(top.begin(), top.end());
    REQUIRE(top == std::vector<int>({0, 1, 2, 3}));
    // and each pure column's extreme exclusion is one of its companions
    for (int c = 0; c < 4; ++c) REQUIRE(mee[c].arg_col < 4);
}
