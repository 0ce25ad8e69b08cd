#include <catch2/catch_amalgamated.hpp>

#include "golden_util.hpp"
#include "pas/inference.hpp"

using namespace pas;

TEST_CASE("score spec parsing") {
    auto a = ScoreSpec::parse("mom1iz");
    REQUIRE(a.family == ScoreSpec::Family::Mom);
    REQUIRE(a.order == 1);
    REQUIRE(a.cond == ScoreSpec::Cond::IZ);
    REQUIRE_FALSE(a.dv);
    REQUIRE(a.to_string() == "mom1-iz");

    auto b = ScoreSpec::parse("dvCHIx-ijkl");
    REQUIRE(b.family == ScoreSpec::Family::Chix);
    REQUIRE(b.dv);
    REQUIRE(b.cond == ScoreSpec::Cond::IJKL);

    auto c = ScoreSpec::parse("dvmom1ikz");
    REQUIRE(c.cond == ScoreSpec::Cond::IKZ);
    REQUIRE(ScoreSpec::parse("dvmom2").cond == ScoreSpec::Cond::I);
    REQUIRE(ScoreSpec::parse("ks-m").family == ScoreSpec::Family::Ks);
    REQUIRE(ScoreSpec::parse("dvks-i").dv);
    REQUIRE(ScoreSpec::parse("lkx").cond == ScoreSpec::Cond::IJ);

    REQUIRE_THROWS_AS(ScoreSpec::parse("mom"), UsageError);
    REQUIRE_THROWS_AS(ScoreSpec::parse("momX"), UsageError);
    REQUIRE_THROWS_AS(ScoreSpec::parse("chix-ik"), UsageError);
    REQUIRE_THROWS_AS(ScoreSpec::parse("dvlkx-m"), UsageError);
    REQUIRE_THROWS_AS(ScoreSpec::parse("banana"), UsageError);
}

TEST_CASE("sidak cutoffs") {
    REQUIRE(sidak_cutoff(0.1, 100) == Catch::Approx(0.001053).margin(1e-6));
    REQUIRE(sidak_cutoff(0.1, 1) == Catch::Approx(0.1).epsilon(1e-12));
    REQUIRE(sidak_cutoff(0.01, 10) == Catch::Approx(0.0010).margin(5e-5));
    REQUIRE(sidak_cutoff(0.05, 10) == Catch::Approx(0.0051).margin(5e-5));
    REQUIRE(sidak_cutoff(0.1, 10) == Catch::Approx(0.0105).margin(5e-5));
    REQUIRE(sidak_cutoff(0.2, 10) == Catch::Approx(0.0221).margin(5e-5));
    REQUIRE_THROWS_AS(sidak_cutoff(0.0, 10), ValidationError);
    REQUIRE_THROWS_AS(sidak_cutoff(0.1, 0), ValidationError);
}

TEST_CASE("sidak family error realized on independent uniforms") {
    RngStream rng(8);
    const int families = 10000, n = 12;
    const double alpha = 0.1;
    const double cutoff = sidak_cutoff(alpha, n);
    int hits = 0;
    for (int f = 0; f < families; ++f) {
        RngStream fs = rng.child(std::uint64_t(f));
        bool hit = false;
        for (int k = 0; k < n; ++k) hit = hit || fs.next_double() <= cutoff;
        hits += hit;
    }
    const double rate = double(hits) / families;
    REQUIRE(std::fabs(rate - alpha) <= 4.0 * std::sqrt(alpha * (1 - alpha) / families));
}

TEST_CASE("fisher combination") {
    std::vector<double> ones{1.0, 1.0, 1.0};
    auto r = fisher_combine(ones);
    REQUIRE(r.statistic == Catch::Approx(0.0));
    REQUIRE(r.p == Catch::Approx(1.0));

    // single p: the chi2_2 tail of -2 ln p is p itself
    for (double p : {0.8, 0.3, 0.01}) {
        std::vector<double> one{p};
        REQUIRE(fisher_combine(one).p == Catch::Approx(p).epsilon(1e-10));
    }

    std::vector<double> zero{0.5, 0.0};
    REQUIRE_THROWS_AS(fisher_combine(zero), ValidationError);

    // i.i.d. uniforms give a uniform combined P
    RngStream rng(9);
    std::vector<double> combined;
    for (int t = 0; t < 10000; ++t) {
        RngStream ts = rng.child(std::uint64_t(t));
        std::vector<double> ps(4);
        for (auto& p : ps) p = ts.next_double();
        combined.push_back(fisher_combine(ps).p);
    }
    std::sort(combined.begin(), combined.end());
    REQUIRE(ks_test_uniform_pvalue(combined) > 0.01);
}

TEST_CASE("marginal chi-square") {
    DataMatrix dm(100, 2);
    // 2x2 table (30,20 / 20,30)
    int at = 0;
    auto fill = [&](int dv, int iv, int n) {
        for (int k = 0; k < n; ++k, ++at) {
            dm.at(at, 0) = std::uint8_t(dv);
            dm.at(at, 1) = std::uint8_t(iv);
        }
    };
    fill(0, 0, 30);
    fill(0, 1, 20);
    fill(1, 0, 20);
    fill(1, 1, 30);
    dm.finalize(0);
    auto mc = marginal_chi2(dm, 0, 1);
    REQUIRE(mc.chi2 == Catch::Approx(4.0).epsilon(1e-12));
    REQUIRE(mc.df == 1);
    REQUIRE(mc.p == Catch::Approx(0.0455).margin(2e-4));

    // identical marker counts in both categories
    DataMatrix eq(40, 2);
    for (int r = 0; r < 40; ++r) {
        eq.at(r, 0) = std::uint8_t(r < 20 ? 0 : 1);
        eq.at(r, 1) = std::uint8_t(r % 2);
    }
    eq.finalize(0);
    auto me = marginal_chi2(eq, 0, 1);
    REQUIRE(me.chi2 == Catch::Approx(0.0));
    REQUIRE(me.p == Catch::Approx(1.0));
}

TEST_CASE("erase_marginals: the 60/40 example and the leave-alone rule") {
    DataMatrix dm(200, 3);
    for (int r = 0; r < 200; ++r) {
        const bool aff = r < 100;
        dm.at(r, 0) = std::uint8_t(aff ? 0 : 1);
        // IV1: affecteds 60 ones / 40 zeros, controls 40 / 60
        const int k = r % 100;
        dm.at(r, 1) = std::uint8_t(aff ? (k < 60) : (k < 40));
        // IV2: balanced
        dm.at(r, 2) = std::uint8_t(r % 2);
    }
    dm.finalize(0);
    REQUIRE(marginal_chi2(dm, 0, 1).p < 0.01);
    RngStream rng(13);
    auto [erased, log] = erase_marginals(dm, 0.019, rng);
    REQUIRE(log.treated_ivs == 1);
    // ten toggles per category at IV1
    std::int64_t toggles[2] = {0, 0};
    for (auto& rec : log.records) {
        REQUIRE(rec.iv == 1);
        toggles[rec.category] += rec.count;
    }
    REQUIRE(toggles[0] == 10);
    REQUIRE(toggles[1] == 10);
    auto post = marginal_chi2(erased, 0, 1);
    REQUIRE(post.chi2 == Catch::Approx(0.0).margin(1e-12));
    // untreated balanced IV untouched
    for (int r = 0; r < 200; ++r) REQUIRE(erased.at(r, 2) == dm.at(r, 2));
}

TEST_CASE("erase_marginals leaves every treated IV at or above the threshold") {
    RngStream rng(14);
    const FrequencyScheme scheme = FrequencyScheme::o12345();
    for (int t = 0; t < 10; ++t) {
        RngStream ts = rng.child(std::uint64_t(t));
        DataMatrix ivs = generate_null_dm(120, 8, scheme, ts);
        DataMatrix dm(120, 9);
        for (int r = 0; r < 120; ++r) dm.at(r, 0) = std::uint8_t(r < 60 ? 0 : 1);
        for (int c = 0; c < 8; ++c)
            std::copy(ivs.column(c), ivs.column(c) + 120, dm.column(c + 1));
        dm.finalize(0);
        RngStream es = ts.child(77);
        auto [erased, log] = erase_marginals(dm, 0.5, es);
        for (int c = 1; c < 9; ++c) {
            if (marginal_chi2(dm, 0, c).p > 0.5) continue;
            REQUIRE(marginal_chi2(erased, 0, c).p >= 0.5);
        }
    }
}

TEST_CASE("permutation P values: extremes and lattice") {
    // perfect pair: the model column's mom1 beats all 99 permutations
    RngStream rng(15);
    DataMatrix dm(160, 8);
    for (int c = 0; c < 8; ++c)
        for (int r = 0; r < 160; ++r) dm.at(r, c) = std::uint8_t(rng.next_below(2));
    for (int r = 0; r < 160; ++r) dm.at(r, 1) = dm.at(r, 0);
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    auto est = permute_pvalue(dm, s, ScoreSpec::parse("mom1i"), 0, 99, Tail::Upper,
                              RngStream(16), 1);
    REQUIRE(est.p == Catch::Approx(0.01).epsilon(1e-12));
    REQUIRE(est.z > 3.0);

    // p can never leave [1/(N+1), 1]
    auto worst = permute_pvalue(dm, s, ScoreSpec::parse("mom1i"), 5, 49, Tail::Upper,
                                RngStream(17), 1);
    REQUIRE(worst.p >= 1.0 / 50.0);
    REQUIRE(worst.p <= 1.0);
}

TEST_CASE("permutation P values are thread-count invariant") {
    RngStream rng(18);
    DataMatrix dm(100, 10);
    for (int c = 0; c < 10; ++c)
        for (int r = 0; r < 100; ++r) dm.at(r, c) = std::uint8_t(rng.next_below(3));
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    for (const char* name : {"mom1iz", "chix-ij", "ks-i", "lkx"}) {
        auto spec = ScoreSpec::parse(name);
        auto a = permute_pvalue(dm, s, spec, 2, 64, Tail::Upper, RngStream(19), 1);
        auto b = permute_pvalue(dm, s, spec, 2, 64, Tail::Upper, RngStream(19), 4);
        REQUIRE(a.p == b.p);
        REQUIRE(a.score == b.score);
        REQUIRE(a.z == b.z);
    }
}

TEST_CASE("null P values are uniform for iz aggregation and ks") {
    RngStream rng(20);
    const FrequencyScheme scheme = FrequencyScheme::o12345();
    std::vector<double> ps_iz, ps_ks;
    for (int t = 0; t < 300; ++t) {
        RngStream ts = rng.child(std::uint64_t(t));
        DataMatrix dm = generate_null_dm(80, 15, scheme, ts);
        PairwiseSummary s = total_matches(dm);
        ps_iz.push_back(permute_pvalue(dm, s, ScoreSpec::parse("mom1iz"), 4, 60, Tail::Upper,
                                       ts.child(1), 1)
                            .p);
        ps_ks.push_back(permute_pvalue(dm, s, ScoreSpec::parse("ks-m"), 9, 60, Tail::Upper,
                                       ts.child(2), 1)
                            .p);
    }
    std::sort(ps_iz.begin(), ps_iz.end());
    std::sort(ps_ks.begin(), ps_ks.end());
    REQUIRE(ks_test_uniform_pvalue(ps_iz) > 0.01);
    REQUIRE(ks_test_uniform_pvalue(ps_ks) > 0.01);
}

TEST_CASE("rank-based P values are invariant under monotone score transforms") {
    // chix-ij and the pairing likelihood produce near-identical P values on
    // the same permutation stream (identical up to rank ties)
    RngStream rng(21);
    DataMatrix dm(90, 12);
    for (int c = 0; c < 12; ++c)
        for (int r = 0; r < 90; ++r) dm.at(r, c) = std::uint8_t(rng.next_below(2));
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    auto a = permute_pvalue(dm, s, ScoreSpec::parse("chix-ij"), 3, 200, Tail::Upper,
                            RngStream(22), 1);
    auto b = permute_pvalue(dm, s, ScoreSpec::parse("lkx-ij"), 3, 200, Tail::Upper,
                            RngStream(22), 1);
    REQUIRE(std::fabs(a.p - b.p) <= 0.02);
}

TEST_CASE("undetectable scores are flagged") {
    // a focal column whose markers are all distinct never matches in any
    // pair, so every per-marker moment cell is empty
    DataMatrix dm(6, 3);
    RngStream rng(23);
    for (int r = 0; r < 6; ++r) {
        dm.at(r, 0) = std::uint8_t(r);
        dm.at(r, 1) = std::uint8_t(rng.next_below(2));
        dm.at(r, 2) = std::uint8_t(rng.next_below(2));
    }
    dm.finalize();
    PairwiseSummary s = total_matches(dm);
    auto est = permute_pvalue(dm, s, ScoreSpec::parse("mom1i"), 0, 50, Tail::Upper,
                              RngStream(24), 1);
    REQUIRE(est.undetectable);
}

TEST_CASE("tune_erasure returns the grid maximum when nothing needs erasing") {
    RngStream rng(25);
    const FrequencyScheme scheme = FrequencyScheme::o12345();
    // a null matrix with a balanced DV and no marginal effects anywhere
    DataMatrix ivs = generate_null_dm(200, 6, scheme, rng.child(0));
    DataMatrix dm(200, 7);
    for (int r = 0; r < 200; ++r) dm.at(r, 0) = std::uint8_t(r < 100 ? 0 : 1);
    for (int c = 0; c < 6; ++c) std::copy(ivs.column(c), ivs.column(c) + 200, dm.column(c + 1));
    dm.finalize(0);
    auto res = tune_erasure(dm, 20, scheme, 0.01, 4, ScoreSpec::parse("dvmom2i"), 60,
                            RngStream(26), default_tune_grid(), 2);
    REQUIRE(res.found);
    REQUIRE(res.threshold == Catch::Approx(default_tune_grid().front()));
}
