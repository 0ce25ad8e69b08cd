#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "golden_util.hpp"

namespace {

std::string cli() {
    const char* p = std::getenv("PAS_CLI");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args, const std::string& out_file = "cli_out.txt") {
    const std::string cmd = cli() + " " + args + " > " + out_file + " 2> cli_err.txt";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_fig3(const std::string& path) {
    std::ofstream out(path);
    pas::save_dm(pas_test::fig3_matrix(), out, true);
}

}  // namespace

TEST_CASE("cli: fixed seeds give byte-identical output across runs and thread counts") {
    REQUIRE(run("simulate null --rows 120 --cols 12 --scheme b12345 --seed 5 --out cli_null.tsv") ==
            0);
    REQUIRE(run("scan cli_null.tsv --score mom1iz,chix-ij --perms 50 --seed 7 --threads 1",
                "cli_a.txt") == 0);
    REQUIRE(run("scan cli_null.tsv --score mom1iz,chix-ij --perms 50 --seed 7 --threads 8",
                "cli_b.txt") == 0);
    REQUIRE(run("scan cli_null.tsv --score mom1iz,chix-ij --perms 50 --seed 7 --threads 2",
                "cli_c.txt") == 0);
    const std::string a = slurp("cli_a.txt");
    REQUIRE(a == slurp("cli_b.txt"));
    REQUIRE(a == slurp("cli_c.txt"));
    REQUIRE(a.find("column_id\tscore\tvalue\tp\tz") == 0);
}

TEST_CASE("cli: single-column scan emits one data row") {
    REQUIRE(run("simulate null --rows 60 --cols 6 --seed 2 --out cli_small.tsv") == 0);
    REQUIRE(run("scan cli_small.tsv --score chix-ij --columns 0 --perms 30 --seed 1",
                "cli_one.txt") == 0);
    const std::string out = slurp("cli_one.txt");
    int lines = 0;
    for (char ch : out) lines += ch == '\n';
    REQUIRE(lines == 2);  // header + one row
}

TEST_CASE("cli: exit codes distinguish usage, validation, and guards") {
    REQUIRE(run("nonsense") == 1);
    REQUIRE(run("scan missing_file.tsv --score mom1i --seed 1") == 2);
    REQUIRE(run("verify formulas --rl 6x6") == 3);
    REQUIRE(run("scan cli_small.tsv --score banana --seed 1") == 1);
}

TEST_CASE("cli: dvscan flags the reference matrix IVs") {
    write_fig3("cli_fig3.tsv");
    REQUIRE(run("dvscan cli_fig3.tsv --dv dv --score dvchix-ijkl --perms 400 --seed 11",
                "cli_dv.txt") == 0);
    std::istringstream in(slurp("cli_dv.txt"));
    std::string line;
    std::getline(in, line);  // header
    int rows = 0, low = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::stringstream ls(line);
        std::string id, score, value, p;
        std::getline(ls, id, '\t');
        std::getline(ls, score, '\t');
        std::getline(ls, value, '\t');
        std::getline(ls, p, '\t');
        REQUIRE(std::stod(value) > 0.0);
        if (std::stod(p) <= 0.05) ++low;
    }
    REQUIRE(rows == 4);
    REQUIRE(low >= 3);  // all four published IV P values are at or under 0.012
}

TEST_CASE("cli: staged dvscan runs the erasure pipeline") {
    write_fig3("cli_fig3b.tsv");
    REQUIRE(run("dvscan cli_fig3b.tsv --dv 0 --score dvmom2i --staged 2 --perms 60 --seed 3 "
                "--erase-threshold 0.01",
                "cli_staged.txt") == 0);
    const std::string out = slurp("cli_staged.txt");
    REQUIRE(out.find("marginal-chi2") != std::string::npos);
    REQUIRE(out.find("dvmom2-i") != std::string::npos);
    REQUIRE(out.find("dvmom1-ik") != std::string::npos);
    REQUIRE(out.find("fisher") != std::string::npos);
}

TEST_CASE("cli: verify tables and the diff gate") {
    REQUIRE(run("verify prob-m --L 7 --S 2 --n 3", "cli_probm.txt") == 0);
    const std::string t = slurp("cli_probm.txt");
    REQUIRE(t.find("576") != std::string::npos);
    REQUIRE(t.find("73536") != std::string::npos);

    REQUIRE(run("verify expr10 --L 40 --p 0.2", "cli_expr.txt") == 0);
    REQUIRE(slurp("cli_expr.txt").find("m1\t27.2") != std::string::npos);

    // diff: match, then mismatch
    std::system("mkdir -p cli_golden");
    REQUIRE(run("verify prob-m --L 5 --S 2 --n 1 --out cli_golden/prob-m_L5_S2_n1.txt") == 0);
    REQUIRE(run("verify prob-m --L 5 --S 2 --n 1 --diff cli_golden") == 0);
    std::ofstream(std::string("cli_golden/prob-m_L5_S2_n1.txt"), std::ios::app) << "tamper\n";
    REQUIRE(run("verify prob-m --L 5 --S 2 --n 1 --diff cli_golden") == 2);
}

TEST_CASE("cli: encounter, erase, and experiment round trips") {
    REQUIRE(run("encounter --rows 60 --cols 3 --scheme b524 --cutoff 1.0 --kind dv-nomarginal "
                "--perms 20 --seed 21 --out cli_model.tsv") == 0);
    REQUIRE(run("experiment power --model cli_model.tsv --score dvmom2i --randoms 4 --perms 40 "
                "--replicates 20 --row-min 20 --row-max 4000 --seed 5 --threads 2",
                "cli_power.txt") == 0);
    REQUIRE(slurp("cli_power.txt").find("detection_rows") != std::string::npos);

    REQUIRE(run("experiment type1 --score chix-m --rows 60 --cols 8 --targets 3 --perms 30 "
                "--replicates 15 --seed 6 --threads 2",
                "cli_t1.txt") == 0);
    REQUIRE(slurp("cli_t1.txt").find("pooled") != std::string::npos);

    write_fig3("cli_fig3c.tsv");
    REQUIRE(run("erase cli_fig3c.tsv --dv 0 --threshold 0.05 --seed 9 --out cli_erased.tsv "
                "--log cli_toggle.txt") == 0);
    REQUIRE(run("scan cli_erased.tsv --score chix-ij --columns 1 --perms 20 --seed 1") == 0);
}
