// Shared helpers for the unit and acceptance suites: the golden polynomial
// parser, the transcribed five-column reference matrix, and small stats
// oracles kept independent of the library implementation paths they check.
#ifndef PAS_TESTS_GOLDEN_UTIL_HPP
#define PAS_TESTS_GOLDEN_UTIL_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pas/matrix_core.hpp"
#include "pas/theory.hpp"

namespace pas_test {

using GoldenPoly = std::map<std::vector<int>, std::map<std::vector<int>, std::uint64_t>>;

// Parses lines like "Lik(003) = 3p3q6 + 9p4q5"; variables p,q[,r] map to
// marker counts (binary: p -> marker 1, q -> marker 0; trinary: p -> 2,
// q -> 1, r -> 0).  Exponent 1 may be implicit ("9pq8").
inline GoldenPoly parse_golden(const std::string& path, int S) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing golden file " + path);
    GoldenPoly out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto lp = line.find('('), rp = line.find(')');
        std::vector<int> vec;
        for (auto c : line.substr(lp + 1, rp - lp - 1)) vec.push_back(c - '0');
        auto& poly = out[vec];
        std::string rest = line.substr(line.find('=') + 1);
        std::stringstream terms(rest);
        std::string term;
        while (std::getline(terms, term, '+')) {
            std::uint64_t coeff = 0;
            std::size_t i = 0;
            while (i < term.size() && std::isspace(term[i])) ++i;
            std::size_t c0 = i;
            while (i < term.size() && std::isdigit(term[i])) ++i;
            coeff = c0 == i ? 1 : std::stoull(term.substr(c0, i - c0));
            int pe = 0, qe = 0, re = 0;
            while (i < term.size()) {
                char v = term[i];
                if (std::isspace(v)) {
                    ++i;
                    continue;
                }
                ++i;
                std::size_t e0 = i;
                while (i < term.size() && std::isdigit(term[i])) ++i;
                int e = e0 == i ? 1 : std::stoi(term.substr(e0, i - e0));
                if (v == 'p') pe = e;
                else if (v == 'q') qe = e;
                else if (v == 'r') re = e;
                else throw std::runtime_error("bad golden term: " + term);
            }
            std::vector<int> expo(S, 0);
            if (S == 2) {
                expo[0] = qe;
                expo[1] = pe;
            } else {
                expo[0] = re;
                expo[1] = qe;
                expo[2] = pe;
            }
            poly[expo] += coeff;
        }
    }
    return out;
}

inline GoldenPoly to_golden(const pas::VectorLikelihoodTable& t) {
    GoldenPoly g;
    for (auto& [vec, poly] : t.table)
        for (auto& [expo, coeff] : poly) g[vec][expo] = coeff;
    return g;
}

// The 200-row five-column reference matrix (binary DV plus four binary IVs);
// combination counts transcribed from the published table, DV first.
inline pas::DataMatrix fig3_matrix() {
    struct Row {
        int bits[5];
        int count;
    };
    // bits: DV, IV1..IV4; affected = 0.
    static const Row rows[] = {
        {{0, 0, 0, 0, 0}, 0},  {{0, 0, 0, 0, 1}, 0},  {{0, 0, 0, 1, 0}, 0},
        {{0, 0, 0, 1, 1}, 6},  {{0, 0, 1, 0, 0}, 0},  {{0, 0, 1, 0, 1}, 0},
        {{0, 0, 1, 1, 0}, 3},  {{0, 0, 1, 1, 1}, 1},  {{0, 1, 0, 0, 0}, 4},
        {{0, 1, 0, 0, 1}, 9},  {{0, 1, 0, 1, 0}, 18}, {{0, 1, 0, 1, 1}, 13},
        {{0, 1, 1, 0, 0}, 4},  {{0, 1, 1, 0, 1}, 3},  {{0, 1, 1, 1, 0}, 11},
        {{0, 1, 1, 1, 1}, 28}, {{1, 0, 0, 0, 0}, 0},  {{1, 0, 0, 0, 1}, 2},
        {{1, 0, 0, 1, 0}, 2},  {{1, 0, 0, 1, 1}, 0},  {{1, 0, 1, 0, 0}, 1},
        {{1, 0, 1, 0, 1}, 0},  {{1, 0, 1, 1, 0}, 0},  {{1, 0, 1, 1, 1}, 5},
        {{1, 1, 0, 0, 0}, 1},  {{1, 1, 0, 0, 1}, 7},  {{1, 1, 0, 1, 0}, 21},
        {{1, 1, 0, 1, 1}, 17}, {{1, 1, 1, 0, 0}, 2},  {{1, 1, 1, 0, 1}, 7},
        {{1, 1, 1, 1, 0}, 13}, {{1, 1, 1, 1, 1}, 22},
    };
    int total = 0;
    for (auto& r : rows) total += r.count;
    pas::DataMatrix dm(total, 5);
    int at = 0;
    for (auto& r : rows)
        for (int k = 0; k < r.count; ++k, ++at)
            for (int c = 0; c < 5; ++c) dm.at(at, c) = std::uint8_t(r.bits[c]);
    dm.set_column_ids({"dv", "iv1", "iv2", "iv3", "iv4"});
    dm.finalize(0);
    return dm;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < idx.size()) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * (double(i) + double(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    auto rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= double(rx.size());
    my /= double(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double pearson_r2(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(y.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return (sxy * sxy) / (sxx * syy);
}

}  // namespace pas_test

#endif
