// Data matrices of categorical markers: storage, validation, TSV I/O, and
// the seeded generators for null matrices.
//
// A DataMatrix holds R rows and L columns of small-integer marker codes;
// column j uses codes 0..arity[j]-1.  One column may be designated as the
// binary dependent variable (DV).  Matrices are immutable in spirit: every
// transformation returns a new matrix.
#ifndef PAS_MATRIX_CORE_HPP
#define PAS_MATRIX_CORE_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pas/rng.hpp"

namespace pas {

// Exit-code-mapped error classes (CLI: 1 usage, 2 validation, 3 guard).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResourceGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class DataMatrix {
  public:
    DataMatrix() = default;
    DataMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int dv_index() const { return dv_; }
    bool has_dv() const { return dv_ >= 0; }

    std::uint8_t at(int r, int c) const { return data_[std::size_t(c) * rows_ + r]; }
    std::uint8_t& at(int r, int c) { return data_[std::size_t(c) * rows_ + r]; }

    const std::uint8_t* column(int c) const { return data_.data() + std::size_t(c) * rows_; }
    std::uint8_t* column(int c) { return data_.data() + std::size_t(c) * rows_; }
    std::vector<std::uint8_t> column_copy(int c) const {
        return {column(c), column(c) + rows_};
    }

    int arity(int c) const { return arities_[c]; }
    const std::vector<int>& arities() const { return arities_; }

    const std::string& column_id(int c) const { return ids_[c]; }
    const std::vector<std::string>& column_ids() const { return ids_; }
    void set_column_ids(std::vector<std::string> ids) { ids_ = std::move(ids); }

    // Recomputes per-column arity as 1 + max observed code and checks the
    // type invariants.  Call after any direct marker edit.
    void finalize(std::optional<int> dv = std::nullopt) {
        if (rows_ < 2) throw ValidationError("data matrix needs at least 2 rows");
        arities_.assign(cols_, 1);
        for (int c = 0; c < cols_; ++c) {
            int mx = 0;
            const std::uint8_t* col = column(c);
            for (int r = 0; r < rows_; ++r) mx = std::max<int>(mx, col[r]);
            arities_[c] = mx + 1;
        }
        if (ids_.size() != std::size_t(cols_)) {
            ids_.resize(cols_);
            for (int c = 0; c < cols_; ++c)
                if (ids_[c].empty()) ids_[c] = "c" + std::to_string(c);
        }
        if (dv) set_dv(*dv);
    }

    void set_dv(int dv) {
        if (dv < 0 || dv >= cols_) throw ValidationError("DV column index out of range");
        const std::uint8_t* col = column(dv);
        bool seen[2] = {false, false};
        for (int r = 0; r < rows_; ++r) {
            if (col[r] > 1) throw ValidationError("DV column must be binary (codes 0/1)");
            seen[col[r]] = true;
        }
        if (!seen[0] || !seen[1]) throw ValidationError("DV column must show both categories");
        dv_ = dv;
    }
    void clear_dv() { dv_ = -1; }

    // New matrix keeping the given columns, in order.
    DataMatrix select_columns(const std::vector<int>& cols) const {
        DataMatrix out(rows_, int(cols.size()));
        out.ids_.resize(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) {
            std::copy(column(cols[i]), column(cols[i]) + rows_, out.column(int(i)));
            out.ids_[i] = ids_.empty() ? "" : ids_[cols[i]];
        }
        out.finalize();
        return out;
    }

  private:
    int rows_ = 0, cols_ = 0;
    int dv_ = -1;
    std::vector<std::uint8_t> data_;  // column-major
    std::vector<int> arities_;
    std::vector<std::string> ids_;
};

// Marker-frequency scheme: an ordered list of tenths digits cycling over
// columns.  Digit d gives minor frequency d/10; trinary columns use the
// Hardy-Weinberg proportions p^2, 2pq, q^2 of that p.
struct FrequencyScheme {
    enum class ArityMode { Binary, TrinaryHW };

    std::vector<int> digits;
    ArityMode mode = ArityMode::Binary;

    FrequencyScheme() = default;
    FrequencyScheme(std::vector<int> d, ArityMode m) : digits(std::move(d)), mode(m) {
        for (int x : digits)
            if (x < 1 || x > 5)
                throw ValidationError("frequency-scheme digits must lie in 1..5");
        if (digits.empty()) throw ValidationError("frequency scheme needs at least one digit");
    }

    static FrequencyScheme o12345(ArityMode m = ArityMode::Binary) {
        return FrequencyScheme({1, 2, 3, 4, 5}, m);
    }

    double minor_freq(int column) const {
        return digits[std::size_t(column) % digits.size()] / 10.0;
    }

    // Marker frequencies for one column; binary: (1-p, p), trinary: HW of p.
    std::vector<double> column_freqs(int column) const {
        const double p = minor_freq(column);
        if (mode == ArityMode::Binary) return {1.0 - p, p};
        const double q = 1.0 - p;
        return {q * q, 2.0 * p * q, p * p};
    }

    std::string to_string() const {
        std::string s = mode == ArityMode::Binary ? "b" : "t";
        for (int d : digits) s += char('0' + d);
        return s;
    }
    static FrequencyScheme parse(const std::string& s) {
        if (s.size() < 2 || (s[0] != 'b' && s[0] != 't'))
            throw ValidationError("bad frequency scheme '" + s + "' (want e.g. b12345 or t12345)");
        std::vector<int> d;
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (s[i] < '1' || s[i] > '5')
                throw ValidationError("bad frequency-scheme digit in '" + s + "'");
            d.push_back(s[i] - '0');
        }
        return FrequencyScheme(d, s[0] == 'b' ? ArityMode::Binary : ArityMode::TrinaryHW);
    }
};

namespace detail {
inline bool parse_cell(const std::string& cell, long& out) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc{} && res.ptr == e;
}
}  // namespace detail

// Loads the TSV matrix format: one observation per row, base-10 non-negative
// integer cells, optional header row of column IDs (detected by any
// non-integer cell).  dv_designator selects the DV by name or index.
inline DataMatrix load_dm(std::istream& in, const std::optional<std::string>& dv_designator = {}) {
    std::vector<std::vector<std::uint8_t>> rows;
    std::vector<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t pos = 0;
        for (;;) {
            std::size_t tab = line.find('\t', pos);
            cells.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
            if (tab == std::string::npos) break;
            pos = tab + 1;
        }
        bool all_int = true;
        std::vector<std::uint8_t> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            long v = 0;
            if (!detail::parse_cell(cells[i], v)) {
                all_int = false;
                break;
            }
            if (v < 0)
                throw ValidationError("negative marker code at line " + std::to_string(line_no));
            if (v > 255)
                throw ValidationError("marker code exceeds 255 at line " + std::to_string(line_no));
            row[i] = std::uint8_t(v);
        }
        if (!all_int) {
            if (rows.empty() && ids.empty()) {
                ids = cells;
                continue;
            }
            throw ValidationError("malformed cell at line " + std::to_string(line_no));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError("ragged row at line " + std::to_string(line_no));
        if (!ids.empty() && row.size() != ids.size())
            throw ValidationError("row width does not match header at line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw ValidationError("matrix needs at least 2 data rows");
    DataMatrix dm(int(rows.size()), int(rows.front().size()));
    for (int r = 0; r < dm.rows(); ++r)
        for (int c = 0; c < dm.cols(); ++c) dm.at(r, c) = rows[r][c];
    if (!ids.empty()) dm.set_column_ids(ids);
    dm.finalize();
    if (dv_designator) {
        int dv = -1;
        long idx = 0;
        if (detail::parse_cell(*dv_designator, idx)) {
            dv = int(idx);
        } else {
            for (int c = 0; c < dm.cols(); ++c)
                if (dm.column_id(c) == *dv_designator) dv = c;
            if (dv < 0) throw ValidationError("DV column '" + *dv_designator + "' not found");
        }
        dm.set_dv(dv);
    }
    return dm;
}

inline DataMatrix load_dm_file(const std::string& path,
                               const std::optional<std::string>& dv_designator = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input matrix '" + path + "'");
    return load_dm(in, dv_designator);
}

inline void save_dm(const DataMatrix& dm, std::ostream& out, bool header = false) {
    if (header) {
        for (int c = 0; c < dm.cols(); ++c)
            out << (c ? "\t" : "") << dm.column_id(c);
        out << '\n';
    }
    for (int r = 0; r < dm.rows(); ++r) {
        for (int c = 0; c < dm.cols(); ++c)
            out << (c ? "\t" : "") << int(dm.at(r, c));
        out << '\n';
    }
}

// One column with marker frequencies as close as possible to `freqs`:
// floor(rows * f_s) copies of each marker are placed deterministically, the
// residual slots are assigned multinomially with renormalized residual
// probabilities, and the pool is then shuffled vertically.
inline std::vector<std::uint8_t> random_column(int rows, std::span<const double> freqs,
                                               RngStream& rng) {
    std::vector<std::uint8_t> pool;
    pool.reserve(rows);
    std::vector<double> residual(freqs.size());
    double res_total = 0.0;
    int placed = 0;
    for (std::size_t s = 0; s < freqs.size(); ++s) {
        int base = int(std::floor(double(rows) * freqs[s] + 1e-9));
        base = std::min(base, rows - placed);
        pool.insert(pool.end(), std::size_t(base), std::uint8_t(s));
        placed += base;
        residual[s] = double(rows) * freqs[s] - base;
        if (residual[s] < 0.0) residual[s] = 0.0;
        res_total += residual[s];
    }
    int slots = rows - placed;
    if (slots > 0) {
        if (res_total <= 0.0) {
            for (auto& x : residual) x = 1.0 / double(residual.size());
        } else {
            for (auto& x : residual) x /= res_total;
        }
        auto extra = multinomial_counts(std::uint64_t(slots), residual, rng);
        for (std::size_t s = 0; s < extra.size(); ++s)
            pool.insert(pool.end(), std::size_t(extra[s]), std::uint8_t(s));
    }
    rng.shuffle(pool);
    return pool;
}

// Null matrix: columns mutually independent, each generated by random_column
// under the cycling scheme.  Column j uses the sub-stream (j).
inline DataMatrix generate_null_dm(int rows, int cols, const FrequencyScheme& scheme,
                                   const RngStream& rng) {
    if (rows < 2) throw ValidationError("generate_null_dm: rows must be >= 2");
    DataMatrix dm(rows, cols);
    for (int c = 0; c < cols; ++c) {
        RngStream cs = rng.child(std::uint64_t(c));
        auto freqs = scheme.column_freqs(c);
        auto col = random_column(rows, freqs, cs);
        std::copy(col.begin(), col.end(), dm.column(c));
    }
    dm.finalize();
    return dm;
}

}  // namespace pas

#endif
