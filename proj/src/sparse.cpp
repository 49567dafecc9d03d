#include "tf2/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tf2 {

int BlockMap::find(const std::string& name) const {
    for (int b = 0; b < count(); ++b)
        if (names[b] == name) return b;
    return -1;
}

BlockMap make_block_map(const std::vector<std::pair<std::string, int>>& blocks) {
    BlockMap m;
    m.offsets.push_back(0);
    for (auto& [name, size] : blocks) {
        if (size < 0) throw std::runtime_error("make_block_map: negative block size");
        m.names.push_back(name);
        m.offsets.push_back(m.offsets.back() + size);
    }
    return m;
}

void SparseMatrix::zero_values() {
    std::fill(vals.begin(), vals.end(), 0.0);
}

int SparseMatrix::find_slot(int r, int c) const {
    const int* lo = cols.data() + row_ptr[r];
    const int* hi = cols.data() + row_ptr[r + 1];
    const int* it = std::lower_bound(lo, hi, c);
    if (it == hi || *it != c) return -1;
    return (int)(it - cols.data());
}

double SparseMatrix::get(int r, int c) const {
    int s = find_slot(r, c);
    return s < 0 ? 0.0 : vals[s];
}

void SparseMatrix::set_unit_row(int r) {
    for (int s = row_ptr[r]; s < row_ptr[r + 1]; ++s)
        vals[s] = cols[s] == r ? 1.0 : 0.0;
}

SparseMatrix build_sparse(int n_rows, int n_cols,
                          const std::vector<std::vector<int>>& rows) {
    SparseMatrix A;
    A.n_rows = n_rows;
    A.n_cols = n_cols;
    A.row_ptr.resize(n_rows + 1, 0);
    for (int r = 0; r < n_rows; ++r) A.row_ptr[r + 1] = A.row_ptr[r] + (int)rows[r].size();
    A.cols.reserve(A.row_ptr[n_rows]);
    for (int r = 0; r < n_rows; ++r) {
        for (size_t k = 0; k < rows[r].size(); ++k) {
            int c = rows[r][k];
            if (c < 0 || c >= n_cols) throw std::runtime_error("build_sparse: column out of range");
            if (k > 0 && c <= rows[r][k - 1]) throw std::runtime_error("build_sparse: columns not sorted unique");
            A.cols.push_back(c);
        }
    }
    A.vals.assign(A.cols.size(), 0.0);
    return A;
}

void spmv(const SparseMatrix& A, const std::vector<double>& x,
          std::vector<double>& y) {
    if ((int)x.size() != A.n_cols)
        throw std::runtime_error("spmv: dimension mismatch");
    y.resize(A.n_rows);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < A.n_rows; ++r) {
        double s = 0.0;
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
            s += A.vals[k] * x[A.cols[k]];
        y[r] = s;
    }
}

double neumaier_sum(const double* v, int n) {
    double s = 0.0, c = 0.0;
    for (int i = 0; i < n; ++i) {
        double t = s + v[i];
        if (std::abs(s) >= std::abs(v[i]))
            c += (s - t) + v[i];
        else
            c += (v[i] - t) + s;
        s = t;
    }
    return s + c;
}

double neumaier_sum(const std::vector<double>& v) {
    return neumaier_sum(v.data(), (int)v.size());
}

} // namespace tf2
