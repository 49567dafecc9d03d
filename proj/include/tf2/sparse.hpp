#pragma once

#include <string>
#include <vector>

namespace tf2 {

// Named contiguous index ranges partitioning [0, total).
struct BlockMap {
    std::vector<std::string> names;
    std::vector<int> offsets;  // size names.size()+1, offsets.back() == total

    int count() const { return (int)names.size(); }
    int total() const { return offsets.empty() ? 0 : offsets.back(); }
    int offset(int b) const { return offsets[b]; }
    int size(int b) const { return offsets[b + 1] - offsets[b]; }
    int find(const std::string& name) const;  // -1 if absent
};

BlockMap make_block_map(const std::vector<std::pair<std::string, int>>& blocks);

// Compressed-row sparse matrix, columns sorted within each row.
struct SparseMatrix {
    int n_rows = 0, n_cols = 0;
    std::vector<int> row_ptr;   // size n_rows+1
    std::vector<int> cols;
    std::vector<double> vals;
    BlockMap blocks;            // optional row/col block structure

    int nnz() const { return (int)cols.size(); }
    void zero_values();
    // index into vals for (r, c); -1 if not in pattern
    int find_slot(int r, int c) const;
    double get(int r, int c) const;
    // zero the row and put 1 on the diagonal (diagonal must be in the pattern)
    void set_unit_row(int r);
};

// rows: per-row sorted unique column lists
SparseMatrix build_sparse(int n_rows, int n_cols,
                          const std::vector<std::vector<int>>& rows);

// y = A x (OpenMP over rows; per-row accumulation order is fixed)
void spmv(const SparseMatrix& A, const std::vector<double>& x,
          std::vector<double>& y);

// compensated (Neumaier) summation in fixed order
double neumaier_sum(const double* v, int n);
double neumaier_sum(const std::vector<double>& v);

} // namespace tf2
