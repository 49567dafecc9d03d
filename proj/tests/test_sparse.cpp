#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tf2/sparse.hpp"

#include <Eigen/Dense>
#include <random>

using namespace tf2;

TEST_CASE("block map bookkeeping") {
    auto bm = make_block_map({{"ux", 5}, {"uy", 7}, {"p", 3}});
    CHECK(bm.count() == 3);
    CHECK(bm.total() == 15);
    CHECK(bm.offset(1) == 5);
    CHECK(bm.size(2) == 3);
    CHECK(bm.find("p") == 2);
    CHECK(bm.find("phi") == -1);
}

static SparseMatrix random_matrix(int n, int bw, unsigned seed, double diag_boost) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<std::vector<int>> rows(n);
    for (int r = 0; r < n; ++r) {
        rows[r].push_back(r);
        for (int k = 0; k < bw; ++k) {
            int c = std::uniform_int_distribution<int>(0, n - 1)(rng);
            rows[r].push_back(c);
        }
        std::sort(rows[r].begin(), rows[r].end());
        rows[r].erase(std::unique(rows[r].begin(), rows[r].end()), rows[r].end());
    }
    SparseMatrix A = build_sparse(n, n, rows);
    for (int r = 0; r < n; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s)
            A.vals[s] = U(rng) + (A.cols[s] == r ? diag_boost : 0.0);
    return A;
}

TEST_CASE("pattern lookup and unit rows") {
    auto A = random_matrix(20, 4, 17, 5.0);
    for (int r = 0; r < A.n_rows; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s) {
            CHECK(A.find_slot(r, A.cols[s]) == s);
            CHECK(A.get(r, A.cols[s]) == A.vals[s]);
        }
    // some absent entry returns -1 and reads as zero
    for (int c = 0; c < A.n_cols; ++c) {
        bool present = false;
        for (int s = A.row_ptr[0]; s < A.row_ptr[1]; ++s)
            if (A.cols[s] == c) present = true;
        if (!present) {
            CHECK(A.find_slot(0, c) == -1);
            CHECK(A.get(0, c) == 0.0);
            break;
        }
    }
    A.set_unit_row(3);
    for (int s = A.row_ptr[3]; s < A.row_ptr[4]; ++s)
        CHECK(A.vals[s] == (A.cols[s] == 3 ? 1.0 : 0.0));
}

TEST_CASE("spmv matches a dense product") {
    auto A = random_matrix(40, 6, 23, 0.0);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(40, 40);
    for (int r = 0; r < 40; ++r)
        for (int s = A.row_ptr[r]; s < A.row_ptr[r + 1]; ++s)
            D(r, A.cols[s]) = A.vals[s];
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eigen::VectorXd x(40);
    for (int i = 0; i < 40; ++i) x[i] = U(rng);
    std::vector<double> xv(x.data(), x.data() + 40), yv;
    spmv(A, xv, yv);
    Eigen::VectorXd y = D * x;
    for (int i = 0; i < 40; ++i) CHECK(yv[i] == doctest::Approx(y[i]).epsilon(1e-13));
}

TEST_CASE("compensated summation survives adversarial cancellation") {
    // classic case: huge values that cancel, tiny survivors
    std::vector<double> v = {1.0, 1e100, 1.0, -1e100};
    CHECK(neumaier_sum(v) == 2.0);
    // random shuffled near-cancelling series vs long double accumulation
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<double> w(4000);
    long double acc = 0.0L;
    for (size_t i = 0; i < w.size(); i += 2) {
        double a = U(rng) * 1e8;
        w[i] = a;
        w[i + 1] = -a * (1.0 - 1e-12);
        acc += (long double)w[i] + (long double)w[i + 1];
    }
    double s = neumaier_sum(w);
    CHECK(s == doctest::Approx((double)acc).epsilon(1e-12));
}
