#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace natadv {

// Dense row-major matrix of doubles. Rows usually index batch entries.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

    std::size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    static Mat zeros_like(const Mat& m) { return Mat(m.rows, m.cols); }
};

// out (+)= A * B
inline void gemm_nn(const Mat& A, const Mat& B, Mat& out, bool accumulate) {
    assert(A.cols == B.rows && out.rows == A.rows && out.cols == B.cols);
    if (!accumulate) std::fill(out.a.begin(), out.a.end(), 0.0);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = B.row(k);
            for (int j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
        }
    }
}

// out (+)= A * B^T
inline void gemm_nt(const Mat& A, const Mat& B, Mat& out, bool accumulate) {
    assert(A.cols == B.cols && out.rows == A.rows && out.cols == B.rows);
    if (!accumulate) std::fill(out.a.begin(), out.a.end(), 0.0);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* brow = B.row(j);
            double acc = 0.0;
            for (int k = 0; k < A.cols; ++k) acc += arow[k] * brow[k];
            orow[j] += acc;
        }
    }
}

// out (+)= A^T * B
inline void gemm_tn(const Mat& A, const Mat& B, Mat& out, bool accumulate) {
    assert(A.rows == B.rows && out.rows == A.cols && out.cols == B.cols);
    if (!accumulate) std::fill(out.a.begin(), out.a.end(), 0.0);
    for (int k = 0; k < A.rows; ++k) {
        const double* arow = A.row(k);
        const double* brow = B.row(k);
        for (int i = 0; i < A.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row(i);
            for (int j = 0; j < B.cols; ++j) orow[j] += aki * brow[j];
        }
    }
}

} // namespace natadv
