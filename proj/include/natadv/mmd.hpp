#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "natadv/errors.hpp"
#include "natadv/mat.hpp"
#include "natadv/rng.hpp"

namespace natadv {

struct MmdConfig {
    double bandwidth = 0.0; // 0 -> median heuristic per call
    bool biased = true;

    void validate() const {
        if (bandwidth < 0.0) throw ConfigError("mmd.bandwidth must be >= 0");
    }
};

namespace detail {

inline double sq_dist(const double* x, const double* y, int d) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        acc += diff * diff;
    }
    return acc;
}

// Orders operands so mmd2(A,B) and mmd2(B,A) run the exact same float ops.
inline bool mat_lex_less(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) return a.rows < b.rows;
    if (a.cols != b.cols) return a.cols < b.cols;
    for (std::size_t k = 0; k < a.a.size(); ++k)
        if (a.a[k] != b.a[k]) return a.a[k] < b.a[k];
    return false;
}

inline double kernel_self_sum(const Mat& X, double inv_two_sigma2, bool include_diag) {
    double acc = 0.0;
    for (int i = 0; i < X.rows; ++i) {
        for (int j = i + 1; j < X.rows; ++j)
            acc += 2.0 * std::exp(-sq_dist(X.row(i), X.row(j), X.cols) * inv_two_sigma2);
        if (include_diag) acc += 1.0; // k(x,x) = 1 for the RBF kernel
    }
    return acc;
}

inline double kernel_cross_sum(const Mat& X, const Mat& Y, double inv_two_sigma2) {
    double acc = 0.0;
    for (int i = 0; i < X.rows; ++i)
        for (int j = 0; j < Y.rows; ++j)
            acc += std::exp(-sq_dist(X.row(i), Y.row(j), X.cols) * inv_two_sigma2);
    return acc;
}

} // namespace detail

// sigma^2 = median of pairwise squared distances over A ∪ B, halved.
inline double mmd_median_bandwidth(const Mat& A, const Mat& B) {
    std::vector<const Mat*> sets{&A, &B};
    std::vector<double> d2;
    const int n = A.rows + B.rows;
    d2.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    auto row_of = [&](int i) { return i < A.rows ? A.row(i) : B.row(i - A.rows); };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d2.push_back(detail::sq_dist(row_of(i), row_of(j), A.cols));
    if (d2.empty()) return 1.0;
    std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
    const double med = d2[d2.size() / 2];
    if (med <= 0.0) return 1.0;
    return std::sqrt(med / 2.0);
}

// Squared maximum mean discrepancy with the RBF kernel
// k(x,y) = exp(-||x-y||^2 / (2 sigma^2)).
inline double mmd2(const Mat& A, const Mat& B, const MmdConfig& cfg = {}) {
    cfg.validate();
    if (A.rows == 0 || B.rows == 0) throw ContractError("mmd2: empty sample set");
    if (A.cols != B.cols) throw ContractError("mmd2: feature widths differ");

    const double sigma = cfg.bandwidth > 0.0 ? cfg.bandwidth : mmd_median_bandwidth(A, B);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

    const bool swap = B.rows < A.rows || (B.rows == A.rows && detail::mat_lex_less(B, A));
    const Mat& X = swap ? B : A;
    const Mat& Y = swap ? A : B;
    const double m = X.rows, n = Y.rows;

    if (cfg.biased) {
        const double xx = detail::kernel_self_sum(X, inv_two_sigma2, true) / (m * m);
        const double yy = detail::kernel_self_sum(Y, inv_two_sigma2, true) / (n * n);
        const double xy = detail::kernel_cross_sum(X, Y, inv_two_sigma2) / (m * n);
        return xx + yy - 2.0 * xy;
    }
    if (X.rows < 2 || Y.rows < 2) throw ContractError("mmd2: unbiased estimator needs >= 2 samples per set");
    const double xx = detail::kernel_self_sum(X, inv_two_sigma2, false) / (m * (m - 1.0));
    const double yy = detail::kernel_self_sum(Y, inv_two_sigma2, false) / (n * (n - 1.0));
    const double xy = detail::kernel_cross_sum(X, Y, inv_two_sigma2) / (m * n);
    return xx + yy - 2.0 * xy;
}

// Calibration scale for mapping MMD^2 to a [0,1] naturalness value:
// median MMD^2 between bootstrap halves of the canonical feature rows.
inline double mmd_naturalness_scale(const Mat& canonical_features, const MmdConfig& cfg,
                                    std::uint64_t seed = 0x5EED, int n_boot = 16) {
    const int n = canonical_features.rows;
    if (n < 2) throw ContractError("mmd_naturalness_scale: need >= 2 feature rows");
    Rng rng(Rng::derive(seed, 0x30D));
    std::vector<int> idx(n);
    std::vector<double> vals;
    vals.reserve(n_boot);
    for (int b = 0; b < n_boot; ++b) {
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);
        const int half = n / 2;
        Mat A(half, canonical_features.cols), B(n - half, canonical_features.cols);
        for (int i = 0; i < half; ++i)
            for (int j = 0; j < A.cols; ++j) A(i, j) = canonical_features(idx[i], j);
        for (int i = half; i < n; ++i)
            for (int j = 0; j < B.cols; ++j) B(i - half, j) = canonical_features(idx[i], j);
        vals.push_back(mmd2(A, B, cfg));
    }
    std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
    const double med = vals[vals.size() / 2];
    return std::max(med, 1e-6);
}

// Monotone map from a squared MMD to [0,1].
inline double mmd_naturalness(double mmd2_value, double scale) {
    return std::exp(-std::max(mmd2_value, 0.0) / scale);
}

} // namespace natadv
