#pragma once

#include <cmath>
#include <numbers>

#include "okr/kernel.hpp"
#include "okr/rng.hpp"

namespace okr::testing {

inline double max_abs(const MatrixRef& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

inline double max_abs_diff(const MatrixRef& A, const MatrixRef& B) { return max_abs(A - B); }

inline MatrixXd random_matrix(Rng& rng, Index rows, Index cols) { return rng.normal_matrix(rows, cols); }

inline MatrixXd uniform_matrix(Rng& rng, Index rows, Index cols, double lo = 0.0, double hi = 1.0) {
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) M(i, j) = lo + (hi - lo) * rng.uniform();
    return M;
}

/// Random Fourier features approximating exp(-|d|^2 / bandwidth); |phi|^2 is about 1.
inline KernelSpec rff_kernel(Rng& rng, Index d_x, Index features, double bandwidth) {
    MatrixXd W = rng.normal_matrix(features, d_x) * std::sqrt(2.0 / bandwidth);
    VectorXd c(features);
    for (Index i = 0; i < features; ++i) c[i] = 2.0 * std::numbers::pi * rng.uniform();
    return KernelSpec::random_fourier(std::move(W), std::move(c));
}

}  // namespace okr::testing
