#pragma once

#include <string>

#include <Eigen/Dense>

#include "okr/kernel.hpp"

namespace okr {

/// Systems whose condition estimate exceeds this are rejected.
inline constexpr double kMaxCondition = 1e12;

/// Cholesky factor of a symmetric positive-definite matrix with a condition
/// guard. Never forms an inverse.
class SpdSolver {
public:
    /// Throws NumericalError naming `what` when A is not numerically SPD or
    /// its condition estimate exceeds `max_condition`.
    SpdSolver(const MatrixRef& A, std::string what, double max_condition = kMaxCondition);

    /// A^{-1} B
    [[nodiscard]] MatrixXd solve(const MatrixRef& B) const;
    /// Y A^{-1}
    [[nodiscard]] MatrixXd solve_right(const MatrixRef& Y) const;
    /// Reciprocal-condition estimate in the 1-norm.
    [[nodiscard]] double condition() const noexcept { return condition_; }
    [[nodiscard]] Index size() const noexcept { return llt_.rows(); }

private:
    Eigen::LLT<MatrixXd> llt_;
    double condition_ = 1.0;
};

/// Condition estimate of a symmetric matrix, +inf when it is not positive
/// definite.
double spd_condition_estimate(const MatrixRef& A);

/// Y U^{-1} for upper-triangular U, by substitution.
MatrixXd solve_upper_right(const MatrixRef& Y, const MatrixRef& U);
/// U^{-1} B for upper-triangular U, by back-substitution.
MatrixXd solve_upper(const MatrixRef& U, const MatrixRef& B);

/// 1/eta I + directional(K): the online system matrix (upper triangular).
MatrixXd online_system(const MatrixRef& directional, double eta);

/// Cholesky factor of gamma I + K that grows by appending blocks of rows and
/// columns. Each append costs O(n b^2 + b^3) plus the triangular solve for
/// the new off-diagonal block.
class IncrementalCholesky {
public:
    explicit IncrementalCholesky(double shift = 0.0) : shift_(shift) {}

    /// Append a block: `cross` = K(past, new) (n x b) and `diag` = K(new, new)
    /// (b x b). The shift is added to the new diagonal. Throws NumericalError
    /// naming `what` when the extended matrix loses positive definiteness.
    void append(const MatrixRef& cross, const MatrixRef& diag, const char* what);

    /// (shift I + K)^{-1} B for B with size() rows.
    [[nodiscard]] MatrixXd solve(const MatrixRef& B) const;
    [[nodiscard]] Index size() const noexcept { return n_; }
    /// (max L_ii / min L_ii)^2: a cheap lower bound on the 2-norm condition.
    [[nodiscard]] double condition_bound() const;

private:
    double shift_;
    MatrixXd L_;
    Index n_ = 0;
};

}  // namespace okr
