#include "okr/linalg.hpp"

#include <cmath>
#include <limits>

#include "okr/error.hpp"

namespace okr {

namespace {

std::string fmt_condition(double c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", c);
    return buf;
}

}  // namespace

SpdSolver::SpdSolver(const MatrixRef& A, std::string what, double max_condition) {
    if (A.rows() != A.cols()) throw DimensionError(what + ": matrix must be square");
    llt_.compute(A);
    if (llt_.info() != Eigen::Success)
        throw NumericalError(what + ": matrix is not positive definite (singular beyond conditioning threshold)",
                             std::numeric_limits<double>::infinity());
    const double rcond = llt_.rcond();
    condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (condition_ > max_condition)
        throw NumericalError(what + ": condition estimate " + fmt_condition(condition_) + " exceeds " +
                                 fmt_condition(max_condition),
                             condition_);
}

MatrixXd SpdSolver::solve(const MatrixRef& B) const {
    if (B.rows() != llt_.rows()) throw DimensionError("SpdSolver::solve: row mismatch");
    return llt_.solve(B);
}

MatrixXd SpdSolver::solve_right(const MatrixRef& Y) const {
    if (Y.cols() != llt_.rows()) throw DimensionError("SpdSolver::solve_right: column mismatch");
    return llt_.solve(Y.transpose()).transpose();
}

double spd_condition_estimate(const MatrixRef& A) {
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double rcond = llt.rcond();
    return rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
}

MatrixXd solve_upper_right(const MatrixRef& Y, const MatrixRef& U) {
    if (Y.cols() != U.rows() || U.rows() != U.cols()) throw DimensionError("solve_upper_right: shape mismatch");
    // Y U^{-1} = (U^{-T} Y^T)^T, and U^T is lower triangular.
    MatrixXd Yt = Y.transpose();
    U.transpose().triangularView<Eigen::Lower>().solveInPlace(Yt);
    return Yt.transpose();
}

MatrixXd solve_upper(const MatrixRef& U, const MatrixRef& B) {
    if (B.rows() != U.rows() || U.rows() != U.cols()) throw DimensionError("solve_upper: shape mismatch");
    MatrixXd X = B;
    U.triangularView<Eigen::Upper>().solveInPlace(X);
    return X;
}

MatrixXd online_system(const MatrixRef& directional, double eta) {
    MatrixXd T = directional;
    T.diagonal().array() += 1.0 / eta;
    return T;
}

void IncrementalCholesky::append(const MatrixRef& cross, const MatrixRef& diag, const char* what) {
    const Index b = diag.rows();
    if (diag.cols() != b || cross.rows() != n_ || cross.cols() != b)
        throw DimensionError(std::string(what) + ": incremental Cholesky block shape mismatch");
    MatrixXd grown = MatrixXd::Zero(n_ + b, n_ + b);
    grown.topLeftCorner(n_, n_) = L_.topLeftCorner(n_, n_);
    MatrixXd C = cross;  // becomes L^{-1} K_pn
    if (n_ > 0) L_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(C);
    MatrixXd schur = diag - C.transpose() * C;
    schur.diagonal().array() += shift_;
    schur = 0.5 * (schur + schur.transpose());
    Eigen::LLT<MatrixXd> llt(schur);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(what) + ": extended matrix is not positive definite",
                             std::numeric_limits<double>::infinity());
    grown.bottomLeftCorner(b, n_) = C.transpose();
    grown.bottomRightCorner(b, b) = llt.matrixL();
    L_ = std::move(grown);
    n_ += b;
    const double cond = condition_bound();
    if (cond > kMaxCondition)
        throw NumericalError(std::string(what) + ": condition estimate " + fmt_condition(cond) + " exceeds " +
                                 fmt_condition(kMaxCondition),
                             cond);
}

MatrixXd IncrementalCholesky::solve(const MatrixRef& B) const {
    if (B.rows() != n_) throw DimensionError("IncrementalCholesky::solve: row mismatch");
    MatrixXd X = B;
    if (n_ == 0) return X;
    const auto L = L_.topLeftCorner(n_, n_);
    L.triangularView<Eigen::Lower>().solveInPlace(X);
    L.transpose().triangularView<Eigen::Upper>().solveInPlace(X);
    return X;
}

double IncrementalCholesky::condition_bound() const {
    if (n_ == 0) return 1.0;
    const auto d = L_.diagonal().head(n_).cwiseAbs();
    const double ratio = d.maxCoeff() / d.minCoeff();
    return ratio * ratio;
}

}  // namespace okr
