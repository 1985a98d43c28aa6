#include "okr/target_shift.hpp"

#include "okr/error.hpp"
#include "okr/linalg.hpp"
#include "okr/regression.hpp"

namespace okr {

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::True: return "true";
        case Provenance::Effective: return "effective";
        case Provenance::Corrected: return "corrected";
        case Provenance::IterativeCorrected: return "iterative_corrected";
    }
    return "unknown";
}

TargetMatrix effective_targets_from_gram(const MatrixRef& K, const MatrixRef& Y, double eta, double gamma) {
    if (!(eta > 0.0)) throw InvalidArgument("effective_targets: eta must be > 0");
    if (!(gamma >= 0.0)) throw InvalidArgument("effective_targets: gamma must be >= 0");
    if (K.rows() != Y.cols()) throw DimensionError("effective_targets: Gram size does not match target count");
    MatrixXd offline_system = K;
    offline_system.diagonal().array() += gamma;
    const MatrixXd dual = solve_upper_right(Y, online_system(directional_mask(K, 1, 0, 0), eta));
    return {dual * offline_system, Provenance::Effective};
}

TargetMatrix effective_targets(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               double gamma) {
    if (X.cols() != Y.cols()) throw DimensionError("effective_targets: X and Y column counts differ");
    return effective_targets_from_gram(gram(kernel, X), Y, eta, gamma);
}

VectorXd online_residual(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                         const VectorRef& x_next, const VectorRef& y_next) {
    if (X.cols() != Y.cols()) throw DimensionError("online_residual: X and Y column counts differ");
    if (X.cols() == 0) return -y_next;
    if (Y.rows() != y_next.size()) throw DimensionError("online_residual: target dimension mismatch");
    const MatrixXd prediction = online_closed_form(kernel, X, Y, eta, 0.0, x_next);
    return prediction.col(0) - y_next;
}

TargetMatrix shift_one_step(const TargetMatrix& effective, const KernelSpec& kernel, const MatrixRef& X,
                            const VectorRef& x_next, const VectorRef& y_next, const VectorRef& residual, double eta,
                            double offline_gamma) {
    const Index n = X.cols();
    if (effective.size() != n) throw DimensionError("shift_one_step: effective targets do not match X_n");
    if (n > 0 && effective.values.rows() != y_next.size())
        throw DimensionError("shift_one_step: target dimension mismatch");
    if (residual.size() != y_next.size()) throw DimensionError("shift_one_step: residual dimension mismatch");

    TargetMatrix out{MatrixXd(y_next.size(), n + 1), Provenance::Effective};
    if (n > 0) {
        const MatrixXd k_new = gram(kernel, x_next, X);  // 1 x n
        out.values.leftCols(n) = effective.values - eta * residual * k_new;
    }
    const double k_self = eval_kernel(kernel, x_next, x_next);
    out.values.col(n) = y_next - (eta * (offline_gamma + k_self) - 1.0) * residual;
    return out;
}

ShiftTracker::ShiftTracker(KernelSpec kernel, double eta, double offline_gamma)
    : kernel_(std::move(kernel)), eta_(eta), gamma_(offline_gamma) {
    if (!(eta > 0.0)) throw InvalidArgument("ShiftTracker: eta must be > 0");
}

VectorXd ShiftTracker::step(const VectorRef& x, const VectorRef& y) {
    const Index n = X_.cols();
    if (n == 0) {
        X_.resize(x.size(), 0);
        dual_.resize(y.size(), 0);
        effective_.values.resize(y.size(), 0);
    }
    if (x.size() != X_.rows() || y.size() != dual_.rows()) throw DimensionError("ShiftTracker: sample shape changed");

    VectorXd k_past = VectorXd::Zero(n);
    if (n > 0) k_past = gram(kernel_, X_, x).col(0);
    const VectorXd residual = dual_ * k_past - y;
    const double k_self = eval_kernel(kernel_, x, x);

    MatrixXd next(y.size(), n + 1);
    next.leftCols(n) = effective_.values - eta_ * residual * k_past.transpose();
    next.col(n) = y - (eta_ * (gamma_ + k_self) - 1.0) * residual;
    effective_.values = std::move(next);

    // Appending a column to the upper-triangular system extends the dual by
    // -eta e_{n+1} without touching earlier entries.
    dual_.conservativeResize(Eigen::NoChange, n + 1);
    dual_.col(n) = -eta_ * residual;
    X_.conservativeResize(Eigen::NoChange, n + 1);
    X_.col(n) = x;
    return residual;
}

MatrixXd ShiftTracker::predict(const MatrixRef& Xstar) const {
    if (X_.cols() == 0) return MatrixXd::Zero(dual_.rows(), Xstar.cols());
    return dual_ * gram(kernel_, X_, Xstar);
}

}  // namespace okr
