#pragma once

#include "okr/kernel.hpp"

namespace okr {

enum class Provenance { True, Effective, Corrected, IterativeCorrected };

const char* to_string(Provenance p);

/// A d_y x n target matrix tagged with where it came from.
struct TargetMatrix {
    MatrixXd values;
    Provenance provenance = Provenance::True;

    [[nodiscard]] Index size() const noexcept { return values.cols(); }
};

/// Targets an offline ridge learner (ridge `gamma`) would need to reproduce
/// the unregularized online learner: Y (1/eta I + K^U)^{-1} (gamma I + K).
TargetMatrix effective_targets(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               double gamma);
TargetMatrix effective_targets_from_gram(const MatrixRef& K, const MatrixRef& Y, double eta, double gamma);

/// e_{n+1} = f_on(x_{n+1}; X_n, Y_n) - y_{n+1} for the unregularized online
/// learner. X_n may have zero columns.
VectorXd online_residual(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                         const VectorRef& x_next, const VectorRef& y_next);

/// One-step update of the effective targets after the online learner sees
/// (x_{n+1}, y_{n+1}) with residual e_{n+1}. The online learner has no weight
/// decay; `offline_gamma` is the ridge of the offline learner being mimicked.
TargetMatrix shift_one_step(const TargetMatrix& effective, const KernelSpec& kernel, const MatrixRef& X,
                            const VectorRef& x_next, const VectorRef& y_next, const VectorRef& residual, double eta,
                            double offline_gamma);

/// Incremental effective-target state. Keeps the online learner's dual
/// coefficients so each step costs O(n d_y) plus n kernel evaluations.
/// Single owner; move it between threads but do not share it.
class ShiftTracker {
public:
    ShiftTracker(KernelSpec kernel, double eta, double offline_gamma);

    /// Consumes one sample and returns its residual e_{n+1}.
    VectorXd step(const VectorRef& x, const VectorRef& y);

    [[nodiscard]] const TargetMatrix& effective() const noexcept { return effective_; }
    /// Online predictions from the samples seen so far.
    [[nodiscard]] MatrixXd predict(const MatrixRef& Xstar) const;
    [[nodiscard]] Index size() const noexcept { return X_.cols(); }

private:
    KernelSpec kernel_;
    double eta_;
    double gamma_;
    MatrixXd X_;
    MatrixXd dual_;  // Y (1/eta I + K^U)^{-1}
    TargetMatrix effective_{MatrixXd(), Provenance::Effective};
};

}  // namespace okr
