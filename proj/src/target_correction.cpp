#include "okr/target_correction.hpp"

#include <cmath>

#include "okr/error.hpp"
#include "okr/linalg.hpp"

namespace okr {

namespace {

// gamma_o = 0 is only safe while K_nn is comfortably invertible.
constexpr double kJitterCondition = 1e10;

MatrixXd offline_system(const MatrixRef& K, double gamma) {
    MatrixXd A = K;
    A.diagonal().array() += gamma;
    return A;
}

MatrixXd stack_columns(const MatrixRef& a, const MatrixRef& b) {
    MatrixXd out(std::max(a.rows(), b.rows()), a.cols() + b.cols());
    if (a.cols() > 0) out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

}  // namespace

TargetMatrix corrected_targets_from_gram(const MatrixRef& K, const MatrixRef& Y, double eta, double gamma) {
    if (!(eta > 0.0)) throw InvalidArgument("corrected_targets: eta must be > 0");
    if (K.rows() != Y.cols()) throw DimensionError("corrected_targets: Gram size does not match target count");
    const MatrixXd dual = SpdSolver(offline_system(K, gamma), "corrected_targets (gamma I + K)").solve_right(Y);
    return {dual * online_system(directional_mask(K, 1, 0, 0), eta), Provenance::Corrected};
}

TargetMatrix corrected_targets(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               double gamma) {
    if (X.cols() != Y.cols()) throw DimensionError("corrected_targets: X and Y column counts differ");
    return corrected_targets_from_gram(gram(kernel, X), Y, eta, gamma);
}

TargetMatrix correction_one_step(const TargetMatrix& corrected, const KernelSpec& kernel, const MatrixRef& X,
                                 const MatrixRef& Y, const VectorRef& x_next, const VectorRef& y_next, double eta,
                                 double gamma) {
    const Index n = X.cols();
    if (corrected.size() != n || Y.cols() != n)
        throw DimensionError("correction_one_step: corrected targets, X_n and Y_n must have equal column counts");
    if (!(eta > 0.0)) throw InvalidArgument("correction_one_step: eta must be > 0");

    const double k_self = eval_kernel(kernel, x_next, x_next);
    double q = 0.0;
    VectorXd weights;  // (gamma I + K_n)^{-1} k(X_n, x_{n+1})
    VectorXd f_off = VectorXd::Zero(y_next.size());
    MatrixXd K;
    if (n > 0) {
        K = gram(kernel, X);
        const VectorXd k_col = gram(kernel, X, x_next).col(0);
        weights = SpdSolver(offline_system(K, gamma), "correction_one_step (gamma I + K_n)").solve(k_col);
        q = k_col.dot(weights);
        f_off = Y * weights;
    }
    const double schur = gamma + k_self - q;
    if (!(schur > 1e-14 * std::max(1.0, gamma + k_self)))
        throw NumericalError("correction_one_step: degenerate Schur complement (gamma + k - q = " +
                                 std::to_string(schur) + ")",
                             std::numeric_limits<double>::infinity());
    const double rho = 1.0 / schur;
    const double c_q = (gamma + k_self - 1.0 / eta) / schur;
    const VectorXd e_off = f_off - y_next;

    TargetMatrix out{MatrixXd(y_next.size(), n + 1), Provenance::Corrected};
    if (n > 0) {
        // k(x_{n+1}, X_n) C_K = weights^T (1/eta I + K^U_n)
        const Eigen::RowVectorXd spread = weights.transpose() * online_system(directional_mask(K, 1, 0, 0), eta);
        out.values.leftCols(n) = corrected.values + rho * e_off * spread;
    }
    out.values.col(n) = y_next + c_q * e_off;
    return out;
}

void CorrectionStep::validate() const {
    hp.validate();
    const Index p = past_size();
    if (new_size() < 1) throw DimensionError("correction step: new block is empty");
    if (x_past.rows() != x_new.rows() && p > 0) throw DimensionError("correction step: input dimension mismatch");
    if (y_past.cols() != p || z_past.cols() != p)
        throw DimensionError("correction step: past targets must match past inputs");
    if (y_new.cols() != new_size()) throw DimensionError("correction step: new targets must match new inputs");
    if (p > 0 && (y_past.rows() != y_new.rows() || z_past.rows() != y_new.rows()))
        throw DimensionError("correction step: target dimension mismatch");
    if (directional_block < 1) throw InvalidArgument("correction step: directional block must be >= 1");
    if (p % directional_block != 0)
        throw InvalidArgument("correction step: past size must be a multiple of the directional block");
}

CorrectionResult solve_correction(const CorrectionBlocks& blocks, const MatrixRef& y_new, const MatrixRef& f_on_new,
                                  const MatrixRef& f_off_new, const HyperParams& hp, Index directional_block) {
    const Index b = blocks.k_nn.rows();
    if (blocks.k_nn.cols() != b || y_new.cols() != b || f_on_new.cols() != b || f_off_new.cols() != b)
        throw DimensionError("iterative_correction: new-block sizes disagree");
    if (f_on_new.rows() != y_new.rows() || f_off_new.rows() != y_new.rows())
        throw DimensionError("iterative_correction: prediction dimension must equal d_y");

    CorrectionCoefficients coeffs;
    coeffs.q = offline_system(blocks.k_nn, hp.gamma);
    if (blocks.past_size > 0) coeffs.q -= blocks.k_pn.transpose() * blocks.past_solve;
    coeffs.q = 0.5 * (coeffs.q + coeffs.q.transpose());

    coeffs.gamma_o = hp.gamma_o;
    if (coeffs.gamma_o == 0.0 && spd_condition_estimate(blocks.k_nn) > kJitterCondition)
        coeffs.gamma_o = 1e-8 * blocks.k_nn.trace() / static_cast<double>(b);

    // Directional blocks restart at the chunk start; callers keep chunks
    // aligned to the update blocks.
    const MatrixXd online_nn = online_system(directional_mask(blocks.k_nn, directional_block, 0, 0), hp.eta);

    MatrixXd gain;  // (gamma_o I + K_nn)^{-1} (1/eta I + K^dir_nn)
    try {
        gain = SpdSolver(offline_system(blocks.k_nn, coeffs.gamma_o), "iterative_correction (gamma_o I + K_nn)")
                   .solve(online_nn);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + "; singular new-block kernel, add jitter via gamma_o > 0",
                             e.condition());
    }
    coeffs.c_on = gain - MatrixXd::Identity(b, b);
    if (hp.gamma == 0.0) {
        coeffs.c_off = MatrixXd::Zero(b, b);
    } else {
        try {
            coeffs.c_off = hp.gamma * SpdSolver(coeffs.q, "iterative_correction Schur complement Q").solve(gain);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + "; past/new kernel degeneracy", e.condition());
        }
    }
    MatrixXd z = y_new + (y_new - f_on_new) * coeffs.c_on + (f_off_new - y_new) * coeffs.c_off;
    return CorrectionResult{std::move(z), std::move(coeffs)};
}

MatrixXd past_online_prediction(const CorrectionStep& step, const KernelSpec& kernel) {
    step.validate();
    if (step.past_size() == 0) return MatrixXd::Zero(step.y_new.rows(), step.new_size());
    const MatrixXd K_pp = gram(kernel, step.x_past);
    const MatrixXd dual =
        solve_upper_right(step.z_past, online_system(directional_mask(K_pp, step.directional_block, 0, 0), step.hp.eta));
    return dual * gram(kernel, step.x_past, step.x_new);
}

MatrixXd past_offline_prediction(const CorrectionStep& step, const KernelSpec& kernel) {
    step.validate();
    if (step.past_size() == 0) return MatrixXd::Zero(step.y_new.rows(), step.new_size());
    const MatrixXd K_pp = gram(kernel, step.x_past);
    return offline_coefficients(K_pp, step.y_past, step.hp.gamma) * gram(kernel, step.x_past, step.x_new);
}

CorrectionResult iterative_correction(const CorrectionStep& step, const KernelSpec& kernel, const MatrixRef& f_on_new,
                                      const MatrixRef& f_off_new) {
    step.validate();
    CorrectionBlocks blocks;
    blocks.k_nn = gram(kernel, step.x_new);
    blocks.past_size = step.past_size();
    if (blocks.past_size > 0) {
        blocks.k_pn = gram(kernel, step.x_past, step.x_new);
        blocks.past_solve = SpdSolver(offline_system(gram(kernel, step.x_past), step.hp.gamma),
                                      "iterative_correction (gamma I + K_pp)")
                                .solve(blocks.k_pn);
    }
    return solve_correction(blocks, step.y_new, f_on_new, f_off_new, step.hp, step.directional_block);
}

MatrixXd iterative_correction_bcg_oracle(const CorrectionStep& step, const KernelSpec& kernel) {
    step.validate();
    const Index p = step.past_size();
    const Index b = step.new_size();
    const Index n = p + b;
    const MatrixXd X_tot = stack_columns(step.x_past, step.x_new);
    const MatrixXd Y_tot = stack_columns(step.y_past, step.y_new);
    const MatrixXd K = gram(kernel, X_tot);
    const MatrixXd I = MatrixXd::Identity(n, n);

    const MatrixXd online_tot = online_system(directional_mask(K, step.directional_block, 0, 0), step.hp.eta);
    const MatrixXd M_on = online_tot.fullPivLu().solve(I);
    const MatrixXd S = M_on * offline_system(K, step.hp.gamma_o) * M_on.transpose();
    const MatrixXd M_off_K = offline_system(K, step.hp.gamma).fullPivLu().solve(K);
    const MatrixXd G_full = Y_tot * M_off_K * M_on.transpose();

    const MatrixXd C = S.bottomRightCorner(b, b);
    MatrixXd rhs = G_full.rightCols(b);
    if (p > 0) rhs -= step.z_past * S.topRightCorner(p, b);
    const Eigen::FullPivLU<MatrixXd> lu(C.transpose());
    if (!lu.isInvertible()) throw NumericalError("bcg oracle: C is singular");
    return lu.solve(rhs.transpose()).transpose();
}

double eval_block_loss(const MatrixRef& z_new, const CorrectionStep& step, const KernelSpec& kernel) {
    step.validate();
    if (z_new.cols() != step.new_size() || z_new.rows() != step.y_new.rows())
        throw DimensionError("eval_block_loss: Z_new shape mismatch");
    const MatrixXd X_tot = stack_columns(step.x_past, step.x_new);
    const MatrixXd Y_tot = stack_columns(step.y_past, step.y_new);
    const MatrixXd Z_tot = stack_columns(step.z_past, z_new);
    const MatrixXd K = gram(kernel, X_tot);

    const MatrixXd online_dual =
        solve_upper_right(Z_tot, online_system(directional_mask(K, step.directional_block, 0, 0), step.hp.eta));
    const MatrixXd offline_dual = offline_coefficients(K, Y_tot, step.hp.gamma);
    const MatrixXd diff = online_dual - offline_dual;
    const double discrepancy = 0.5 * (diff * K * diff.transpose()).trace();
    return discrepancy + 0.5 * step.hp.gamma_o * online_dual.squaredNorm();
}

IterativeCorrectionRun iterative_correction_run(const MatrixRef& K, const MatrixRef& Y, const HyperParams& hp,
                                                Index chunk, Index directional_block, bool keep_coeffs) {
    hp.validate();
    if (K.rows() != K.cols() || K.rows() != Y.cols())
        throw DimensionError("iterative_correction_run: Gram must be n x n with n = target count");
    if (chunk < 1 || directional_block < 1)
        throw InvalidArgument("iterative_correction_run: chunk and directional block must be >= 1");
    if (chunk % directional_block != 0)
        throw InvalidArgument("iterative_correction_run: chunk size must be a multiple of the directional block");

    const Index n = K.rows();
    const Index d_y = Y.rows();
    IterativeCorrectionRun run{MatrixXd(d_y, n), {}};
    MatrixXd dual(d_y, n);  // online dual coefficients of the learner trained on Z
    IncrementalCholesky past_factor(hp.gamma);

    for (Index start = 0; start < n; start += chunk) {
        const Index b = std::min(chunk, n - start);
        CorrectionBlocks blocks;
        blocks.past_size = start;
        blocks.k_nn = K.block(start, start, b, b);
        blocks.k_pn = K.block(0, start, start, b);
        blocks.past_solve = past_factor.solve(blocks.k_pn);

        const MatrixXd online_pn = directional_mask(blocks.k_pn, directional_block, 0, start);
        const MatrixXd f_on = dual.leftCols(start) * online_pn;
        const MatrixXd f_off = Y.leftCols(start) * blocks.past_solve;

        CorrectionResult res = solve_correction(blocks, Y.middleCols(start, b), f_on, f_off, hp, directional_block);
        run.z.middleCols(start, b) = res.z_new;

        const MatrixXd online_nn =
            online_system(directional_mask(blocks.k_nn, directional_block, start, start), hp.eta);
        dual.middleCols(start, b) = solve_upper_right(res.z_new - dual.leftCols(start) * online_pn, online_nn);
        past_factor.append(blocks.k_pn, blocks.k_nn, "iterative_correction_run (gamma I + K_pp)");
        if (keep_coeffs) run.coeffs.push_back(std::move(res.coeffs));
    }
    return run;
}

}  // namespace okr
