#pragma once

#include <vector>

#include "okr/kernel.hpp"
#include "okr/regression.hpp"
#include "okr/target_shift.hpp"

namespace okr {

/// Targets an unregularized online learner must be fed to reproduce the
/// offline ridge predictor: Y (gamma I + K)^{-1} (1/eta I + K^U).
TargetMatrix corrected_targets(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               double gamma);
TargetMatrix corrected_targets_from_gram(const MatrixRef& K, const MatrixRef& Y, double eta, double gamma);

/// One-step update of the corrected targets when (x_{n+1}, y_{n+1}) arrives.
/// `corrected` must hold the corrected targets of (X_n, Y_n) for the same
/// (eta, gamma).
TargetMatrix correction_one_step(const TargetMatrix& corrected, const KernelSpec& kernel, const MatrixRef& X,
                                 const MatrixRef& Y, const VectorRef& x_next, const VectorRef& y_next, double eta,
                                 double gamma);

/// One chunk of the causal correction. Holds only past and current targets,
/// never anything later in the stream.
struct CorrectionStep {
    MatrixXd z_past;  // d_y x (n - b), frozen
    MatrixXd x_past;  // d_x x (n - b)
    MatrixXd x_new;   // d_x x b
    MatrixXd y_past;
    MatrixXd y_new;
    HyperParams hp;
    /// Block size of the directional kernel (1 = K^U, sample-by-sample
    /// updates; otherwise K^{bU} for mini-batch updates of that size).
    Index directional_block = 1;

    [[nodiscard]] Index past_size() const noexcept { return x_past.cols(); }
    [[nodiscard]] Index new_size() const noexcept { return x_new.cols(); }
    void validate() const;
};

struct CorrectionCoefficients {
    MatrixXd c_on;   // b x b
    MatrixXd c_off;  // b x b
    MatrixXd q;      // Schur complement, b x b
    double gamma_o = 0.0;  // value actually used (after any automatic jitter)
};

struct CorrectionResult {
    MatrixXd z_new;
    CorrectionCoefficients coeffs;
};

/// Kernel blocks for one chunk.
struct CorrectionBlocks {
    MatrixXd k_nn;        // K(new, new)
    MatrixXd k_pn;        // K(past, new)
    MatrixXd past_solve;  // (gamma I + K_pp)^{-1} K_pn
    Index past_size = 0;
};

/// Core arithmetic of the chunk update given kernel blocks:
///   Z_new = Y_new + (Y_new - f_on) C_on + (f_off - Y_new) C_off.
/// `f_on_new` and `f_off_new` are d_y x b predictions on the new inputs.
CorrectionResult solve_correction(const CorrectionBlocks& blocks, const MatrixRef& y_new, const MatrixRef& f_on_new,
                                  const MatrixRef& f_off_new, const HyperParams& hp, Index directional_block);

/// Chunk update with kernel blocks assembled from `kernel`.
CorrectionResult iterative_correction(const CorrectionStep& step, const KernelSpec& kernel, const MatrixRef& f_on_new,
                                      const MatrixRef& f_off_new);

/// Online prediction on X_new of a learner trained on (X_past, Z_past).
MatrixXd past_online_prediction(const CorrectionStep& step, const KernelSpec& kernel);
/// Offline prediction on X_new from (X_past, Y_past) with ridge hp.gamma.
MatrixXd past_offline_prediction(const CorrectionStep& step, const KernelSpec& kernel);

/// Independent cross-check: assembles the full-stream matrices
///   [* B; B^T C] = M_on (gamma_o I + K) M_on^T,  [* G] = Y M_off K M_on^T
/// with M_on = (1/eta I + K^dir)^{-1}, M_off = (gamma I + K)^{-1}, using
/// general LU solves, and returns (G - Z_past B) C^{-1}.
MatrixXd iterative_correction_bcg_oracle(const CorrectionStep& step, const KernelSpec& kernel);

/// Block-wise correction loss at Z_new (Z_past and targets from `step`):
///   1/2 tr(D K D^T) + gamma_o/2 |[Z_past, Z_new] M_on|_F^2,
///   D = [Z_past, Z_new] M_on - Y_tot M_off.
double eval_block_loss(const MatrixRef& z_new, const CorrectionStep& step, const KernelSpec& kernel);

struct IterativeCorrectionRun {
    MatrixXd z;                                 // d_y x n, iteratively corrected targets
    std::vector<CorrectionCoefficients> coeffs;  // per chunk, when requested
};

/// Causal chunk-by-chunk correction of a whole stream with kernel-mode online
/// predictions. `K` is the Gram of the stream inputs; only past and current
/// chunk targets are read at each chunk. Chunks have `chunk` samples (the last
/// may be shorter).
IterativeCorrectionRun iterative_correction_run(const MatrixRef& K, const MatrixRef& Y, const HyperParams& hp,
                                                Index chunk, Index directional_block, bool keep_coeffs = false);

}  // namespace okr
