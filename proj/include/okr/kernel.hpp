#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace okr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixRef = Eigen::Ref<const MatrixXd>;
using VectorRef = Eigen::Ref<const VectorXd>;

/// k(x, x') = exp(-|x - x'|^2 / bandwidth).
struct RbfKernel {
    double bandwidth = 0.1;
};

/// k(x, x') = tanh(Jx)^T tanh(Jx') with J of shape d_J x d_x.
struct RandomFeatureTanhKernel {
    MatrixXd projection;
};

/// k(x, x') = phi(x)^T phi(x') for an arbitrary feature map. `name` is what
/// configs and descriptors refer to.
struct ExplicitFeatureKernel {
    using FeatureFn = std::function<VectorXd(const VectorRef&)>;
    std::string name;
    Index input_dim = 0;
    Index feature_dim = 0;
    FeatureFn feature;
};

/// A stored Gram matrix. Inputs are 1 x n matrices of row indices into the
/// stored matrix; anything that is not a stored index is rejected, so new test
/// points can never be evaluated.
struct PrecomputedKernel {
    std::shared_ptr<const MatrixXd> gram;
};

class KernelSpec {
public:
    using Kind = std::variant<RbfKernel, RandomFeatureTanhKernel, ExplicitFeatureKernel, PrecomputedKernel>;

    static KernelSpec rbf(double bandwidth);
    static KernelSpec random_feature_tanh(MatrixXd projection);
    static KernelSpec explicit_features(std::string name, Index input_dim, Index feature_dim,
                                        ExplicitFeatureKernel::FeatureFn feature);
    /// phi(x) = x, i.e. the linear kernel.
    static KernelSpec linear(Index input_dim);
    /// phi(x) = sqrt(2/D) cos(Wx + c): a D-dimensional random Fourier feature map whose kernel
    /// approximates the RBF kernel of the same bandwidth.
    static KernelSpec random_fourier(MatrixXd frequencies, VectorXd phases);
    static KernelSpec precomputed(MatrixXd gram);

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
    [[nodiscard]] std::string name() const;

    /// Required input dimension, or 0 when any dimension is accepted (RBF).
    [[nodiscard]] Index input_dim() const;
    [[nodiscard]] bool has_features() const;
    [[nodiscard]] bool is_precomputed() const;
    [[nodiscard]] Index feature_dim() const;

    /// Feature matrix (d_phi x n) for the columns of X. Throws InvalidArgument
    /// ("explicit features required") for RBF and precomputed kernels.
    [[nodiscard]] MatrixXd features(const MatrixRef& X) const;

    void check_input(const MatrixRef& X, const char* what) const;

private:
    explicit KernelSpec(Kind kind) : kind_(std::move(kind)) {}
    Kind kind_;
};

double eval_kernel(const KernelSpec& spec, const VectorRef& x, const VectorRef& x2);

/// n x m matrix of kernel values between the columns of X and X2.
MatrixXd gram(const KernelSpec& spec, const MatrixRef& X, const MatrixRef& X2);
/// Symmetric Gram of X with itself; the upper triangle is mirrored so the
/// result is exactly symmetric.
MatrixXd gram(const KernelSpec& spec, const MatrixRef& X);

/// Block-directional part of K: entry (i, j) is kept iff block(i) < block(j)
/// with block(i) = floor(i / b). b = 1 gives the strict upper triangle K^U.
/// A trailing partial block is treated as one smaller block.
MatrixXd directional_mask(const MatrixRef& K, Index block);

/// Same mask applied to a sub-block of a larger matrix whose top-left entry
/// sits at global position (row_offset, col_offset). Blocks are counted from
/// global index 0.
MatrixXd directional_mask(const MatrixRef& K, Index block, Index row_offset, Index col_offset);

/// Lower-triangular transpose K^L = (K^U)^T.
MatrixXd lower_directional(const MatrixRef& K, Index block);

struct DecayDiagonal {
    Index n = 0;
    double eta = 0.0;
    double gamma = 0.0;
    VectorXd diag;  // entry i (1-based) = (1 - eta * gamma)^(n - i)
};

DecayDiagonal decay_diag(Index n, double eta, double gamma);

/// Full Gram plus its directional mask for a fixed block size.
struct GramBundle {
    MatrixXd K;
    Index block_size = 1;
    MatrixXd directional;

    static GramBundle build(MatrixXd K, Index block_size);
};

/// Eigenvalues >= -1e-8 * max|K| and exact symmetry up to the same tolerance.
bool is_symmetric_psd(const MatrixRef& K);

}  // namespace okr
