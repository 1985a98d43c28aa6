#include "okr/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "okr/error.hpp"

namespace okr {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Index precomputed_index(const PrecomputedKernel& k, double value) {
    const double rounded = std::round(value);
    if (rounded != value || rounded < 0 || rounded >= static_cast<double>(k.gram->rows()))
        throw InvalidArgument("precomputed kernel cannot evaluate new points (input " + std::to_string(value) +
                              " is not a stored index)");
    return static_cast<Index>(rounded);
}

}  // namespace

KernelSpec KernelSpec::rbf(double bandwidth) {
    if (!(bandwidth > 0.0)) throw InvalidArgument("RBF bandwidth must be strictly positive");
    return KernelSpec(RbfKernel{bandwidth});
}

KernelSpec KernelSpec::random_feature_tanh(MatrixXd projection) {
    if (projection.size() == 0) throw InvalidArgument("random-feature projection must be non-empty");
    return KernelSpec(RandomFeatureTanhKernel{std::move(projection)});
}

KernelSpec KernelSpec::explicit_features(std::string name, Index input_dim, Index feature_dim,
                                         ExplicitFeatureKernel::FeatureFn feature) {
    if (input_dim < 1 || feature_dim < 1) throw InvalidArgument("feature map dimensions must be positive");
    if (!feature) throw InvalidArgument("feature map must be callable");
    return KernelSpec(ExplicitFeatureKernel{std::move(name), input_dim, feature_dim, std::move(feature)});
}

KernelSpec KernelSpec::linear(Index input_dim) {
    return explicit_features("linear", input_dim, input_dim, [](const VectorRef& x) { return VectorXd(x); });
}

KernelSpec KernelSpec::random_fourier(MatrixXd frequencies, VectorXd phases) {
    if (frequencies.rows() != phases.size())
        throw DimensionError("random Fourier phases: expected " + std::to_string(frequencies.rows()) + ", got " +
                             std::to_string(phases.size()));
    const Index features = frequencies.rows();
    const Index input = frequencies.cols();
    const double scale = std::sqrt(2.0 / static_cast<double>(features));
    return explicit_features("random_fourier", input, features,
                             [W = std::move(frequencies), c = std::move(phases), scale](const VectorRef& x) {
                                 VectorXd z = W * x + c;
                                 return VectorXd(scale * z.array().cos());
                             });
}

KernelSpec KernelSpec::precomputed(MatrixXd gram) {
    if (gram.rows() != gram.cols()) throw DimensionError("precomputed Gram must be square");
    return KernelSpec(PrecomputedKernel{std::make_shared<const MatrixXd>(std::move(gram))});
}

std::string KernelSpec::name() const {
    return std::visit(Overloaded{
                          [](const RbfKernel&) { return std::string("rbf"); },
                          [](const RandomFeatureTanhKernel&) { return std::string("random_feature_tanh"); },
                          [](const ExplicitFeatureKernel& k) { return k.name; },
                          [](const PrecomputedKernel&) { return std::string("precomputed"); },
                      },
                      kind_);
}

Index KernelSpec::input_dim() const {
    return std::visit(Overloaded{
                          [](const RbfKernel&) -> Index { return 0; },
                          [](const RandomFeatureTanhKernel& k) -> Index { return k.projection.cols(); },
                          [](const ExplicitFeatureKernel& k) -> Index { return k.input_dim; },
                          [](const PrecomputedKernel&) -> Index { return 1; },
                      },
                      kind_);
}

bool KernelSpec::has_features() const {
    return std::holds_alternative<RandomFeatureTanhKernel>(kind_) || std::holds_alternative<ExplicitFeatureKernel>(kind_);
}

bool KernelSpec::is_precomputed() const { return std::holds_alternative<PrecomputedKernel>(kind_); }

Index KernelSpec::feature_dim() const {
    if (const auto* k = std::get_if<RandomFeatureTanhKernel>(&kind_)) return k->projection.rows();
    if (const auto* k = std::get_if<ExplicitFeatureKernel>(&kind_)) return k->feature_dim;
    throw InvalidArgument("explicit features required (kernel '" + name() + "' has none)");
}

void KernelSpec::check_input(const MatrixRef& X, const char* what) const {
    const Index expected = input_dim();
    if (expected != 0 && X.rows() != expected)
        throw DimensionError(std::string(what) + ": input dimension d_x=" + std::to_string(X.rows()) +
                             " does not match kernel dimension " + std::to_string(expected));
    if (const auto* k = std::get_if<PrecomputedKernel>(&kind_))
        for (Index j = 0; j < X.cols(); ++j) precomputed_index(*k, X(0, j));
}

MatrixXd KernelSpec::features(const MatrixRef& X) const {
    check_input(X, "features");
    if (const auto* k = std::get_if<RandomFeatureTanhKernel>(&kind_)) {
        MatrixXd z = k->projection * X;
        return z.array().tanh().matrix();
    }
    if (const auto* k = std::get_if<ExplicitFeatureKernel>(&kind_)) {
        MatrixXd out(k->feature_dim, X.cols());
        for (Index j = 0; j < X.cols(); ++j) {
            VectorXd phi = k->feature(X.col(j));
            if (phi.size() != k->feature_dim)
                throw DimensionError("feature map '" + k->name + "' returned " + std::to_string(phi.size()) +
                                     " features, expected " + std::to_string(k->feature_dim));
            out.col(j) = phi;
        }
        return out;
    }
    throw InvalidArgument("explicit features required (kernel '" + name() + "' has none)");
}

double eval_kernel(const KernelSpec& spec, const VectorRef& x, const VectorRef& x2) {
    if (x.size() != x2.size())
        throw DimensionError("eval_kernel: dimension of x (" + std::to_string(x.size()) + ") differs from x' (" +
                             std::to_string(x2.size()) + ")");
    spec.check_input(x, "eval_kernel");
    return std::visit(Overloaded{
                          [&](const RbfKernel& k) { return std::exp(-(x - x2).squaredNorm() / k.bandwidth); },
                          [&](const RandomFeatureTanhKernel& k) {
                              const VectorXd a = (k.projection * x).array().tanh();
                              const VectorXd b = (k.projection * x2).array().tanh();
                              return a.dot(b);
                          },
                          [&](const ExplicitFeatureKernel& k) { return k.feature(x).dot(k.feature(x2)); },
                          [&](const PrecomputedKernel& k) {
                              return (*k.gram)(precomputed_index(k, x(0)), precomputed_index(k, x2(0)));
                          },
                      },
                      spec.kind());
}

MatrixXd gram(const KernelSpec& spec, const MatrixRef& X, const MatrixRef& X2) {
    if (X.cols() < 1 || X2.cols() < 1) throw DimensionError("gram: inputs must have at least one column");
    if (X.rows() != X2.rows())
        throw DimensionError("gram: input dimension d_x=" + std::to_string(X.rows()) + " differs from d_x'=" +
                             std::to_string(X2.rows()));
    spec.check_input(X, "gram");
    spec.check_input(X2, "gram");

    MatrixXd K(X.cols(), X2.cols());
    if (spec.has_features()) {
        const MatrixXd phi = spec.features(X);
        const MatrixXd phi2 = spec.features(X2);
        // Entry-wise dot products: every entry uses the same reduction order
        // regardless of how rows are scheduled.
        for (Index i = 0; i < K.rows(); ++i)
            for (Index j = 0; j < K.cols(); ++j) K(i, j) = phi.col(i).dot(phi2.col(j));
        return K;
    }
    if (const auto* k = std::get_if<RbfKernel>(&spec.kind())) {
        for (Index i = 0; i < K.rows(); ++i)
            for (Index j = 0; j < K.cols(); ++j)
                K(i, j) = std::exp(-(X.col(i) - X2.col(j)).squaredNorm() / k->bandwidth);
        return K;
    }
    const auto& k = std::get<PrecomputedKernel>(spec.kind());
    for (Index i = 0; i < K.rows(); ++i)
        for (Index j = 0; j < K.cols(); ++j)
            K(i, j) = (*k.gram)(precomputed_index(k, X(0, i)), precomputed_index(k, X2(0, j)));
    return K;
}

MatrixXd gram(const KernelSpec& spec, const MatrixRef& X) {
    MatrixXd K = gram(spec, X, X);
    K.triangularView<Eigen::StrictlyLower>() = K.transpose().triangularView<Eigen::StrictlyLower>();
    return K;
}

MatrixXd directional_mask(const MatrixRef& K, Index block, Index row_offset, Index col_offset) {
    if (block < 1) throw InvalidArgument("directional_mask: block size must be >= 1, got " + std::to_string(block));
    MatrixXd out = MatrixXd::Zero(K.rows(), K.cols());
    for (Index j = 0; j < K.cols(); ++j) {
        const Index col_block = (j + col_offset) / block;
        for (Index i = 0; i < K.rows(); ++i)
            if ((i + row_offset) / block < col_block) out(i, j) = K(i, j);
    }
    return out;
}

MatrixXd directional_mask(const MatrixRef& K, Index block) {
    if (K.rows() != K.cols()) throw DimensionError("directional_mask: matrix must be square");
    if (block < 1 || block > K.rows())
        throw InvalidArgument("directional_mask: block size " + std::to_string(block) + " outside [1, " +
                              std::to_string(K.rows()) + "]");
    return directional_mask(K, block, 0, 0);
}

MatrixXd lower_directional(const MatrixRef& K, Index block) { return directional_mask(K, block).transpose(); }

DecayDiagonal decay_diag(Index n, double eta, double gamma) {
    if (n < 1) throw InvalidArgument("decay_diag: n must be >= 1");
    DecayDiagonal d{n, eta, gamma, VectorXd(n)};
    const double base = 1.0 - eta * gamma;
    for (Index i = 0; i < n; ++i) d.diag(i) = std::pow(base, static_cast<double>(n - 1 - i));
    return d;
}

GramBundle GramBundle::build(MatrixXd K, Index block_size) {
    if (!is_symmetric_psd(K)) throw NumericalError("GramBundle: Gram matrix is not symmetric PSD");
    MatrixXd directional = directional_mask(K, block_size);
    return GramBundle{std::move(K), block_size, std::move(directional)};
}

bool is_symmetric_psd(const MatrixRef& K) {
    if (K.rows() != K.cols()) return false;
    if (K.size() == 0) return true;
    const double tol = 1e-8 * std::max(K.cwiseAbs().maxCoeff(), 0.0);
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > tol) return false;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(K, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() >= -tol;
}

}  // namespace okr
