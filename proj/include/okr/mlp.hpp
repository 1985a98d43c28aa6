#pragma once

#include <cstdint>
#include <vector>

#include "okr/kernel.hpp"

namespace okr {

enum class Activation { ReLU, Tanh, Identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected network without bias terms. widths = {d_x, h_1, ..., d_y};
/// two entries give a linear model. The activation is applied after every
/// hidden layer, never after the output layer.
struct MlpSpec {
    std::vector<Index> widths;
    Activation activation = Activation::ReLU;

    void validate() const;
    [[nodiscard]] Index layers() const noexcept { return static_cast<Index>(widths.size()) - 1; }
    [[nodiscard]] Index input_dim() const { return widths.front(); }
    [[nodiscard]] Index output_dim() const { return widths.back(); }
    [[nodiscard]] Index parameter_count() const;
};

/// One matrix per layer; layer l maps widths[l] to widths[l + 1].
using MlpWeights = std::vector<MatrixXd>;

/// Independent N(0, 1/fan_in) entries drawn from the MlpInit stream of `seed`.
MlpWeights init_weights(const MlpSpec& spec, std::uint64_t seed);
MlpWeights zero_weights(const MlpSpec& spec);
void check_weights(const MlpSpec& spec, const MlpWeights& w);

/// Parameters in Jacobian column order: layer by layer, each matrix row-major.
VectorXd flatten(const MlpSpec& spec, const MlpWeights& w);
MlpWeights unflatten(const MlpSpec& spec, const VectorRef& theta);

/// d_y x n outputs for the columns of X.
MatrixXd mlp_forward(const MlpSpec& spec, const MlpWeights& w, const MatrixRef& X);

/// d_y x P Jacobian of the outputs at x with respect to every weight, by
/// reverse mode. The ReLU derivative at 0 is taken as 0.
MatrixXd mlp_jacobian(const MlpSpec& spec, const MlpWeights& w, const VectorRef& x);

/// One SGD step on 1/2 |f(X) - Y|_F^2 over the columns of the batch (summed,
/// not averaged). Returns the pre-update residual f(X) - Y.
MatrixXd mlp_sgd_step(const MlpSpec& spec, MlpWeights& w, const MatrixRef& X, const MatrixRef& Y, double eta);

enum class NtkMode { PerOutput, TraceAveraged };

inline constexpr Index kMaxNtkSamples = 4096;

/// Empirical NTK Gram over a fixed set of inputs.
struct NtkSnapshot {
    NtkMode mode = NtkMode::TraceAveraged;
    std::vector<MatrixXd> grams;  // one per output (PerOutput) or a single averaged Gram
    Index taken_at = 0;           // update count when the snapshot was taken

    /// The averaged Gram, or the Gram of output `k` in PerOutput mode.
    [[nodiscard]] const MatrixXd& gram(Index k = 0) const;
    [[nodiscard]] Index size() const;
};

/// Gram(i, j) = <J_k(x_i), J_k(x_j)> per output k, or its mean over k.
/// Assembled layer by layer from backpropagated output sensitivities and
/// layer inputs, without forming Jacobians. Throws InvalidArgument past
/// kMaxNtkSamples inputs.
NtkSnapshot empirical_ntk_gram(const MlpSpec& spec, const MlpWeights& w, const MatrixRef& X,
                               NtkMode mode = NtkMode::TraceAveraged, Index taken_at = 0);

}  // namespace okr
