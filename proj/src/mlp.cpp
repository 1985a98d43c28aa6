#include "okr/mlp.hpp"

#include <cmath>

#include "okr/error.hpp"
#include "okr/rng.hpp"

namespace okr {

namespace {

MatrixXd activate(Activation a, const MatrixXd& z) {
    switch (a) {
        case Activation::ReLU: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative from the pre-activation z and post-activation h.
MatrixXd activation_slope(Activation a, const MatrixXd& z, const MatrixXd& h) {
    switch (a) {
        case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
        case Activation::Tanh: return (1.0 - h.array().square()).matrix();
        case Activation::Identity: return MatrixXd::Ones(z.rows(), z.cols());
    }
    return MatrixXd::Ones(z.rows(), z.cols());
}

struct ForwardPass {
    std::vector<MatrixXd> inputs;  // input of each layer
    std::vector<MatrixXd> pre;     // pre-activation of each hidden layer
    MatrixXd output;
};

ForwardPass forward_pass(const MlpSpec& spec, const MlpWeights& w, const MatrixRef& X) {
    ForwardPass fp;
    const Index L = spec.layers();
    fp.inputs.reserve(L);
    fp.pre.reserve(L - 1);
    MatrixXd a = X;
    for (Index l = 0; l + 1 < L; ++l) {
        MatrixXd z = w[l] * a;
        fp.inputs.push_back(std::move(a));
        a = activate(spec.activation, z);
        fp.pre.push_back(std::move(z));
    }
    fp.output = w[L - 1] * a;
    fp.inputs.push_back(std::move(a));
    return fp;
}

}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw InvalidArgument("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
    if (widths.size() < 2) throw InvalidArgument("mlp: need at least input and output widths");
    for (Index width : widths)
        if (width < 1) throw InvalidArgument("mlp: layer widths must be >= 1");
}

Index MlpSpec::parameter_count() const {
    Index p = 0;
    for (Index l = 0; l < layers(); ++l) p += widths[l] * widths[l + 1];
    return p;
}

MlpWeights init_weights(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed, Stream::MlpInit);
    MlpWeights w;
    for (Index l = 0; l < spec.layers(); ++l)
        w.push_back(rng.normal_matrix(spec.widths[l + 1], spec.widths[l]) /
                    std::sqrt(static_cast<double>(spec.widths[l])));
    return w;
}

MlpWeights zero_weights(const MlpSpec& spec) {
    spec.validate();
    MlpWeights w;
    for (Index l = 0; l < spec.layers(); ++l) w.push_back(MatrixXd::Zero(spec.widths[l + 1], spec.widths[l]));
    return w;
}

void check_weights(const MlpSpec& spec, const MlpWeights& w) {
    spec.validate();
    if (static_cast<Index>(w.size()) != spec.layers())
        throw DimensionError("mlp: expected " + std::to_string(spec.layers()) + " weight matrices, got " +
                             std::to_string(w.size()));
    for (Index l = 0; l < spec.layers(); ++l)
        if (w[l].rows() != spec.widths[l + 1] || w[l].cols() != spec.widths[l])
            throw DimensionError("mlp: weight " + std::to_string(l) + " has shape " + std::to_string(w[l].rows()) +
                                 "x" + std::to_string(w[l].cols()) + ", expected " +
                                 std::to_string(spec.widths[l + 1]) + "x" + std::to_string(spec.widths[l]));
}

VectorXd flatten(const MlpSpec& spec, const MlpWeights& w) {
    check_weights(spec, w);
    VectorXd theta(spec.parameter_count());
    Index offset = 0;
    for (const MatrixXd& m : w)
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) theta[offset++] = m(i, j);
    return theta;
}

MlpWeights unflatten(const MlpSpec& spec, const VectorRef& theta) {
    if (theta.size() != spec.parameter_count()) throw DimensionError("mlp: parameter vector has the wrong length");
    MlpWeights w = zero_weights(spec);
    Index offset = 0;
    for (MatrixXd& m : w)
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) m(i, j) = theta[offset++];
    return w;
}

MatrixXd mlp_forward(const MlpSpec& spec, const MlpWeights& w, const MatrixRef& X) {
    check_weights(spec, w);
    if (X.rows() != spec.input_dim()) throw DimensionError("mlp_forward: input dimension mismatch");
    return forward_pass(spec, w, X).output;
}

MatrixXd mlp_jacobian(const MlpSpec& spec, const MlpWeights& w, const VectorRef& x) {
    check_weights(spec, w);
    if (x.size() != spec.input_dim()) throw DimensionError("mlp_jacobian: input dimension mismatch");
    const ForwardPass fp = forward_pass(spec, w, x);
    const Index L = spec.layers();
    const Index d_y = spec.output_dim();

    std::vector<Index> offsets(L + 1, 0);
    for (Index l = 0; l < L; ++l) offsets[l + 1] = offsets[l] + spec.widths[l] * spec.widths[l + 1];

    MatrixXd J(d_y, offsets[L]);
    MatrixXd sens = MatrixXd::Identity(d_y, d_y);  // d f / d z_l, d_y x width
    for (Index l = L - 1; l >= 0; --l) {
        const VectorXd& a = fp.inputs[l];
        const Index fan_in = a.size();
        for (Index i = 0; i < sens.cols(); ++i)
            for (Index j = 0; j < fan_in; ++j) J.col(offsets[l] + i * fan_in + j) = sens.col(i) * a[j];
        if (l > 0) {
            const MatrixXd slope = activation_slope(spec.activation, fp.pre[l - 1], fp.inputs[l]);
            sens = (sens * w[l]) * slope.col(0).asDiagonal();
        }
    }
    return J;
}

MatrixXd mlp_sgd_step(const MlpSpec& spec, MlpWeights& w, const MatrixRef& X, const MatrixRef& Y, double eta) {
    check_weights(spec, w);
    if (X.rows() != spec.input_dim() || Y.rows() != spec.output_dim() || X.cols() != Y.cols())
        throw DimensionError("mlp_sgd_step: batch shape mismatch");
    const ForwardPass fp = forward_pass(spec, w, X);
    const Index L = spec.layers();
    MatrixXd residual = fp.output - Y;

    std::vector<MatrixXd> grads(L);
    MatrixXd delta = residual;
    for (Index l = L - 1; l >= 0; --l) {
        grads[l] = delta * fp.inputs[l].transpose();
        if (l > 0) {
            const MatrixXd slope = activation_slope(spec.activation, fp.pre[l - 1], fp.inputs[l]);
            delta = (w[l].transpose() * delta).cwiseProduct(slope);
        }
    }
    for (Index l = 0; l < L; ++l) w[l] -= eta * grads[l];
    return residual;
}

const MatrixXd& NtkSnapshot::gram(Index k) const {
    if (k < 0 || k >= static_cast<Index>(grams.size())) throw DimensionError("ntk snapshot: output index out of range");
    return grams[k];
}

Index NtkSnapshot::size() const { return grams.empty() ? 0 : grams.front().rows(); }

NtkSnapshot empirical_ntk_gram(const MlpSpec& spec, const MlpWeights& w, const MatrixRef& X, NtkMode mode,
                               Index taken_at) {
    check_weights(spec, w);
    if (X.rows() != spec.input_dim()) throw DimensionError("empirical_ntk_gram: input dimension mismatch");
    const Index n = X.cols();
    if (n > kMaxNtkSamples)
        throw InvalidArgument("empirical_ntk_gram: " + std::to_string(n) + " inputs exceed the storage guard of " +
                              std::to_string(kMaxNtkSamples));
    const ForwardPass fp = forward_pass(spec, w, X);
    const Index L = spec.layers();
    const Index d_y = spec.output_dim();

    std::vector<MatrixXd> input_grams(L);
    for (Index l = 0; l < L; ++l) input_grams[l] = fp.inputs[l].transpose() * fp.inputs[l];

    std::vector<MatrixXd> per_output(d_y, MatrixXd::Zero(n, n));
    for (Index k = 0; k < d_y; ++k) {
        // Sensitivity of output k to the pre-activation of layer l, one column per sample.
        MatrixXd sens = MatrixXd::Zero(d_y, n);
        sens.row(k).setOnes();
        for (Index l = L - 1; l >= 0; --l) {
            per_output[k] += (sens.transpose() * sens).cwiseProduct(input_grams[l]);
            if (l > 0) {
                const MatrixXd slope = activation_slope(spec.activation, fp.pre[l - 1], fp.inputs[l]);
                sens = (w[l].transpose() * sens).cwiseProduct(slope);
            }
        }
    }

    NtkSnapshot snap;
    snap.mode = mode;
    snap.taken_at = taken_at;
    if (mode == NtkMode::PerOutput) {
        snap.grams = std::move(per_output);
    } else {
        MatrixXd avg = MatrixXd::Zero(n, n);
        for (const MatrixXd& g : per_output) avg += g;
        avg /= static_cast<double>(d_y);
        snap.grams.push_back(std::move(avg));
    }
    for (MatrixXd& g : snap.grams) g.triangularView<Eigen::StrictlyLower>() = g.transpose();
    return snap;
}

}  // namespace okr
