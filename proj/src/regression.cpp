#include "okr/regression.hpp"

#include <cmath>

#include "okr/error.hpp"
#include "okr/linalg.hpp"

namespace okr {

void HyperParams::validate() const {
    if (!(eta > 0.0)) throw InvalidArgument("hyperparameters: eta must be > 0");
    if (!(gamma >= 0.0)) throw InvalidArgument("hyperparameters: gamma must be >= 0");
    if (!(gamma_o >= 0.0)) throw InvalidArgument("hyperparameters: gamma_o must be >= 0");
    if (block < 1) throw InvalidArgument("hyperparameters: block size must be >= 1");
}

void OrderedDataset::validate() const {
    if (X.cols() != Y.cols())
        throw DimensionError("dataset: X has " + std::to_string(X.cols()) + " columns but Y has " +
                             std::to_string(Y.cols()));
    if (!labels.empty() && static_cast<Index>(labels.size()) != X.cols())
        throw DimensionError("dataset: label count does not match sample count");
    for (std::size_t i = 0; i < task_boundaries.size(); ++i) {
        const Index b = task_boundaries[i];
        if (b < 0 || b >= std::max<Index>(X.cols(), 1) || (i > 0 && b <= task_boundaries[i - 1]))
            throw InvalidArgument("dataset: task boundaries must be strictly increasing indices");
    }
}

OrderedDataset OrderedDataset::slice(Index begin, Index end) const {
    if (begin < 0 || end > size() || begin > end) throw DimensionError("dataset slice out of range");
    OrderedDataset out;
    out.X = X.middleCols(begin, end - begin);
    out.Y = Y.middleCols(begin, end - begin);
    if (has_labels()) out.labels.assign(labels.begin() + begin, labels.begin() + end);
    for (Index b : task_boundaries)
        if (b >= begin && b < end) out.task_boundaries.push_back(b - begin);
    if (!out.task_boundaries.empty() && out.task_boundaries.front() != 0)
        out.task_boundaries.insert(out.task_boundaries.begin(), 0);
    return out;
}

OrderedDataset OrderedDataset::prefix(Index n) const { return slice(0, n); }

OrderedDataset OrderedDataset::repeated(Index epochs) const {
    if (epochs < 1) throw InvalidArgument("dataset: epochs must be >= 1");
    OrderedDataset out;
    const Index n = size();
    out.X.resize(X.rows(), n * epochs);
    out.Y.resize(Y.rows(), n * epochs);
    for (Index e = 0; e < epochs; ++e) {
        out.X.middleCols(e * n, n) = X;
        out.Y.middleCols(e * n, n) = Y;
        if (has_labels()) out.labels.insert(out.labels.end(), labels.begin(), labels.end());
        for (Index b : task_boundaries) out.task_boundaries.push_back(e * n + b);
    }
    return out;
}

MatrixXd offline_coefficients(const MatrixRef& K, const MatrixRef& Y, double gamma) {
    if (K.rows() != Y.cols()) throw DimensionError("offline: Gram size does not match target count");
    MatrixXd A = K;
    A.diagonal().array() += gamma;
    return SpdSolver(A, "offline_predict (gamma I + K)").solve_right(Y);
}

MatrixXd online_coefficients(const MatrixRef& K, const MatrixRef& Y, double eta, double gamma) {
    if (!(eta > 0.0)) throw InvalidArgument("online_closed_form: eta must be > 0");
    if (K.rows() != Y.cols()) throw DimensionError("online: Gram size does not match target count");
    const Index n = K.rows();
    const double decay = 1.0 - eta * gamma;
    if (std::abs(decay) < 1e-12) throw InvalidArgument("online_closed_form: degenerate decay (eta * gamma = 1)");
    MatrixXd T = directional_mask(K, 1);
    if (gamma != 0.0) T /= decay;
    T.diagonal().array() += 1.0 / eta;
    MatrixXd scaled = Y;
    if (gamma != 0.0) scaled = Y * decay_diag(n, eta, gamma).diag.asDiagonal();
    return solve_upper_right(scaled, T);
}

MatrixXd minibatch_coefficients(const MatrixRef& K, const MatrixRef& Y, double eta, Index block) {
    if (!(eta > 0.0)) throw InvalidArgument("minibatch_closed_form: eta must be > 0");
    if (K.rows() != Y.cols()) throw DimensionError("minibatch: Gram size does not match target count");
    return solve_upper_right(Y, online_system(directional_mask(K, block), eta));
}

MatrixXd offline_predict(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double gamma,
                         const MatrixRef& Xstar) {
    return Predictor::offline(kernel, X, Y, gamma)(Xstar);
}

MatrixXd online_closed_form(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                            double gamma, const MatrixRef& Xstar) {
    return Predictor::online(kernel, X, Y, eta, gamma)(Xstar);
}

MatrixXd minibatch_closed_form(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               Index block, const MatrixRef& Xstar) {
    return Predictor::minibatch(kernel, X, Y, eta, block)(Xstar);
}

Predictor Predictor::offline(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double gamma) {
    if (!(gamma >= 0.0)) throw InvalidArgument("offline_predict: gamma must be >= 0");
    Predictor p(Form::Offline, kernel);
    p.X_ = X;
    p.coefficients_ = offline_coefficients(gram(kernel, X), Y, gamma);
    p.gamma_ = gamma;
    return p;
}

Predictor Predictor::online(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                            double gamma) {
    Predictor p(Form::OnlineClosedForm, kernel);
    p.X_ = X;
    p.coefficients_ = online_coefficients(gram(kernel, X), Y, eta, gamma);
    p.eta_ = eta;
    p.gamma_ = gamma;
    return p;
}

Predictor Predictor::minibatch(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               Index block) {
    if (block < 1 || block > X.cols())
        throw InvalidArgument("minibatch_closed_form: block size " + std::to_string(block) + " out of range");
    Predictor p(Form::MinibatchClosedForm, kernel);
    p.X_ = X;
    p.coefficients_ = minibatch_coefficients(gram(kernel, X), Y, eta, block);
    p.eta_ = eta;
    p.block_ = block;
    return p;
}

Predictor Predictor::explicit_weights(const KernelSpec& kernel, MatrixXd W) {
    if (W.cols() != kernel.feature_dim()) throw DimensionError("explicit weights: column count must equal d_phi");
    Predictor p(Form::ExplicitWeights, kernel);
    p.coefficients_ = std::move(W);
    return p;
}

MatrixXd Predictor::operator()(const MatrixRef& Xstar) const {
    if (form_ == Form::ExplicitWeights) return coefficients_ * kernel_.features(Xstar);
    return coefficients_ * gram(kernel_, X_, Xstar);
}

std::string to_string(Predictor::Form form) {
    switch (form) {
        case Predictor::Form::Offline: return "offline";
        case Predictor::Form::OnlineClosedForm: return "online_closed_form";
        case Predictor::Form::MinibatchClosedForm: return "minibatch_closed_form";
        case Predictor::Form::ExplicitWeights: return "explicit_weights";
    }
    return "unknown";
}

nlohmann::json Predictor::descriptor(const std::string& dataset_ref, const std::string& coefficients_ref) const {
    nlohmann::json j;
    j["form"] = to_string(form_);
    j["kernel"] = kernel_.name();
    j["hyperparameters"] = {{"eta", eta_}, {"gamma", gamma_}, {"block", block_}};
    j["dataset"] = dataset_ref;
    j["coefficients"] = coefficients_ref;
    j["coefficients_shape"] = {coefficients_.rows(), coefficients_.cols()};
    return j;
}

SgdResult sgd_run(const KernelSpec& kernel, const OrderedDataset& data, double eta, double gamma,
                  const SgdOptions& options) {
    data.validate();
    if (!kernel.has_features()) throw InvalidArgument("sgd_run: explicit features required");
    if (!(eta > 0.0)) throw InvalidArgument("sgd_run: eta must be > 0");
    if (options.block < 1) throw InvalidArgument("sgd_run: block size must be >= 1");
    if (options.epochs < 1) throw InvalidArgument("sgd_run: epochs must be >= 1");

    const MatrixXd& Y = options.targets_override ? *options.targets_override : data.Y;
    if (Y.cols() != data.size() || Y.rows() != data.output_dim())
        throw DimensionError("sgd_run: targets override must match the dataset's target shape");

    const MatrixXd phi = kernel.features(data.X);
    const Index n = data.size();
    MatrixXd W = options.initial_weights ? *options.initial_weights : MatrixXd::Zero(Y.rows(), phi.rows());
    if (W.rows() != Y.rows() || W.cols() != phi.rows())
        throw DimensionError("sgd_run: initial weights must be d_y x d_phi");

    std::vector<WeightState> trajectory;
    Index step = 0;
    for (Index epoch = 0; epoch < options.epochs; ++epoch) {
        for (Index start = 0; start < n; start += options.block) {
            const Index len = std::min(options.block, n - start);
            const auto Phi = phi.middleCols(start, len);
            MatrixXd out = W * Phi;
            MatrixXd residual = out - Y.middleCols(start, len);
            MatrixXd grad = residual * Phi.transpose();
            if (gamma != 0.0) grad += gamma * W;
            W -= eta * grad;
            ++step;
            if (options.record_trajectory) trajectory.push_back({W, step});
        }
    }
    WeightState final_state{W, step};
    return SgdResult{std::move(trajectory), final_state, Predictor::explicit_weights(kernel, std::move(W))};
}

}  // namespace okr
