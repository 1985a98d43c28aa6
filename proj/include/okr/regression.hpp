#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "okr/kernel.hpp"

namespace okr {

/// Learning-rate, ridge and block parameters shared by every learner.
struct HyperParams {
    double eta = 0.5;       // learning rate
    double gamma = 1.0;     // offline ridge
    double gamma_o = 0.0;   // Tikhonov term of the block-wise correction loss
    Index block = 1;        // mini-batch / directional block size
    std::uint64_t seed = 0;

    void validate() const;
};

/// Inputs and targets in presentation order. Column order is the stream
/// order; reordering produces a new dataset.
struct OrderedDataset {
    MatrixXd X;                        // d_x x n
    MatrixXd Y;                        // d_y x n
    std::vector<int> labels;           // optional class ids, one per column
    std::vector<Index> task_boundaries;  // start index of each task (first entry 0) when present

    [[nodiscard]] Index size() const noexcept { return X.cols(); }
    [[nodiscard]] Index input_dim() const noexcept { return X.rows(); }
    [[nodiscard]] Index output_dim() const noexcept { return Y.rows(); }
    [[nodiscard]] bool has_labels() const noexcept { return !labels.empty(); }

    void validate() const;
    /// First n samples.
    [[nodiscard]] OrderedDataset prefix(Index n) const;
    /// Columns [begin, end).
    [[nodiscard]] OrderedDataset slice(Index begin, Index end) const;
    /// The stream repeated `epochs` times; multi-epoch training is single-pass
    /// training on this sequence.
    [[nodiscard]] OrderedDataset repeated(Index epochs) const;
};

struct WeightState {
    MatrixXd W;  // d_y x d_phi
    Index step = 0;
};

/// A trained predictor. Every kernel form stores dual coefficients A so that
/// f(X*) = A k(X, X*); explicit weights evaluate W phi(X*).
class Predictor {
public:
    enum class Form { Offline, OnlineClosedForm, MinibatchClosedForm, ExplicitWeights };

    static Predictor offline(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double gamma);
    static Predictor online(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                            double gamma);
    static Predictor minibatch(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               Index block);
    static Predictor explicit_weights(const KernelSpec& kernel, MatrixXd W);

    [[nodiscard]] MatrixXd operator()(const MatrixRef& Xstar) const;

    [[nodiscard]] Form form() const noexcept { return form_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    /// Dual coefficients (kernel forms) or the weight matrix (ExplicitWeights).
    [[nodiscard]] const MatrixXd& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] double eta() const noexcept { return eta_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] Index block() const noexcept { return block_; }

    /// JSON descriptor: form tag, hyperparameters, kernel name and references
    /// to the dataset and coefficient files.
    [[nodiscard]] nlohmann::json descriptor(const std::string& dataset_ref, const std::string& coefficients_ref) const;

private:
    Predictor(Form form, KernelSpec kernel) : form_(form), kernel_(std::move(kernel)) {}

    Form form_;
    KernelSpec kernel_;
    MatrixXd X_;
    MatrixXd coefficients_;
    double eta_ = 0.0;
    double gamma_ = 0.0;
    Index block_ = 1;
};

std::string to_string(Predictor::Form form);

/// Dual coefficients of the offline ridge predictor: Y (gamma I + K)^{-1}.
MatrixXd offline_coefficients(const MatrixRef& K, const MatrixRef& Y, double gamma);
/// Dual coefficients of the sample-by-sample online predictor:
/// Y D_n (1/eta I + 1/(1 - eta gamma) K^U)^{-1}. Throws on eta * gamma = 1.
MatrixXd online_coefficients(const MatrixRef& K, const MatrixRef& Y, double eta, double gamma);
/// Dual coefficients of the mini-batch online predictor: Y (1/eta I + K^{bU})^{-1}.
MatrixXd minibatch_coefficients(const MatrixRef& K, const MatrixRef& Y, double eta, Index block);

/// Y (gamma I + K(X, X))^{-1} k(X, X*).
MatrixXd offline_predict(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double gamma,
                         const MatrixRef& Xstar);
/// Predictor after one online pass with weight decay gamma, from W = 0.
MatrixXd online_closed_form(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                            double gamma, const MatrixRef& Xstar);
/// Predictor after one mini-batch online pass (no weight decay), from W = 0.
MatrixXd minibatch_closed_form(const KernelSpec& kernel, const MatrixRef& X, const MatrixRef& Y, double eta,
                               Index block, const MatrixRef& Xstar);

struct SgdOptions {
    Index block = 1;
    Index epochs = 1;
    bool record_trajectory = false;
    std::optional<MatrixXd> initial_weights;
    /// Replaces the dataset targets column for column.
    std::optional<MatrixXd> targets_override;
};

struct SgdResult {
    std::vector<WeightState> trajectory;  // W after every update, when recorded
    WeightState final_state;
    Predictor predictor;
};

/// Plain SGD in feature space: per consecutive chunk of `block` samples,
/// W <- W - eta ((W Phi - Y) Phi^T + gamma W).
SgdResult sgd_run(const KernelSpec& kernel, const OrderedDataset& data, double eta, double gamma,
                  const SgdOptions& options = {});

}  // namespace okr
