#include <doctest.h>

#include "helpers.hpp"
#include "okr/error.hpp"
#include "okr/regression.hpp"

using namespace okr;
using namespace okr::testing;

namespace {

struct Problem {
    KernelSpec kernel;
    OrderedDataset train;
    MatrixXd Xstar;
};

Problem make_problem(std::uint64_t seed, Index n = 24, Index d_y = 2) {
    Rng rng(seed);
    KernelSpec k = rff_kernel(rng, 3, 60, 2.0);
    OrderedDataset d;
    d.X = rng.normal_matrix(3, n);
    d.Y = rng.normal_matrix(d_y, n);
    return {k, d, rng.normal_matrix(3, 7)};
}

// Straight-line SGD: one sample at a time, weights updated in place.
MatrixXd naive_sgd(const MatrixXd& phi, const MatrixXd& Y, double eta, double gamma) {
    MatrixXd W = MatrixXd::Zero(Y.rows(), phi.rows());
    for (Index i = 0; i < phi.cols(); ++i) {
        const VectorXd r = W * phi.col(i) - Y.col(i);
        W = (1.0 - eta * gamma) * W - eta * r * phi.col(i).transpose();
    }
    return W;
}

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("offline predictor equals the explicit ridge formula") {
    const Problem p = make_problem(1);
    const MatrixXd K = gram(p.kernel, p.train.X);
    MatrixXd A = K;
    A.diagonal().array() += 0.7;
    const MatrixXd oracle = p.train.Y * A.fullPivLu().inverse() * gram(p.kernel, p.train.X, p.Xstar);
    CHECK(max_abs_diff(offline_predict(p.kernel, p.train.X, p.train.Y, 0.7, p.Xstar), oracle) < 1e-10);
    const Predictor pred = Predictor::offline(p.kernel, p.train.X, p.train.Y, 0.7);
    CHECK(pred.form() == Predictor::Form::Offline);
    CHECK(max_abs_diff(pred(p.Xstar), oracle) < 1e-10);
}

TEST_CASE("offline ridge matches primal ridge in feature space") {
    const Problem p = make_problem(2);
    const MatrixXd phi = p.kernel.features(p.train.X);
    MatrixXd G = phi * phi.transpose();
    G.diagonal().array() += 0.3;
    const MatrixXd W = G.ldlt().solve(phi * p.train.Y.transpose()).transpose();
    const MatrixXd primal = W * p.kernel.features(p.Xstar);
    CHECK(max_abs_diff(offline_predict(p.kernel, p.train.X, p.train.Y, 0.3, p.Xstar), primal) < 1e-9);
}

TEST_CASE("online closed form equals a naive SGD pass") {
    const Problem p = make_problem(3);
    const MatrixXd phi = p.kernel.features(p.train.X);
    for (double gamma : {0.0, 0.2}) {
        CAPTURE(gamma);
        const MatrixXd W = naive_sgd(phi, p.train.Y, 0.1, gamma);
        const MatrixXd oracle = W * p.kernel.features(p.Xstar);
        const MatrixXd closed = online_closed_form(p.kernel, p.train.X, p.train.Y, 0.1, gamma, p.Xstar);
        CHECK(max_abs_diff(closed, oracle) < 1e-10);
        const SgdResult sgd = sgd_run(p.kernel, p.train, 0.1, gamma);
        CHECK(max_abs_diff(sgd.final_state.W, W) < 1e-12);
        CHECK(sgd.final_state.step == p.train.size());
    }
}

TEST_CASE("online closed form with decay weights early samples down") {
    const Problem p = make_problem(4, 10, 1);
    const MatrixXd K = gram(p.kernel, p.train.X);
    const double eta = 0.2, gamma = 0.5;
    const VectorXd d = decay_diag(10, eta, gamma).diag;
    MatrixXd T = directional_mask(K, 1) / (1.0 - eta * gamma);
    T.diagonal().array() += 1.0 / eta;
    const MatrixXd oracle = p.train.Y * d.asDiagonal() * T.fullPivLu().inverse();
    CHECK(max_abs_diff(online_coefficients(K, p.train.Y, eta, gamma), oracle) < 1e-10);
    CHECK_THROWS_AS(online_coefficients(K, p.train.Y, 2.0, 0.5), InvalidArgument);
}

TEST_CASE("mini-batch closed form equals block SGD") {
    const Problem p = make_problem(5);
    for (Index b : {1, 2, 3, 4, 8, 24}) {
        CAPTURE(b);
        SgdOptions opt;
        opt.block = b;
        const SgdResult sgd = sgd_run(p.kernel, p.train, 0.05, 0.0, opt);
        const MatrixXd closed = minibatch_closed_form(p.kernel, p.train.X, p.train.Y, 0.05, b, p.Xstar);
        CHECK(max_abs_diff(sgd.predictor(p.Xstar), closed) < 1e-10);
        CHECK(sgd.final_state.step == (p.train.size() + b - 1) / b);
    }
}

TEST_CASE("mini-batch with block 1 is the online learner") {
    const Problem p = make_problem(6);
    const MatrixXd K = gram(p.kernel, p.train.X);
    CHECK(max_abs_diff(minibatch_coefficients(K, p.train.Y, 0.3, 1), online_coefficients(K, p.train.Y, 0.3, 0.0)) <
          1e-12);
}

TEST_CASE("one sample online example") {
    // One sample, no decay: prediction is eta * y * k(x, x*).
    const KernelSpec k = KernelSpec::rbf(1.0);
    MatrixXd X(1, 1), Y(1, 1), Xs(1, 1);
    X << 0.0;
    Y << 2.0;
    Xs << 1.0;
    CHECK(online_closed_form(k, X, Y, 0.5, 0.0, Xs)(0, 0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("trajectory and initial weights") {
    const Problem p = make_problem(7, 6, 1);
    SgdOptions opt;
    opt.record_trajectory = true;
    opt.block = 2;
    opt.epochs = 2;
    const SgdResult r = sgd_run(p.kernel, p.train, 0.1, 0.0, opt);
    REQUIRE(r.trajectory.size() == 6);
    CHECK(r.trajectory.back().W == r.final_state.W);

    SgdOptions resume;
    resume.block = 2;
    resume.initial_weights = r.trajectory[2].W;
    CHECK(max_abs_diff(sgd_run(p.kernel, p.train, 0.1, 0.0, resume).final_state.W, r.final_state.W) < 1e-12);

    SgdOptions two;
    two.block = 2;
    const SgdResult rep = sgd_run(p.kernel, p.train.repeated(2), 0.1, 0.0, two);
    CHECK(max_abs_diff(rep.final_state.W, r.final_state.W) < 1e-12);
}

TEST_CASE("targets override replaces the dataset targets") {
    const Problem p = make_problem(8, 8, 1);
    OrderedDataset other = p.train;
    other.Y = MatrixXd::Constant(1, 8, 0.5);
    SgdOptions opt;
    opt.targets_override = other.Y;
    CHECK(sgd_run(p.kernel, p.train, 0.1, 0.0, opt).final_state.W == sgd_run(p.kernel, other, 0.1, 0.0).final_state.W);
}

TEST_CASE("argument checks") {
    const Problem p = make_problem(9, 5, 1);
    CHECK_THROWS_AS(sgd_run(KernelSpec::rbf(1.0), p.train, 0.1, 0.0), InvalidArgument);
    CHECK_THROWS_AS(sgd_run(p.kernel, p.train, 0.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(offline_predict(p.kernel, p.train.X, MatrixXd::Zero(1, 4), 1.0, p.Xstar), DimensionError);
    HyperParams hp;
    hp.eta = -1.0;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
}

TEST_CASE("dataset slicing") {
    OrderedDataset d;
    d.X = MatrixXd::Random(2, 6);
    d.Y = MatrixXd::Random(1, 6);
    d.labels = {0, 0, 1, 1, 2, 2};
    d.task_boundaries = {0, 2, 4};
    const OrderedDataset s = d.slice(1, 5);
    CHECK(s.size() == 4);
    CHECK(s.labels == std::vector<int>{0, 1, 1, 2});
    CHECK(s.X == d.X.middleCols(1, 4));
    const OrderedDataset r = d.repeated(3);
    CHECK(r.size() == 18);
    CHECK(r.X.middleCols(12, 6) == d.X);
}

TEST_CASE("predictor descriptor") {
    const Problem p = make_problem(10, 5, 1);
    const Predictor pred = Predictor::minibatch(p.kernel, p.train.X, p.train.Y, 0.5, 2);
    const auto j = pred.descriptor("data.csv", "coeffs.csv");
    CHECK(j["form"] == to_string(Predictor::Form::MinibatchClosedForm));
    CHECK(j["dataset"] == "data.csv");
    CHECK(j["coefficients_shape"][1] == 5);
}

}
