#include <doctest.h>

#include "helpers.hpp"
#include "okr/error.hpp"
#include "okr/regression.hpp"
#include "okr/target_shift.hpp"

using namespace okr;
using namespace okr::testing;

namespace {

struct SampleStream {
    KernelSpec kernel;
    MatrixXd X, Y, Xstar;
};

SampleStream make_stream(std::uint64_t seed, Index n, Index d_y = 1) {
    Rng rng(seed);
    KernelSpec k = rff_kernel(rng, 2, 80, 1.0);
    return {k, rng.normal_matrix(2, n), rng.normal_matrix(d_y, n), rng.normal_matrix(2, 9)};
}

MatrixXd effective_oracle(const MatrixXd& K, const MatrixXd& Y, double eta, double gamma) {
    MatrixXd T = directional_mask(K, 1);
    T.diagonal().array() += 1.0 / eta;
    MatrixXd A = K;
    A.diagonal().array() += gamma;
    return Y * T.fullPivLu().inverse() * A;
}

}  // namespace

TEST_SUITE("target_shift") {

TEST_CASE("effective targets equal the explicit product") {
    const SampleStream s = make_stream(1, 15, 2);
    const MatrixXd K = gram(s.kernel, s.X);
    const TargetMatrix t = effective_targets(s.kernel, s.X, s.Y, 0.2, 0.5);
    CHECK(t.provenance == Provenance::Effective);
    CHECK(max_abs_diff(t.values, effective_oracle(K, s.Y, 0.2, 0.5)) < 1e-10);
}

TEST_CASE("offline learner on effective targets reproduces the online learner") {
    const SampleStream s = make_stream(2, 20, 2);
    for (double gamma : {0.1, 1.0}) {
        const TargetMatrix t = effective_targets(s.kernel, s.X, s.Y, 0.1, gamma);
        const MatrixXd off = offline_predict(s.kernel, s.X, t.values, gamma, s.Xstar);
        const MatrixXd on = online_closed_form(s.kernel, s.X, s.Y, 0.1, 0.0, s.Xstar);
        CHECK(max_abs_diff(off, on) < 1e-10 * std::max(1.0, max_abs(on)));
    }
}

TEST_CASE("effective target example with one sample") {
    // One sample: K^U = 0, so the effective target is eta (gamma + k(x, x)) y.
    MatrixXd K(1, 1), Y(1, 1);
    K << 1.0;
    Y << 3.0;
    CHECK(effective_targets_from_gram(K, Y, 0.5, 1.0).values(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("online residual") {
    const SampleStream s = make_stream(3, 8, 2);
    const MatrixXd Xn = s.X.leftCols(7), Yn = s.Y.leftCols(7);
    const VectorXd e = online_residual(s.kernel, Xn, Yn, 0.3, s.X.col(7), s.Y.col(7));
    const VectorXd oracle = online_closed_form(s.kernel, Xn, Yn, 0.3, 0.0, s.X.col(7)).col(0) - s.Y.col(7);
    CHECK(max_abs_diff(e, oracle) < 1e-12);
    const VectorXd first = online_residual(s.kernel, MatrixXd(2, 0), MatrixXd(2, 0), 0.3, s.X.col(0), s.Y.col(0));
    CHECK(max_abs_diff(first, -s.Y.col(0)) == 0.0);
}

TEST_CASE("one-step shift equals recomputation") {
    const SampleStream s = make_stream(4, 14, 2);
    const double eta = 0.25, gamma = 0.4;
    TargetMatrix t = effective_targets(s.kernel, s.X.leftCols(1), s.Y.leftCols(1), eta, gamma);
    for (Index n = 1; n < 14; ++n) {
        const MatrixXd Xn = s.X.leftCols(n), Yn = s.Y.leftCols(n);
        const VectorXd e = online_residual(s.kernel, Xn, Yn, eta, s.X.col(n), s.Y.col(n));
        t = shift_one_step(t, s.kernel, Xn, s.X.col(n), s.Y.col(n), e, eta, gamma);
        const MatrixXd oracle = effective_targets(s.kernel, s.X.leftCols(n + 1), s.Y.leftCols(n + 1), eta, gamma).values;
        REQUIRE(max_abs_diff(t.values, oracle) < 1e-10);
    }
}

TEST_CASE("one-step shift moves each past target by -eta e k(x_new, x_i)") {
    const SampleStream s = make_stream(5, 6);
    const double eta = 0.5, gamma = 0.0;
    const TargetMatrix t5 = effective_targets(s.kernel, s.X.leftCols(5), s.Y.leftCols(5), eta, gamma);
    const VectorXd e = online_residual(s.kernel, s.X.leftCols(5), s.Y.leftCols(5), eta, s.X.col(5), s.Y.col(5));
    const TargetMatrix t6 = shift_one_step(t5, s.kernel, s.X.leftCols(5), s.X.col(5), s.Y.col(5), e, eta, gamma);
    const MatrixXd kx = gram(s.kernel, s.X.col(5), s.X.leftCols(5));
    CHECK(max_abs_diff(t6.values.leftCols(5) - t5.values, -eta * e * kx) < 1e-12);
}

TEST_CASE("shift tracker follows the closed forms") {
    const SampleStream s = make_stream(6, 25, 2);
    ShiftTracker tracker(s.kernel, 0.2, 0.7);
    for (Index i = 0; i < 25; ++i) tracker.step(s.X.col(i), s.Y.col(i));
    CHECK(tracker.size() == 25);
    CHECK(max_abs_diff(tracker.effective().values, effective_targets(s.kernel, s.X, s.Y, 0.2, 0.7).values) < 1e-10);
    CHECK(max_abs_diff(tracker.predict(s.Xstar), online_closed_form(s.kernel, s.X, s.Y, 0.2, 0.0, s.Xstar)) < 1e-10);
}

TEST_CASE("provenance names") {
    CHECK(std::string(to_string(Provenance::True)) != to_string(Provenance::Effective));
    CHECK(std::string(to_string(Provenance::Corrected)) != to_string(Provenance::IterativeCorrected));
}

TEST_CASE("shape errors") {
    const SampleStream s = make_stream(7, 5);
    CHECK_THROWS_AS(effective_targets(s.kernel, s.X, MatrixXd::Zero(1, 4), 0.1, 0.1), DimensionError);
    CHECK_THROWS_AS(effective_targets(s.kernel, s.X, s.Y, 0.0, 0.1), InvalidArgument);
}

}
