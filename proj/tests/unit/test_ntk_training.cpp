#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "okr/error.hpp"
#include "okr/ntk_training.hpp"
#include "okr/target_correction.hpp"

using namespace okr;
using namespace okr::testing;

namespace {

OrderedDataset linear_stream(std::uint64_t seed, Index d_x, Index n, Index d_y) {
    Rng rng(seed);
    OrderedDataset d;
    d.X = rng.normal_matrix(d_x, n) / std::sqrt(static_cast<double>(d_x));
    d.Y = rng.normal_matrix(d_y, n);
    return d;
}

HyperParams params(double eta, double gamma, double gamma_o, Index block = 1) {
    HyperParams hp;
    hp.eta = eta;
    hp.gamma = gamma;
    hp.gamma_o = gamma_o;
    hp.block = block;
    return hp;
}

}  // namespace

TEST_SUITE("ntk_training") {

TEST_CASE("linear network with correction matches the kernel stream run") {
    // For a linear model the NTK is the linear kernel and the live outputs are
    // exactly the kernel online predictions, so targets must agree.
    const OrderedDataset d = linear_stream(1, 40, 24, 2);
    const MlpSpec spec{{40, 2}, Activation::Identity};
    for (Index block : {1, 2}) {
        CAPTURE(block);
        const HyperParams hp = params(0.3, 0.5, 0.05, block);
        NtkTrainOptions opt;
        opt.chunk = 6;
        opt.initial_weights = zero_weights(spec);
        const NtkTrainResult r =
            train_corrected(spec, d, nullptr, hp, NtkSchedule::FixedK, CorrectionMode::Iterative, opt);
        const IterativeCorrectionRun run = iterative_correction_run(d.X.transpose() * d.X, d.Y, hp, 6, block);
        CHECK(max_abs_diff(r.targets, run.z) < 1e-9);
        CHECK(r.refreshes == 1);
        CHECK(r.steps == 24 / block);
    }
}

TEST_CASE("one chunk without Tikhonov term lands on the ridge solution") {
    const OrderedDataset d = linear_stream(2, 30, 10, 1);
    const MlpSpec spec{{30, 1}, Activation::Identity};
    NtkTrainOptions opt;
    opt.chunk = 10;
    opt.initial_weights = zero_weights(spec);
    const NtkTrainResult r = train_corrected(spec, d, nullptr, params(0.2, 0.4, 0.0), NtkSchedule::FixedK,
                                             CorrectionMode::Iterative, opt);
    MatrixXd A = d.X.transpose() * d.X;
    A.diagonal().array() += 0.4;
    const MatrixXd ridge_w = d.Y * A.fullPivLu().solve(d.X.transpose());
    CHECK(max_abs_diff(r.weights[0], ridge_w) < 1e-8);
}

TEST_CASE("without correction the targets are untouched and no snapshot is taken") {
    const OrderedDataset d = linear_stream(3, 5, 12, 1);
    const MlpSpec spec{{5, 1}, Activation::Identity};
    NtkTrainOptions opt;
    opt.chunk = 4;
    opt.initial_weights = zero_weights(spec);
    const NtkTrainResult r =
        train_corrected(spec, d, nullptr, params(0.1, 1.0, 0.0, 2), NtkSchedule::FixedK, CorrectionMode::None, opt);
    CHECK(r.targets == d.Y);
    CHECK(r.refreshes == 0);
    SgdOptions sgd;
    sgd.block = 2;
    CHECK(r.weights[0] == sgd_run(KernelSpec::linear(5), d, 0.1, 0.0, sgd).final_state.W);
}

TEST_CASE("refresh schedules") {
    OrderedDataset d = linear_stream(4, 3, 18, 1);
    d.task_boundaries = {0, 6, 12};
    const MlpSpec spec{{3, 4, 1}, Activation::Tanh};
    NtkTrainOptions opt;
    opt.chunk = 3;
    opt.epochs = 2;
    const HyperParams hp = params(0.05, 0.5, 0.1);
    CHECK(train_corrected(spec, d, nullptr, hp, NtkSchedule::FixedK, CorrectionMode::Iterative, opt).refreshes == 1);
    CHECK(train_corrected(spec, d, nullptr, hp, NtkSchedule::RefreshPerEpoch, CorrectionMode::Iterative, opt)
              .refreshes == 2);
    CHECK(train_corrected(spec, d, nullptr, hp, NtkSchedule::RefreshPerTask, CorrectionMode::Iterative, opt)
              .refreshes == 6);
}

TEST_CASE("metric rows") {
    OrderedDataset d = linear_stream(5, 3, 20, 2);
    d.task_boundaries = {0, 10};
    OrderedDataset test = linear_stream(6, 3, 8, 2);
    test.labels.assign(8, 0);
    const MlpSpec spec{{3, 4, 2}, Activation::ReLU};
    NtkTrainOptions opt;
    opt.chunk = 5;
    opt.eval_every = 6;
    const NtkTrainResult r =
        train_corrected(spec, d, &test, params(0.05, 0.5, 0.1), NtkSchedule::RefreshPerTask, CorrectionMode::Iterative, opt);
    std::vector<Index> steps;
    for (const auto& row : r.trace) steps.push_back(row.step);
    CHECK(steps == std::vector<Index>{0, 6, 12, 18, 20});
    CHECK(r.trace[1].task_id == 0);
    CHECK(r.trace[2].task_id == 1);
    CHECK(r.trace.back().test_accuracy >= 0.0);
    CHECK(r.trace.back().test_mse ==
          doctest::Approx((mlp_forward(spec, r.weights, test.X) - test.Y).squaredNorm() / 16.0));

    const NtkTrainResult no_test =
        train_corrected(spec, d, nullptr, params(0.05, 0.5, 0.1), NtkSchedule::FixedK, CorrectionMode::None, opt);
    CHECK(std::isnan(no_test.trace.back().test_mse));

    std::ostringstream os;
    write_metrics_csv(no_test.trace, os);
    const std::string csv = os.str();
    CHECK(csv.rfind("step,task_id,epoch,train_mse,test_mse,test_accuracy\n", 0) == 0);
    CHECK(csv.find(",,\n") != std::string::npos);
}

TEST_CASE("deterministic for a fixed seed") {
    const OrderedDataset d = linear_stream(7, 3, 12, 1);
    const MlpSpec spec{{3, 8, 1}, Activation::Tanh};
    NtkTrainOptions opt;
    opt.chunk = 4;
    const HyperParams hp = params(0.05, 0.5, 0.1);
    const auto a = train_corrected(spec, d, nullptr, hp, NtkSchedule::FixedK, CorrectionMode::Iterative, opt);
    const auto b = train_corrected(spec, d, nullptr, hp, NtkSchedule::FixedK, CorrectionMode::Iterative, opt);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.targets == b.targets);
}

TEST_CASE("argument checks") {
    const OrderedDataset d = linear_stream(8, 3, 6, 1);
    const MlpSpec spec{{3, 1}, Activation::Identity};
    NtkTrainOptions opt;
    opt.chunk = 3;
    CHECK_THROWS_AS(train_corrected(spec, d, nullptr, params(0.1, 0.5, 0.1, 2), NtkSchedule::FixedK,
                                    CorrectionMode::Iterative, opt),
                    InvalidArgument);
    const MlpSpec wrong{{4, 1}, Activation::Identity};
    CHECK_THROWS_AS(train_corrected(wrong, d, nullptr, params(0.1, 0.5, 0.1), NtkSchedule::FixedK,
                                    CorrectionMode::None, opt),
                    DimensionError);
    CHECK(schedule_from_string("per_epoch") == NtkSchedule::RefreshPerEpoch);
    CHECK(correction_from_string("none") == CorrectionMode::None);
    CHECK_THROWS_AS(schedule_from_string("weekly"), InvalidArgument);
}

}
