#include "okr/ntk_training.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "okr/error.hpp"
#include "okr/linalg.hpp"
#include "okr/metrics.hpp"
#include "okr/target_correction.hpp"

namespace okr {

const char* to_string(NtkSchedule s) {
    switch (s) {
        case NtkSchedule::FixedK: return "fixed";
        case NtkSchedule::RefreshPerTask: return "per_task";
        case NtkSchedule::RefreshPerEpoch: return "per_epoch";
    }
    return "unknown";
}

const char* to_string(CorrectionMode c) { return c == CorrectionMode::None ? "none" : "iterative"; }

NtkSchedule schedule_from_string(const std::string& name) {
    if (name == "fixed") return NtkSchedule::FixedK;
    if (name == "per_task") return NtkSchedule::RefreshPerTask;
    if (name == "per_epoch") return NtkSchedule::RefreshPerEpoch;
    throw InvalidArgument("unknown NTK schedule '" + name + "' (expected fixed, per_task or per_epoch)");
}

CorrectionMode correction_from_string(const std::string& name) {
    if (name == "none") return CorrectionMode::None;
    if (name == "iterative") return CorrectionMode::Iterative;
    throw InvalidArgument("unknown correction mode '" + name + "' (expected none or iterative)");
}

namespace {

// Ridge factor of the snapshot Gram over the current past, grown chunk by chunk.
class PastFactor {
public:
    explicit PastFactor(double gamma) : gamma_(gamma), chol_(gamma) {}

    void reset() { chol_ = IncrementalCholesky(gamma_); }

    void extend_to(const MatrixXd& K, Index p) {
        if (chol_.size() > p) reset();
        const Index have = chol_.size();
        if (have == p) return;
        chol_.append(K.block(0, have, have, p - have), K.block(have, have, p - have, p - have),
                     "ntk correction (gamma I + K_pp)");
    }

    [[nodiscard]] MatrixXd solve(const MatrixRef& B) const { return chol_.solve(B); }

private:
    double gamma_;
    IncrementalCholesky chol_;
};

}  // namespace

NtkTrainResult train_corrected(const MlpSpec& spec, const OrderedDataset& train, const OrderedDataset* test,
                               const HyperParams& hp, NtkSchedule schedule, CorrectionMode correction,
                               const NtkTrainOptions& options) {
    spec.validate();
    hp.validate();
    train.validate();
    if (train.input_dim() != spec.input_dim() || train.output_dim() != spec.output_dim())
        throw DimensionError("train_corrected: dataset shape does not match the network");
    if (test && (test->input_dim() != spec.input_dim() || test->output_dim() != spec.output_dim()))
        throw DimensionError("train_corrected: test set shape does not match the network");
    if (options.epochs < 1 || options.eval_every < 1 || options.chunk < 1)
        throw InvalidArgument("train_corrected: epochs, eval_every and chunk must be >= 1");
    if (options.chunk % hp.block != 0)
        throw InvalidArgument("train_corrected: correction chunk must be a multiple of the SGD batch size");

    const Index n = train.size();
    std::vector<Index> starts = train.task_boundaries;
    if (starts.empty() || starts.front() != 0) starts.insert(starts.begin(), 0);
    std::vector<Index> ends(starts.begin() + 1, starts.end());
    ends.push_back(n);

    NtkTrainResult result;
    result.weights = options.initial_weights ? *options.initial_weights : init_weights(spec, hp.seed);
    check_weights(spec, result.weights);
    result.targets = train.Y;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto record = [&](Index task, Index epoch) {
        MetricsRow row;
        row.step = result.steps;
        row.task_id = task;
        row.epoch = epoch;
        row.train_mse = mse(mlp_forward(spec, result.weights, train.X), train.Y);
        row.test_mse = nan;
        row.test_accuracy = nan;
        if (test && test->size() > 0) {
            const MatrixXd pred = mlp_forward(spec, result.weights, test->X);
            row.test_mse = mse(pred, test->Y);
            if (test->has_labels()) row.test_accuracy = argmax_accuracy(pred, test->Y);
        }
        result.trace.push_back(row);
    };

    std::optional<NtkSnapshot> snapshot;
    PastFactor past(hp.gamma);
    auto refresh = [&](Index covered) {
        snapshot = empirical_ntk_gram(spec, result.weights, train.X.leftCols(covered), options.ntk_mode,
                                      result.steps);
        past.reset();
        ++result.refreshes;
    };

    record(0, 0);
    for (Index epoch = 0; epoch < options.epochs; ++epoch) {
        for (std::size_t t = 0; t < starts.size(); ++t) {
            const Index task = static_cast<Index>(t);
            if (correction == CorrectionMode::Iterative) {
                const bool first = !snapshot.has_value();
                if (schedule == NtkSchedule::RefreshPerTask) refresh(ends[t]);
                else if (first || (schedule == NtkSchedule::RefreshPerEpoch && t == 0)) refresh(n);
            }
            for (Index cs = starts[t]; cs < ends[t]; cs += options.chunk) {
                const Index bc = std::min(options.chunk, ends[t] - cs);
                if (correction == CorrectionMode::Iterative) {
                    const MatrixXd& K = snapshot->gram();
                    past.extend_to(K, cs);
                    CorrectionBlocks blocks;
                    blocks.past_size = cs;
                    blocks.k_nn = K.block(cs, cs, bc, bc);
                    blocks.k_pn = K.block(0, cs, cs, bc);
                    blocks.past_solve = past.solve(blocks.k_pn);
                    const MatrixXd f_on = mlp_forward(spec, result.weights, train.X.middleCols(cs, bc));
                    const MatrixXd f_off = train.Y.leftCols(cs) * blocks.past_solve;
                    result.targets.middleCols(cs, bc) =
                        solve_correction(blocks, train.Y.middleCols(cs, bc), f_on, f_off, hp, hp.block).z_new;
                }
                for (Index bs = cs; bs < cs + bc; bs += hp.block) {
                    const Index len = std::min(hp.block, cs + bc - bs);
                    mlp_sgd_step(spec, result.weights, train.X.middleCols(bs, len),
                                 result.targets.middleCols(bs, len), hp.eta);
                    ++result.steps;
                    if (result.steps % options.eval_every == 0) record(task, epoch);
                }
            }
        }
    }
    if (result.trace.back().step != result.steps)
        record(static_cast<Index>(starts.size()) - 1, options.epochs - 1);
    return result;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
    out << "step,task_id,epoch,train_mse,test_mse,test_accuracy\n";
    for (const MetricsRow& r : rows)
        out << r.step << ',' << r.task_id << ',' << r.epoch << ',' << format_double(r.train_mse) << ','
            << format_double(r.test_mse) << ',' << format_double(r.test_accuracy) << '\n';
}

}  // namespace okr
