#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "okr/mlp.hpp"
#include "okr/regression.hpp"

namespace okr {

/// When the empirical-NTK snapshot is retaken.
enum class NtkSchedule { FixedK, RefreshPerTask, RefreshPerEpoch };
enum class CorrectionMode { None, Iterative };

const char* to_string(NtkSchedule s);
const char* to_string(CorrectionMode c);
NtkSchedule schedule_from_string(const std::string& name);
CorrectionMode correction_from_string(const std::string& name);

struct MetricsRow {
    Index step = 0;
    Index task_id = 0;
    Index epoch = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double test_accuracy = 0.0;  // NaN when the test set has no labels
};

struct NtkTrainOptions {
    Index epochs = 1;
    Index chunk = 20;       // samples per correction chunk; a multiple of hp.block
    Index eval_every = 16;  // updates between metric rows
    NtkMode ntk_mode = NtkMode::TraceAveraged;
    /// Starting weights; drawn from init_weights(spec, hp.seed) when absent.
    std::optional<MlpWeights> initial_weights;
};

struct NtkTrainResult {
    std::vector<MetricsRow> trace;
    MlpWeights weights;
    MatrixXd targets;  // targets of the last pass (Y, or the corrected Z)
    Index steps = 0;
    Index refreshes = 0;
};

/// Mini-batch SGD of an MLP on the ordered stream, batches of hp.block taken
/// within correction chunks that restart at each task boundary. With
/// CorrectionMode::Iterative each chunk's targets are replaced, before the
/// chunk is trained on, by the iterative correction computed from the current
/// NTK snapshot: live network outputs as the online prediction, the snapshot's
/// ridge fit (hp.gamma) on the past true targets as the offline prediction.
/// The past is everything before the chunk in the current pass.
NtkTrainResult train_corrected(const MlpSpec& spec, const OrderedDataset& train, const OrderedDataset* test,
                               const HyperParams& hp, NtkSchedule schedule, CorrectionMode correction,
                               const NtkTrainOptions& options = {});

/// Header `step,task_id,epoch,train_mse,test_mse,test_accuracy`.
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);

}  // namespace okr
