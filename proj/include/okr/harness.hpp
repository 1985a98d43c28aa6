#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "okr/json_util.hpp"
#include "okr/mlp.hpp"
#include "okr/ntk_training.hpp"
#include "okr/regression.hpp"
#include "okr/target_correction.hpp"
#include "okr/target_shift.hpp"
#include "okr/tasks.hpp"

namespace okr {

/// Kernel descriptor as it appears in configs. Random kernels draw their
/// parameters from the Features stream of the run seed.
struct KernelConfig {
    std::string kind = "random_fourier";  // rbf | random_feature_tanh | random_fourier | linear
    double bandwidth = 0.1;               // rbf and random_fourier
    Index d_j = 100;                      // random_feature_tanh
    Index features = 200;                 // random_fourier
};

KernelSpec build_kernel(const KernelConfig& cfg, Index input_dim, std::uint64_t seed);

enum class LearnerKind { Offline, OnlineTrue, OnlineCorrected, OnlineIterCorrected, CumulativeReplay, SgdMlp };

const char* to_string(LearnerKind k);
LearnerKind learner_from_string(const std::string& name);

struct MlpConfig {
    std::vector<Index> hidden = {100};
    Activation activation = Activation::ReLU;
    NtkSchedule schedule = NtkSchedule::RefreshPerTask;
    CorrectionMode correction = CorrectionMode::Iterative;
    Index epochs = 1;
};

struct LearnerConfig {
    LearnerKind kind = LearnerKind::Offline;
    std::string tag;                // defaults to the kind name
    std::optional<HyperParams> hp;  // overrides the experiment hp
    MlpConfig mlp;                  // sgd_mlp only
};

/// Every field has a default. Online kernel learners train without weight
/// decay; hp.gamma is the offline ridge they are compared or corrected
/// against.
struct ExperimentConfig {
    TaskConfig task;
    KernelConfig kernel;
    std::vector<LearnerConfig> learners = {LearnerConfig{}};
    HyperParams hp;
    Index chunk = 20;
    Index eval_every = 16;
    std::vector<std::uint64_t> seeds = {0};
};

json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const json& j);
ExperimentConfig load_experiment_config(const std::string& path);

struct CurveRecord {
    std::uint64_t seed = 0;
    Index step = 0;
    std::string learner;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double test_accuracy = 0.0;  // NaN for regression tasks

    bool operator==(const CurveRecord& o) const;
};

struct SummaryRow {
    std::string learner;
    std::string metric;  // final_train_mse | final_test_mse | final_test_accuracy
    double mean = 0.0;
    double sem = 0.0;  // sample standard deviation / sqrt(seeds); 0 for one seed
    Index seeds = 0;
};

struct ExperimentResult {
    std::vector<CurveRecord> records;  // sorted by (seed, learner order, step)
    std::vector<SummaryRow> summary;
};

/// Final artifacts of one learner on one seed, for coefficient dumps.
struct LearnerArtifacts {
    std::string learner;
    MatrixXd dual;     // final dual coefficients (kernel learners)
    MatrixXd targets;  // targets the learner trained on
    Provenance provenance = Provenance::True;
    std::vector<CorrectionCoefficients> correction;  // per chunk, online_iter_corrected
    MlpWeights weights;                              // sgd_mlp
    std::vector<MetricsRow> metrics;                 // sgd_mlp
};

struct LearnerRun {
    std::vector<CurveRecord> records;
    LearnerArtifacts artifacts;
};

/// Runs one learner on generated task data. Errors carry the seed, learner
/// and step in their message.
LearnerRun run_learner(const ExperimentConfig& cfg, const LearnerConfig& learner, const TaskData& task,
                       std::uint64_t seed);

/// All learners over all seeds; seeds run concurrently.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<SummaryRow> summarize(const std::vector<CurveRecord>& records);
json to_json(const std::vector<SummaryRow>& summary);

enum class CurveFormat { Csv, Json };

void export_curves(const std::vector<CurveRecord>& records, std::ostream& out, CurveFormat format);
void export_curves(const std::vector<CurveRecord>& records, const std::string& path, CurveFormat format);
std::vector<CurveRecord> import_curves(const std::string& path, CurveFormat format);

struct EquivalenceCheck {
    std::string name;
    std::string identity;
    double abs_deviation = 0.0;
    double scaled_deviation = 0.0;  // max|a - b| / max(1, max|reference|)
    double threshold = 0.0;
    bool passed = false;
    std::string error;  // set when the check could not be evaluated
    std::string note;
};

struct EquivalenceReport {
    std::vector<EquivalenceCheck> checks;
    [[nodiscard]] bool passed() const;
};

/// The equivalence checks on (train, test) with `kernel`. The SGD legs
/// need explicit features; with other kernels they fail with a message.
/// `chunk` sets the chunk size of the block-correction check.
EquivalenceReport equivalence_report(const OrderedDataset& train, const OrderedDataset& test,
                                     const KernelSpec& kernel, const HyperParams& hp, Index chunk = 20);

void print_report(const EquivalenceReport& report, std::ostream& out);

}  // namespace okr
