#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "okr/json_util.hpp"
#include "okr/kernel.hpp"
#include "okr/regression.hpp"

namespace okr {

struct Gp1dConfig {
    double rbf_bandwidth = 0.1;  // sigma^2 of the generating RBF kernel
    double noise = 0.3;          // target noise standard deviation
    Index n_train = 40;
    Index n_test = 160;
    double grid_step = 0.005;  // grid covers [0, 1]
};

struct ClusterConfig {
    Index n_classes = 10;
    Index input_dim = 20;
    double spread = 0.5;
    Index n_train = 1024;
    Index n_test = 256;
};

enum class TaskKind { Gp1d, Cluster };

enum class OrderingKind { AsGenerated, RandomShuffle, ClassIncremental, DomainIncremental };

struct OrderingPolicy {
    OrderingKind kind = OrderingKind::AsGenerated;
    /// Label pairs, one binary task each, for DomainIncremental. Empty means
    /// (0, 1), (2, 3), ...
    std::vector<std::pair<int, int>> pairings;
};

struct TaskConfig {
    TaskKind kind = TaskKind::Gp1d;
    Gp1dConfig gp;
    ClusterConfig cluster;
    OrderingPolicy ordering;
    std::uint64_t seed = 0;
};

const char* to_string(TaskKind k);
const char* to_string(OrderingKind k);

json to_json(const TaskConfig& cfg);
/// Missing keys take their defaults; unknown keys are rejected.
TaskConfig task_config_from_json(const json& j);

struct GpTask {
    OrderedDataset train;
    OrderedDataset test;
    VectorXd grid;
    VectorXd f_star;  // noiseless function on the grid
    std::vector<Index> train_index;  // grid positions of the train points
    std::vector<Index> test_index;
};

/// Draws f* on the grid from the RBF prior through a jittered Cholesky
/// factor, then disjoint random train/test grid points with noisy targets.
GpTask gen_gp1d(const Gp1dConfig& cfg, std::uint64_t seed);

/// k(x, x') = tanh(Jx)^T tanh(Jx') with J (d_J x d_x) drawn N(0, 1).
KernelSpec gen_random_feature_map(Index d_j, Index d_x, std::uint64_t seed);

struct ClusterTask {
    OrderedDataset train;
    OrderedDataset test;
    MatrixXd means;  // d_x x n_classes, unit columns
};

/// Class means on the unit sphere, samples mean + spread N(0, I), sample i of
/// each split labelled i mod n_classes, one-hot targets.
ClusterTask gen_cluster_classification(const ClusterConfig& cfg, std::uint64_t seed);

/// Reorders the stream and sets task boundaries. ClassIncremental: stable sort
/// by label, one task per label. DomainIncremental: one binary task per label
/// pair (samples shuffled within the task), targets replaced by a two-dim
/// one-hot code for the position within the pair. Labels are kept.
OrderedDataset order_samples(const OrderedDataset& data, const OrderingPolicy& policy, std::uint64_t seed);

/// Test-set counterpart of order_samples: DomainIncremental remaps targets
/// (order kept); other policies return the data unchanged.
OrderedDataset prepare_test_set(const OrderedDataset& test, const OrderingPolicy& policy);

struct TaskData {
    TaskConfig config;
    OrderedDataset train;  // ordered
    OrderedDataset test;
    bool classification = false;
};

/// Generates the task in `cfg` and applies its ordering policy.
TaskData generate_task(const TaskConfig& cfg);

/// CSV with columns split,task_id,label,x0..,y0.. (train rows first) plus a
/// JSON sidecar `<path>.json` holding the config.
void write_task(const TaskData& task, const std::string& path);
TaskData read_task(const std::string& path);

}  // namespace okr
