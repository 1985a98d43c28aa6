#include "okr/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "okr/metrics.hpp"
#include "okr/rng.hpp"

namespace okr {

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

OrderedDataset gather(const OrderedDataset& data, const std::vector<Index>& order) {
    OrderedDataset out;
    out.X.resize(data.X.rows(), static_cast<Index>(order.size()));
    out.Y.resize(data.Y.rows(), static_cast<Index>(order.size()));
    for (std::size_t j = 0; j < order.size(); ++j) {
        out.X.col(j) = data.X.col(order[j]);
        out.Y.col(j) = data.Y.col(order[j]);
        if (data.has_labels()) out.labels.push_back(data.labels[order[j]]);
    }
    return out;
}

std::vector<std::pair<int, int>> resolve_pairings(const OrderedDataset& data, const OrderingPolicy& policy) {
    if (!policy.pairings.empty()) return policy.pairings;
    const int n_classes = data.labels.empty() ? 0 : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    if (n_classes % 2 != 0)
        throw InvalidArgument("domain-incremental ordering needs an even class count, got " +
                              std::to_string(n_classes));
    std::vector<std::pair<int, int>> pairs;
    for (int c = 0; c < n_classes; c += 2) pairs.emplace_back(c, c + 1);
    return pairs;
}

// Task index and position (0 or 1) of a label within the pairings.
std::pair<int, int> locate(const std::vector<std::pair<int, int>>& pairs, int label) {
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        if (pairs[t].first == label) return {static_cast<int>(t), 0};
        if (pairs[t].second == label) return {static_cast<int>(t), 1};
    }
    throw InvalidArgument("domain-incremental ordering: label " + std::to_string(label) + " is not in any pairing");
}

void require_labels(const OrderedDataset& data, const char* policy) {
    if (!data.has_labels()) throw InvalidArgument(std::string(policy) + " ordering requires labels");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError(where + ": cannot parse number '" + s + "'");
    }
}

}  // namespace

const char* to_string(TaskKind k) { return k == TaskKind::Gp1d ? "gp1d" : "cluster"; }

const char* to_string(OrderingKind k) {
    switch (k) {
        case OrderingKind::AsGenerated: return "as_generated";
        case OrderingKind::RandomShuffle: return "shuffle";
        case OrderingKind::ClassIncremental: return "class_incremental";
        case OrderingKind::DomainIncremental: return "domain_incremental";
    }
    return "unknown";
}

json to_json(const TaskConfig& cfg) {
    json j;
    j["kind"] = to_string(cfg.kind);
    j["seed"] = cfg.seed;
    j["gp"] = {{"rbf_bandwidth", cfg.gp.rbf_bandwidth},
               {"noise", cfg.gp.noise},
               {"n_train", cfg.gp.n_train},
               {"n_test", cfg.gp.n_test},
               {"grid_step", cfg.gp.grid_step}};
    j["cluster"] = {{"n_classes", cfg.cluster.n_classes},
                    {"input_dim", cfg.cluster.input_dim},
                    {"spread", cfg.cluster.spread},
                    {"n_train", cfg.cluster.n_train},
                    {"n_test", cfg.cluster.n_test}};
    json pairs = json::array();
    for (const auto& [a, b] : cfg.ordering.pairings) pairs.push_back({a, b});
    j["ordering"] = {{"kind", to_string(cfg.ordering.kind)}, {"pairings", pairs}};
    return j;
}

TaskConfig task_config_from_json(const json& j) {
    TaskConfig cfg;
    reject_unknown_keys(j, {"kind", "seed", "gp", "cluster", "ordering"}, "task");
    std::string kind = to_string(cfg.kind);
    read_optional(j, "kind", kind, "task");
    if (kind == "gp1d") cfg.kind = TaskKind::Gp1d;
    else if (kind == "cluster") cfg.kind = TaskKind::Cluster;
    else throw InvalidArgument("task.kind: unknown task '" + kind + "' (expected gp1d or cluster)");
    read_optional(j, "seed", cfg.seed, "task");
    if (j.contains("gp")) {
        const json& g = j["gp"];
        reject_unknown_keys(g, {"rbf_bandwidth", "noise", "n_train", "n_test", "grid_step"}, "task.gp");
        read_optional(g, "rbf_bandwidth", cfg.gp.rbf_bandwidth, "task.gp");
        read_optional(g, "noise", cfg.gp.noise, "task.gp");
        read_optional(g, "n_train", cfg.gp.n_train, "task.gp");
        read_optional(g, "n_test", cfg.gp.n_test, "task.gp");
        read_optional(g, "grid_step", cfg.gp.grid_step, "task.gp");
    }
    if (j.contains("cluster")) {
        const json& c = j["cluster"];
        reject_unknown_keys(c, {"n_classes", "input_dim", "spread", "n_train", "n_test"}, "task.cluster");
        read_optional(c, "n_classes", cfg.cluster.n_classes, "task.cluster");
        read_optional(c, "input_dim", cfg.cluster.input_dim, "task.cluster");
        read_optional(c, "spread", cfg.cluster.spread, "task.cluster");
        read_optional(c, "n_train", cfg.cluster.n_train, "task.cluster");
        read_optional(c, "n_test", cfg.cluster.n_test, "task.cluster");
    }
    if (j.contains("ordering")) {
        const json& o = j["ordering"];
        reject_unknown_keys(o, {"kind", "pairings"}, "task.ordering");
        std::string ok = "as_generated";
        read_optional(o, "kind", ok, "task.ordering");
        if (ok == "as_generated") cfg.ordering.kind = OrderingKind::AsGenerated;
        else if (ok == "shuffle") cfg.ordering.kind = OrderingKind::RandomShuffle;
        else if (ok == "class_incremental") cfg.ordering.kind = OrderingKind::ClassIncremental;
        else if (ok == "domain_incremental") cfg.ordering.kind = OrderingKind::DomainIncremental;
        else throw InvalidArgument("task.ordering.kind: unknown ordering '" + ok + "'");
        read_optional(o, "pairings", cfg.ordering.pairings, "task.ordering");
    }
    return cfg;
}

GpTask gen_gp1d(const Gp1dConfig& cfg, std::uint64_t seed) {
    if (!(cfg.grid_step > 0.0) || cfg.grid_step > 1.0) throw InvalidArgument("gen_gp1d: grid step must be in (0, 1]");
    if (!(cfg.rbf_bandwidth > 0.0)) throw InvalidArgument("gen_gp1d: RBF bandwidth must be > 0");
    if (!(cfg.noise >= 0.0)) throw InvalidArgument("gen_gp1d: noise must be >= 0");
    const Index m = static_cast<Index>(std::llround(1.0 / cfg.grid_step)) + 1;
    if (cfg.n_train < 1 || cfg.n_test < 0 || cfg.n_train + cfg.n_test > m)
        throw InvalidArgument("gen_gp1d: " + std::to_string(cfg.n_train) + " train + " + std::to_string(cfg.n_test) +
                              " test points do not fit on a " + std::to_string(m) + "-point grid");

    GpTask task;
    task.grid.resize(m);
    for (Index i = 0; i < m; ++i) task.grid[i] = static_cast<double>(i) * cfg.grid_step;

    const KernelSpec rbf = KernelSpec::rbf(cfg.rbf_bandwidth);
    const MatrixXd K = gram(rbf, task.grid.transpose());
    Eigen::LLT<MatrixXd> llt;
    double jitter = 1e-10 * static_cast<double>(m);
    bool ok = false;
    for (int level = 0; level < 3 && !ok; ++level, jitter *= 100.0) {
        MatrixXd A = K;
        A.diagonal().array() += jitter;
        llt.compute(A);
        ok = llt.info() == Eigen::Success;
    }
    if (!ok) throw NumericalError("gen_gp1d: grid Gram stays singular after 3 jitter levels");

    Rng function_rng(seed, Stream::GpFunction);
    const VectorXd xi = function_rng.normal_matrix(m, 1).col(0);
    task.f_star = llt.matrixL() * xi;

    std::vector<Index> perm(m);
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng split_rng(seed, Stream::GpSplit);
    shuffle(perm, split_rng);
    task.train_index.assign(perm.begin(), perm.begin() + cfg.n_train);
    task.test_index.assign(perm.begin() + cfg.n_train, perm.begin() + cfg.n_train + cfg.n_test);

    Rng noise_rng(seed, Stream::GpNoise);
    auto build = [&](const std::vector<Index>& idx) {
        OrderedDataset d;
        d.X.resize(1, static_cast<Index>(idx.size()));
        d.Y.resize(1, static_cast<Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            d.X(0, j) = task.grid[idx[j]];
            const double eps = noise_rng.normal();
            d.Y(0, j) = cfg.noise == 0.0 ? task.f_star[idx[j]] : task.f_star[idx[j]] + cfg.noise * eps;
        }
        return d;
    };
    task.train = build(task.train_index);
    task.test = build(task.test_index);
    return task;
}

KernelSpec gen_random_feature_map(Index d_j, Index d_x, std::uint64_t seed) {
    if (d_j < 1 || d_x < 1) throw InvalidArgument("gen_random_feature_map: d_J and d_x must be >= 1");
    Rng rng(seed, Stream::Features);
    return KernelSpec::random_feature_tanh(rng.normal_matrix(d_j, d_x));
}

ClusterTask gen_cluster_classification(const ClusterConfig& cfg, std::uint64_t seed) {
    if (cfg.n_classes < 2) throw InvalidArgument("gen_cluster_classification: need at least 2 classes");
    if (cfg.input_dim < 1 || cfg.n_train < 1 || cfg.n_test < 0)
        throw InvalidArgument("gen_cluster_classification: sizes must be positive");
    if (!(cfg.spread >= 0.0)) throw InvalidArgument("gen_cluster_classification: spread must be >= 0");

    ClusterTask task;
    Rng mean_rng(seed, Stream::ClusterMeans);
    task.means = mean_rng.normal_matrix(cfg.input_dim, cfg.n_classes);
    for (Index c = 0; c < cfg.n_classes; ++c) task.means.col(c).normalize();

    Rng sample_rng(seed, Stream::ClusterSamples);
    auto build = [&](Index n) {
        OrderedDataset d;
        d.X.resize(cfg.input_dim, n);
        d.Y = MatrixXd::Zero(cfg.n_classes, n);
        for (Index j = 0; j < n; ++j) {
            const int label = static_cast<int>(j % cfg.n_classes);
            d.X.col(j) = task.means.col(label) + cfg.spread * sample_rng.normal_matrix(cfg.input_dim, 1).col(0);
            d.Y(label, j) = 1.0;
            d.labels.push_back(label);
        }
        return d;
    };
    task.train = build(cfg.n_train);
    task.test = build(cfg.n_test);
    return task;
}

OrderedDataset order_samples(const OrderedDataset& data, const OrderingPolicy& policy, std::uint64_t seed) {
    data.validate();
    const Index n = data.size();
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed, Stream::Ordering);

    switch (policy.kind) {
        case OrderingKind::AsGenerated: return data;
        case OrderingKind::RandomShuffle: {
            shuffle(order, rng);
            OrderedDataset out = gather(data, order);
            out.task_boundaries = {0};
            return out;
        }
        case OrderingKind::ClassIncremental: {
            require_labels(data, "class-incremental");
            std::stable_sort(order.begin(), order.end(),
                             [&](Index a, Index b) { return data.labels[a] < data.labels[b]; });
            OrderedDataset out = gather(data, order);
            for (Index j = 0; j < n; ++j)
                if (j == 0 || out.labels[j] != out.labels[j - 1]) out.task_boundaries.push_back(j);
            return out;
        }
        case OrderingKind::DomainIncremental: {
            require_labels(data, "domain-incremental");
            const auto pairs = resolve_pairings(data, policy);
            std::vector<std::vector<Index>> per_task(pairs.size());
            for (Index j = 0; j < n; ++j) per_task[locate(pairs, data.labels[j]).first].push_back(j);
            order.clear();
            std::vector<Index> boundaries;
            for (auto& members : per_task) {
                if (members.empty()) continue;
                shuffle(members, rng);
                boundaries.push_back(static_cast<Index>(order.size()));
                order.insert(order.end(), members.begin(), members.end());
            }
            OrderedDataset out = prepare_test_set(gather(data, order), policy);
            out.task_boundaries = std::move(boundaries);
            return out;
        }
    }
    return data;
}

OrderedDataset prepare_test_set(const OrderedDataset& test, const OrderingPolicy& policy) {
    if (policy.kind != OrderingKind::DomainIncremental) return test;
    require_labels(test, "domain-incremental");
    const auto pairs = resolve_pairings(test, policy);
    OrderedDataset out = test;
    out.Y = MatrixXd::Zero(2, test.size());
    for (Index j = 0; j < test.size(); ++j) out.Y(locate(pairs, test.labels[j]).second, j) = 1.0;
    out.task_boundaries.clear();
    return out;
}

TaskData generate_task(const TaskConfig& cfg) {
    TaskData task;
    task.config = cfg;
    OrderedDataset train;
    if (cfg.kind == TaskKind::Gp1d) {
        GpTask gp = gen_gp1d(cfg.gp, cfg.seed);
        train = std::move(gp.train);
        task.test = std::move(gp.test);
    } else {
        ClusterTask cl = gen_cluster_classification(cfg.cluster, cfg.seed);
        train = std::move(cl.train);
        task.test = std::move(cl.test);
        task.classification = true;
    }
    task.train = order_samples(train, cfg.ordering, cfg.seed);
    task.test = prepare_test_set(task.test, cfg.ordering);
    return task;
}

void write_task(const TaskData& task, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const Index d_x = task.train.input_dim();
    const Index d_y = task.train.output_dim();
    out << "split,task_id,label";
    for (Index i = 0; i < d_x; ++i) out << ",x" << i;
    for (Index i = 0; i < d_y; ++i) out << ",y" << i;
    out << '\n';
    auto rows = [&](const OrderedDataset& d, const char* split) {
        std::size_t task_id = 0;
        for (Index j = 0; j < d.size(); ++j) {
            while (task_id + 1 < d.task_boundaries.size() && d.task_boundaries[task_id + 1] <= j) ++task_id;
            out << split << ',' << task_id << ',';
            if (d.has_labels()) out << d.labels[j];
            for (Index i = 0; i < d_x; ++i) out << ',' << format_double(d.X(i, j));
            for (Index i = 0; i < d_y; ++i) out << ',' << format_double(d.Y(i, j));
            out << '\n';
        }
    };
    rows(task.train, "train");
    rows(task.test, "test");
    if (!out) throw IoError("write to '" + path + "' failed");

    std::ofstream side(path + ".json", std::ios::binary);
    if (!side) throw IoError("cannot open '" + path + ".json' for writing");
    json meta = {{"config", to_json(task.config)}, {"classification", task.classification}};
    side << meta.dump(2) << '\n';
    if (!side) throw IoError("write to '" + path + ".json' failed");
}

TaskData read_task(const std::string& path) {
    TaskData task;
    {
        std::ifstream side(path + ".json");
        if (!side) throw IoError("cannot open sidecar '" + path + ".json'");
        json meta;
        try {
            side >> meta;
        } catch (const json::exception& e) {
            throw IoError("sidecar '" + path + ".json': " + e.what());
        }
        task.config = task_config_from_json(meta.at("config"));
        task.classification = meta.value("classification", false);
    }
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
    const auto header = split_csv(line);
    if (header.size() < 3 || header[0] != "split" || header[1] != "task_id" || header[2] != "label")
        throw IoError("'" + path + "': unexpected header");
    Index d_x = 0, d_y = 0;
    for (std::size_t c = 3; c < header.size(); ++c) (header[c][0] == 'x' ? d_x : d_y)++;

    std::vector<std::vector<double>> cols[2];
    std::vector<int> labels[2];
    std::vector<long> task_ids[2];
    Index line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path + ":" + std::to_string(line_no);
        if (cells.size() != header.size()) throw IoError(where + ": wrong column count");
        const int s = cells[0] == "train" ? 0 : cells[0] == "test" ? 1 : -1;
        if (s < 0) throw IoError(where + ": unknown split '" + cells[0] + "'");
        task_ids[s].push_back(static_cast<long>(parse_double(cells[1], where)));
        if (!cells[2].empty()) labels[s].push_back(static_cast<int>(parse_double(cells[2], where)));
        std::vector<double> v;
        for (std::size_t c = 3; c < cells.size(); ++c) v.push_back(parse_double(cells[c], where));
        cols[s].push_back(std::move(v));
    }
    for (int s = 0; s < 2; ++s) {
        OrderedDataset& d = s == 0 ? task.train : task.test;
        const Index n = static_cast<Index>(cols[s].size());
        d.X.resize(d_x, n);
        d.Y.resize(d_y, n);
        for (Index j = 0; j < n; ++j) {
            for (Index i = 0; i < d_x; ++i) d.X(i, j) = cols[s][j][i];
            for (Index i = 0; i < d_y; ++i) d.Y(i, j) = cols[s][j][d_x + i];
        }
        if (static_cast<Index>(labels[s].size()) == n && n > 0) d.labels = labels[s];
        for (Index j = 0; j < n; ++j)
            if (j == 0 || task_ids[s][j] != task_ids[s][j - 1]) d.task_boundaries.push_back(j);
        if (s == 1 && d.task_boundaries.size() <= 1) d.task_boundaries.clear();
        d.validate();
    }
    return task;
}

}  // namespace okr
