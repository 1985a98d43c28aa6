#include "okr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "okr/error.hpp"
#include "okr/linalg.hpp"
#include "okr/metrics.hpp"
#include "okr/rng.hpp"
#include "okr/target_correction.hpp"

namespace okr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

HyperParams hp_from_json(const json& j, HyperParams hp, const std::string& where) {
    reject_unknown_keys(j, {"eta", "gamma", "gamma_o", "block"}, where);
    read_optional(j, "eta", hp.eta, where);
    read_optional(j, "gamma", hp.gamma, where);
    read_optional(j, "gamma_o", hp.gamma_o, where);
    read_optional(j, "block", hp.block, where);
    hp.validate();
    return hp;
}

json hp_to_json(const HyperParams& hp) {
    return {{"eta", hp.eta}, {"gamma", hp.gamma}, {"gamma_o", hp.gamma_o}, {"block", hp.block}};
}

// Re-raises a library error with run context, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& ctx) {
    try {
        throw;
    } catch (const NumericalError& e) {
        throw NumericalError(ctx + ": " + e.what(), e.condition());
    } catch (const DimensionError& e) {
        throw DimensionError(ctx + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(ctx + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(ctx + ": " + e.what());
    } catch (const Error& e) {
        throw Error(ctx + ": " + e.what());
    }
}

// Incrementally accumulated predictions A[:, 0:t] k(X[0:t], .) of a kernel learner.
class PrefixPredictor {
public:
    PrefixPredictor(const MatrixXd& dual, const MatrixXd& k_train, const MatrixXd& k_test)
        : dual_(dual), k_train_(k_train), k_test_(k_test),
          train_(MatrixXd::Zero(dual.rows(), k_train.cols())), test_(MatrixXd::Zero(dual.rows(), k_test.cols())) {}

    void advance(Index t) {
        if (t > seen_) {
            train_ += dual_.middleCols(seen_, t - seen_) * k_train_.middleRows(seen_, t - seen_);
            test_ += dual_.middleCols(seen_, t - seen_) * k_test_.middleRows(seen_, t - seen_);
            seen_ = t;
        }
    }
    const MatrixXd& train() const { return train_; }
    const MatrixXd& test() const { return test_; }

private:
    const MatrixXd& dual_;
    const MatrixXd& k_train_;
    const MatrixXd& k_test_;
    MatrixXd train_;
    MatrixXd test_;
    Index seen_ = 0;
};

struct Deviation {
    double abs = 0.0;
    double scaled = 0.0;
};

Deviation deviation(const MatrixRef& a, const MatrixRef& reference) {
    if (a.rows() != reference.rows() || a.cols() != reference.cols())
        throw DimensionError("equivalence check: compared matrices differ in shape");
    if (a.size() == 0) return {};
    const double abs = (a - reference).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
    return {abs, abs / scale};
}

}  // namespace

KernelSpec build_kernel(const KernelConfig& cfg, Index input_dim, std::uint64_t seed) {
    if (cfg.kind == "rbf") return KernelSpec::rbf(cfg.bandwidth);
    if (cfg.kind == "linear") return KernelSpec::linear(input_dim);
    if (cfg.kind == "random_feature_tanh") return gen_random_feature_map(cfg.d_j, input_dim, seed);
    if (cfg.kind == "random_fourier") {
        if (!(cfg.bandwidth > 0.0) || cfg.features < 1)
            throw InvalidArgument("kernel: random_fourier needs bandwidth > 0 and features >= 1");
        // exp(-|d|^2 / bandwidth) has spectral density N(0, (2 / bandwidth) I).
        Rng rng(seed, Stream::Features);
        MatrixXd W = rng.normal_matrix(cfg.features, input_dim) * std::sqrt(2.0 / cfg.bandwidth);
        VectorXd phases(cfg.features);
        for (Index i = 0; i < cfg.features; ++i) phases[i] = 2.0 * std::numbers::pi * rng.uniform();
        return KernelSpec::random_fourier(std::move(W), std::move(phases));
    }
    throw InvalidArgument("kernel.kind: unknown kernel '" + cfg.kind +
                          "' (expected rbf, linear, random_feature_tanh or random_fourier)");
}

const char* to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::Offline: return "offline";
        case LearnerKind::OnlineTrue: return "online_true";
        case LearnerKind::OnlineCorrected: return "online_corrected";
        case LearnerKind::OnlineIterCorrected: return "online_iter_corrected";
        case LearnerKind::CumulativeReplay: return "cumulative_replay";
        case LearnerKind::SgdMlp: return "sgd_mlp";
    }
    return "unknown";
}

LearnerKind learner_from_string(const std::string& name) {
    for (LearnerKind k : {LearnerKind::Offline, LearnerKind::OnlineTrue, LearnerKind::OnlineCorrected,
                          LearnerKind::OnlineIterCorrected, LearnerKind::CumulativeReplay, LearnerKind::SgdMlp})
        if (name == to_string(k)) return k;
    throw InvalidArgument("unknown learner '" + name + "'");
}

json to_json(const ExperimentConfig& cfg) {
    json learners = json::array();
    for (const LearnerConfig& l : cfg.learners) {
        json jl = {{"kind", to_string(l.kind)}, {"tag", l.tag.empty() ? to_string(l.kind) : l.tag}};
        if (l.hp) jl["hp"] = hp_to_json(*l.hp);
        if (l.kind == LearnerKind::SgdMlp)
            jl["mlp"] = {{"hidden", l.mlp.hidden},
                         {"activation", to_string(l.mlp.activation)},
                         {"schedule", to_string(l.mlp.schedule)},
                         {"correction", to_string(l.mlp.correction)},
                         {"epochs", l.mlp.epochs}};
        learners.push_back(jl);
    }
    return {{"task", to_json(cfg.task)},
            {"kernel",
             {{"kind", cfg.kernel.kind},
              {"bandwidth", cfg.kernel.bandwidth},
              {"d_j", cfg.kernel.d_j},
              {"features", cfg.kernel.features}}},
            {"learners", learners},
            {"hp", hp_to_json(cfg.hp)},
            {"chunk", cfg.chunk},
            {"eval_every", cfg.eval_every},
            {"seeds", cfg.seeds}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    reject_unknown_keys(j, {"task", "kernel", "learners", "hp", "chunk", "eval_every", "seeds"}, "config");
    if (j.contains("task")) cfg.task = task_config_from_json(j["task"]);
    if (j.contains("kernel")) {
        const json& k = j["kernel"];
        reject_unknown_keys(k, {"kind", "bandwidth", "d_j", "features"}, "kernel");
        read_optional(k, "kind", cfg.kernel.kind, "kernel");
        read_optional(k, "bandwidth", cfg.kernel.bandwidth, "kernel");
        read_optional(k, "d_j", cfg.kernel.d_j, "kernel");
        read_optional(k, "features", cfg.kernel.features, "kernel");
    }
    if (j.contains("hp")) cfg.hp = hp_from_json(j["hp"], cfg.hp, "hp");
    read_optional(j, "chunk", cfg.chunk, "config");
    read_optional(j, "eval_every", cfg.eval_every, "config");
    if (cfg.chunk < 1 || cfg.eval_every < 1) throw InvalidArgument("config: chunk and eval_every must be >= 1");
    if (j.contains("seeds")) {
        const json& s = j["seeds"];
        if (s.is_number_integer()) {
            const auto count = s.get<long long>();
            if (count < 1) throw InvalidArgument("config.seeds: count must be >= 1");
            cfg.seeds.clear();
            for (long long i = 0; i < count; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
        } else {
            read_optional(j, "seeds", cfg.seeds, "config");
            if (cfg.seeds.empty()) throw InvalidArgument("config.seeds: list must not be empty");
        }
    }
    if (j.contains("learners")) {
        const json& ls = j["learners"];
        if (!ls.is_array() || ls.empty()) throw InvalidArgument("config.learners: expected a non-empty array");
        cfg.learners.clear();
        for (const json& jl : ls) {
            LearnerConfig l;
            if (jl.is_string()) {
                l.kind = learner_from_string(jl.get<std::string>());
            } else {
                reject_unknown_keys(jl, {"kind", "tag", "hp", "mlp"}, "learner");
                std::string kind;
                read_optional(jl, "kind", kind, "learner");
                l.kind = learner_from_string(kind);
                read_optional(jl, "tag", l.tag, "learner");
                if (jl.contains("hp")) l.hp = hp_from_json(jl["hp"], cfg.hp, "learner.hp");
                if (jl.contains("mlp")) {
                    const json& m = jl["mlp"];
                    reject_unknown_keys(m, {"hidden", "activation", "schedule", "correction", "epochs"},
                                        "learner.mlp");
                    read_optional(m, "hidden", l.mlp.hidden, "learner.mlp");
                    std::string s;
                    if (m.contains("activation")) {
                        read_optional(m, "activation", s, "learner.mlp");
                        l.mlp.activation = activation_from_string(s);
                    }
                    if (m.contains("schedule")) {
                        read_optional(m, "schedule", s, "learner.mlp");
                        l.mlp.schedule = schedule_from_string(s);
                    }
                    if (m.contains("correction")) {
                        read_optional(m, "correction", s, "learner.mlp");
                        l.mlp.correction = correction_from_string(s);
                    }
                    read_optional(m, "epochs", l.mlp.epochs, "learner.mlp");
                }
            }
            if (l.tag.empty()) l.tag = to_string(l.kind);
            cfg.learners.push_back(std::move(l));
        }
        for (std::size_t a = 0; a < cfg.learners.size(); ++a)
            for (std::size_t b = a + 1; b < cfg.learners.size(); ++b)
                if (cfg.learners[a].tag == cfg.learners[b].tag)
                    throw InvalidArgument("config.learners: duplicate tag '" + cfg.learners[a].tag + "'");
    } else {
        cfg.learners.front().tag = to_string(cfg.learners.front().kind);
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidArgument("config '" + path + "': " + e.what());
    }
    return experiment_config_from_json(j);
}

bool CurveRecord::operator==(const CurveRecord& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return seed == o.seed && step == o.step && learner == o.learner && same(train_mse, o.train_mse) &&
           same(test_mse, o.test_mse) && same(test_accuracy, o.test_accuracy);
}

LearnerRun run_learner(const ExperimentConfig& cfg, const LearnerConfig& learner, const TaskData& task,
                       std::uint64_t seed) {
    const std::string tag = learner.tag.empty() ? to_string(learner.kind) : learner.tag;
    HyperParams hp = learner.hp ? *learner.hp : cfg.hp;
    hp.seed = seed;
    Index step = 0;
    try {
        hp.validate();
        const OrderedDataset& train = task.train;
        const OrderedDataset& test = task.test;
        const Index n = train.size();
        LearnerRun run;
        run.artifacts.learner = tag;

        auto make_record = [&](Index s, const MatrixXd& pred_train, const MatrixXd& pred_test) {
            CurveRecord r;
            r.seed = seed;
            r.step = s;
            r.learner = tag;
            r.train_mse = mse(pred_train, train.Y);
            r.test_mse = test.size() > 0 ? mse(pred_test, test.Y) : kNaN;
            r.test_accuracy = task.classification && test.size() > 0 ? argmax_accuracy(pred_test, test.Y) : kNaN;
            return r;
        };

        if (learner.kind == LearnerKind::SgdMlp) {
            MlpSpec spec;
            spec.widths.push_back(train.input_dim());
            spec.widths.insert(spec.widths.end(), learner.mlp.hidden.begin(), learner.mlp.hidden.end());
            spec.widths.push_back(train.output_dim());
            spec.activation = learner.mlp.activation;
            NtkTrainOptions options;
            options.epochs = learner.mlp.epochs;
            options.chunk = cfg.chunk;
            options.eval_every = cfg.eval_every;
            NtkTrainResult res =
                train_corrected(spec, train, &test, hp, learner.mlp.schedule, learner.mlp.correction, options);
            for (const MetricsRow& m : res.trace) {
                step = m.step;
                run.records.push_back({seed, m.step, tag, m.train_mse, m.test_mse,
                                       task.classification ? m.test_accuracy : kNaN});
            }
            run.artifacts.weights = std::move(res.weights);
            run.artifacts.targets = std::move(res.targets);
            run.artifacts.provenance = learner.mlp.correction == CorrectionMode::Iterative
                                           ? Provenance::IterativeCorrected
                                           : Provenance::True;
            run.artifacts.metrics = std::move(res.trace);
            return run;
        }

        const KernelSpec kernel = build_kernel(cfg.kernel, train.input_dim(), seed);
        const MatrixXd K = gram(kernel, train.X);
        const MatrixXd k_test = gram(kernel, train.X, test.X);
        const Index block = hp.block;
        const Index total_steps = (n + block - 1) / block;
        std::vector<Index> eval_steps;
        for (Index s = 0; s < total_steps; s += cfg.eval_every) eval_steps.push_back(s);
        eval_steps.push_back(total_steps);
        auto samples_at = [&](Index s) { return std::min(n, s * block); };

        if (learner.kind == LearnerKind::Offline) {
            run.artifacts.dual = offline_coefficients(K, train.Y, hp.gamma);
            run.artifacts.targets = train.Y;
            const MatrixXd pred_train = run.artifacts.dual * K;
            const MatrixXd pred_test = run.artifacts.dual * k_test;
            for (Index s : eval_steps) run.records.push_back(make_record(s, pred_train, pred_test));
            return run;
        }

        if (learner.kind == LearnerKind::CumulativeReplay) {
            IncrementalCholesky factor(hp.gamma);
            run.artifacts.targets = train.Y;
            for (Index s : eval_steps) {
                step = s;
                const Index t = samples_at(s);
                const Index have = factor.size();
                if (t > have)
                    factor.append(K.block(0, have, have, t - have), K.block(have, have, t - have, t - have),
                                  "cumulative replay (gamma I + K)");
                MatrixXd pred_train = MatrixXd::Zero(train.output_dim(), n);
                MatrixXd pred_test = MatrixXd::Zero(train.output_dim(), test.size());
                if (t > 0) {
                    const MatrixXd dual = factor.solve(train.Y.leftCols(t).transpose()).transpose();
                    pred_train = dual * K.topRows(t);
                    pred_test = dual * k_test.topRows(t);
                    run.artifacts.dual = dual;
                }
                run.records.push_back(make_record(s, pred_train, pred_test));
            }
            return run;
        }

        MatrixXd targets = train.Y;
        run.artifacts.provenance = Provenance::True;
        if (learner.kind == LearnerKind::OnlineCorrected) {
            targets = offline_coefficients(K, train.Y, hp.gamma) * online_system(directional_mask(K, block), hp.eta);
            run.artifacts.provenance = Provenance::Corrected;
        } else if (learner.kind == LearnerKind::OnlineIterCorrected) {
            IterativeCorrectionRun corr = iterative_correction_run(K, train.Y, hp, cfg.chunk, block, true);
            targets = std::move(corr.z);
            run.artifacts.correction = std::move(corr.coeffs);
            run.artifacts.provenance = Provenance::IterativeCorrected;
        }
        run.artifacts.dual = minibatch_coefficients(K, targets, hp.eta, block);
        run.artifacts.targets = std::move(targets);

        PrefixPredictor prefix(run.artifacts.dual, K, k_test);
        for (Index s : eval_steps) {
            step = s;
            prefix.advance(samples_at(s));
            run.records.push_back(make_record(s, prefix.train(), prefix.test()));
        }
        return run;
    } catch (const Error&) {
        rethrow_with_context("seed " + std::to_string(seed) + ", learner " + tag + ", step " + std::to_string(step));
    }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.learners.empty() || cfg.seeds.empty()) throw InvalidArgument("run_experiment: no learners or seeds");
    auto run_seed = [&cfg](std::uint64_t seed) {
        TaskConfig task_cfg = cfg.task;
        task_cfg.seed = seed;
        TaskData task;
        try {
            task = generate_task(task_cfg);
        } catch (const Error&) {
            rethrow_with_context("seed " + std::to_string(seed) + ", step 0, task generation");
        }
        std::vector<CurveRecord> records;
        for (const LearnerConfig& l : cfg.learners) {
            LearnerRun run = run_learner(cfg, l, task, seed);
            records.insert(records.end(), run.records.begin(), run.records.end());
        }
        return records;
    };
    std::vector<std::future<std::vector<CurveRecord>>> futures;
    for (std::uint64_t seed : cfg.seeds) futures.push_back(std::async(std::launch::async, run_seed, seed));

    ExperimentResult result;
    for (auto& f : futures) {
        std::vector<CurveRecord> r = f.get();
        result.records.insert(result.records.end(), r.begin(), r.end());
    }
    result.summary = summarize(result.records);
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<CurveRecord>& records) {
    // Final record per (learner, seed), learners in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::map<std::uint64_t, CurveRecord>> last;
    for (const CurveRecord& r : records) {
        if (!last.count(r.learner)) order.push_back(r.learner);
        auto& slot = last[r.learner];
        auto it = slot.find(r.seed);
        if (it == slot.end() || it->second.step <= r.step) slot[r.seed] = r;
    }
    std::vector<SummaryRow> rows;
    for (const std::string& learner : order) {
        const auto& per_seed = last[learner];
        auto add = [&](const char* metric, auto field) {
            std::vector<double> v;
            for (const auto& [seed, r] : per_seed)
                if (!std::isnan(r.*field)) v.push_back(r.*field);
            if (v.empty()) return;
            SummaryRow row{learner, metric, 0.0, 0.0, static_cast<Index>(v.size())};
            for (double x : v) row.mean += x;
            row.mean /= static_cast<double>(v.size());
            if (v.size() > 1) {
                double ss = 0.0;
                for (double x : v) ss += (x - row.mean) * (x - row.mean);
                row.sem = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
            }
            rows.push_back(row);
        };
        add("final_train_mse", &CurveRecord::train_mse);
        add("final_test_mse", &CurveRecord::test_mse);
        add("final_test_accuracy", &CurveRecord::test_accuracy);
    }
    return rows;
}

json to_json(const std::vector<SummaryRow>& summary) {
    json out = json::array();
    for (const SummaryRow& r : summary)
        out.push_back({{"learner", r.learner}, {"metric", r.metric}, {"mean", r.mean}, {"sem", r.sem}, {"seeds", r.seeds}});
    return out;
}

void export_curves(const std::vector<CurveRecord>& records, std::ostream& out, CurveFormat format) {
    if (records.empty()) throw InvalidArgument("export_curves: no records");
    if (format == CurveFormat::Csv) {
        out << "seed,step,learner,train_mse,test_mse,test_accuracy\n";
        for (const CurveRecord& r : records)
            out << r.seed << ',' << r.step << ',' << r.learner << ',' << format_double(r.train_mse) << ','
                << format_double(r.test_mse) << ',' << format_double(r.test_accuracy) << '\n';
    } else {
        json arr = json::array();
        auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
        for (const CurveRecord& r : records)
            arr.push_back({{"seed", r.seed},
                           {"step", r.step},
                           {"learner", r.learner},
                           {"train_mse", num(r.train_mse)},
                           {"test_mse", num(r.test_mse)},
                           {"test_accuracy", num(r.test_accuracy)}});
        out << arr.dump(2) << '\n';
    }
}

void export_curves(const std::vector<CurveRecord>& records, const std::string& path, CurveFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    export_curves(records, out, format);
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<CurveRecord> import_curves(const std::string& path, CurveFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<CurveRecord> records;
    auto number = [&](const std::string& s) {
        if (s.empty()) return kNaN;
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            throw IoError("'" + path + "': bad number '" + s + "'");
        }
    };
    if (format == CurveFormat::Csv) {
        std::string line;
        if (!std::getline(in, line) || line != "seed,step,learner,train_mse,test_mse,test_accuracy")
            throw IoError("'" + path + "': unexpected curve header");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (line.back() == ',') cells.emplace_back();
            if (cells.size() != 6) throw IoError("'" + path + "': expected 6 columns in '" + line + "'");
            CurveRecord r;
            r.seed = std::stoull(cells[0]);
            r.step = std::stoll(cells[1]);
            r.learner = cells[2];
            r.train_mse = number(cells[3]);
            r.test_mse = number(cells[4]);
            r.test_accuracy = number(cells[5]);
            records.push_back(std::move(r));
        }
    } else {
        json arr;
        try {
            in >> arr;
        } catch (const json::exception& e) {
            throw IoError("'" + path + "': " + e.what());
        }
        auto num = [](const json& v) { return v.is_null() ? kNaN : v.get<double>(); };
        for (const json& j : arr)
            records.push_back({j.at("seed").get<std::uint64_t>(), j.at("step").get<Index>(),
                               j.at("learner").get<std::string>(), num(j.at("train_mse")), num(j.at("test_mse")),
                               num(j.at("test_accuracy"))});
    }
    return records;
}

bool EquivalenceReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const EquivalenceCheck& c) { return c.passed; });
}

EquivalenceReport equivalence_report(const OrderedDataset& train, const OrderedDataset& test,
                                     const KernelSpec& kernel, const HyperParams& hp, Index chunk) {
    train.validate();
    test.validate();
    hp.validate();
    const MatrixXd& X = train.X;
    const MatrixXd& Y = train.Y;
    const MatrixXd& Xs = test.X;
    const Index n = train.size();
    const double eta = hp.eta;
    const double gamma = hp.gamma;

    EquivalenceReport report;
    auto run = [&](const char* name, const char* identity, double threshold, auto&& body) {
        EquivalenceCheck c{name, identity, 0.0, 0.0, threshold, false, {}, {}};
        try {
            const Deviation d = body();
            c.abs_deviation = d.abs;
            c.scaled_deviation = d.scaled;
            c.passed = d.scaled <= threshold;
        } catch (const Error& e) {
            c.error = e.what();
            c.abs_deviation = c.scaled_deviation = std::numeric_limits<double>::infinity();
        }
        report.checks.push_back(std::move(c));
    };
    auto worst = [](Deviation a, Deviation b) { return Deviation{std::max(a.abs, b.abs), std::max(a.scaled, b.scaled)}; };

    run("sgd_online", "regularized SGD == online closed form", 1e-8, [&] {
        SgdOptions opt;
        const MatrixXd sgd = sgd_run(kernel, train, eta, gamma, opt).predictor(Xs);
        return deviation(sgd, online_closed_form(kernel, X, Y, eta, gamma, Xs));
    });
    run("sgd_minibatch", "mini-batch SGD == mini-batch closed form", 1e-8, [&] {
        if (!kernel.has_features()) throw InvalidArgument("sgd_run: explicit features required");
        Deviation d;
        for (Index b : {2, 4, 8}) {
            if (b > n) break;
            SgdOptions opt;
            opt.block = b;
            const MatrixXd sgd = sgd_run(kernel, train, eta, 0.0, opt).predictor(Xs);
            d = worst(d, deviation(sgd, minibatch_closed_form(kernel, X, Y, eta, b, Xs)));
        }
        return d;
    });
    run("effective_targets", "offline on effective targets == online", 1e-8, [&] {
        const MatrixXd Ye = effective_targets(kernel, X, Y, eta, gamma).values;
        return deviation(offline_predict(kernel, X, Ye, gamma, Xs), online_closed_form(kernel, X, Y, eta, 0.0, Xs));
    });
    run("corrected_targets", "online on corrected targets == offline", 1e-8, [&] {
        const MatrixXd Yc = corrected_targets(kernel, X, Y, eta, gamma).values;
        return deviation(online_closed_form(kernel, X, Yc, eta, 0.0, Xs), offline_predict(kernel, X, Y, gamma, Xs));
    });
    run("composition", "effective(corrected(Y)) == corrected(effective(Y)) == Y", 1e-10, [&] {
        const MatrixXd K = gram(kernel, X);
        const MatrixXd Yc = corrected_targets_from_gram(K, Y, eta, gamma).values;
        const MatrixXd Ye = effective_targets_from_gram(K, Y, eta, gamma).values;
        return worst(deviation(effective_targets_from_gram(K, Yc, eta, gamma).values, Y),
                     deviation(corrected_targets_from_gram(K, Ye, eta, gamma).values, Y));
    });
    run("one_step", "one-step shift/correction == batch targets at every prefix", 1e-10, [&] {
        const MatrixXd K = gram(kernel, X);
        ShiftTracker tracker(kernel, eta, gamma);
        TargetMatrix corrected{MatrixXd(Y.rows(), 0), Provenance::Corrected};
        Deviation d;
        for (Index t = 0; t < n; ++t) {
            tracker.step(X.col(t), Y.col(t));
            corrected = correction_one_step(corrected, kernel, X.leftCols(t), Y.leftCols(t), X.col(t), Y.col(t), eta,
                                            gamma);
            const MatrixXd K_t = K.topLeftCorner(t + 1, t + 1);
            d = worst(d, deviation(tracker.effective().values,
                                   effective_targets_from_gram(K_t, Y.leftCols(t + 1), eta, gamma).values));
            d = worst(d, deviation(corrected.values,
                                   corrected_targets_from_gram(K_t, Y.leftCols(t + 1), eta, gamma).values));
        }
        return d;
    });
    double jitter = 0.0;
    run("block_correction", "chunk correction == block-matrix oracle", 1e-9, [&] {
        const Index c = std::max<Index>(1, std::min(chunk, n));
        const Index block = c % hp.block == 0 ? hp.block : 1;
        const MatrixXd Z = iterative_correction_run(gram(kernel, X), Y, hp, c, block).z;
        Deviation d;
        for (Index start = 0; start < n; start += c) {
            const Index b = std::min(c, n - start);
            CorrectionStep step{Z.leftCols(start), X.leftCols(start), X.middleCols(start, b),
                                Y.leftCols(start), Y.middleCols(start, b), hp, block};
            const CorrectionResult res = iterative_correction(step, kernel, past_online_prediction(step, kernel),
                                                              past_offline_prediction(step, kernel));
            d = worst(d, deviation(res.z_new, Z.middleCols(start, b)));
            step.hp.gamma_o = res.coeffs.gamma_o;
            if (res.coeffs.gamma_o != hp.gamma_o) jitter = std::max(jitter, res.coeffs.gamma_o);
            d = worst(d, deviation(res.z_new, iterative_correction_bcg_oracle(step, kernel)));
        }
        return d;
    });
    if (jitter > 0.0) {
        char note[160];
        std::snprintf(note, sizeof note,
                      "K_nn condition estimate above 1e10 with gamma_o = 0; jitter gamma_o = %.3g was applied", jitter);
        report.checks.back().note = note;
    }
    return report;
}

void print_report(const EquivalenceReport& report, std::ostream& out) {
    for (const EquivalenceCheck& c : report.checks) {
        char line[256];
        std::snprintf(line, sizeof line, "[%s] %-18s abs=%.3e scaled=%.3e threshold=%.0e  %s",
                      c.passed ? "PASS" : "FAIL", c.name.c_str(), c.abs_deviation, c.scaled_deviation, c.threshold,
                      c.identity.c_str());
        out << line << '\n';
        if (!c.error.empty()) out << "       error: " << c.error << '\n';
        if (!c.note.empty()) out << "       note: " << c.note << '\n';
    }
    if (report.passed()) {
        out << "all identities hold\n";
        return;
    }
    out << "violated identities:";
    for (const EquivalenceCheck& c : report.checks)
        if (!c.passed) out << ' ' << c.name;
    out << '\n';
}

}  // namespace okr
