// okr: command-line front end for the experiment harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "okr/error.hpp"
#include "okr/harness.hpp"
#include "okr/matrix_io.hpp"
#include "okr/metrics.hpp"
#include "okr/target_shift.hpp"

namespace fs = std::filesystem;
using namespace okr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitEquivalence = 2;
constexpr int kExitNumerical = 3;

struct Options {
    std::string config;
    std::string out = ".";
    int seeds = 0;
    std::vector<std::uint64_t> seed_list;
    std::string format = "csv";
    bool dump_coeffs = false;
    std::string learner;
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
    if (!o.seed_list.empty()) cfg.seeds = o.seed_list;
    if (o.seeds > 0) {
        cfg.seeds.clear();
        for (int i = 0; i < o.seeds; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
    }
    return cfg;
}

CurveFormat curve_format(const Options& o) { return o.format == "json" ? CurveFormat::Json : CurveFormat::Csv; }

std::string out_path(const Options& o, const std::string& name) {
    fs::create_directories(o.out);
    return (fs::path(o.out) / name).string();
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

void print_summary(const std::vector<SummaryRow>& summary) {
    for (const SummaryRow& r : summary) {
        char line[256];
        std::snprintf(line, sizeof line, "%-24s %-20s %.6g +/- %.3g (n=%lld)", r.learner.c_str(), r.metric.c_str(),
                      r.mean, r.sem, static_cast<long long>(r.seeds));
        std::cout << line << '\n';
    }
}

TaskData task_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    TaskConfig t = cfg.task;
    t.seed = seed;
    return generate_task(t);
}

const char* target_column(Provenance p) {
    switch (p) {
        case Provenance::True: return "y_true";
        case Provenance::Effective: return "y_eff";
        case Provenance::Corrected: return "y_corr";
        case Provenance::IterativeCorrected: return "y_iter";
    }
    return "y";
}

void write_targets(const std::string& path, const MatrixXd& y_true, const std::vector<TargetMatrix>& extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "index";
    for (Index k = 0; k < y_true.rows(); ++k) out << ",y_true_" << k;
    for (const TargetMatrix& t : extra)
        for (Index k = 0; k < t.values.rows(); ++k) out << ',' << target_column(t.provenance) << '_' << k;
    out << '\n';
    for (Index j = 0; j < y_true.cols(); ++j) {
        out << j;
        for (Index k = 0; k < y_true.rows(); ++k) out << ',' << format_double(y_true(k, j));
        for (const TargetMatrix& t : extra)
            for (Index k = 0; k < t.values.rows(); ++k) out << ',' << format_double(t.values(k, j));
        out << '\n';
    }
}

int cmd_gen(const Options& o) {
    const ExperimentConfig cfg = load(o);
    for (std::uint64_t seed : cfg.seeds) {
        const std::string path = out_path(o, "task_seed" + std::to_string(seed) + ".csv");
        write_task(task_for_seed(cfg, seed), path);
        std::cout << "wrote " << path << '\n';
    }
    return kExitOk;
}

int cmd_fit(const Options& o) {
    ExperimentConfig cfg = load(o);
    const LearnerConfig* chosen = &cfg.learners.front();
    if (!o.learner.empty()) {
        chosen = nullptr;
        for (const LearnerConfig& l : cfg.learners)
            if (l.tag == o.learner || to_string(l.kind) == o.learner) chosen = &l;
        if (!chosen) {
            LearnerConfig adhoc;
            adhoc.kind = learner_from_string(o.learner);
            adhoc.tag = o.learner;
            cfg.learners = {adhoc};
            chosen = &cfg.learners.front();
        }
    }
    std::vector<CurveRecord> records;
    for (std::uint64_t seed : cfg.seeds) {
        const TaskData task = task_for_seed(cfg, seed);
        LearnerRun run = run_learner(cfg, *chosen, task, seed);
        records.insert(records.end(), run.records.begin(), run.records.end());
        if (!o.dump_coeffs) continue;

        const std::string stem = chosen->tag + "_seed" + std::to_string(seed);
        const LearnerArtifacts& a = run.artifacts;
        std::vector<TargetMatrix> extra;
        if (a.provenance != Provenance::True) extra.push_back({a.targets, a.provenance});
        HyperParams hp = chosen->hp ? *chosen->hp : cfg.hp;
        if (chosen->kind == LearnerKind::OnlineTrue && hp.block == 1) {
            const KernelSpec kernel = build_kernel(cfg.kernel, task.train.input_dim(), seed);
            extra.push_back(effective_targets(kernel, task.train.X, task.train.Y, hp.eta, hp.gamma));
        }
        write_targets(out_path(o, "targets_" + stem + ".csv"), task.train.Y, extra);
        json desc = {{"learner", chosen->tag},
                     {"kind", to_string(chosen->kind)},
                     {"seed", seed},
                     {"kernel", to_json(cfg)["kernel"]},
                     {"hyperparameters", {{"eta", hp.eta}, {"gamma", hp.gamma}, {"gamma_o", hp.gamma_o}, {"block", hp.block}}},
                     {"targets", to_string(a.provenance)},
                     {"dataset", "task_seed" + std::to_string(seed) + ".csv"}};
        write_task(task, out_path(o, "task_seed" + std::to_string(seed) + ".csv"));
        if (chosen->kind == LearnerKind::SgdMlp) {
            json files = json::array();
            for (std::size_t l = 0; l < a.weights.size(); ++l) {
                const std::string name = "weights_" + stem + "_layer" + std::to_string(l) + ".csv";
                write_matrix(out_path(o, name), a.weights[l]);
                files.push_back(name);
            }
            desc["form"] = "mlp_weights";
            desc["weights"] = files;
        } else {
            const std::string name = "coeffs_" + stem + ".csv";
            write_matrix(out_path(o, name), a.dual);
            desc["form"] = "dual_coefficients";
            desc["coefficients"] = name;
            desc["coefficients_shape"] = {a.dual.rows(), a.dual.cols()};
        }
        if (!a.correction.empty()) {
            json chunks = json::array();
            for (std::size_t c = 0; c < a.correction.size(); ++c) {
                const std::string on = "c_on_" + stem + "_chunk" + std::to_string(c) + ".csv";
                const std::string off = "c_off_" + stem + "_chunk" + std::to_string(c) + ".csv";
                write_matrix(out_path(o, on), a.correction[c].c_on);
                write_matrix(out_path(o, off), a.correction[c].c_off);
                chunks.push_back({{"c_on", on}, {"c_off", off}, {"gamma_o", a.correction[c].gamma_o}});
            }
            desc["correction_chunks"] = chunks;
        }
        write_json(out_path(o, "predictor_" + stem + ".json"), desc);
    }
    export_curves(records, out_path(o, "curves." + o.format), curve_format(o));
    const auto summary = summarize(records);
    write_json(out_path(o, "summary.json"), to_json(summary));
    print_summary(summary);
    return kExitOk;
}

int cmd_report(const Options& o) {
    const ExperimentConfig cfg = load(o);
    bool ok = true;
    json all = json::array();
    for (std::uint64_t seed : cfg.seeds) {
        const TaskData task = task_for_seed(cfg, seed);
        const KernelSpec kernel = build_kernel(cfg.kernel, task.train.input_dim(), seed);
        HyperParams hp = cfg.hp;
        hp.seed = seed;
        const EquivalenceReport report = equivalence_report(task.train, task.test, kernel, hp, cfg.chunk);
        std::cout << "seed " << seed << " (kernel " << kernel.name() << ", eta " << hp.eta << ", gamma " << hp.gamma
                  << ")\n";
        print_report(report, std::cout);
        ok = ok && report.passed();
        for (const EquivalenceCheck& c : report.checks)
            all.push_back({{"seed", seed},
                           {"check", c.name},
                           {"identity", c.identity},
                           {"abs_deviation", c.abs_deviation},
                           {"scaled_deviation", c.scaled_deviation},
                           {"threshold", c.threshold},
                           {"passed", c.passed},
                           {"error", c.error}});
    }
    write_json(out_path(o, "report.json"), all);
    return ok ? kExitOk : kExitEquivalence;
}

int cmd_curve(const Options& o) {
    const ExperimentConfig cfg = load(o);
    const ExperimentResult result = run_experiment(cfg);
    const std::string path = out_path(o, "curves." + o.format);
    export_curves(result.records, path, curve_format(o));
    write_json(out_path(o, "summary.json"), to_json(result.summary));
    print_summary(result.summary);
    std::cout << "wrote " << path << '\n';
    return kExitOk;
}

int cmd_ntk_train(const Options& o) {
    ExperimentConfig cfg = load(o);
    std::vector<LearnerConfig> mlps;
    for (const LearnerConfig& l : cfg.learners)
        if (l.kind == LearnerKind::SgdMlp) mlps.push_back(l);
    if (mlps.empty()) {
        LearnerConfig l;
        l.kind = LearnerKind::SgdMlp;
        l.tag = "sgd_mlp";
        mlps.push_back(l);
    }
    std::vector<CurveRecord> records;
    for (std::uint64_t seed : cfg.seeds) {
        const TaskData task = task_for_seed(cfg, seed);
        for (const LearnerConfig& l : mlps) {
            LearnerRun run = run_learner(cfg, l, task, seed);
            records.insert(records.end(), run.records.begin(), run.records.end());
            std::ofstream metrics(out_path(o, "metrics_" + l.tag + "_seed" + std::to_string(seed) + ".csv"),
                                  std::ios::binary);
            write_metrics_csv(run.artifacts.metrics, metrics);
        }
    }
    export_curves(records, out_path(o, "curves." + o.format), curve_format(o));
    const auto summary = summarize(records);
    write_json(out_path(o, "summary.json"), to_json(summary));
    print_summary(summary);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online/offline kernel regression equivalences and target correction"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--seeds", o.seeds, "Run seeds 0..K-1")->check(CLI::PositiveNumber);
        sub->add_option("--seed", o.seed_list, "Explicit seed (repeatable)");
        sub->add_option("--format", o.format, "Curve format")->check(CLI::IsMember({"csv", "json"}));
    };
    CLI::App* gen = app.add_subcommand("gen", "Generate the task data of each seed");
    CLI::App* fit = app.add_subcommand("fit", "Run a single learner");
    CLI::App* report = app.add_subcommand("report", "Check the online/offline equivalence identities");
    CLI::App* curve = app.add_subcommand("curve", "Learning curves of every configured learner");
    CLI::App* ntk = app.add_subcommand("ntk-train", "MLP training with empirical-NTK target correction");
    for (CLI::App* sub : {gen, fit, report, curve, ntk}) add_common(sub);
    fit->add_option("--learner", o.learner, "Learner tag or kind (default: first configured)");
    fit->add_flag("--dump-coeffs", o.dump_coeffs, "Write coefficients, targets and a predictor descriptor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(o);
        if (fit->parsed()) return cmd_fit(o);
        if (report->parsed()) return cmd_report(o);
        if (curve->parsed()) return cmd_curve(o);
        if (ntk->parsed()) return cmd_ntk_train(o);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
