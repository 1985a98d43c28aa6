#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "okr/error.hpp"
#include "okr/harness.hpp"
#include "okr/metrics.hpp"

namespace py = pybind11;
using namespace okr;

namespace {

HyperParams make_hp(double eta, double gamma, double gamma_o, Index block, std::uint64_t seed) {
    HyperParams hp;
    hp.eta = eta;
    hp.gamma = gamma;
    hp.gamma_o = gamma_o;
    hp.block = block;
    hp.seed = seed;
    hp.validate();
    return hp;
}

OrderedDataset make_dataset(const MatrixXd& X, const MatrixXd& Y, std::vector<int> labels,
                            std::vector<Index> boundaries) {
    OrderedDataset d{X, Y, std::move(labels), std::move(boundaries)};
    d.validate();
    return d;
}

py::dict dataset_dict(const OrderedDataset& d) {
    py::dict out;
    out["X"] = d.X;
    out["Y"] = d.Y;
    out["labels"] = d.labels;
    out["task_boundaries"] = d.task_boundaries;
    return out;
}

MlpSpec make_spec(std::vector<Index> widths, const std::string& activation) {
    MlpSpec spec{std::move(widths), activation_from_string(activation)};
    spec.validate();
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Online and offline kernel regression with target shift and target correction";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    py::class_<KernelSpec>(m, "Kernel")
        .def_static("rbf", &KernelSpec::rbf, py::arg("bandwidth"))
        .def_static("random_feature_tanh", &KernelSpec::random_feature_tanh, py::arg("projection"))
        .def_static("linear", &KernelSpec::linear, py::arg("input_dim"))
        .def_static("random_fourier", &KernelSpec::random_fourier, py::arg("frequencies"), py::arg("phases"))
        .def_static("precomputed", &KernelSpec::precomputed, py::arg("gram"))
        .def_static(
            "from_config",
            [](const std::string& kind, Index input_dim, std::uint64_t seed, double bandwidth, Index d_j,
               Index features) {
                return build_kernel(KernelConfig{kind, bandwidth, d_j, features}, input_dim, seed);
            },
            py::arg("kind"), py::arg("input_dim"), py::arg("seed") = 0, py::arg("bandwidth") = 0.1,
            py::arg("d_j") = 100, py::arg("features") = 200)
        .def_property_readonly("name", &KernelSpec::name)
        .def_property_readonly("has_features", &KernelSpec::has_features)
        .def("features", &KernelSpec::features, py::arg("X"))
        .def(
            "gram",
            [](const KernelSpec& k, const MatrixXd& X, std::optional<MatrixXd> X2) {
                return X2 ? gram(k, X, *X2) : gram(k, X);
            },
            py::arg("X"), py::arg("X2") = py::none());

    m.def("directional_mask", py::overload_cast<const MatrixRef&, Index>(&directional_mask), py::arg("K"),
          py::arg("block") = 1);

    m.def("offline_predict", &offline_predict, py::arg("kernel"), py::arg("X"), py::arg("Y"), py::arg("gamma"),
          py::arg("Xstar"));
    m.def("online_closed_form", &online_closed_form, py::arg("kernel"), py::arg("X"), py::arg("Y"), py::arg("eta"),
          py::arg("gamma"), py::arg("Xstar"));
    m.def("minibatch_closed_form", &minibatch_closed_form, py::arg("kernel"), py::arg("X"), py::arg("Y"),
          py::arg("eta"), py::arg("block"), py::arg("Xstar"));
    m.def(
        "sgd_run",
        [](const KernelSpec& k, const MatrixXd& X, const MatrixXd& Y, double eta, double gamma, Index block,
           Index epochs) {
            SgdOptions opt;
            opt.block = block;
            opt.epochs = epochs;
            return sgd_run(k, make_dataset(X, Y, {}, {}), eta, gamma, opt).final_state.W;
        },
        "Final weight matrix (d_y x d_phi) after SGD in feature space", py::arg("kernel"), py::arg("X"), py::arg("Y"),
        py::arg("eta"), py::arg("gamma") = 0.0, py::arg("block") = 1, py::arg("epochs") = 1);

    m.def(
        "effective_targets",
        [](const KernelSpec& k, const MatrixXd& X, const MatrixXd& Y, double eta, double gamma) {
            return effective_targets(k, X, Y, eta, gamma).values;
        },
        py::arg("kernel"), py::arg("X"), py::arg("Y"), py::arg("eta"), py::arg("gamma"));
    m.def(
        "corrected_targets",
        [](const KernelSpec& k, const MatrixXd& X, const MatrixXd& Y, double eta, double gamma) {
            return corrected_targets(k, X, Y, eta, gamma).values;
        },
        py::arg("kernel"), py::arg("X"), py::arg("Y"), py::arg("eta"), py::arg("gamma"));
    m.def(
        "iterative_correction_run",
        [](const MatrixXd& K, const MatrixXd& Y, double eta, double gamma, double gamma_o, Index chunk,
           Index block) {
            return iterative_correction_run(K, Y, make_hp(eta, gamma, gamma_o, block, 0), chunk, block).z;
        },
        "Causal chunk-wise corrected targets for a stream with Gram K", py::arg("K"), py::arg("Y"), py::arg("eta"),
        py::arg("gamma"), py::arg("gamma_o") = 0.0, py::arg("chunk") = 20, py::arg("block") = 1);

    m.def(
        "init_weights",
        [](std::vector<Index> widths, const std::string& activation, std::uint64_t seed) {
            return init_weights(make_spec(std::move(widths), activation), seed);
        },
        py::arg("widths"), py::arg("activation") = "relu", py::arg("seed") = 0);
    m.def(
        "mlp_forward",
        [](std::vector<Index> widths, const std::string& activation, const MlpWeights& w, const MatrixXd& X) {
            return mlp_forward(make_spec(std::move(widths), activation), w, X);
        },
        py::arg("widths"), py::arg("activation"), py::arg("weights"), py::arg("X"));
    m.def(
        "mlp_jacobian",
        [](std::vector<Index> widths, const std::string& activation, const MlpWeights& w, const VectorXd& x) {
            return mlp_jacobian(make_spec(std::move(widths), activation), w, x);
        },
        py::arg("widths"), py::arg("activation"), py::arg("weights"), py::arg("x"));
    m.def(
        "empirical_ntk_gram",
        [](std::vector<Index> widths, const std::string& activation, const MlpWeights& w, const MatrixXd& X,
           bool per_output) {
            return empirical_ntk_gram(make_spec(std::move(widths), activation), w, X,
                                      per_output ? NtkMode::PerOutput : NtkMode::TraceAveraged)
                .grams;
        },
        "List of Gram matrices: one per output, or the single output-averaged Gram", py::arg("widths"),
        py::arg("activation"), py::arg("weights"), py::arg("X"), py::arg("per_output") = false);

    m.def(
        "generate_task",
        [](const std::string& config_json) {
            const TaskData t = generate_task(task_config_from_json(json::parse(config_json)));
            py::dict out;
            out["train"] = dataset_dict(t.train);
            out["test"] = dataset_dict(t.test);
            out["classification"] = t.classification;
            return out;
        },
        "Task data for a JSON task config", py::arg("config_json") = "{}");

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(experiment_config_from_json(json::parse(config_json)));
            }
            std::ostringstream curves;
            export_curves(r.records, curves, CurveFormat::Json);
            py::dict out;
            out["curves"] = curves.str();
            out["summary"] = to_json(r.summary).dump();
            return out;
        },
        "Curves and summary (both JSON text) for a JSON experiment config", py::arg("config_json") = "{}");

    m.def(
        "equivalence_report",
        [](const KernelSpec& k, const MatrixXd& X, const MatrixXd& Y, const MatrixXd& Xstar, double eta,
           double gamma, double gamma_o, Index chunk) {
            const OrderedDataset train = make_dataset(X, Y, {}, {});
            const OrderedDataset test = make_dataset(Xstar, MatrixXd::Zero(Y.rows(), Xstar.cols()), {}, {});
            const EquivalenceReport rep = equivalence_report(train, test, k, make_hp(eta, gamma, gamma_o, 1, 0), chunk);
            py::list out;
            for (const EquivalenceCheck& c : rep.checks) {
                py::dict d;
                d["name"] = c.name;
                d["passed"] = c.passed;
                d["abs_deviation"] = c.abs_deviation;
                d["scaled_deviation"] = c.scaled_deviation;
                d["threshold"] = c.threshold;
                d["error"] = c.error;
                d["note"] = c.note;
                out.append(d);
            }
            return out;
        },
        py::arg("kernel"), py::arg("X"), py::arg("Y"), py::arg("Xstar"), py::arg("eta") = 0.5, py::arg("gamma") = 1.0,
        py::arg("gamma_o") = 0.0, py::arg("chunk") = 20);

    m.def("mse", &mse, py::arg("prediction"), py::arg("target"));
    m.def("argmax_accuracy", &argmax_accuracy, py::arg("prediction"), py::arg("target"));
}
