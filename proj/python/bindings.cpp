#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "disturb/experiment.hpp"
#include "disturb/loss.hpp"
#include "disturb/network.hpp"
#include "disturb/synth.hpp"

namespace py = pybind11;
using namespace disturb;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
    Tensor t(shape);
    std::memcpy(t.data(), a.data(), sizeof(double) * t.size());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::memcpy(a.mutable_data(), t.data(), sizeof(double) * t.size());
    return a;
}

ExperimentConfig config_from(const std::string& preset_name,
                             const std::map<std::string, std::string>& overrides) {
    ExperimentConfig cfg;
    if (!preset_name.empty()) cfg = preset(preset_name);
    for (const auto& [k, v] : overrides) apply_config_entry(cfg, k, v);
    cfg.validate();
    return cfg;
}

py::dict record_dict(const MetricsRecord& r) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["train_err"] = r.train_err;
    d["test_err"] = r.test_err;
    d["train_loss"] = r.train_loss;
    d["lr"] = r.lr;
    d["effective_alpha"] = r.effective_alpha;
    d["wall_s"] = r.wall_s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_disturblabel, m) {
    m.doc() = "Label-disturbance regularization: samplers, network and experiment harness";

    m.def(
        "multinoulli_probs",
        [](std::size_t truth, std::size_t classes, double alpha) {
            return multinoulli_probs(truth, classes, alpha).probs;
        },
        py::arg("truth"), py::arg("classes"), py::arg("alpha"),
        "Label distribution concentrated on the true class: 1-(C-1)/C*alpha there, "
        "alpha/C elsewhere");

    m.def(
        "soft_label",
        [](std::size_t truth, std::size_t classes, double alpha) {
            return soft_label({truth, classes}, alpha).probs;
        },
        py::arg("truth"), py::arg("classes"), py::arg("alpha"),
        "Expectation of the disturbed one-hot label");

    m.def(
        "disturb_labels",
        [](const std::vector<std::size_t>& labels, std::size_t classes, double alpha,
           std::uint64_t seed) {
            std::vector<OneHotLabel> batch;
            batch.reserve(labels.size());
            for (std::size_t l : labels) batch.push_back({l, classes});
            DisturbConfig cfg;
            cfg.alpha = alpha;
            cfg.seed = seed;
            RngStream rng(seed, "disturb");
            std::vector<std::size_t> out;
            for (const auto& l : disturb_batch(batch, cfg, rng)) out.push_back(l.class_index);
            return out;
        },
        py::arg("labels"), py::arg("classes"), py::arg("alpha"), py::arg("seed") = 1,
        "Redraw each label from the multinoulli distribution (seeded)");

    m.def(
        "softmax_xent",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& logits,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& targets) {
            LossResult r = softmax_xent_batch(tensor_from_array(logits),
                                              tensor_from_array(targets));
            return py::make_tuple(r.loss, array_from_tensor(r.grad));
        },
        py::arg("logits"), py::arg("targets"),
        "Mean softmax cross-entropy over rows and its gradient");

    m.def(
        "synth_digits",
        [](std::size_t count, std::uint64_t seed) {
            Dataset d = synth_digits(count, SynthSpec{}, seed);
            std::vector<std::int64_t> lab(d.count());
            for (std::size_t i = 0; i < d.count(); ++i) {
                lab[i] = static_cast<std::int64_t>(d.labels[i].class_index);
            }
            py::array_t<std::int64_t> labels({static_cast<py::ssize_t>(lab.size())},
                                             {static_cast<py::ssize_t>(sizeof(std::int64_t))},
                                             lab.data());
            return py::make_tuple(array_from_tensor(d.images), labels);
        },
        py::arg("count"), py::arg("seed") = 90210,
        "Procedural digit corpus as (images [N,1,28,28] in [0,1], labels [N])");

    py::class_<Network>(m, "Network")
        .def_static(
            "parse",
            [](const std::string& s) { return new Network(Network::parse(s)); },
            py::arg("description"))
        .def("render", &Network::render)
        .def("build", &Network::build, py::arg("in_channels"), py::arg("height"),
             py::arg("width"), py::arg("dropout_enabled") = true)
        .def("init_params",
             [](Network& net, std::uint64_t seed) {
                 RngStream rng(seed, "init");
                 net.init_params(rng);
             },
             py::arg("seed") = 1)
        .def("class_count", &Network::class_count)
        .def("forward",
             [](Network& net,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 return array_from_tensor(net.forward(tensor_from_array(x), Mode::Eval, nullptr));
             },
             py::arg("images"), "Eval-mode logits for a [B,C,H,W] batch");

    m.def("preset_names", &preset_names);

    m.def(
        "run_experiment",
        [](const std::string& preset_name, const std::map<std::string, std::string>& overrides) {
            RunResult r = run_experiment(config_from(preset_name, overrides));
            py::dict out;
            py::list records;
            for (const auto& rec : r.records) records.append(record_dict(rec));
            out["records"] = records;
            out["final_test_err"] = r.final_test_err;
            out["best_test_err"] = r.best_test_err;
            out["best_epoch"] = r.best_epoch;
            return out;
        },
        py::arg("preset") = std::string(),
        py::arg("overrides") = std::map<std::string, std::string>(),
        "Run one training experiment; overrides use the CLI key names");
}
