#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "restyle/bootstrap.hpp"
#include "restyle/checkpoint.hpp"
#include "restyle/experiment.hpp"
#include "restyle/schemes.hpp"

namespace py = pybind11;
using namespace restyle;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape(static_cast<std::size_t>(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] =
        static_cast<int>(a.shape(i));
    Tensor t(shape);
    std::copy(a.data(), a.data() + a.size(), t.data());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

py::dict step_to_dict(const StepRecord& s) {
    py::dict d;
    d["w"] = array_from_tensor(s.w);
    d["delta"] = s.delta.numel() ? py::object(array_from_tensor(s.delta)) : py::none();
    d["y_hat"] = array_from_tensor(s.y_hat);
    d["losses"] = s.losses;
    d["wall_clock_s"] = s.wall_clock_s;
    return d;
}

py::dict trace_to_dict(const InversionTrace& t) {
    py::dict d;
    d["scheme"] = t.scheme;
    d["replay_exact"] = t.replay_exact();
    py::list steps;
    for (const auto& s : t.steps) steps.append(step_to_dict(s));
    d["steps"] = steps;
    return d;
}

}  // namespace

PYBIND11_MODULE(_restyle, m) {
    m.doc() = "iterative residual GAN-inversion toolkit";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<ContractError>(m, "ContractError");

    py::class_<Generator>(m, "Generator")
        .def_static("build", &Generator::build, py::arg("seed"), py::arg("k"), py::arg("d"),
                    py::arg("resolution"), py::arg("avg_samples") = 10000)
        .def_property_readonly("k", &Generator::k)
        .def_property_readonly("d", &Generator::d)
        .def_property_readonly("resolution", &Generator::resolution)
        .def("avg_latent", [](const Generator& g) { return array_from_tensor(g.avg_latent()); })
        .def("sample_latent",
             [](const Generator& g, std::uint64_t seed) {
                 return array_from_tensor(g.sample_latent(seed));
             })
        .def("synthesize",
             [](const Generator& g, const py::array_t<double>& w) {
                 return array_from_tensor(g.synthesize(tensor_from_array(w)));
             })
        .def("finetune_stylized", &Generator::finetune_stylized, py::arg("transform"),
             py::arg("steps"), py::arg("seed"));

    py::class_<Encoder>(m, "Encoder")
        .def_static(
            "build",
            [](const std::string& variant, int in_channels, const Generator& g,
               std::uint64_t seed) {
                return Encoder::build(encoder_variant_from_string(variant), in_channels, g, seed);
            },
            py::arg("variant"), py::arg("in_channels"), py::arg("generator"), py::arg("seed"))
        .def_property_readonly("in_channels", &Encoder::in_channels)
        .def_property_readonly("k", &Encoder::k)
        .def_property_readonly("d", &Encoder::d)
        .def("encode", [](const Encoder& e, const py::array_t<double>& x) {
            return array_from_tensor(e.encode(tensor_from_array(x)));
        });

    m.def("concat_input", [](const py::array_t<double>& x, const py::array_t<double>& y) {
        return array_from_tensor(concat_input(tensor_from_array(x), tensor_from_array(y)));
    });
    m.def("apply_pixel_transform", [](const std::string& name, const py::array_t<double>& x) {
        return array_from_tensor(apply_pixel_transform(name, tensor_from_array(x)));
    });

    m.def(
        "restyle_infer",
        [](const Encoder& e, const Generator& g, const py::array_t<double>& x, int n_steps) {
            return trace_to_dict(restyle_infer(e, g, tensor_from_array(x), n_steps));
        },
        py::arg("encoder"), py::arg("generator"), py::arg("x"), py::arg("n_steps"));
    m.def("single_pass_infer",
          [](const Encoder& e, const Generator& g, const py::array_t<double>& x) {
              return trace_to_dict(single_pass_infer(e, g, tensor_from_array(x)));
          });
    m.def(
        "naive_iterate",
        [](const Encoder& e, const Generator& g, const py::array_t<double>& x, int n_steps) {
            return trace_to_dict(naive_iterate(e, g, tensor_from_array(x), n_steps));
        },
        py::arg("encoder"), py::arg("generator"), py::arg("x"), py::arg("n_steps"));
    m.def(
        "optimize_latent",
        [](const Generator& g, const py::array_t<double>& x, const py::array_t<double>& init,
           int n_iters, double lr) {
            OptimizeOptions opts;
            opts.lr = lr;
            return trace_to_dict(
                optimize_latent(g, tensor_from_array(x), tensor_from_array(init), n_iters, opts));
        },
        py::arg("generator"), py::arg("x"), py::arg("init"), py::arg("n_iters"),
        py::arg("lr") = 0.05);
    m.def(
        "hybrid_infer",
        [](const Encoder& e, const Generator& g, const py::array_t<double>& x, int n_opt_iters,
           int encoder_steps) {
            return trace_to_dict(
                hybrid_infer(e, g, tensor_from_array(x), n_opt_iters, encoder_steps));
        },
        py::arg("encoder"), py::arg("generator"), py::arg("x"), py::arg("n_opt_iters"),
        py::arg("encoder_steps") = 1);

    m.def("save_generator", &save_generator);
    m.def("load_generator", &load_generator);
    m.def("save_encoder", &save_encoder);
    m.def("load_encoder", &load_encoder);

    m.def(
        "run_experiment_config",
        [](const std::string& config_json) {
            ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
            ExperimentResult r = run_experiment(cfg);
            py::dict d;
            d["dir"] = r.dir;
            d["n_records"] = r.records.size();
            d["summary_csvs"] = r.summary_csvs;
            return d;
        },
        py::arg("config_json"), "Run the full pipeline from a JSON config string.");
}
