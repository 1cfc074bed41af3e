#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "gemmbench/cli.hpp"
#include "gemmbench/errors.hpp"
#include "gemmbench/profiler.hpp"
#include "gemmbench/report_io.hpp"
#include "gemmbench/training.hpp"

namespace py = pybind11;
using namespace gemmbench;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& arr) {
    if (arr.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(arr.ndim()) + "-D");
    const auto r = static_cast<std::size_t>(arr.shape(0));
    const auto c = static_cast<std::size_t>(arr.shape(1));
    std::vector<float> data(arr.data(), arr.data() + r * c);
    return Matrix(r, c, std::move(data));
}

py::array_t<float> to_array(const Matrix& m) {
    py::array_t<float> out({m.rows(), m.cols()});
    std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(float));
    return out;
}

py::dict counters_dict(const MemCounters& c) {
    py::dict d;
    d["global_loads"] = c.global_loads;
    d["global_stores"] = c.global_stores;
    d["local_loads"] = c.local_loads;
    d["local_stores"] = c.local_stores;
    d["barriers"] = c.barriers;
    d["global_load_lanes"] = c.global_load_lanes;
    d["global_store_lanes"] = c.global_store_lanes;
    return d;
}

ModelSpec spec_from(const py::object& model) {
    if (py::isinstance<py::int_>(model)) return preset_model(model.cast<int>());
    ModelSpec s{model.cast<std::vector<std::size_t>>()};
    validate_spec(s);
    return s;
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_gemmbench, m) {
    m.doc() = "GEMM kernel simulator, host kernels and training-step profiler";

    auto base = py::register_exception<Error>(m, "GemmbenchError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ResourceError>(m, "ResourceError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    py::class_<DeviceProfile>(m, "DeviceProfile")
        .def(py::init<>())
        .def_readwrite("max_workgroup_size", &DeviceProfile::max_workgroup_size)
        .def_readwrite("local_mem_bytes", &DeviceProfile::local_mem_bytes)
        .def_readwrite("copy_bandwidth", &DeviceProfile::copy_bandwidth)
        .def_readwrite("copy_latency", &DeviceProfile::copy_latency)
        .def_readwrite("vector_width", &DeviceProfile::vector_width)
        .def_static("load", &load_device_profile, py::arg("path"))
        .def_static("from_json", [](const std::string& s) { return parse_device_profile(s); })
        .def("to_json", &device_profile_to_json)
        .def("__repr__", [](const DeviceProfile& d) { return "DeviceProfile(" + device_profile_to_json(d) + ")"; });

    m.def("transfer_time", &transfer_time, py::arg("bytes"), py::arg("device"));

    m.def("variants", [] {
        std::vector<std::string> out;
        for (const auto& v : all_variants()) out.push_back(v.name());
        return out;
    });

    m.def("matmul_reference", [](const FloatArray& a, const FloatArray& b) {
        return to_array(matmul_reference(to_matrix(a), to_matrix(b)));
    }, py::arg("a"), py::arg("b"));

    m.def("random_matrix", [](std::size_t rows, std::size_t cols, std::uint64_t seed) {
        return to_array(random_matrix(rows, cols, Seed{seed}));
    }, py::arg("rows"), py::arg("cols"), py::arg("seed"));

    m.def("max_relative_error", [](const FloatArray& x, const FloatArray& ref) {
        return max_relative_error(to_matrix(x), to_matrix(ref));
    }, py::arg("x"), py::arg("ref"));

    m.def("simulate_gemm", [](const FloatArray& a, const FloatArray& b, const std::string& variant,
                              const DeviceProfile& device) {
        const auto r = simulate_gemm(KernelVariant::parse(variant), to_matrix(a), to_matrix(b), device);
        return py::make_tuple(to_array(r.c), counters_dict(r.counters));
    }, py::arg("a"), py::arg("b"), py::arg("variant") = "tiled_vectorized16", py::arg("device") = DeviceProfile{},
       "Runs a kernel variant on the work-group simulator; returns (C, counters).");

    m.def("host_gemm", [](const FloatArray& a, const FloatArray& b, const std::string& variant) {
        const auto r = host_gemm(KernelVariant::parse(variant), to_matrix(a), to_matrix(b));
        return py::make_tuple(to_array(r.c), r.seconds);
    }, py::arg("a"), py::arg("b"), py::arg("variant") = "tiled_vectorized16",
       "Runs the native host kernel; returns (C, seconds).");

    m.def("gflops", &gflops, py::arg("n"), py::arg("avg_time_s"));
    m.def("default_sweep_sizes", &default_sweep_sizes);

    m.def("sweep", [](const std::string& variant, const std::vector<std::size_t>& sizes, const std::string& backend,
                      std::size_t warmups, std::size_t hot_runs, std::uint64_t seed) {
        SweepOptions opt;
        opt.warmups = warmups;
        opt.hot_runs = hot_runs;
        opt.seed = Seed{seed};
        py::list out;
        for (const auto& r : sweep(variant, sizes, parse_sweep_backend(backend), opt)) {
            py::dict d;
            d["n"] = r.n;
            d["variant"] = r.variant;
            d["backend"] = r.backend;
            d["avg_time_s"] = r.avg_time_s;
            d["gflops"] = r.gflops;
            out.append(d);
        }
        return out;
    }, py::arg("variant"), py::arg("sizes") = default_sweep_sizes(), py::arg("backend") = "host",
       py::arg("warmups") = kDefaultWarmups, py::arg("hot_runs") = kDefaultHotRuns, py::arg("seed") = 1);

    m.def("counters", [](const std::vector<std::size_t>& sizes, const DeviceProfile& device) {
        return counters_to_csv(collect_counters(sizes, all_variants(), device));
    }, py::arg("sizes"), py::arg("device") = DeviceProfile{}, "Counter table as CSV text.");

    m.def("profile_training_step", [](const py::object& model, std::size_t batch, const DeviceProfile& device,
                                      const std::string& variant, const std::string& compute,
                                      double device_gflops, double host_gflops, std::uint64_t seed) {
        const auto spec = spec_from(model);
        ProfileOptions opt;
        opt.compute = parse_compute_model(compute);
        opt.device_gflops = device_gflops;
        opt.host_gflops = host_gflops;
        const auto r = profile_training_step(Model::init(spec, Seed{seed}),
                                             random_batch(spec, batch, Seed{seed + 1000}), device,
                                             KernelVariant::parse(variant), opt);
        return json_loads(report_to_json(r));
    }, py::arg("model"), py::arg("batch") = 32, py::arg("device") = DeviceProfile{},
       py::arg("variant") = "tiled_vectorized16", py::arg("compute") = "modeled", py::arg("device_gflops") = 70.0,
       py::arg("host_gflops") = 30.0, py::arg("seed") = 1,
       "model is a preset number 1..4 or a list of layer widths; returns the report as a dict.");

    m.def("gradient_check", [](const py::object& model, std::size_t cap, std::size_t batch, std::uint64_t seed,
                               double epsilon) {
        const auto spec = cap == 0 ? spec_from(model) : cap_width(spec_from(model), cap);
        GemmEngine engine;
        const auto r = gradient_check(Model::init(spec, Seed{seed}), random_batch(spec, batch, Seed{seed + 100}),
                                      engine, epsilon);
        py::dict d;
        d["model"] = spec.to_string();
        d["max_rel_error"] = r.max_rel_error;
        d["worst_parameter"] = r.worst_parameter;
        d["checked"] = r.checked;
        d["skipped_at_kink"] = r.skipped_at_kink;
        return d;
    }, py::arg("model"), py::arg("cap") = 16, py::arg("batch") = 4, py::arg("seed") = 42, py::arg("epsilon") = 1e-3);

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Runs the command-line front end; returns (exit_code, stdout, stderr).");
}
