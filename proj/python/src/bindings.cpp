#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>

#include "legonet/codec.hpp"
#include "legonet/container.hpp"
#include "legonet/error.hpp"
#include "legonet/inference.hpp"
#include "legonet/pipeline.hpp"

namespace py = pybind11;
using namespace legonet;

namespace {

// nlohmann -> Python via the json module; the reports are small.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::array_t<float> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(std::string name, const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                  TensorRole role) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(name), std::move(shape), std::vector<float>(a.data(), a.data() + a.size()), role);
}

const char* role_name(TensorRole r) {
  switch (r) {
    case TensorRole::kWeight: return "weight";
    case TensorRole::kBias: return "bias";
    case TensorRole::kBatchnormParam: return "batchnorm";
    default: return "other";
  }
}

TensorRole parse_role(const std::string& s) {
  if (s == "weight") return TensorRole::kWeight;
  if (s == "bias") return TensorRole::kBias;
  if (s == "batchnorm") return TensorRole::kBatchnormParam;
  if (s == "other") return TensorRole::kOther;
  throw Error(ErrorCode::kInvalidArgument, "unknown role '" + s + "'");
}

CompressOptions options(std::size_t k, std::uint32_t b, std::uint64_t seed, std::uint32_t max_iters, double tol,
                        unsigned threads) {
  return {.k = k, .b = b, .seed = seed, .max_iters = max_iters, .rel_tol = tol, .threads = threads};
}

}  // namespace

PYBIND11_MODULE(_legonet, m) {
  m.doc() = "LegoNet block-clustering compression (C++ core)";

  py::exception<Error>(m, "LegonetError", PyExc_RuntimeError);
  // Re-raise as LegonetError with the error code name attached as .code.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object type = py::module_::import("legonet._legonet").attr("LegonetError");
      py::object err = type(e.what());
      err.attr("code") = error_code_name(e.code());
      PyErr_SetObject(type.ptr(), err.ptr());
    }
  });

  py::class_<Tensor>(m, "Tensor")
      .def(py::init([](std::string name, py::array_t<float, py::array::c_style | py::array::forcecast> data,
                       const std::string& role) { return from_numpy(std::move(name), data, parse_role(role)); }),
           py::arg("name"), py::arg("data"), py::arg("role") = "weight")
      .def_property_readonly("name", &Tensor::name)
      .def_property_readonly("shape", [](const Tensor& t) { return t.shape(); })
      .def_property_readonly("role", [](const Tensor& t) { return role_name(t.role()); })
      .def("numpy", &to_numpy)
      .def("__repr__", [](const Tensor& t) {
        return "<Tensor " + t.name() + " " + shape_to_string(t.shape()) + " " + role_name(t.role()) + ">";
      });

  py::class_<ModelBundle>(m, "ModelBundle")
      .def(py::init([](std::vector<Tensor> layers) { return ModelBundle(std::move(layers)); }), py::arg("layers"))
      .def_property_readonly("layers", &ModelBundle::layers)
      .def_property_readonly("input_shape", [](const ModelBundle& b) { return b.manifest().input_shape; })
      .def_property_readonly("param_count", [](const ModelBundle& b) { return model_param_count(b); })
      .def("__getitem__",
           [](const ModelBundle& b, const std::string& name) {
             const Tensor* t = b.find(name);
             if (!t) throw py::key_error(name);
             return *t;
           })
      .def("__eq__", [](const ModelBundle& a, const ModelBundle& b) { return a == b; });

  py::class_<DatasetBundle>(m, "DatasetBundle")
      .def_property_readonly("count", &DatasetBundle::count)
      .def_property_readonly("num_classes", &DatasetBundle::num_classes)
      .def_property_readonly("labels", &DatasetBundle::labels)
      .def_property_readonly("inputs", [](const DatasetBundle& d) { return to_numpy(d.inputs()); });

  py::class_<CompressedModel>(m, "CompressedModel")
      .def_property_readonly("k", &CompressedModel::k)
      .def_property_readonly("b", [](const CompressedModel& c) { return c.b; })
      .def_property_readonly("bits_per_index", [](const CompressedModel& c) { return c.bits_per_index; })
      .def_property_readonly("block_count", &CompressedModel::block_count)
      .def_property_readonly("raw_layers",
                             [](const CompressedModel& c) {
                               std::vector<std::string> names;
                               for (const auto& r : c.raw_layers) names.push_back(r.tensor.name());
                               return names;
                             })
      .def_property_readonly("codebook",
                             [](const CompressedModel& c) {
                               py::array_t<float> out({static_cast<py::ssize_t>(c.k()), static_cast<py::ssize_t>(c.b),
                                                       static_cast<py::ssize_t>(c.b)});
                               std::copy(c.codebook.values().begin(), c.codebook.values().end(), out.mutable_data());
                               return out;
                             })
      .def("encode", [](const CompressedModel& c) {
        const auto bytes = encode_compressed(c);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      });

  m.def("read_model", &read_model, py::arg("path"));
  m.def("write_model", &write_model, py::arg("model"), py::arg("path"));
  m.def("read_dataset", &read_dataset, py::arg("path"));
  m.def("read_compressed", &read_compressed, py::arg("path"));
  m.def("write_compressed", &write_compressed, py::arg("model"), py::arg("path"));
  m.def("decode_compressed", [](const py::bytes& b) {
    const std::string s = b;
    return decode_compressed(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  });

  m.def(
      "compress",
      [](const ModelBundle& model, std::size_t k, std::uint32_t b, std::uint64_t seed, std::uint32_t max_iters,
         double tol, unsigned threads) {
        CompressResult r;
        {
          py::gil_scoped_release release;
          r = compress(model, options(k, b, seed, max_iters, tol, threads));
        }
        return py::make_tuple(std::move(r.model), to_python(report_to_json(r.report)));
      },
      py::arg("model"), py::arg("k"), py::arg("b") = 4, py::arg("seed") = 0, py::arg("max_iters") = 100,
      py::arg("tol") = 1e-6, py::arg("threads") = 1,
      "Cluster the model's b x b weight blocks into k legos. Returns (CompressedModel, report dict).");

  m.def("reconstruct", &reconstruct, py::arg("compressed"));

  m.def(
      "forward",
      [](const ModelBundle& model, py::array_t<float, py::array::c_style | py::array::forcecast> x) {
        return to_numpy(forward(model, from_numpy("input", x, TensorRole::kOther)));
      },
      py::arg("model"), py::arg("sample"));
  m.def("top1_accuracy", &top1_accuracy, py::arg("model"), py::arg("dataset"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "output_deviation",
      [](const ModelBundle& a, const ModelBundle& b, std::size_t probes, std::uint64_t seed, unsigned threads) {
        py::gil_scoped_release release;
        return output_deviation(a, b, random_probes(a.manifest(), probes, seed), threads);
      },
      py::arg("a"), py::arg("b"), py::arg("probes") = 128, py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "compute_cr",
      [](std::uint64_t p_compressed, std::uint64_t p_raw, std::uint64_t k, std::uint32_t b, unsigned wordlength) {
        const CrBreakdown cr = compute_cr(p_compressed, p_raw, k, b, wordlength);
        py::dict d;
        d["theoretical_cr"] = cr.theoretical_cr;
        d["bits_per_index"] = cr.bits_per_index;
        d["index_bits"] = cr.index_bits;
        d["codebook_bits"] = cr.codebook_bits;
        d["raw_bits"] = cr.raw_bits;
        d["compressed_bits"] = cr.compressed_bits;
        return d;
      },
      py::arg("p_compressed"), py::arg("p_raw"), py::arg("k"), py::arg("b"), py::arg("wordlength") = 32);

  m.def(
      "pack_indices",
      [](const std::vector<std::uint32_t>& idx, unsigned bits) {
        const auto bytes = pack_indices(idx, bits);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("indices"), py::arg("bits"));
  m.def(
      "unpack_indices",
      [](const py::bytes& b, std::size_t count, unsigned bits) {
        const std::string s = b;
        return unpack_indices(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), count, bits);
      },
      py::arg("stream"), py::arg("count"), py::arg("bits"));
  m.def("bits_for_k", &bits_for_k, py::arg("k"));

  m.def(
      "search",
      [](const ModelBundle& model, const std::string& mode, std::optional<DatasetBundle> dataset, double epsilon,
         std::optional<std::vector<std::size_t>> k_list, std::uint32_t b, std::uint64_t seed, unsigned threads) {
        if (mode != "a" && mode != "c") throw Error(ErrorCode::kInvalidArgument, "mode must be 'a' or 'c'");
        SearchPolicy policy;
        policy.mode = mode == "a" ? SearchMode::kLegoA : SearchMode::kLegoC;
        policy.epsilon = epsilon;
        policy.k_candidates = k_list ? *k_list : default_k_schedule();
        SearchResult r;
        {
          py::gil_scoped_release release;
          const Evaluator eval = dataset ? accuracy_evaluator(*dataset, threads)
                                         : deviation_evaluator(model, 128, seed, threads);
          r = search(model, eval, policy, options(policy.k_candidates.front(), b, seed, 100, 1e-6, threads));
        }
        return to_python(search_to_json(r, policy.mode, epsilon));
      },
      py::arg("model"), py::arg("mode") = "a", py::arg("dataset") = py::none(), py::arg("epsilon") = 0.0,
      py::arg("k_list") = py::none(), py::arg("b") = 4, py::arg("seed") = 0, py::arg("threads") = 1,
      "Pick K by the lossless (a) or tolerance (c) policy. Without a dataset the metric is logit deviation.");
}
