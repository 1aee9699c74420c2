#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "holobind/alt_bindings.hpp"
#include "holobind/attacks.hpp"
#include "holobind/errors.hpp"
#include "holobind/protocol.hpp"
#include "holobind/tensor_io.hpp"
#include "holobind/vsa.hpp"

namespace py = pybind11;
using namespace holobind;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Dims dims(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(dims), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.dims().begin(), t.dims().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

// Secrets coming from Python are raw arrays; only the tensor matters for unbinding.
Secret to_secret(const Array& a) { return Secret{to_tensor(a), 0, false}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "2D HRR binding, secrets and wire helpers";

  static py::exception<Error> error(m, "HolobindError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("sample_secret", [](const std::vector<std::size_t>& shape, std::uint64_t seed) {
    return to_array(sample_secret(shape, RngStream(seed)).value.tensor);
  }, py::arg("shape"), py::arg("seed"), "Draws a projected secret of the given shape.");
  m.def("project", [](const Array& v) { return to_array(project(to_tensor(v))); });
  m.def("bind", [](const Array& x, const Array& y) { return to_array(bind(to_tensor(x), to_tensor(y))); });
  m.def("unbind", [](const Array& bound, const Array& secret) {
    return to_array(unbind(to_tensor(bound), to_secret(secret)));
  });
  m.def("cosine", [](const Array& a, const Array& b) { return cosine(to_tensor(a), to_tensor(b)); });

  m.def("hilbert_encode", [](const Array& img) { return to_array(hilbert_encode(to_tensor(img))); });
  m.def("hilbert_decode", [](const Array& linear, std::size_t rows, std::size_t cols) {
    return to_array(hilbert_decode(to_tensor(linear), rows, cols));
  });

  m.def("encode_tensor", [](const Array& t, bool f32) {
    const Bytes b = encode_tensor(to_tensor(t), f32 ? Dtype::f32 : Dtype::f64);
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  }, py::arg("tensor"), py::arg("f32") = false);
  m.def("decode_tensor", [](const py::bytes& data) {
    const std::string s = data;
    return to_array(decode_tensor(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
  });
  m.def("request_wire_size", [](const std::vector<std::size_t>& shape) { return request_wire_size(shape); });

  m.def("ari", [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) { return ari(a, b); });
}
