#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "linc/analytic_model.hpp"
#include "linc/erasure_coder.hpp"
#include "linc/error.hpp"
#include "linc/experiment.hpp"
#include "linc/gf256.hpp"

namespace py = pybind11;

namespace {

linc::FlowEnsemble ensemble(const std::vector<std::pair<double, int>>& flows) {
  linc::FlowEnsemble e;
  for (const auto& [lambda, eta] : flows) e.flows.push_back({lambda, eta});
  return e;
}

std::vector<py::bytes> encode(int k, int n, std::uint32_t block_id, const std::vector<std::string>& data) {
  std::vector<linc::Bytes> in;
  for (const auto& s : data) in.emplace_back(s.begin(), s.end());
  std::vector<py::bytes> out;
  for (const auto& p : linc::encode_block({k, n}, block_id, in)) {
    auto wire = linc::serialize_tag(p.tag, n);
    wire.insert(wire.end(), p.payload.begin(), p.payload.end());
    out.emplace_back(reinterpret_cast<const char*>(wire.data()), wire.size());
  }
  return out;
}

py::object decode(int k, int n, const std::vector<std::string>& wires) {
  std::vector<linc::CodedPacket> pkts;
  const auto hdr = linc::tag_wire_size(n);
  for (const auto& w : wires) {
    if (w.size() < hdr) throw linc::UsageError("decode: packet shorter than its tag");
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(w.data()), w.size());
    pkts.push_back({linc::parse_tag(bytes.first(hdr), n), linc::Bytes(bytes.begin() + hdr, bytes.end())});
  }
  const auto got = linc::decode_block({k, n}, pkts);
  if (!got) return py::none();
  py::list out;
  for (const auto& b : *got) out.append(py::bytes(reinterpret_cast<const char*>(b.data()), b.size()));
  return out;
}

}  // namespace

PYBIND11_MODULE(_linc, m) {
  m.doc() = "LINC erasure coding, analytic model and simulator";

  py::register_exception<linc::ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<linc::UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<linc::DivergenceError>(m, "DivergenceError", PyExc_ValueError);

  m.def("gf_mul", [](int a, int b) { return linc::gf::mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)); });
  m.def("gf_inv", [](int a) { return linc::gf::inv(static_cast<std::uint8_t>(a)); });

  m.def("encode", &encode, py::arg("k"), py::arg("n"), py::arg("block_id"), py::arg("data"),
        "Encode k payloads into n tagged packets.");
  m.def("decode", &decode, py::arg("k"), py::arg("n"), py::arg("packets"),
        "Recover the k payloads from any k tagged packets, or None.");

  m.def("retrans_rate_linc",
        [](int k, int n, double eps) { return linc::retrans_rate_linc({k, n}, {eps}); },
        py::arg("k"), py::arg("n"), py::arg("epsilon"));
  m.def("goodput_ratio",
        [](const std::vector<std::pair<double, int>>& flows, int k, int n, double eps) {
          return linc::goodput_ratio(ensemble(flows), {k, n}, {eps}).delta;
        },
        py::arg("flows"), py::arg("k"), py::arg("n"), py::arg("epsilon"),
        "flows: list of (lambda, eta)");
  m.def("optimize",
        [](const std::vector<std::pair<double, int>>& flows, double eps, int k_max, int n_max) {
          const auto r = linc::optimize_params(ensemble(flows), {eps}, k_max, n_max, 1);
          return py::make_tuple(r.k, r.n, r.delta);
        },
        py::arg("flows"), py::arg("epsilon"), py::arg("k_max") = 255, py::arg("n_max") = 255);

  m.def("model_csv",
        [](const std::string& config_text, const std::string& base_dir) {
          auto spec = linc::default_spec("scenario1");
          linc::apply_config_text(spec, config_text, base_dir);
          return linc::cmd_model(spec).to_string();
        },
        py::arg("config") = "", py::arg("base_dir") = ".");
  m.def("sim_csv",
        [](const std::string& config_text, const std::string& base_dir) {
          auto spec = linc::default_spec("scenario1");
          linc::apply_config_text(spec, config_text, base_dir);
          py::gil_scoped_release release;
          return linc::cmd_sim(spec).to_string();
        },
        py::arg("config") = "", py::arg("base_dir") = ".");
}
