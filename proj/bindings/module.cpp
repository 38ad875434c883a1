#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "janus/erasure.hpp"
#include "janus/errors.hpp"
#include "janus/hierarchy.hpp"
#include "janus/manifest.hpp"
#include "janus/reliability.hpp"
#include "janus/simulator.hpp"

namespace py = pybind11;
using namespace janus;

namespace {

const char* regime_name(LossRegime r) {
  return r == LossRegime::low ? "low" : "high";
}

SolverMode parse_mode(const std::string& mode) {
  if (mode == "automatic") return SolverMode::automatic;
  if (mode == "coordinate_descent") return SolverMode::coordinate_descent;
  if (mode == "enumerate_all") return SolverMode::enumerate_all;
  throw ConfigError("unknown solver mode: " + mode);
}

std::vector<std::uint8_t> to_bytes_vec(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::bytes to_py_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

}  // namespace

PYBIND11_MODULE(_janus_core, m) {
  m.doc() =
      "Planning, erasure-coding, and simulation primitives for resilient "
      "transfer of hierarchically refined datasets over lossy links.";
  m.attr("__version__") = "1.0.0";

  py::register_exception<Error>(m, "JanusError");

  // ---- hierarchy and link parameters -----------------------------------
  py::class_<LevelSpec>(m, "LevelSpec")
      .def(py::init<>())
      .def(py::init([](std::uint64_t size_bytes, double error_bound) {
             return LevelSpec{size_bytes, error_bound};
           }),
           py::arg("size_bytes"), py::arg("error_bound"))
      .def_readwrite("size_bytes", &LevelSpec::size_bytes)
      .def_readwrite("error_bound", &LevelSpec::error_bound)
      .def("__repr__", [](const LevelSpec& lv) {
        return "LevelSpec(size_bytes=" + std::to_string(lv.size_bytes) +
               ", error_bound=" + std::to_string(lv.error_bound) + ")";
      });

  py::class_<HierarchySpec>(m, "HierarchySpec")
      .def(py::init<>())
      .def(py::init([](std::vector<LevelSpec> levels) {
             HierarchySpec h;
             h.levels = std::move(levels);
             return h;
           }),
           py::arg("levels"))
      .def_readwrite("levels", &HierarchySpec::levels)
      .def_property_readonly("level_count", &HierarchySpec::level_count)
      .def("total_bytes",
           py::overload_cast<int>(&HierarchySpec::total_bytes, py::const_),
           py::arg("levels"))
      .def("total_bytes",
           py::overload_cast<>(&HierarchySpec::total_bytes, py::const_))
      .def("validate", &HierarchySpec::validate)
      .def("scaled", &HierarchySpec::scaled, py::arg("divisor"));

  py::class_<NetworkParams>(m, "NetworkParams")
      .def(py::init<>())
      .def_readwrite("latency_s", &NetworkParams::latency_s)
      .def_readwrite("link_rate", &NetworkParams::link_rate)
      .def_readwrite("ec_rate", &NetworkParams::ec_rate)
      .def_readwrite("fragment_size", &NetworkParams::fragment_size)
      .def_readwrite("group_size", &NetworkParams::group_size)
      .def_property_readonly("effective_rate", &NetworkParams::effective_rate)
      .def("validate", &NetworkParams::validate);

  m.def("preset_hierarchy", &preset_hierarchy, py::arg("name"),
        "Built-in hierarchies: 'nyx-full' (28.7 GB) and 'nyx-mini' "
        "(1/1000 scale).");
  m.def("required_levels", &required_levels, py::arg("hierarchy"),
        py::arg("target"));
  m.def("group_count", &group_count, py::arg("size_bytes"),
        py::arg("group_size"), py::arg("parity"), py::arg("fragment_size"));
  m.def(
      "relative_linf_error",
      [](const std::vector<double>& reference,
         const std::vector<double>& candidate) {
        return relative_linf_error(reference, candidate);
      },
      py::arg("reference"), py::arg("candidate"));

  // ---- reliability analysis --------------------------------------------
  py::class_<Unrecoverability>(m, "Unrecoverability")
      .def_readonly("p", &Unrecoverability::p)
      .def_property_readonly(
          "regime",
          [](const Unrecoverability& u) { return regime_name(u.regime); })
      .def("__repr__", [](const Unrecoverability& u) {
        return "Unrecoverability(p=" + std::to_string(u.p) + ", regime='" +
               regime_name(u.regime) + "')";
      });

  m.def("classify_regime",
        [](const NetworkParams& p, double loss_rate) {
          return std::string(regime_name(classify_regime(p, loss_rate)));
        },
        py::arg("params"), py::arg("loss_rate"));
  m.def("fragments_in_flight", &fragments_in_flight, py::arg("params"));
  m.def("round_window_s", &round_window_s, py::arg("params"));
  m.def("p_unrecoverable_low", &p_unrecoverable_low, py::arg("params"),
        py::arg("loss_rate"), py::arg("parity"));
  m.def("p_unrecoverable_high", &p_unrecoverable_high, py::arg("params"),
        py::arg("loss_rate"), py::arg("parity"));
  m.def("p_unrecoverable", &p_unrecoverable, py::arg("params"),
        py::arg("loss_rate"), py::arg("parity"));

  py::class_<TimeEstimate>(m, "TimeEstimate")
      .def_readonly("expected_total_s", &TimeEstimate::expected_total_s)
      .def_readonly("retransmission_terms",
                    &TimeEstimate::retransmission_terms)
      .def_readonly("p", &TimeEstimate::p)
      .def_property_readonly(
          "regime",
          [](const TimeEstimate& t) { return regime_name(t.regime); });

  m.def(
      "expected_total_time",
      [](std::uint64_t total_bytes, const NetworkParams& params,
         double loss_rate, int parity) {
        return expected_total_time(total_bytes, params, loss_rate, parity);
      },
      py::arg("total_bytes"), py::arg("params"), py::arg("loss_rate"),
      py::arg("parity"));

  py::class_<MinTimePlan>(m, "MinTimePlan")
      .def_readonly("parity", &MinTimePlan::parity)
      .def_readonly("estimate", &MinTimePlan::estimate);

  m.def(
      "optimize_parity_for_min_time",
      [](std::uint64_t total_bytes, const NetworkParams& params,
         double loss_rate) {
        return optimize_parity_for_min_time(total_bytes, params, loss_rate);
      },
      py::arg("total_bytes"), py::arg("params"), py::arg("loss_rate"));

  py::class_<ErrorOutcome>(m, "ErrorOutcome")
      .def_readonly("bound", &ErrorOutcome::bound)
      .def_readonly("probability", &ErrorOutcome::probability);

  py::class_<ErrorEstimate>(m, "ErrorEstimate")
      .def_readonly("expected_error", &ErrorEstimate::expected_error)
      .def_readonly("outcomes", &ErrorEstimate::outcomes);

  m.def(
      "expected_error",
      [](const HierarchySpec& hierarchy, const NetworkParams& params,
         double loss_rate, const std::vector<int>& parity) {
        return expected_error(hierarchy, params, loss_rate, parity);
      },
      py::arg("hierarchy"), py::arg("params"), py::arg("loss_rate"),
      py::arg("parity"));

  m.def("feasible_level_counts", &feasible_level_counts, py::arg("hierarchy"),
        py::arg("params"), py::arg("deadline_s"));
  m.def("group_budget", &group_budget, py::arg("params"),
        py::arg("deadline_s"));
  m.def(
      "deterministic_total_time",
      [](const std::vector<std::uint64_t>& group_counts,
         const NetworkParams& params) {
        return deterministic_total_time(group_counts, params);
      },
      py::arg("group_counts"), py::arg("params"));

  py::class_<MinErrorPlan>(m, "MinErrorPlan")
      .def_readonly("parity", &MinErrorPlan::parity)
      .def_readonly("group_counts", &MinErrorPlan::group_counts)
      .def_readonly("expected_error", &MinErrorPlan::expected_error)
      .def_readonly("planned_time_s", &MinErrorPlan::planned_time_s);

  m.def(
      "solve_min_error_for_levels",
      [](const HierarchySpec& hierarchy, int levels,
         const NetworkParams& params, double loss_rate, double deadline_s,
         const std::string& mode, double prior_bound) {
        return solve_min_error_for_levels(hierarchy, levels, params,
                                          loss_rate, deadline_s,
                                          parse_mode(mode), nullptr,
                                          prior_bound);
      },
      py::arg("hierarchy"), py::arg("levels"), py::arg("params"),
      py::arg("loss_rate"), py::arg("deadline_s"),
      py::arg("mode") = "automatic", py::arg("prior_bound") = 1.0);

  py::class_<DeadlinePlan>(m, "DeadlinePlan")
      .def_readonly("levels_sent", &DeadlinePlan::levels_sent)
      .def_readonly("plan", &DeadlinePlan::plan);

  m.def(
      "optimize_parity_for_min_error",
      [](const HierarchySpec& hierarchy, const NetworkParams& params,
         double loss_rate, double deadline_s, const std::string& mode) {
        return optimize_parity_for_min_error(hierarchy, params, loss_rate,
                                             deadline_s, parse_mode(mode));
      },
      py::arg("hierarchy"), py::arg("params"), py::arg("loss_rate"),
      py::arg("deadline_s"), py::arg("mode") = "automatic");

  // ---- erasure coding ---------------------------------------------------
  py::class_<GroupCode>(m, "GroupCode")
      .def(py::init<int, int>(), py::arg("k"), py::arg("m"))
      .def_property_readonly("k", &GroupCode::k)
      .def_property_readonly("m", &GroupCode::m)
      .def_property_readonly("n", &GroupCode::n)
      .def(
          "encode",
          [](const GroupCode& code, const std::vector<py::bytes>& data) {
            if (static_cast<int>(data.size()) != code.k())
              throw ShapeError("expected k data fragments");
            std::vector<std::vector<std::uint8_t>> rows;
            rows.reserve(data.size());
            for (const auto& b : data) rows.push_back(to_bytes_vec(b));
            const std::size_t len = rows.empty() ? 0 : rows[0].size();
            for (const auto& r : rows)
              if (r.size() != len)
                throw ShapeError("data fragments differ in length");
            std::vector<const std::uint8_t*> data_ptr;
            for (const auto& r : rows) data_ptr.push_back(r.data());
            std::vector<std::vector<std::uint8_t>> parity(
                code.m(), std::vector<std::uint8_t>(len));
            std::vector<std::uint8_t*> parity_ptr;
            for (auto& p : parity) parity_ptr.push_back(p.data());
            code.encode(data_ptr.data(), parity_ptr.data(), len);
            py::list out;
            for (const auto& p : parity) out.append(to_py_bytes(p));
            return out;
          },
          py::arg("data"),
          "Computes the parity fragments for k equal-length data "
          "fragments (list of bytes).")
      .def(
          "decode",
          [](const GroupCode& code,
             const std::vector<std::optional<py::bytes>>& fragments) {
            if (static_cast<int>(fragments.size()) != code.n())
              throw ShapeError("expected n fragment slots");
            std::vector<std::optional<std::vector<std::uint8_t>>> rows(
                fragments.size());
            for (std::size_t i = 0; i < fragments.size(); ++i)
              if (fragments[i]) rows[i] = to_bytes_vec(*fragments[i]);
            code.decode(rows);
            py::list out;
            for (int i = 0; i < code.k(); ++i) out.append(to_py_bytes(*rows[i]));
            return out;
          },
          py::arg("fragments"),
          "Reconstructs the k data fragments from any k of the n slots; "
          "missing slots are None.");

  // ---- manifests --------------------------------------------------------
  py::enum_<PayloadMode>(m, "PayloadMode")
      .value("synthetic", PayloadMode::synthetic)
      .value("files", PayloadMode::files);

  py::class_<ManifestLevel>(m, "ManifestLevel")
      .def(py::init<>())
      .def_readwrite("index", &ManifestLevel::index)
      .def_readwrite("size_bytes", &ManifestLevel::size_bytes)
      .def_readwrite("error_bound", &ManifestLevel::error_bound)
      .def_readwrite("checksum", &ManifestLevel::checksum)
      .def_readwrite("file", &ManifestLevel::file);

  py::class_<Manifest>(m, "Manifest")
      .def(py::init<>())
      .def_readwrite("version", &Manifest::version)
      .def_readwrite("payload_mode", &Manifest::payload_mode)
      .def_readwrite("seed", &Manifest::seed)
      .def_readwrite("levels", &Manifest::levels)
      .def("hierarchy", &Manifest::hierarchy)
      .def("validate", &Manifest::validate)
      .def("to_json", &Manifest::to_json)
      .def_static("from_json", &Manifest::from_json, py::arg("text"))
      .def("save", &Manifest::save, py::arg("path"))
      .def_static("load", &Manifest::load, py::arg("path"));

  m.def("make_synthetic_manifest", &make_synthetic_manifest,
        py::arg("hierarchy"), py::arg("seed"));
  m.def(
      "synthetic_level_bytes",
      [](std::uint64_t seed, int level_index, std::uint64_t size) {
        std::vector<std::uint8_t> out(size);
        fill_synthetic_level(seed, level_index, out);
        return to_py_bytes(out);
      },
      py::arg("seed"), py::arg("level_index"), py::arg("size"),
      "Deterministic synthetic payload for one level.");
  m.def(
      "crc32_label",
      [](const py::bytes& data) {
        const auto v = to_bytes_vec(data);
        return crc32_label(v);
      },
      py::arg("data"));

  // ---- simulation -------------------------------------------------------
  py::class_<LossStateSpec>(m, "LossStateSpec")
      .def(py::init<>())
      .def(py::init([](double mean, double stddev) {
             return LossStateSpec{mean, stddev};
           }),
           py::arg("mean"), py::arg("stddev"))
      .def_readwrite("mean", &LossStateSpec::mean)
      .def_readwrite("stddev", &LossStateSpec::stddev);

  py::class_<LossModelSpec> loss_model(m, "LossModelSpec");
  py::enum_<LossModelSpec::Type>(loss_model, "Type")
      .value("static_rate", LossModelSpec::Type::static_rate)
      .value("hmm", LossModelSpec::Type::hmm);
  loss_model.def(py::init<>())
      .def_readwrite("type", &LossModelSpec::type)
      .def_readwrite("lambda_", &LossModelSpec::lambda)
      .def_readwrite("transition_rate", &LossModelSpec::transition_rate)
      .def_readwrite("states", &LossModelSpec::states)
      .def_static("static_rate_of", &LossModelSpec::static_rate_of,
                  py::arg("lambda_"))
      .def_static("default_hmm", &LossModelSpec::default_hmm,
                  py::arg("transition_rate"));

  py::class_<ProtocolSpec> protocol(m, "ProtocolSpec");
  py::enum_<ProtocolSpec::Type>(protocol, "Type")
      .value("tcp_baseline", ProtocolSpec::Type::tcp_baseline)
      .value("udp_static_ec", ProtocolSpec::Type::udp_static_ec)
      .value("adaptive_error_bound", ProtocolSpec::Type::adaptive_error_bound)
      .value("adaptive_deadline", ProtocolSpec::Type::adaptive_deadline);
  protocol.def(py::init<>())
      .def_readwrite("type", &ProtocolSpec::type)
      .def_readwrite("m", &ProtocolSpec::m)
      .def_readwrite("m_vector", &ProtocolSpec::m_vector)
      .def_readwrite("retransmit", &ProtocolSpec::retransmit)
      .def_readwrite("error_bound", &ProtocolSpec::error_bound)
      .def_readwrite("deadline_s", &ProtocolSpec::deadline_s)
      .def_readwrite("initial_lambda", &ProtocolSpec::initial_lambda)
      .def_property_readonly("name", &ProtocolSpec::name);

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_readwrite("version", &Scenario::version)
      .def_readwrite("hierarchy", &Scenario::hierarchy)
      .def_readwrite("params", &Scenario::params)
      .def_readwrite("loss", &Scenario::loss)
      .def_readwrite("protocol", &Scenario::protocol)
      .def_readwrite("receiver_window_s", &Scenario::receiver_window_s)
      .def_readwrite("event_cap", &Scenario::event_cap)
      .def_readwrite("forced_drops", &Scenario::forced_drops)
      .def("validate", &Scenario::validate)
      .def("to_json", &Scenario::to_json)
      .def_static("from_json", &Scenario::from_json, py::arg("text"));

  py::class_<LambdaSample>(m, "LambdaSample")
      .def_readonly("time_s", &LambdaSample::time_s)
      .def_readonly("lambda_hat", &LambdaSample::lambda_hat);

  py::class_<SimReport>(m, "SimReport")
      .def_readonly("protocol", &SimReport::protocol)
      .def_readonly("seed", &SimReport::seed)
      .def_readonly("total_time_s", &SimReport::total_time_s)
      .def_readonly("rounds", &SimReport::rounds)
      .def_readonly("levels_delivered", &SimReport::levels_delivered)
      .def_readonly("achieved_error_bound", &SimReport::achieved_error_bound)
      .def_readonly("packets_sent", &SimReport::packets_sent)
      .def_readonly("packets_lost", &SimReport::packets_lost)
      .def_readonly("packets_delivered", &SimReport::packets_delivered)
      .def_readonly("data_fragments_sent", &SimReport::data_fragments_sent)
      .def_readonly("parity_fragments_sent", &SimReport::parity_fragments_sent)
      .def_readonly("aborted", &SimReport::aborted)
      .def_readonly("abort_reason", &SimReport::abort_reason)
      .def_readonly("lambda_trace", &SimReport::lambda_trace)
      .def_readonly("retransmitted_groups_per_round",
                    &SimReport::retransmitted_groups_per_round)
      .def_readonly("first_round_lost_groups",
                    &SimReport::first_round_lost_groups)
      .def("to_json", &SimReport::to_json)
      .def("csv_row", &SimReport::csv_row)
      .def_static("csv_header", &SimReport::csv_header);

  m.def("run_scenario", &run_scenario, py::arg("scenario"), py::arg("seed"),
        "Runs one deterministic discrete-event simulation of the scenario.");
}
