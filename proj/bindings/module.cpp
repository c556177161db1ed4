#include "pdyn/drivers.hpp"
#include "pdyn/errors.hpp"
#include "pdyn/gauss.hpp"
#include "pdyn/rng.hpp"
#include "pdyn/macro.hpp"
#include "pdyn/micro.hpp"
#include "pdyn/plateau.hpp"
#include "pdyn/spectrum.hpp"
#include "pdyn/trajectory.hpp"
#include "pdyn/version.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace pdyn;

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Two-level simulator of student-teacher SGD learning: microscopic "
      "weight dynamics, the order-parameter ODE system, and plateau "
      "quantification.";
  m.attr("__version__") = kVersion;

  py::class_<SpectrumEntry>(m, "SpectrumEntry")
      .def_readonly("eigenvalue", &SpectrumEntry::eigenvalue)
      .def_readonly("fraction", &SpectrumEntry::fraction)
      .def("__repr__", [](const SpectrumEntry& e) {
        return "SpectrumEntry(" + std::to_string(e.eigenvalue) + ", " +
               std::to_string(e.fraction) + ")";
      });

  py::class_<EigenSpectrum>(m, "EigenSpectrum")
      .def(py::init([](const std::vector<std::pair<double, double>>& pairs) {
             return EigenSpectrum::from_pairs(pairs);
           }),
           py::arg("pairs"),
           "Build from (eigenvalue, fraction) pairs; fractions must sum to 1.")
      .def_static("parse", &EigenSpectrum::parse, py::arg("literal"))
      .def("to_literal", &EigenSpectrum::to_literal)
      .def_property_readonly("entries", &EigenSpectrum::entries)
      .def_property_readonly("distinct_count", &EigenSpectrum::distinct_count)
      .def("moment", &EigenSpectrum::moment, py::arg("order"))
      .def("moments", &EigenSpectrum::moments, py::arg("max_order"))
      .def("reduction_coefficients", &EigenSpectrum::reduction_coefficients)
      .def("realize_covariance", &EigenSpectrum::realize_covariance,
           py::arg("n"))
      .def("__eq__", [](const EigenSpectrum& a,
                        const EigenSpectrum& b) { return a == b; })
      .def("__repr__", [](const EigenSpectrum& s) {
        return "EigenSpectrum('" + s.to_literal() + "')";
      });

  m.def(
      "empirical_spectrum_from_data",
      [](const Eigen::MatrixXd& rows, int max_distinct, bool center,
         int max_moment) {
        const EmpiricalSpectrum emp =
            empirical_spectrum_from_data(rows, max_distinct, center, max_moment);
        return py::make_tuple(emp.moments, emp.eigenvalues, emp.spectrum);
      },
      py::arg("rows"), py::arg("max_distinct") = 8, py::arg("center") = false,
      py::arg("max_moment") = 4,
      "Moments, eigenvalues and compressed spectrum of the data's "
      "second-moment matrix. Returns (moments, eigenvalues, spectrum).");

  py::class_<GaussianCov>(m, "GaussianCov")
      .def(py::init<Eigen::MatrixXd>(), py::arg("matrix"))
      .def_property_readonly("matrix", &GaussianCov::matrix)
      .def_property_readonly("order", &GaussianCov::order);
  m.def("i2", &i2, py::arg("cov"), "<g(z1) g(z2)> for g(x) = erf(x/sqrt 2)");
  m.def("i3", &i3, py::arg("cov"), "<g'(z1) z2 g(z3)>");
  m.def("i3_reduced", &i3_reduced, py::arg("cov"));
  m.def("i4", &i4, py::arg("cov"), "<g'(z1) g'(z2) g(z3) g(z4)>");

  py::enum_<Kernel>(m, "Kernel")
      .value("I2", Kernel::I2)
      .value("I3", Kernel::I3)
      .value("I4", Kernel::I4);
  m.def(
      "mc_expectation",
      [](Kernel kind, const GaussianCov& cov, std::int64_t samples,
         std::uint64_t seed) {
        const McEstimate est = mc_expectation(kind, cov, samples, seed);
        return py::make_tuple(est.estimate, est.standard_error);
      },
      py::arg("kind"), py::arg("cov"), py::arg("samples"), py::arg("seed"),
      "Monte Carlo estimate of a kernel; returns (estimate, standard_error).");

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("N", &SimConfig::N)
      .def_readwrite("K", &SimConfig::K)
      .def_readwrite("M", &SimConfig::M)
      .def_readwrite("eta", &SimConfig::eta)
      .def_readwrite("soft_committee", &SimConfig::soft_committee)
      .def_readwrite("steps", &SimConfig::steps)
      .def_readwrite("record_every", &SimConfig::record_every)
      .def_readwrite("weight_seed", &SimConfig::weight_seed)
      .def_readwrite("input_seed", &SimConfig::input_seed)
      .def_readwrite("threads", &SimConfig::threads);

  py::class_<NetworkWeights>(m, "NetworkWeights")
      .def_readwrite("J", &NetworkWeights::J)
      .def_readwrite("w", &NetworkWeights::w)
      .def_readwrite("B", &NetworkWeights::B)
      .def_readwrite("v", &NetworkWeights::v);
  m.def("init_weights", &init_weights, py::arg("config"), py::arg("seed"));
  m.def(
      "forward",
      [](const NetworkWeights& w, const Eigen::VectorXd& xi) {
        const ForwardPass fp = forward(w, xi);
        return py::make_tuple(fp.s, fp.t, fp.x, fp.y);
      },
      py::arg("weights"), py::arg("xi"),
      "Student/teacher outputs and pre-activations: (s, t, x, y).");
  m.def("sgd_step", &sgd_step, py::arg("weights"), py::arg("xi"),
        py::arg("config"), "One online SGD update in place.");
  m.def("measure_order_parameters", &measure_order_parameters,
        py::arg("weights"), py::arg("spectrum"), py::arg("emax"));
  m.def("run_micro", &run_micro, py::arg("config"), py::arg("spectrum"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_micro_from", &run_micro_from, py::arg("weights"),
        py::arg("config"), py::arg("spectrum"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<OrderParameterState>(m, "OrderParameterState")
      .def(py::init<>())
      .def_readwrite("spectrum", &OrderParameterState::spectrum)
      .def_readwrite("K", &OrderParameterState::K)
      .def_readwrite("M", &OrderParameterState::M)
      .def_readwrite("Q", &OrderParameterState::Q)
      .def_readwrite("R", &OrderParameterState::R)
      .def_readwrite("T", &OrderParameterState::T)
      .def_readwrite("D", &OrderParameterState::D)
      .def_readwrite("E", &OrderParameterState::E)
      .def_readwrite("F", &OrderParameterState::F)
      .def_property_readonly("d", &OrderParameterState::d);
  m.def("validate_state", &validate_state, py::arg("state"));
  m.def("state_to_json", &state_to_json, py::arg("state"));
  m.def("state_from_json", &state_from_json, py::arg("text"));

  py::class_<MacroConfig>(m, "MacroConfig")
      .def(py::init<>())
      .def_readwrite("eta", &MacroConfig::eta)
      .def_readwrite("spectrum", &MacroConfig::spectrum)
      .def_readwrite("freeze_second_layer", &MacroConfig::freeze_second_layer)
      .def_readwrite("t_end", &MacroConfig::t_end)
      .def_readwrite("dt", &MacroConfig::dt)
      .def_readwrite("record_every", &MacroConfig::record_every);
  m.def(
      "lift_order",
      [](const OrderParameterState& s, int order) {
        const LiftedOrder lifted = lift_order(s, order);
        return py::make_tuple(lifted.q, lifted.r, lifted.t);
      },
      py::arg("state"), py::arg("order"),
      "Overlap matrices (Q, R, T) at an arbitrary order via the polynomial "
      "reduction.");
  m.def("derivative", &derivative, py::arg("state"), py::arg("config"));
  m.def("generalization_error", &generalization_error, py::arg("state"));
  m.def("integrate", &integrate, py::arg("state"), py::arg("config"),
        py::arg("recorder") = MacroRecorder{},
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "integrate_auto",
      [](const OrderParameterState& s, const MacroConfig& c) {
        AutoIntegrateResult res;
        {
          py::gil_scoped_release release;
          res = integrate_auto(s, c);
        }
        return py::make_tuple(res.trajectory, res.dt, res.halvings);
      },
      py::arg("state"), py::arg("config"),
      "Integrate with automatic step halving; returns (trajectory, dt, "
      "halvings).");
  m.def("random_initial_state", &random_initial_state, py::arg("spectrum"),
        py::arg("K"), py::arg("M"), py::arg("n_effective"), py::arg("seed"));

  py::class_<TrajectoryPoint>(m, "TrajectoryPoint")
      .def(py::init([](double alpha, double eps_g) {
             return TrajectoryPoint{alpha, eps_g, std::nullopt};
           }),
           py::arg("alpha"), py::arg("eps_g"))
      .def_readwrite("alpha", &TrajectoryPoint::alpha)
      .def_readwrite("eps_g", &TrajectoryPoint::eps_g)
      .def_property_readonly("state", [](const TrajectoryPoint& p) {
        return p.state ? py::cast(*p.state) : py::none();
      });
  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init<>())
      .def(py::init([](const std::vector<double>& alphas,
                       const std::vector<double>& eps) {
             if (alphas.size() != eps.size())
               throw std::invalid_argument("alphas and eps sizes differ");
             Trajectory t;
             for (size_t k = 0; k < alphas.size(); ++k)
               t.points.push_back({alphas[k], eps[k], std::nullopt});
             return t;
           }),
           py::arg("alphas"), py::arg("eps"))
      .def_readwrite("points", &Trajectory::points)
      .def("alphas", &Trajectory::alphas)
      .def("eps", &Trajectory::eps)
      .def("__len__", [](const Trajectory& t) { return t.points.size(); })
      .def("to_csv", [](const Trajectory& t) {
        std::ostringstream out;
        write_trajectory_csv(out, t);
        return out.str();
      })
      .def_static("from_csv", [](const std::string& text) {
        std::istringstream in(text);
        return read_trajectory_csv(in);
      });

  py::class_<PlateauParams>(m, "PlateauParams")
      .def(py::init<>())
      .def_readwrite("window", &PlateauParams::window)
      .def_readwrite("terminal_fraction", &PlateauParams::terminal_fraction)
      .def_readwrite("min_points", &PlateauParams::min_points);
  py::class_<PlateauReport>(m, "PlateauReport")
      .def_readonly("found", &PlateauReport::found)
      .def_readonly("start_alpha", &PlateauReport::start_alpha)
      .def_readonly("end_alpha", &PlateauReport::end_alpha)
      .def_readonly("length", &PlateauReport::length)
      .def_readonly("height", &PlateauReport::height)
      .def_readonly("terminal_speed", &PlateauReport::terminal_speed)
      .def_readonly("diagnostic", &PlateauReport::diagnostic)
      .def_readonly("runs", &PlateauReport::runs)
      .def("to_json", [](const PlateauReport& r) { return report_to_json(r); });
  m.def(
      "log_loss_slope",
      [](const Trajectory& t, int window) {
        std::vector<std::pair<double, double>> out;
        for (const auto& s : log_loss_slope(t, window))
          out.emplace_back(s.alpha, s.slope);
        return out;
      },
      py::arg("trajectory"), py::arg("window") = 31);
  m.def("detect_plateau", &detect_plateau, py::arg("trajectory"),
        py::arg("params") = PlateauParams{});

  m.def("derive_seed",
        [](std::uint64_t base, const std::string& stream) {
          return derive_seed(base, stream);
        },
        py::arg("base"), py::arg("stream"));

  py::register_exception<Error>(m, "NumericError", PyExc_RuntimeError);
}
