#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dsmpc/model_io.hpp"
#include "dsmpc/qcqp.hpp"
#include "dsmpc/sim.hpp"

namespace py = pybind11;
using namespace dsmpc;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stochastic MPC with a discounted output-risk budget";
  m.attr("__version__") = kToolVersion;

  // Exception hierarchy: everything derives from dsmpc.Error.
  static py::exception<Error> exc_base(m, "Error");
  static py::exception<DimensionMismatch> exc_dim(m, "DimensionMismatch", exc_base);
  static py::exception<SingularMatrix> exc_sing(m, "SingularMatrix", exc_base);
  static py::exception<NotPositiveDefinite> exc_npd(m, "NotPositiveDefinite", exc_base);
  static py::exception<NonConvergence> exc_nc(m, "NonConvergence", exc_base);
  static py::exception<Infeasible> exc_inf(m, "Infeasible", exc_base);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DimensionMismatch& e) {
      py::set_error(exc_dim, e.what());
    } catch (const SingularMatrix& e) {
      py::set_error(exc_sing, e.what());
    } catch (const NotPositiveDefinite& e) {
      py::set_error(exc_npd, e.what());
    } catch (const NonConvergence& e) {
      py::set_error(exc_nc, e.what());
    } catch (const Infeasible& e) {
      py::set_error(exc_inf, e.what());
    } catch (const Error& e) {
      py::set_error(exc_base, e.what());
    }
  });

  py::class_<SystemModel>(m, "SystemModel")
      .def(py::init<>())
      .def_readwrite("A", &SystemModel::A)
      .def_readwrite("B", &SystemModel::B)
      .def_readwrite("W", &SystemModel::W)
      .def_readwrite("C", &SystemModel::C)
      .def_readwrite("Q", &SystemModel::Q)
      .def_readwrite("R", &SystemModel::R)
      .def_readwrite("x_ref", &SystemModel::x_ref)
      .def_readwrite("u_ref", &SystemModel::u_ref)
      .def_readwrite("K", &SystemModel::K)
      .def_readwrite("t", &SystemModel::t)
      .def_readwrite("e", &SystemModel::e)
      .def_readwrite("gamma", &SystemModel::gamma)
      .def_readwrite("N", &SystemModel::N);

  py::class_<ValidationCheck>(m, "ValidationCheck")
      .def_readonly("name", &ValidationCheck::name)
      .def_readonly("pass_", &ValidationCheck::pass)
      .def_readonly("measured", &ValidationCheck::measured)
      .def_readonly("detail", &ValidationCheck::detail)
      .def("__repr__", [](const ValidationCheck& c) {
        return "<check " + c.name + (c.pass ? ": ok>" : ": FAIL>");
      });

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("checks", &ValidationReport::checks)
      .def("ok", &ValidationReport::ok)
      .def("failures", &ValidationReport::failures);

  py::class_<Precomputed>(m, "Precomputed")
      .def_readonly("Phi", &Precomputed::Phi)
      .def_readonly("Xhat", &Precomputed::Xhat)
      .def_readonly("P", &Precomputed::P)
      .def_readonly("P_tilde", &Precomputed::P_tilde)
      .def_readonly("S_tilde", &Precomputed::S_tilde)
      .def_readonly("K_lq", &Precomputed::K_lq)
      .def_readonly("P_dare", &Precomputed::P_dare)
      .def_readonly("trWP", &Precomputed::trWP)
      .def_readonly("equation_residual", &Precomputed::equation_residual)
      .def_readonly("Gamma_pred", &Precomputed::Gamma_pred)
      .def_readonly("Theta_pred", &Precomputed::Theta_pred)
      .def_readonly("H", &Precomputed::H)
      .def_readonly("G", &Precomputed::G);

  py::class_<ChebyshevTerms>(m, "ChebyshevTerms")
      .def_readonly("const_part", &ChebyshevTerms::const_part)
      .def_readonly("G", &ChebyshevTerms::G)
      .def_readonly("g", &ChebyshevTerms::g)
      .def_readonly("c0", &ChebyshevTerms::c0)
      .def_readonly("beta_lower", &ChebyshevTerms::beta_lower)
      .def("value", &ChebyshevTerms::value);

  py::class_<QcqpProblem>(m, "QcqpProblem")
      .def(py::init<>())
      .def_readwrite("H", &QcqpProblem::H)
      .def_readwrite("h", &QcqpProblem::h)
      .def_readwrite("j0", &QcqpProblem::j0)
      .def_readwrite("G", &QcqpProblem::G)
      .def_readwrite("g", &QcqpProblem::g)
      .def_readwrite("c_const", &QcqpProblem::c_const)
      .def_readwrite("eps", &QcqpProblem::eps)
      .def("objective", &QcqpProblem::objective)
      .def("constraint", &QcqpProblem::constraint);

  py::class_<MpcSolution>(m, "MpcSolution")
      .def_readonly("m_star", &MpcSolution::m_star)
      .def_readonly("xbar_star", &MpcSolution::xbar_star)
      .def_readonly("J_star", &MpcSolution::J_star)
      .def_readonly("lambda_star", &MpcSolution::lambda_star)
      .def_readonly("constraint_value", &MpcSolution::constraint_value)
      .def_readonly("active", &MpcSolution::active);

  py::class_<DisturbanceSampler>(m, "DisturbanceSampler")
      .def_static("gaussian", &DisturbanceSampler::gaussian, py::arg("W"),
                  py::arg("seed"), py::arg("stream"))
      .def("sample", &DisturbanceSampler::sample)
      .def("standard_normal", &DisturbanceSampler::standard_normal);

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("k", &StepRecord::k)
      .def_readonly("x", &StepRecord::x)
      .def_readonly("u", &StepRecord::u)
      .def_readonly("eps", &StepRecord::eps)
      .def_readonly("stage_cost", &StepRecord::stage_cost)
      .def_readonly("violation", &StepRecord::violation)
      .def_readonly("J_star", &StepRecord::J_star)
      .def_readonly("lambda_star", &StepRecord::lambda_star)
      .def_readonly("constraint_value", &StepRecord::constraint_value)
      .def_readonly("contraction_gap", &StepRecord::contraction_gap);

  py::class_<TrajectoryLog>(m, "TrajectoryLog")
      .def_readonly("records", &TrajectoryLog::records)
      .def_readonly("seed", &TrajectoryLog::seed)
      .def_readonly("stream", &TrajectoryLog::stream)
      .def_readonly("model_hash", &TrajectoryLog::model_hash)
      .def_readonly("T", &TrajectoryLog::T)
      .def_readonly("max_contraction_gap", &TrajectoryLog::max_contraction_gap)
      .def("to_csv", &TrajectoryLog::to_csv);

  py::class_<InitPolicy>(m, "InitPolicy")
      .def_static("fixed", &InitPolicy::fixed)
      .def_static("standard_normal", &InitPolicy::standard_normal);

  py::class_<RunSummary>(m, "RunSummary")
      .def_readonly("stream", &RunSummary::stream)
      .def_readonly("mean_cost", &RunSummary::mean_cost)
      .def_readonly("v_hat", &RunSummary::v_hat)
      .def_readonly("violations", &RunSummary::violations)
      .def_readonly("discarded_draws", &RunSummary::discarded_draws)
      .def_readonly("max_contraction_gap", &RunSummary::max_contraction_gap)
      .def_readonly("final_eps", &RunSummary::final_eps);

  py::class_<EnsembleSummary>(m, "EnsembleSummary")
      .def_readonly("avg_cost", &EnsembleSummary::avg_cost)
      .def_readonly("avg_cost_stderr", &EnsembleSummary::avg_cost_stderr)
      .def_readonly("V_hat", &EnsembleSummary::V_hat)
      .def_readonly("V_hat_stderr", &EnsembleSummary::V_hat_stderr)
      .def_readonly("trWP", &EnsembleSummary::trWP)
      .def_readonly("e", &EnsembleSummary::e)
      .def_readonly("runs", &EnsembleSummary::runs)
      .def_readonly("T", &EnsembleSummary::T)
      .def_readonly("seed", &EnsembleSummary::seed)
      .def_readonly("model_hash", &EnsembleSummary::model_hash)
      .def_readonly("total_steps", &EnsembleSummary::total_steps)
      .def_readonly("max_contraction_gap", &EnsembleSummary::max_contraction_gap)
      .def_readonly("discarded_draws", &EnsembleSummary::discarded_draws)
      .def_readonly("per_run", &EnsembleSummary::per_run)
      .def("to_json", &EnsembleSummary::to_json);

  m.def("load_model", &load_model, py::arg("path"));
  m.def("model_from_json_text", &model_from_json_text, py::arg("text"));
  m.def("model_to_json_text", &model_to_json_text, py::arg("model"));
  m.def("model_hash", &model_hash, py::arg("model"));
  m.def("validate", &validate, py::arg("model"));
  m.def(
      "lq_gain",
      [](const SystemModel& model) {
        const LqSolution s = lq_gain(model);
        return py::make_tuple(s.K_lq, s.P_dare);
      },
      py::arg("model"));
  m.def("precompute", &precompute, py::arg("model"));
  m.def("equation_residuals", &equation_residuals, py::arg("model"), py::arg("pre"));
  m.def("lq_output_bound", &lq_output_bound, py::arg("model"), py::arg("x0"));
  m.def("terminal_f", &terminal_f, py::arg("xbar_N"), py::arg("pre"), py::arg("model"));
  m.def("build_constraint", &build_constraint, py::arg("x_k"), py::arg("pre"),
        py::arg("model"));
  m.def("update_epsilon", &update_epsilon, py::arg("x_next"), py::arg("prev"),
        py::arg("pre"), py::arg("model"));
  m.def("expected_epsilon_next", &expected_epsilon_next, py::arg("sol"),
        py::arg("pre"), py::arg("model"));
  m.def("shifted_sequence", &shifted_sequence, py::arg("prev"), py::arg("omega"),
        py::arg("pre"), py::arg("model"));
  m.def("reconstruct_disturbance", &reconstruct_disturbance, py::arg("x_next"),
        py::arg("prev"), py::arg("model"));
  m.def("solve", &solve, py::arg("problem"));
  m.def("min_constraint_value", &min_constraint_value, py::arg("problem"));
  m.def("build_problem", &build_problem, py::arg("x"), py::arg("eps"), py::arg("pre"),
        py::arg("model"));
  m.def("solve_mpc", &solve_mpc, py::arg("x"), py::arg("eps"), py::arg("pre"),
        py::arg("model"));
  m.def("run", &run, py::arg("model"), py::arg("pre"), py::arg("x0"), py::arg("eps0"),
        py::arg("T"), py::arg("sampler"));
  m.def("monte_carlo", &monte_carlo, py::arg("model"), py::arg("pre"), py::arg("init"),
        py::arg("eps0"), py::arg("T"), py::arg("runs"), py::arg("base_seed"),
        py::arg("workers") = 1);
}
