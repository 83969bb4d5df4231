#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "snn/baselines.hpp"
#include "snn/estimator.hpp"
#include "snn/experiments.hpp"
#include "snn/lti.hpp"
#include "snn/simulators.hpp"

namespace py = pybind11;
using namespace snn;

namespace {

SnnConfig make_config(const std::string& rank_policy, int k_folds, int min_anchor_rows,
                      double ci_level) {
  SnnConfig cfg;
  cfg.rank_policy = rank_policy_from_string(rank_policy);
  cfg.k_folds = k_folds;
  cfg.min_anchor_rows = min_anchor_rows;
  cfg.ci_level = ci_level;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(snnmc, m) {
  m.doc() = "Synthetic nearest neighbors matrix completion";

  py::class_<MaskedMatrix>(m, "MaskedMatrix")
      .def(py::init<Matrix, BoolMatrix>(), py::arg("values"), py::arg("mask"))
      .def_static("fully_observed", &MaskedMatrix::fully_observed)
      .def_property_readonly("values", &MaskedMatrix::values)
      .def_property_readonly("mask", &MaskedMatrix::mask)
      .def_property_readonly("shape",
                             [](const MaskedMatrix& mm) {
                               return py::make_tuple(mm.rows(), mm.cols());
                             })
      .def("observed", &MaskedMatrix::observed)
      .def("get", &MaskedMatrix::get)
      .def("observed_count", &MaskedMatrix::observed_count);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("rmse", &EvalReport::rmse)
      .def_readonly("mae", &EvalReport::mae)
      .def_readonly("count", &EvalReport::count)
      .def("__repr__", [](const EvalReport& r) {
        return "EvalReport(rmse=" + format_double(r.rmse) + ", mae=" + format_double(r.mae) +
               ", count=" + std::to_string(r.count) + ")";
      });

  m.def("evaluate", &evaluate, py::arg("pred"), py::arg("truth"), py::arg("eval_mask"));
  m.def("read_masked_csv", &read_masked_csv, py::arg("path"), py::arg("missing_token") = "NA");
  m.def("write_masked_csv", &write_masked_csv, py::arg("matrix"), py::arg("path"),
        py::arg("missing_token") = "NA");

  m.def(
      "complete",
      [](const MaskedMatrix& data, const std::string& rank_policy, int k_folds,
         int min_anchor_rows, double ci_level, std::uint64_t seed, int jobs) {
        const auto result = snn_complete(data, kAllMissing,
                                         make_config(rank_policy, k_folds, min_anchor_rows, ci_level),
                                         seed, jobs);
        py::list statuses;
        for (const auto& cell : result.cells) {
          py::dict entry;
          entry["i"] = cell.i;
          entry["j"] = cell.j;
          entry["status"] = to_string(cell.status);
          if (cell.estimate) {
            entry["estimate"] = cell.estimate->value;
            entry["ci_lo"] = cell.estimate->ci_lo;
            entry["ci_hi"] = cell.estimate->ci_hi;
            entry["variance"] = cell.estimate->variance;
          }
          statuses.append(entry);
        }
        return py::make_tuple(result.completed, statuses);
      },
      py::arg("data"), py::arg("rank_policy") = "energy:0.999", py::arg("k_folds") = 0,
      py::arg("min_anchor_rows") = 0, py::arg("ci_level") = 0.95, py::arg("seed") = 0,
      py::arg("jobs") = 1,
      "Complete every missing cell; returns (matrix, per-cell status list).");

  m.def(
      "estimate_entry",
      [](const MaskedMatrix& data, Index i, Index j, const std::string& rank_policy, int k_folds,
         int min_anchor_rows, double ci_level, std::uint64_t seed) {
        const SnnConfig cfg = make_config(rank_policy, k_folds, min_anchor_rows, ci_level);
        Rng rng(seed);
        const Biclique anchors = anchor_submatrix(data.mask(), i, j);
        const Index rank_estimate =
            select_rank(svd([&] {
                          Matrix block(static_cast<Index>(anchors.rows.size()),
                                       static_cast<Index>(anchors.cols.size()));
                          for (std::size_t a = 0; a < anchors.rows.size(); ++a)
                            for (std::size_t b = 0; b < anchors.cols.size(); ++b)
                              block(static_cast<Index>(a), static_cast<Index>(b)) =
                                  data.values()(anchors.rows[a], anchors.cols[b]);
                          return block;
                        }()),
                        cfg.rank_policy, static_cast<Index>(anchors.rows.size()),
                        static_cast<Index>(anchors.cols.size()));
        const int k = cfg.k_folds > 0
                          ? cfg.k_folds
                          : default_fold_count(std::min<Index>(anchors.rows.size(),
                                                               anchors.cols.size()),
                                               rank_estimate);
        const AnchorPlan plan = make_anchor_plan(data.mask(), i, j, k, rng);
        const SnnEstimate est = snn_entry(data, i, j, plan, cfg);
        py::dict out;
        out["value"] = est.value;
        out["fold_values"] = est.fold_values;
        out["variance"] = est.variance;
        out["ci"] = py::make_tuple(est.ci_lo, est.ci_hi);
        out["anchor_cols"] = est.plan.anchor_cols;
        out["row_folds"] = est.plan.row_folds;
        return out;
      },
      py::arg("data"), py::arg("i"), py::arg("j"), py::arg("rank_policy") = "energy:0.999",
      py::arg("k_folds") = 0, py::arg("min_anchor_rows") = 0, py::arg("ci_level") = 0.95,
      py::arg("seed") = 0, "Point estimate with confidence interval for one entry.");

  m.def(
      "anchor_submatrix",
      [](const BoolMatrix& mask, Index i, Index j) {
        const Biclique bc = anchor_submatrix(mask, i, j);
        return py::make_tuple(bc.rows, bc.cols);
      },
      py::arg("mask"), py::arg("i"), py::arg("j"),
      "Anchor rows/columns for a target entry (largest-min-side biclique).");

  m.def(
      "knn_impute",
      [](const MaskedMatrix& data, int k) {
        const auto result = knn_impute(data, k);
        return py::make_tuple(result.completed, result.unestimable);
      },
      py::arg("data"), py::arg("k") = 5);
  m.def("usvt", &usvt, py::arg("data"), py::arg("eta") = 0.3);
  m.def("soft_impute", &soft_impute, py::arg("data"), py::arg("lambda_"), py::arg("max_iter") = 200,
        py::arg("tol") = 1e-6);

  m.def(
      "gen_core_factors",
      [](Index m, Index m_core, int r, std::uint64_t seed) {
        Rng rng(seed);
        return gen_core_factors(m, m_core, r, rng);
      },
      py::arg("m"), py::arg("m_core"), py::arg("r"), py::arg("seed") = 0);
  m.def("scale_to_range", &scale_to_range, py::arg("matrix"), py::arg("lo"), py::arg("hi"));
  m.def(
      "mcar_mask",
      [](Index m, Index n, double p_observe, std::uint64_t seed) {
        Rng rng(seed);
        return mcar_mask(m, n, p_observe, rng);
      },
      py::arg("m"), py::arg("n"), py::arg("p_observe"), py::arg("seed") = 0);
  m.def(
      "limited_mnar_propensity",
      [](const Matrix& A, Index m_core, Index n_core, double threshold, double alpha_core,
         double alpha_user, double alpha_item, double alpha_standard, double frac_core,
         double frac_user, double frac_item, double frac_standard) {
        CohortPropensitySpec spec;
        spec.m_core = m_core;
        spec.n_core = n_core;
        spec.threshold = threshold;
        spec.alpha_core = alpha_core;
        spec.alpha_user = alpha_user;
        spec.alpha_item = alpha_item;
        spec.alpha_standard = alpha_standard;
        spec.frac_core = frac_core;
        spec.frac_user = frac_user;
        spec.frac_item = frac_item;
        spec.frac_standard = frac_standard;
        return limited_mnar_propensity(A, spec);
      },
      py::arg("A"), py::arg("m_core"), py::arg("n_core"), py::arg("threshold") = 2.3,
      py::arg("alpha_core") = 0.7, py::arg("alpha_user") = 0.35, py::arg("alpha_item") = 0.35,
      py::arg("alpha_standard") = 0.1, py::arg("frac_core") = 0.9, py::arg("frac_user") = 0.7,
      py::arg("frac_item") = 0.7, py::arg("frac_standard") = 0.05);
  m.def(
      "sample_mask",
      [](const Matrix& P, std::uint64_t seed) {
        Rng rng(seed);
        return sample_mask(P, rng);
      },
      py::arg("P"), py::arg("seed") = 0);
  m.def("general_mnar_mask", &general_mnar_mask, py::arg("U"), py::arg("V"), py::arg("n_core"));
  m.def(
      "panel_adoption_mask",
      [](const Matrix& Y, Index pre_periods, double p_mild, double p_moderate, double p_severe,
         std::uint64_t seed) {
        PanelAdoptionSpec spec;
        spec.pre_periods = pre_periods;
        spec.p_mild = p_mild;
        spec.p_moderate = p_moderate;
        spec.p_severe = p_severe;
        Rng rng(seed);
        return panel_adoption_mask(Y, spec, rng);
      },
      py::arg("Y"), py::arg("pre_periods"), py::arg("p_mild") = 0.1, py::arg("p_moderate") = 0.3,
      py::arg("p_severe") = 0.5, py::arg("seed") = 0);
  m.def(
      "add_noise",
      [](const Matrix& A, double sigma, std::uint64_t seed) {
        Rng rng(seed);
        return add_noise(A, sigma, rng);
      },
      py::arg("A"), py::arg("sigma"), py::arg("seed") = 0);

  m.def("normal_quantile", &normal_quantile, py::arg("p"));
}
