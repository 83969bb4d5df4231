#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snn/baselines.hpp"
#include "snn/config.hpp"
#include "snn/estimator.hpp"
#include "snn/lti.hpp"
#include "snn/simulators.hpp"

namespace snn {

enum class ExperimentKind {
  TeaserMcar,
  TeaserLimitedMnar,
  TeaserGeneralMnar,
  RecsysLimited,
  RecsysGeneral,
  PanelSynthetic,
  LtiSequential,
};

ExperimentKind experiment_kind_from_string(const std::string& name);
const char* to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::RecsysGeneral;

  Index m = 80;
  Index n = 80;
  int r = 5;
  Index m_core = 20;
  Index n_core = 20;

  double value_lo = 1.0;
  double value_hi = 5.0;
  double noise_sigma = 0.0;

  double mcar_p_observe = 0.65;
  CohortPropensitySpec cohorts;
  PanelAdoptionSpec panel;
  double panel_noise_fraction = 0.02;  // sigma as a fraction of the value range

  std::vector<std::string> estimators = {"snn"};
  int repeats = 10;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  int jobs = 1;

  SnnConfig snn;
  BaselineConfig baselines;

  // lti_sequential settings
  Index lti_units = 4;
  Index lti_interventions = 2;
  int lti_factors = 2;
  int lti_lags = 1;
  Index lti_horizon = 20;
  Index lti_control_periods = 8;
  double lti_sigma = 0.0;
  bool lti_evaluate = true;
  bool lti_unit_loadings = false;  // theta = omega = 1 instead of Gaussian draws
  std::vector<double> lti_beta;      // row-major R x G; default staggered AR(1) decay
  std::vector<double> lti_rho_init;  // row-major R x G; default 1.0
  std::string lti_schedule_file;     // optional T x N CSV of 1-indexed interventions

  /// Parse + validate; error messages name the offending field.
  static ExperimentConfig from_config(const KeyValueConfig& raw);
  void validate() const;
};

/// Parse "fixed:K", "energy:F", or "universal[:C]".
RankPolicy rank_policy_from_string(const std::string& text);
std::string to_string(const RankPolicy& policy);

/// Apply the [snn] / [knn] / [usvt] / [softimpute] sections on top of the
/// given defaults; shared by the experiment recipes and the completion CLI.
SnnConfig snn_config_from(const KeyValueConfig& raw, SnnConfig base = {});
BaselineConfig baseline_config_from(const KeyValueConfig& raw, BaselineConfig base = {});

/// One simulated replicate: ground truth, masked observations, and the
/// propensity matrix when the mechanism has one.
struct SimulatedInstance {
  Matrix truth;
  MaskedMatrix data{Matrix::Zero(1, 1), BoolMatrix::Constant(1, 1, true)};
  std::optional<Matrix> propensities;
};

/// Deterministic replicate for the configured mechanism. Replicates share the
/// mechanism-specific fixed randomness (signal, propensities, ...) and
/// re-randomize only what the protocol re-randomizes: the mask for MCAR and
/// limited MNAR, the row factors for general MNAR, adoption for the panel.
SimulatedInstance make_instance(const ExperimentConfig& cfg, int replicate);

/// Full-matrix prediction from one estimator ("snn", "knn", "usvt",
/// "softimpute"); unestimable cells hold NaN.
Matrix run_estimator(const std::string& name, const SimulatedInstance& inst,
                     const ExperimentConfig& cfg, std::uint64_t seed);

struct ResultRow {
  std::string estimator;
  std::string experiment;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double mean_mae = 0.0;
  double std_mae = 0.0;
  int repeats = 0;
  int failures = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::string to_csv() const;
};

struct HistogramSet {
  std::vector<double> edges;
  std::vector<double> true_fractions;
  std::vector<double> revealed_fractions;
  std::map<std::string, std::vector<double>> recovered_fractions;
};

/// Total variation distance between two normalized histograms.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// Normalized 8-bin histogram over [lo, hi] of the finite entries.
std::vector<double> rating_histogram(const Matrix& values, double lo, double hi);
std::vector<double> rating_histogram(const Matrix& values, const BoolMatrix& select, double lo,
                                     double hi);

struct ReplicateMetrics {
  std::string estimator;
  int replicate = 0;
  bool failed = false;
  EvalReport report;
};

struct ExperimentOutput {
  ResultTable table;
  std::vector<ReplicateMetrics> per_replicate;
  std::optional<HistogramSet> histograms;  // teaser experiments, replicate 0
};

/// Runs every replicate in memory (no files); deterministic per config+seed.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Writes result table, teaser histograms, and replicate-0 instance files
/// under cfg.output_dir.
void write_experiment_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out);

struct LtiRun {
  LtiFactorSystem system;
  InterventionSchedule schedule;
  LtiSimulation simulation;
  std::optional<EvalReport> counterfactual_eval;
  double counterfactual_max_error = 0.0;
};

/// Builds the configured LTI system, simulates it, and (optionally) scores
/// SNN's recovery of the held-out counterfactual innovations.
LtiRun run_lti(const ExperimentConfig& cfg);
void write_lti_outputs(const ExperimentConfig& cfg, const LtiRun& run);

}  // namespace snn
