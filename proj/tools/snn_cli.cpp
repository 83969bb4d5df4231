#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "snn/experiments.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
  auto* config = cmd->add_option("--config", opts.config_path, "config file (key=value sections)");
  if (config_required) config->required();
  cmd->add_option("--seed", opts.seed, "master seed override")->each([&opts](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--output", opts.output_dir, "output directory override");
  cmd->add_option("--jobs", opts.jobs, "worker threads for per-cell estimation");
}

snn::ExperimentConfig load_config(const CommonOptions& opts) {
  snn::KeyValueConfig raw = opts.config_path.empty()
                                ? snn::KeyValueConfig{}
                                : snn::KeyValueConfig::parse_file(opts.config_path);
  if (opts.seed_set) raw.set("experiment.master_seed", std::to_string(opts.seed));
  if (!opts.output_dir.empty()) raw.set("experiment.output_dir", opts.output_dir);
  if (opts.jobs > 0) raw.set("experiment.jobs", std::to_string(opts.jobs));
  snn::ExperimentConfig cfg = snn::ExperimentConfig::from_config(raw);
  if (cfg.output_dir.empty())
    throw snn::ConfigError("config: field \"experiment.output_dir\" is required");
  return cfg;
}

void write_sidecar(const snn::ExperimentConfig& cfg, const std::string& note) {
  std::ofstream out(fs::path(cfg.output_dir) / "sim_spec.txt");
  out << "experiment = " << snn::to_string(cfg.experiment) << "\n"
      << "master_seed = " << cfg.master_seed << "\n"
      << "m = " << cfg.m << "\n"
      << "n = " << cfg.n << "\n"
      << "r = " << cfg.r << "\n"
      << "m_core = " << cfg.m_core << "\n"
      << "n_core = " << cfg.n_core << "\n"
      << "value_lo = " << snn::format_double(cfg.value_lo) << "\n"
      << "value_hi = " << snn::format_double(cfg.value_hi) << "\n"
      << "noise_sigma = " << snn::format_double(cfg.noise_sigma) << "\n";
  switch (cfg.experiment) {
    case snn::ExperimentKind::TeaserMcar:
      out << "mcar.p_observe = " << snn::format_double(cfg.mcar_p_observe) << "\n";
      break;
    case snn::ExperimentKind::TeaserLimitedMnar:
    case snn::ExperimentKind::RecsysLimited:
      out << "limited_mnar.threshold = " << snn::format_double(cfg.cohorts.threshold) << "\n"
          << "limited_mnar.alphas = " << snn::format_double(cfg.cohorts.alpha_core) << ","
          << snn::format_double(cfg.cohorts.alpha_user) << ","
          << snn::format_double(cfg.cohorts.alpha_item) << ","
          << snn::format_double(cfg.cohorts.alpha_standard) << "\n"
          << "limited_mnar.fractions = " << snn::format_double(cfg.cohorts.frac_core) << ","
          << snn::format_double(cfg.cohorts.frac_user) << ","
          << snn::format_double(cfg.cohorts.frac_item) << ","
          << snn::format_double(cfg.cohorts.frac_standard) << "\n";
      break;
    case snn::ExperimentKind::PanelSynthetic:
      out << "panel.pre_periods = " << cfg.panel.pre_periods << "\n"
          << "panel.adoption = " << snn::format_double(cfg.panel.p_mild) << ","
          << snn::format_double(cfg.panel.p_moderate) << ","
          << snn::format_double(cfg.panel.p_severe) << "\n"
          << "panel.noise_fraction = " << snn::format_double(cfg.panel_noise_fraction) << "\n";
      break;
    default:
      break;
  }
  if (!note.empty()) out << note;
}

int cmd_simulate(const CommonOptions& opts) {
  const snn::ExperimentConfig cfg = load_config(opts);
  fs::create_directories(cfg.output_dir);
  if (cfg.experiment == snn::ExperimentKind::LtiSequential) {
    snn::ExperimentConfig sim_cfg = cfg;
    sim_cfg.lti_evaluate = false;
    const snn::LtiRun run = snn::run_lti(sim_cfg);
    if (run.system.unstable())
      std::cerr << "warning: a companion block has spectral radius "
                << run.system.max_companion_spectral_radius << " > 1.05; outputs may overflow\n";
    snn::write_lti_outputs(sim_cfg, run);
    write_sidecar(cfg, "");
    return kExitOk;
  }
  const snn::SimulatedInstance inst = snn::make_instance(cfg, 0);
  const fs::path root(cfg.output_dir);
  snn::write_matrix_csv(inst.truth, (root / "A.csv").string());
  snn::write_masked_csv(inst.data, (root / "Y.csv").string());
  {
    std::ofstream mask_out(root / "D.csv");
    for (snn::Index i = 0; i < inst.data.rows(); ++i) {
      for (snn::Index j = 0; j < inst.data.cols(); ++j) {
        if (j > 0) mask_out << ',';
        mask_out << (inst.data.mask()(i, j) ? 1 : 0);
      }
      mask_out << '\n';
    }
  }
  if (inst.propensities) snn::write_matrix_csv(*inst.propensities, (root / "P.csv").string());
  write_sidecar(cfg, "");
  return kExitOk;
}

int cmd_experiment(const CommonOptions& opts) {
  const snn::ExperimentConfig cfg = load_config(opts);
  const snn::ExperimentOutput output = snn::run_experiment(cfg);
  snn::write_experiment_outputs(cfg, output);
  std::cout << output.table.to_csv();
  return kExitOk;
}

int cmd_lti(const CommonOptions& opts, bool evaluate_flag) {
  snn::ExperimentConfig cfg = load_config(opts);
  if (evaluate_flag) cfg.lti_evaluate = true;
  const snn::LtiRun run = snn::run_lti(cfg);
  if (run.system.unstable())
    std::cerr << "warning: a companion block has spectral radius "
              << run.system.max_companion_spectral_radius << " > 1.05; outputs may overflow\n";
  snn::write_lti_outputs(cfg, run);
  if (run.counterfactual_eval)
    std::cout << "counterfactual rmse=" << snn::format_double(run.counterfactual_eval->rmse)
              << " mae=" << snn::format_double(run.counterfactual_eval->mae)
              << " max_abs_error=" << snn::format_double(run.counterfactual_max_error)
              << " cells=" << run.counterfactual_eval->count << "\n";
  return kExitOk;
}

struct CompleteOptions {
  std::string input_path;
  std::string estimator = "snn";
  std::string missing_token = "NA";
};

int cmd_complete(const CommonOptions& opts, const CompleteOptions& comp) {
  // Completion reads only the estimator sections; everything else keeps the
  // library defaults.
  const snn::KeyValueConfig raw = opts.config_path.empty()
                                      ? snn::KeyValueConfig{}
                                      : snn::KeyValueConfig::parse_file(opts.config_path);
  const snn::SnnConfig snn_cfg = snn::snn_config_from(raw);
  const snn::BaselineConfig baselines = snn::baseline_config_from(raw);
  const std::uint64_t seed = opts.seed_set ? opts.seed : raw.get_u64("experiment.master_seed", 0);
  const int jobs = opts.jobs > 0
                       ? opts.jobs
                       : static_cast<int>(raw.get_int("experiment.jobs", 1));
  const std::string output_dir =
      !opts.output_dir.empty() ? opts.output_dir : raw.get_string("experiment.output_dir", "");
  if (output_dir.empty())
    throw snn::ConfigError("config: field \"experiment.output_dir\" is required");

  const snn::MaskedMatrix data = snn::read_masked_csv(comp.input_path, comp.missing_token);
  fs::create_directories(output_dir);
  const fs::path root(output_dir);

  snn::Matrix completed;
  std::ofstream status(root / "status.csv");
  status << "i,j,status\n";
  if (comp.estimator == "snn") {
    const auto result =
        snn::snn_complete(data, snn::kAllMissing, cfg.snn, cfg.master_seed, cfg.jobs);
    completed = result.completed;
    std::ofstream ci(root / "ci.csv");
    ci << "i,j,estimate,lo,hi,variance,k_folds,n_anchor_cols,fold_sizes\n";
    for (const auto& cell : result.cells) {
      status << cell.i << ',' << cell.j << ',' << snn::to_string(cell.status) << "\n";
      if (!cell.estimate) continue;
      const auto& est = *cell.estimate;
      ci << cell.i << ',' << cell.j << ',' << snn::format_double(est.value) << ','
         << snn::format_double(est.ci_lo) << ',' << snn::format_double(est.ci_hi) << ','
         << snn::format_double(est.variance) << ',' << est.fold_values.size() << ','
         << est.plan.anchor_cols.size() << ',';
      for (std::size_t f = 0; f < est.plan.row_folds.size(); ++f) {
        if (f > 0) ci << ';';
        ci << est.plan.row_folds[f].size();
      }
      ci << "\n";
    }
  } else if (comp.estimator == "knn") {
    const auto result = snn::knn_impute(data, cfg.baselines.knn_k);
    completed = result.completed;
    for (snn::Index i = 0; i < data.rows(); ++i)
      for (snn::Index j = 0; j < data.cols(); ++j)
        if (!data.mask()(i, j)) {
          const bool bad = std::find(result.unestimable.begin(), result.unestimable.end(),
                                     std::make_pair(i, j)) != result.unestimable.end();
          status << i << ',' << j << ',' << (bad ? "no_anchor" : "ok") << "\n";
        }
  } else if (comp.estimator == "usvt") {
    completed = snn::usvt(data, cfg.baselines.usvt_eta);
    for (snn::Index i = 0; i < data.rows(); ++i)
      for (snn::Index j = 0; j < data.cols(); ++j)
        if (!data.mask()(i, j)) status << i << ',' << j << ",ok\n";
  } else if (comp.estimator == "softimpute") {
    completed = snn::soft_impute(data, cfg.baselines.softimpute_lambda,
                                 cfg.baselines.softimpute_max_iter, cfg.baselines.softimpute_tol);
    for (snn::Index i = 0; i < data.rows(); ++i)
      for (snn::Index j = 0; j < data.cols(); ++j)
        if (!data.mask()(i, j)) status << i << ',' << j << ",ok\n";
  } else {
    throw snn::ConfigError("config: unknown estimator \"" + comp.estimator + "\"");
  }

  // Unestimable cells stay missing in the output instead of being fabricated.
  snn::BoolMatrix out_mask(completed.rows(), completed.cols());
  for (snn::Index i = 0; i < completed.rows(); ++i)
    for (snn::Index j = 0; j < completed.cols(); ++j)
      out_mask(i, j) = std::isfinite(completed(i, j));
  snn::write_masked_csv(snn::MaskedMatrix(completed, out_mask), (root / "completed.csv").string(),
                        comp.missing_token);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic nearest neighbors matrix completion toolkit"};
  app.require_subcommand(1);

  CommonOptions sim_opts, exp_opts, lti_opts, comp_opts_common;
  CompleteOptions comp_opts;
  bool lti_evaluate = false;

  auto* simulate = app.add_subcommand("simulate", "write a simulated instance to disk");
  add_common(simulate, sim_opts);

  auto* complete = app.add_subcommand("complete", "complete a masked CSV matrix");
  add_common(complete, comp_opts_common, false);
  complete->add_option("--input", comp_opts.input_path, "masked CSV input")->required();
  complete->add_option("--estimator", comp_opts.estimator, "snn|knn|usvt|softimpute");
  complete->add_option("--missing-token", comp_opts.missing_token, "token for missing cells");

  auto* experiment = app.add_subcommand("experiment", "run a seeded experiment recipe");
  add_common(experiment, exp_opts);

  auto* lti = app.add_subcommand("lti", "simulate the LTI factor system");
  add_common(lti, lti_opts);
  lti->add_flag("--evaluate", lti_evaluate, "hold out counterfactuals and score SNN recovery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_opts);
    if (complete->parsed()) return cmd_complete(comp_opts_common, comp_opts);
    if (experiment->parsed()) return cmd_experiment(exp_opts);
    if (lti->parsed()) return cmd_lti(lti_opts, lti_evaluate);
  } catch (const snn::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::logic_error& e) {  // bad indices, unimplemented stubs
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
