// Command-line workflow: simulate, fit, select, score, classify, report.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmpanel/em.hpp"
#include "lmpanel/errors.hpp"
#include "lmpanel/inference.hpp"
#include "lmpanel/io.hpp"
#include "lmpanel/parallel.hpp"
#include "lmpanel/scoring.hpp"
#include "lmpanel/selection.hpp"
#include "lmpanel/simulate.hpp"

namespace {

using lmpanel::Json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct FitFlags {
  std::string panel_path;
  int k = 0;
  std::string model = "m2";
  std::string drop;
  lmpanel::FitSettings settings;
  bool seed_given = false;
  std::string out_path;
};

void apply_drops(const std::string& drop, lmpanel::ModelConfig& config) {
  if (drop.empty()) return;
  std::stringstream ss(drop);
  std::string token;
  while (std::getline(ss, token, ',')) {
    bool known = true;
    if (token == "init:gender")
      config.init_covariates.gender = false;
    else if (token == "init:age")
      config.init_covariates.age = false;
    else if (token == "init:facility")
      config.init_covariates.facility = false;
    else if (token == "trans:gender")
      config.trans_covariates.gender = false;
    else if (token == "trans:age")
      config.trans_covariates.age = false;
    else if (token == "trans:time")
      config.trans_covariates.time_gap = false;
    else if (token == "trans:facility")
      config.trans_covariates.facility = false;
    else
      known = false;
    if (!known)
      throw CLI::ValidationError("--drop", "unknown covariate '" + token + "'");
  }
}

std::uint64_t resolve_seed(bool seed_given, std::uint64_t seed) {
  if (seed_given) return seed;
  std::random_device rd;
  const std::uint64_t drawn =
      (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "seed not given, using " << drawn << "\n";
  return drawn;
}

void echo_config(const Json& invocation) {
  std::cerr << "resolved configuration: " << invocation.dump() << "\n";
}

int run_simulate(const std::string& design_path, const std::string& out_path,
                 const std::string& truth_path) {
  const lmpanel::SimDesign design = lmpanel::parse_sim_design_file(design_path);
  Json invocation = {{"subcommand", "simulate"},
                     {"design", design_path},
                     {"out", out_path},
                     {"seed", design.seed}};
  echo_config(invocation);
  const lmpanel::SimResult result = lmpanel::simulate_panel(design);
  lmpanel::write_panel_csv_file(result.panel, out_path);
  if (!truth_path.empty())
    lmpanel::write_json_file(lmpanel::truth_to_json(design, result), truth_path);
  return kExitOk;
}

int run_fit(FitFlags& flags) {
  flags.settings.seed = resolve_seed(flags.seed_given, flags.settings.seed);
  lmpanel::ModelConfig config;
  config.k = flags.k;
  config.transition_mode = flags.model == "m1"
                               ? lmpanel::TransitionMode::UnrestrictedTridiag
                               : lmpanel::TransitionMode::SharedUpDown;
  apply_drops(flags.drop, config);

  Json invocation = {{"subcommand", "fit"},
                     {"panel", flags.panel_path},
                     {"k", flags.k},
                     {"model", flags.model},
                     {"drop", flags.drop},
                     {"starts", flags.settings.n_starts},
                     {"warm_iters", flags.settings.warm_iters},
                     {"seed", flags.settings.seed},
                     {"tol", flags.settings.tol},
                     {"max_iter", flags.settings.max_iter},
                     {"out", flags.out_path}};
  echo_config(invocation);

  const lmpanel::PanelData panel = lmpanel::parse_panel_csv_file(flags.panel_path);
  const lmpanel::FitResult fit_result = lmpanel::fit(panel, config, flags.settings);
  const lmpanel::InferenceResult inference =
      lmpanel::infer(fit_result.theta_hat, panel, config);

  lmpanel::ExpectedCounts counts;
  lmpanel::e_step(fit_result.theta_hat, panel, config, counts);
  const double s_value = lmpanel::s_index(counts.w_state, config.k);
  const double loglik0 = lmpanel::independence_loglik(panel);
  const auto classifications = lmpanel::classify(counts.w_state);
  const auto descriptive = lmpanel::descriptive_scores(panel);
  const lmpanel::Vector avg_pi =
      lmpanel::average_initial_probs(fit_result.theta_hat, panel, config);

  const Json report = lmpanel::build_fit_report(
      panel, config, fit_result, inference, flags.settings, loglik0, s_value,
      descriptive, avg_pi, classifications, invocation);
  lmpanel::write_json_file(report, flags.out_path);
  return kExitOk;
}

int run_select(const std::string& panel_path, int k_max,
               lmpanel::FitSettings settings, bool seed_given,
               const std::string& out_path) {
  settings.seed = resolve_seed(seed_given, settings.seed);
  Json invocation = {{"subcommand", "select"}, {"panel", panel_path},
                     {"k_max", k_max},         {"starts", settings.n_starts},
                     {"seed", settings.seed},  {"tol", settings.tol},
                     {"max_iter", settings.max_iter}, {"out", out_path}};
  echo_config(invocation);
  const lmpanel::PanelData panel = lmpanel::parse_panel_csv_file(panel_path);
  const lmpanel::SelectionReport report =
      lmpanel::backward_select(panel, k_max, settings);
  lmpanel::write_json_file(
      lmpanel::build_selection_report(panel, report, invocation), out_path);
  return kExitOk;
}

int run_score(const std::string& report_path, const std::string& out_path) {
  Json invocation = {
      {"subcommand", "score"}, {"report", report_path}, {"out", out_path}};
  echo_config(invocation);
  const Json report = lmpanel::read_json_file(report_path);
  const lmpanel::ModelConfig config = lmpanel::config_from_json(report.at("config"));
  const int n_items = report.at("config").at("n_items").get<int>();
  const int n_facilities = report.at("config").at("n_facilities").get<int>();
  const lmpanel::Parameters theta = lmpanel::parameters_from_json(
      report.at("parameters"), config, n_items, n_facilities);
  const lmpanel::Matrix cov = [&]() {
    const Json& rows = report.at("inference").at("cov");
    lmpanel::Matrix m(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        m(r, c) = rows[r][c].is_null() ? 0.0 : rows[r][c].get<double>();
    return m;
  }();

  lmpanel::FacilityScoreReport scores =
      lmpanel::facility_contrasts(theta, cov, config, n_items, n_facilities);
  lmpanel::unidimensional_scores(scores);
  if (report.contains("avg_initial_probs") &&
      !report.at("avg_initial_probs").is_null()) {
    const Json& avg = report.at("avg_initial_probs");
    scores.avg_initial_probs.resize(avg.size());
    for (std::size_t c = 0; c < avg.size(); ++c)
      scores.avg_initial_probs[c] = avg[c].get<double>();
  }

  Json out;
  out["format_version"] = "1";
  out["kind"] = "score_report";
  out["invocation"] = invocation;
  out["config"] = report.at("config");
  Json score_json = lmpanel::facility_scores_to_json(scores);
  out["scores"] = {{"descriptive", report.at("scores").at("descriptive")},
                   {"bidimensional", score_json["bidimensional"]},
                   {"unidimensional", score_json["unidimensional"]}};
  out["avg_initial_probs"] = score_json["avg_initial_probs"];
  lmpanel::write_json_file(out, out_path);
  return kExitOk;
}

int run_classify(const std::string& report_path, const std::string& panel_path,
                 const std::string& out_path) {
  Json invocation = {{"subcommand", "classify"},
                     {"report", report_path},
                     {"panel", panel_path},
                     {"out", out_path}};
  echo_config(invocation);
  const Json report = lmpanel::read_json_file(report_path);
  const lmpanel::ModelConfig config = lmpanel::config_from_json(report.at("config"));
  const lmpanel::PanelData panel = lmpanel::parse_panel_csv_file(panel_path);
  const lmpanel::Parameters theta = lmpanel::parameters_from_json(
      report.at("parameters"), config, panel.n_items, panel.n_facilities);
  lmpanel::ExpectedCounts counts;
  lmpanel::e_step(theta, panel, config, counts);
  const auto labels = lmpanel::classify(counts.w_state);

  std::ofstream out(out_path);
  if (!out)
    throw lmpanel::Error(lmpanel::ErrorCode::IoError,
                         "cannot open " + out_path + " for writing");
  lmpanel::write_states_csv(panel, labels, out);
  return kExitOk;
}

int run_report(const std::string& report_path) {
  echo_config({{"subcommand", "report"}, {"report", report_path}});
  const Json report = lmpanel::read_json_file(report_path);
  std::cout << "report kind: " << report.value("kind", "?") << "\n";
  if (report.contains("config")) {
    const Json& config = report["config"];
    std::cout << "model " << config.value("model", "?") << ", k="
              << config.value("k", 0) << ", J=" << config.value("n_items", 0)
              << ", H=" << config.value("n_facilities", 0)
              << ", n=" << config.value("n_subjects", 0) << "\n";
  }
  if (report.contains("fit")) {
    const Json& fit = report["fit"];
    std::cout << "loglik " << fit["loglik"] << "  v " << fit["v"] << "  bic "
              << fit["bic"] << "  r2 " << fit["r2"] << "  s " << fit["s_index"]
              << "  iters " << fit["n_iter"] << (fit["converged"].get<bool>()
                                                     ? " (converged)\n"
                                                     : " (not converged)\n");
  }
  if (report.contains("rows")) {
    std::cout << "label  k  v  loglik  bic\n";
    for (const auto& row : report["rows"]) {
      std::cout << row["label"].get<std::string>() << "  " << row["k"] << "  "
                << row["v"];
      if (row["ok"].get<bool>())
        std::cout << "  " << row["loglik"] << "  " << row["bic"];
      else
        std::cout << "  failed: " << row["error"].get<std::string>();
      std::cout << "\n";
    }
    std::cout << "chosen: " << report["chosen_model"].get<std::string>() << "\n";
  }
  if (report.contains("scores") && report["scores"]["unidimensional"].is_array()) {
    std::cout << "facility  score  se  ci95  rank\n";
    for (const auto& row : report["scores"]["unidimensional"])
      std::cout << row["facility"] << "  " << row["estimate"] << "  " << row["se"]
                << "  [" << row["ci95"][0] << ", " << row["ci95"][1] << "]  "
                << row["rank"] << "\n";
  }
  if (report.contains("parameter_table")) {
    std::cout << "name  estimate  se  z  p\n";
    for (const auto& row : report["parameter_table"])
      std::cout << row["name"].get<std::string>() << "  " << row["estimate"]
                << "  " << row["se"] << "  " << row["z"] << "  " << row["p"]
                << "\n";
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent Markov panel models with facility scoring"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker parallelism (0 = auto)");

  auto* simulate = app.add_subcommand("simulate", "draw a synthetic panel");
  std::string design_path, sim_out, truth_path;
  simulate->add_option("--design", design_path, "design JSON")->required();
  simulate->add_option("--out", sim_out, "panel CSV to write")->required();
  simulate->add_option("--truth", truth_path, "optional truth JSON to write");

  auto* fit = app.add_subcommand("fit", "fit one model");
  FitFlags fit_flags;
  fit->add_option("--panel", fit_flags.panel_path, "panel CSV")->required();
  fit->add_option("--k", fit_flags.k, "number of latent states")
      ->required()
      ->check(CLI::PositiveNumber);
  fit->add_option("--model", fit_flags.model, "m1 or m2")
      ->check(CLI::IsMember({"m1", "m2"}));
  fit->add_option("--drop", fit_flags.drop,
                  "covariates to drop, e.g. init:gender,trans:age");
  fit->add_option("--starts", fit_flags.settings.n_starts, "random starts");
  fit->add_option("--warm-iters", fit_flags.settings.warm_iters,
                  "EM steps per start");
  auto* fit_seed = fit->add_option("--seed", fit_flags.settings.seed, "RNG seed");
  fit->add_option("--tol", fit_flags.settings.tol, "relative loglik tolerance");
  fit->add_option("--max-iter", fit_flags.settings.max_iter, "EM iteration cap");
  fit->add_option("--out", fit_flags.out_path, "report JSON")->required();

  auto* select = app.add_subcommand("select", "backward model selection");
  std::string select_panel, select_out;
  int k_max = 8;
  lmpanel::FitSettings select_settings;
  select->add_option("--panel", select_panel, "panel CSV")->required();
  select->add_option("--k-max", k_max, "largest k to scan")
      ->required()
      ->check(CLI::PositiveNumber);
  select->add_option("--starts", select_settings.n_starts, "random starts");
  select->add_option("--warm-iters", select_settings.warm_iters,
                     "EM steps per start");
  auto* select_seed = select->add_option("--seed", select_settings.seed, "RNG seed");
  select->add_option("--tol", select_settings.tol, "relative loglik tolerance");
  select->add_option("--max-iter", select_settings.max_iter, "EM iteration cap");
  select->add_option("--out", select_out, "selection JSON")->required();

  auto* score = app.add_subcommand("score", "facility scores from a fit report");
  std::string score_report, score_out;
  score->add_option("--report", score_report, "fit report JSON")->required();
  score->add_option("--out", score_out, "scores JSON")->required();

  auto* classify = app.add_subcommand("classify", "modal latent states");
  std::string classify_report, classify_panel, classify_out;
  classify->add_option("--report", classify_report, "fit report JSON")->required();
  classify->add_option("--panel", classify_panel, "panel CSV")->required();
  classify->add_option("--out", classify_out, "states CSV")->required();

  auto* render = app.add_subcommand("report", "print a report human-readably");
  std::string render_path;
  render->add_option("--report", render_path, "report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e); // --help
    app.exit(e);
    return kExitUsage;
  }

  if (threads > 0) lmpanel::set_max_threads(threads);

  try {
    if (*simulate) return run_simulate(design_path, sim_out, truth_path);
    if (*fit) {
      fit_flags.seed_given = fit_seed->count() > 0;
      return run_fit(fit_flags);
    }
    if (*select)
      return run_select(select_panel, k_max, select_settings,
                        select_seed->count() > 0, select_out);
    if (*score) return run_score(score_report, score_out);
    if (*classify) return run_classify(classify_report, classify_panel, classify_out);
    if (*render) return run_report(render_path);
  } catch (const lmpanel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lmpanel::is_data_error(e.code()) ? kExitData : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
