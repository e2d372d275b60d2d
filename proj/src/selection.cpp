#include "lmpanel/selection.hpp"

#include <cmath>
#include <limits>

#include "lmpanel/errors.hpp"

namespace lmpanel {

double bic(double loglik, int v, long n_subjects) {
  return -2.0 * loglik + v * std::log(static_cast<double>(n_subjects));
}

double r_squared(double loglik, double loglik0, long n_subjects, int n_items) {
  return 1.0 - std::exp(2.0 * (loglik0 - loglik) /
                        (static_cast<double>(n_subjects) * n_items));
}

double s_index(const std::vector<Matrix>& state_marginals, int k) {
  if (k <= 1) return std::numeric_limits<double>::quiet_NaN();
  double excess = 0.0;
  long total = 0;
  for (const auto& marginals : state_marginals) {
    for (Index t = 0; t < marginals.cols(); ++t) {
      excess += marginals.col(t).maxCoeff() - 1.0 / k;
      ++total;
    }
  }
  return excess / ((1.0 - 1.0 / k) * total);
}

namespace {

SelectionRow fit_row(const std::string& label, const ModelConfig& config,
                     const PanelData& panel, const FitSettings& settings,
                     double loglik0) {
  SelectionRow row;
  row.label = label;
  row.config = config;
  row.k = config.k;
  row.v = count_parameters(config, panel.n_items, panel.n_facilities);
  try {
    row.fit = fit(panel, config, settings);
    row.loglik = row.fit.loglik;
    row.bic = bic(row.loglik, row.fit.v, panel.n_subjects());
    if (config.k >= 2) {
      row.r2 = r_squared(row.loglik, loglik0, panel.n_subjects(), panel.n_items);
      ExpectedCounts counts;
      e_step(row.fit.theta_hat, panel, config, counts);
      row.s = s_index(counts.w_state, config.k);
    } else {
      row.r2 = std::numeric_limits<double>::quiet_NaN();
      row.s = std::numeric_limits<double>::quiet_NaN();
    }
    row.ok = true;
  } catch (const Error& err) {
    row.ok = false;
    row.error = err.what();
  }
  return row;
}

struct Drop {
  std::string name;
  void (*apply)(ModelConfig&);
  bool (*enabled)(const ModelConfig&);
};

const Drop kDrops[] = {
    {"init_gender", [](ModelConfig& c) { c.init_covariates.gender = false; },
     [](const ModelConfig& c) { return c.init_covariates.gender; }},
    {"init_age", [](ModelConfig& c) { c.init_covariates.age = false; },
     [](const ModelConfig& c) { return c.init_covariates.age; }},
    {"init_facility", [](ModelConfig& c) { c.init_covariates.facility = false; },
     [](const ModelConfig& c) { return c.init_covariates.facility; }},
    {"trans_gender", [](ModelConfig& c) { c.trans_covariates.gender = false; },
     [](const ModelConfig& c) { return c.trans_covariates.gender; }},
    {"trans_age", [](ModelConfig& c) { c.trans_covariates.age = false; },
     [](const ModelConfig& c) { return c.trans_covariates.age; }},
    {"trans_time", [](ModelConfig& c) { c.trans_covariates.time_gap = false; },
     [](const ModelConfig& c) { return c.trans_covariates.time_gap; }},
    {"trans_facility",
     [](ModelConfig& c) { c.trans_covariates.facility = false; },
     [](const ModelConfig& c) { return c.trans_covariates.facility; }},
};

} // namespace

SelectionReport backward_select(const PanelData& panel, int k_max,
                                const FitSettings& settings) {
  SelectionReport report;
  const double loglik0 = independence_loglik(panel);

  // Phase 1: M1 with increasing k until BIC rises.
  int k_star = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  double prev_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    ModelConfig config;
    config.k = k;
    config.transition_mode = TransitionMode::UnrestrictedTridiag;
    SelectionRow row =
        fit_row("m1_k" + std::to_string(k), config, panel, settings, loglik0);
    report.rows.push_back(row);
    if (!row.ok) continue;
    if (row.bic < best_bic) {
      best_bic = row.bic;
      k_star = k;
    }
    const bool increased = std::isfinite(prev_bic) && row.bic > prev_bic;
    prev_bic = row.bic;
    if (increased) break;
  }

  if (k_star >= 2) {
    ModelConfig m2;
    m2.k = k_star;
    m2.transition_mode = TransitionMode::SharedUpDown;
    SelectionRow m2_row = fit_row("m2", m2, panel, settings, loglik0);
    report.rows.push_back(m2_row);
    const double m2_bic =
        m2_row.ok ? m2_row.bic : std::numeric_limits<double>::infinity();

    // Phase 2: single-covariate drops, then the combined improvement.
    std::vector<const Drop*> improving;
    for (const auto& drop : kDrops) {
      if (!drop.enabled(m2)) continue;
      ModelConfig reduced = m2;
      drop.apply(reduced);
      SelectionRow row =
          fit_row("m2_no_" + drop.name, reduced, panel, settings, loglik0);
      if (row.ok && row.bic < m2_bic) improving.push_back(&drop);
      report.rows.push_back(std::move(row));
    }
    if (improving.size() >= 2) {
      ModelConfig reduced = m2;
      std::string label = "m2_no";
      for (const Drop* drop : improving) {
        drop->apply(reduced);
        label += "_" + drop->name;
      }
      report.rows.push_back(fit_row(label, reduced, panel, settings, loglik0));
    }
  }

  double chosen_bic = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    if (report.rows[r].ok && report.rows[r].bic < chosen_bic) {
      chosen_bic = report.rows[r].bic;
      report.chosen_index = static_cast<int>(r);
    }
  }
  if (report.chosen_index < 0)
    throw Error(ErrorCode::AllStartsFailed, "no candidate model could be fitted");
  report.chosen_model = report.rows[report.chosen_index].label;
  return report;
}

} // namespace lmpanel
