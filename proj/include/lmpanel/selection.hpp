#pragma once

#include <string>
#include <vector>

#include "lmpanel/em.hpp"

namespace lmpanel {

// Eq-style BIC with n = number of subjects.
double bic(double loglik, int v, long n_subjects);

// 1 - exp{2(loglik0 - loglik)/(nJ)} against the k=1 independence fit.
double r_squared(double loglik, double loglik0, long n_subjects, int n_items);

// Average scaled excess of the maximum posterior probability over 1/k.
// NaN for k = 1 (not applicable).
double s_index(const std::vector<Matrix>& state_marginals, int k);

struct SelectionRow {
  std::string label;
  ModelConfig config;
  int k = 0;
  int v = 0;
  double loglik = 0.0;
  double bic = 0.0;
  double r2 = 0.0;
  double s = 0.0;
  bool ok = false;
  std::string error;
  FitResult fit;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::string chosen_model;
  int chosen_index = -1;
};

// Backward strategy: scan M1 over k until BIC rises, fix that k, then try
// M2, each single-covariate drop of M2, and the combination of every
// BIC-improving drop. Failed rows are recorded and skipped.
SelectionReport backward_select(const PanelData& panel, int k_max,
                                const FitSettings& settings);

} // namespace lmpanel
