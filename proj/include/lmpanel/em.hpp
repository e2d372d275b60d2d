#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lmpanel/config.hpp"
#include "lmpanel/likelihood.hpp"
#include "lmpanel/panel.hpp"
#include "lmpanel/types.hpp"

namespace lmpanel {

// Posterior expectations of the complete-data indicator variables.
struct ExpectedCounts {
  std::vector<Vector> w1;                  // per subject, k
  std::vector<Matrix> w_state;             // per subject, k x T_i
  std::vector<std::vector<Matrix>> w_pair; // per subject, T_i - 1 banded k x k
};

struct FitSettings {
  double tol = 1e-8;
  int max_iter = 5000;
  int n_starts = 25;   // random starts; one deterministic start is added
  int warm_iters = 15;
  std::uint64_t seed = 1;
};

struct FitDiagnostics {
  int singular_steps = 0;
  int empty_state_events = 0;
  int gamma_reverts = 0;
  bool no_transitions = false;
};

struct FitResult {
  Parameters theta_hat;
  double loglik = 0.0;
  int n_iter = 0;
  bool converged = false;
  int v = 0;
  std::vector<double> loglik_trace;
  std::vector<double> start_logliks;
  FitDiagnostics diag;
};

// E-step: fills the posterior weights and returns the log-likelihood at
// theta. Reuses the storage in counts across calls.
double e_step(const Parameters& theta, const PanelData& panel,
              const ModelConfig& config, ExpectedCounts& counts);
std::pair<ExpectedCounts, double> e_step(const Parameters& theta,
                                         const PanelData& panel,
                                         const ModelConfig& config);

// Exact monotone-constrained update of lambda: weighted isotonic means over
// all occasions. States with total weight below 1e-12 keep their previous
// column (flagged in the diagnostics).
Matrix m_step_lambda(const ExpectedCounts& counts, const PanelData& panel,
                     int k, const Matrix& lambda_prev,
                     FitDiagnostics* diag = nullptr);

// Newton-Raphson with step-halving on the expected initial-submodel
// objective; the returned beta keeps the cuts feasible for every subject.
Vector m_step_beta(const ExpectedCounts& counts, const PanelData& panel,
                   const ModelConfig& config, const Vector& beta_start,
                   FitDiagnostics* diag = nullptr);

// Newton-Raphson on the expected transition objective plus a 1e-8 ridge on
// gamma; reverted if the unpenalized objective would decrease.
std::vector<Vector> m_step_gamma(const ExpectedCounts& counts,
                                 const PanelData& panel,
                                 const ModelConfig& config,
                                 const std::vector<Vector>& gamma_start,
                                 FitDiagnostics* diag = nullptr);

// Expected complete-data components; grad/hess (when non-null) receive the
// analytic derivatives. Gamma derivatives are over the stacked blocks.
double expected_init_objective(const ExpectedCounts& counts,
                               const PanelData& panel,
                               const ModelConfig& config, const Vector& beta,
                               Vector* grad = nullptr, Matrix* hess = nullptr);
double expected_trans_objective(const ExpectedCounts& counts,
                                const PanelData& panel,
                                const ModelConfig& config,
                                const std::vector<Vector>& gamma,
                                Vector* grad = nullptr, Matrix* hess = nullptr);
double expected_resp_loglik(const ExpectedCounts& counts, const PanelData& panel,
                            const Matrix& lambda);
Vector expected_resp_gradient(const ExpectedCounts& counts,
                              const PanelData& panel, const Matrix& lambda);
double expected_init_loglik(const ExpectedCounts& counts, const PanelData& panel,
                            const ModelConfig& config, const Vector& beta);
double expected_trans_loglik(const ExpectedCounts& counts,
                             const PanelData& panel, const ModelConfig& config,
                             const std::vector<Vector>& gamma);
// Single-pass evaluation of the whole expected complete-data log-likelihood.
double expected_complete_loglik(const ExpectedCounts& counts,
                                const PanelData& panel,
                                const ModelConfig& config,
                                const Parameters& theta);

Vector pooled_item_means(const PanelData& panel);
double independence_loglik(const PanelData& panel);

Parameters random_start(const PanelData& panel, const ModelConfig& config,
                        std::uint64_t seed, int start_index);
Parameters deterministic_start(const PanelData& panel, const ModelConfig& config);

// Warm-runs the deterministic start plus n_starts random starts and returns
// the one with the highest warmed log-likelihood; warm values are reported
// through warm_logliks when non-null.
Parameters multi_start_init(const PanelData& panel, const ModelConfig& config,
                            const FitSettings& settings,
                            std::vector<double>* warm_logliks = nullptr);

FitResult fit_from(const PanelData& panel, const ModelConfig& config,
                   const FitSettings& settings, Parameters theta0);
FitResult fit(const PanelData& panel, const ModelConfig& config,
              const FitSettings& settings = {});

} // namespace lmpanel
