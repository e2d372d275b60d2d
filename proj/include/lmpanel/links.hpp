#pragma once

#include "lmpanel/config.hpp"
#include "lmpanel/panel.hpp"
#include "lmpanel/types.hpp"

namespace lmpanel {

double sigmoid(double x);

// Covariate row for the initial-state submodel (occasion 1).
Vector init_design_row(const SubjectRecord& subject, const ModelConfig& config,
                       int n_facilities);
void init_design_row_into(const SubjectRecord& subject, const ModelConfig& config,
                          int n_facilities, Vector& x);

// Covariate row for the transition submodel at occasion t (0-based, t >= 1).
Vector trans_design_row(const SubjectRecord& subject, int t,
                        const ModelConfig& config, int n_facilities);
void trans_design_row_into(const SubjectRecord& subject, int t,
                           const ModelConfig& config, int n_facilities, Vector& x);

// Inverts the k-1 cumulative logits u_c'beta_u + x'beta_x into a length-k
// probability vector. Throws InfeasibleCuts when the implied class
// probabilities go negative (cut predictors not nonincreasing).
Vector initial_probs(const Vector& beta, const Vector& x, int k);
void initial_probs_into(const Vector& beta, const Vector& x, int k, Vector& pi);

// Forward map: cumulative logit of the upper tail at each cut, the inverse
// of initial_probs. Used by tests and the deterministic start.
Vector cumulative_logits(const Vector& pi);

// k x k transition matrix with row-wise baseline logits over the admissible
// destinations; exact zeros outside the tridiagonal band.
Matrix transition_matrix(const std::vector<Vector>& gamma, const Vector& x,
                         const ModelConfig& config);
void transition_matrix_into(const std::vector<Vector>& gamma, const Vector& x,
                            const ModelConfig& config, Matrix& trans);

// log m(y|c) for c = 1..k under the local-independence Bernoulli model;
// entries may be -inf when a response contradicts a boundary lambda.
Vector response_log_vector(const Matrix& lambda, const IntVector& y);
Vector response_vector(const Matrix& lambda, const IntVector& y);

// Precomputed log lambda / log(1 - lambda) tables for the hot loops.
struct ResponseLogTable {
  Matrix log_success;  // J x k, -inf at lambda = 0
  Matrix log_failure;  // J x k, -inf at lambda = 1
};
ResponseLogTable make_response_log_table(const Matrix& lambda);
void response_log_vector_into(const ResponseLogTable& table, const IntVector& y,
                              Vector& out);

} // namespace lmpanel
