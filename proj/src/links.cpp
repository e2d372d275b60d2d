#include "lmpanel/links.hpp"

#include <cmath>
#include <limits>

#include "lmpanel/errors.hpp"

namespace lmpanel {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void init_design_row_into(const SubjectRecord& subject, const ModelConfig& config,
                          int H, Vector& x) {
  const auto& cov = config.init_covariates;
  x.resize(p_init(config, H));
  int pos = 0;
  if (!cov.facility) x[pos++] = 1.0;
  if (cov.gender) x[pos++] = static_cast<double>(subject.gender);
  if (cov.age) x[pos++] = subject.occasions.front().age_years;
  if (cov.facility)
    for (int h = 0; h < H; ++h) x[pos++] = static_cast<double>(subject.facility[h]);
}

Vector init_design_row(const SubjectRecord& subject, const ModelConfig& config,
                       int H) {
  Vector x;
  init_design_row_into(subject, config, H, x);
  return x;
}

void trans_design_row_into(const SubjectRecord& subject, int t,
                           const ModelConfig& config, int H, Vector& x) {
  const auto& cov = config.trans_covariates;
  const Occasion& occ = subject.occasions.at(t);
  x.resize(p_trans(config, H));
  int pos = 0;
  if (!cov.facility) x[pos++] = 1.0;
  if (cov.gender) x[pos++] = static_cast<double>(subject.gender);
  if (cov.age) x[pos++] = occ.age_years;
  if (cov.time_gap) x[pos++] = occ.days_since_prev;
  if (cov.facility)
    for (int h = 0; h < H; ++h) x[pos++] = static_cast<double>(subject.facility[h]);
}

Vector trans_design_row(const SubjectRecord& subject, int t,
                        const ModelConfig& config, int H) {
  Vector x;
  trans_design_row_into(subject, t, config, H, x);
  return x;
}

void initial_probs_into(const Vector& beta, const Vector& x, int k, Vector& pi) {
  pi.resize(k);
  if (k == 1) {
    pi[0] = 1.0;
    return;
  }
  const int n_shifts = std::max(k - 2, 0);
  const double slope_term = beta.tail(beta.size() - n_shifts).dot(x);

  // Upper-tail probabilities G_c = P(C > c), c = 1..k-1; differences give
  // the class probabilities.
  double upper = sigmoid(slope_term);
  pi[0] = 1.0 - upper;
  for (int c = 2; c <= k - 1; ++c) {
    const double next = sigmoid(beta[c - 2] + slope_term);
    pi[c - 1] = upper - next;
    upper = next;
  }
  pi[k - 1] = upper;
  for (int c = 0; c < k; ++c) {
    if (pi[c] < -1e-12)
      throw Error(ErrorCode::InfeasibleCuts,
                  "implied initial probability " + std::to_string(pi[c]) +
                      " at state " + std::to_string(c + 1));
    if (pi[c] < 0.0) pi[c] = 0.0;
  }
}

Vector initial_probs(const Vector& beta, const Vector& x, int k) {
  Vector pi;
  initial_probs_into(beta, x, k, pi);
  return pi;
}

Vector cumulative_logits(const Vector& pi) {
  const int k = static_cast<int>(pi.size());
  Vector logits(k - 1);
  double tail = 0.0;
  for (int c = k - 1; c >= 1; --c) {
    tail += pi[c];
    logits[c - 1] = std::log(tail) - std::log(1.0 - tail);
  }
  return logits;
}

void transition_matrix_into(const std::vector<Vector>& gamma, const Vector& x,
                            const ModelConfig& config, Matrix& trans) {
  const int k = config.k;
  trans.setZero(k, k);
  if (k == 1) {
    trans(0, 0) = 1.0;
    return;
  }
  for (int c = 1; c <= k; ++c) {
    const auto dests = admissible_destinations(c, k);
    // Baseline logit 0 for staying; subtract the max for stability.
    double max_logit = 0.0;
    double logits[2];
    for (std::size_t m = 0; m < dests.size(); ++m) {
      logits[m] = gamma[gamma_block_index(config, c, dests[m])].dot(x);
      max_logit = std::max(max_logit, logits[m]);
    }
    double denom = std::exp(-max_logit);
    for (std::size_t m = 0; m < dests.size(); ++m)
      denom += std::exp(logits[m] - max_logit);
    trans(c - 1, c - 1) = std::exp(-max_logit) / denom;
    for (std::size_t m = 0; m < dests.size(); ++m)
      trans(c - 1, dests[m] - 1) = std::exp(logits[m] - max_logit) / denom;
  }
}

Matrix transition_matrix(const std::vector<Vector>& gamma, const Vector& x,
                         const ModelConfig& config) {
  Matrix trans;
  transition_matrix_into(gamma, x, config, trans);
  return trans;
}

ResponseLogTable make_response_log_table(const Matrix& lambda) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  ResponseLogTable table;
  table.log_success.resize(lambda.rows(), lambda.cols());
  table.log_failure.resize(lambda.rows(), lambda.cols());
  for (Index j = 0; j < lambda.rows(); ++j)
    for (Index c = 0; c < lambda.cols(); ++c) {
      const double p = lambda(j, c);
      table.log_success(j, c) = p > 0.0 ? std::log(p) : kNegInf;
      table.log_failure(j, c) = p < 1.0 ? std::log1p(-p) : kNegInf;
    }
  return table;
}

void response_log_vector_into(const ResponseLogTable& table, const IntVector& y,
                              Vector& out) {
  const Index k = table.log_success.cols();
  out.resize(k);
  for (Index c = 0; c < k; ++c) {
    double acc = 0.0;
    for (Index j = 0; j < y.size(); ++j)
      acc += y[j] == 1 ? table.log_success(j, c) : table.log_failure(j, c);
    out[c] = acc;
  }
}

Vector response_log_vector(const Matrix& lambda, const IntVector& y) {
  const int k = static_cast<int>(lambda.cols());
  Vector logm(k);
  for (int c = 0; c < k; ++c) {
    double acc = 0.0;
    for (Index j = 0; j < y.size(); ++j) {
      const double p = lambda(j, c);
      if (y[j] == 1) {
        if (p <= 0.0) {
          acc = -std::numeric_limits<double>::infinity();
          break;
        }
        acc += std::log(p);
      } else {
        if (p >= 1.0) {
          acc = -std::numeric_limits<double>::infinity();
          break;
        }
        acc += std::log1p(-p);
      }
    }
    logm[c] = acc;
  }
  return logm;
}

Vector response_vector(const Matrix& lambda, const IntVector& y) {
  return response_log_vector(lambda, y).array().exp();
}

} // namespace lmpanel
