#include "lmpanel/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmpanel/errors.hpp"
#include "lmpanel/links.hpp"
#include "lmpanel/parallel.hpp"
#include "lmpanel/pava.hpp"
#include "lmpanel/rng.hpp"

namespace lmpanel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kGradTol = 1e-6;
constexpr double kStepFloor = 1e-12; // ~2^-40
constexpr int kMaxNewtonIters = 100;
constexpr double kGammaRidge = 1e-8;

double ratio(double w, double p) { return w > 0.0 ? w / p : 0.0; }

} // namespace

double e_step(const Parameters& theta, const PanelData& panel,
              const ModelConfig& config, ExpectedCounts& counts) {
  const int n = panel.n_subjects();
  counts.w1.resize(n);
  counts.w_state.resize(n);
  counts.w_pair.resize(n);
  const ResponseLogTable table = make_response_log_table(theta.lambda);
  std::vector<double> lls(n);
  const int n_chunks = std::min(n, std::max(1, max_threads()));
  parallel_for(n_chunks, [&](std::size_t chunk) {
    const int begin = static_cast<int>(chunk * n / n_chunks);
    const int end = static_cast<int>((chunk + 1) * n / n_chunks);
    SubjectInputs inputs;
    FBWorkspace ws;
    for (int i = begin; i < end; ++i) {
      const SubjectRecord& subj = panel.subjects[i];
      try {
        build_subject_inputs_into(subj, theta, config, panel.n_facilities,
                                  table, inputs);
        lls[i] = posterior_into(inputs, ws, counts.w_state[i], counts.w_pair[i]);
        counts.w1[i] = counts.w_state[i].col(0);
      } catch (const Error& err) {
        if (err.code() == ErrorCode::ZeroLikelihood)
          throw Error(ErrorCode::ZeroLikelihood,
                      "subject " + subj.subject_id + ": " + err.what());
        throw;
      }
    }
  });
  return permutation_invariant_sum(lls);
}

std::pair<ExpectedCounts, double> e_step(const Parameters& theta,
                                         const PanelData& panel,
                                         const ModelConfig& config) {
  ExpectedCounts counts;
  const double ll = e_step(theta, panel, config, counts);
  return {std::move(counts), ll};
}

Matrix m_step_lambda(const ExpectedCounts& counts, const PanelData& panel,
                     int k, const Matrix& lambda_prev, FitDiagnostics* diag) {
  const int J = panel.n_items;
  Vector state_weight = Vector::Zero(k);
  Matrix success_weight = Matrix::Zero(J, k);
  Matrix failure_weight = Matrix::Zero(J, k);
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& w = counts.w_state[i];
    const auto& occasions = panel.subjects[i].occasions;
    for (int t = 0; t < static_cast<int>(occasions.size()); ++t) {
      state_weight += w.col(t);
      const IntVector& y = occasions[t].responses;
      for (int j = 0; j < J; ++j)
        if (y[j] == 1)
          success_weight.row(j) += w.col(t).transpose();
        else
          failure_weight.row(j) += w.col(t).transpose();
    }
  }

  Matrix means(J, k);
  Vector weights(k);
  for (int c = 0; c < k; ++c) {
    if (state_weight[c] < 1e-12) {
      weights[c] = 0.0;
      means.col(c) = lambda_prev.col(c);
      if (diag) ++diag->empty_state_events;
      continue;
    }
    weights[c] = state_weight[c];
    for (int j = 0; j < J; ++j) {
      const double s = success_weight(j, c);
      const double f = failure_weight(j, c);
      // Exact boundaries only when no posterior weight contradicts them;
      // otherwise keep the mean representable inside (0, 1).
      if (s <= 0.0)
        means(j, c) = 0.0;
      else if (f <= 0.0)
        means(j, c) = 1.0;
      else
        means(j, c) = std::clamp(s / (s + f), std::nextafter(0.0, 1.0),
                                 std::nextafter(1.0, 0.0));
    }
  }

  Matrix lambda(J, k);
  for (int j = 0; j < J; ++j)
    lambda.row(j) =
        weighted_isotonic_fit(means.row(j).transpose(), weights).transpose();
  return lambda;
}

// ---------------------------------------------------------------------------
// Expected initial-submodel objective and its Newton-Raphson maximizer.
// ---------------------------------------------------------------------------

namespace {

struct InitProblem {
  Matrix design;  // n x p
  Matrix weights; // n x k
  int k = 0;
  int n_shifts = 0;
};

InitProblem build_init_problem(const ExpectedCounts& counts,
                               const PanelData& panel,
                               const ModelConfig& config) {
  InitProblem prob;
  prob.k = config.k;
  prob.n_shifts = std::max(config.k - 2, 0);
  const int n = panel.n_subjects();
  const int p = p_init(config, panel.n_facilities);
  prob.design.resize(n, p);
  prob.weights.resize(n, config.k);
  for (int i = 0; i < n; ++i) {
    prob.design.row(i) =
        init_design_row(panel.subjects[i], config, panel.n_facilities).transpose();
    prob.weights.row(i) = counts.w1[i].transpose();
  }
  return prob;
}

// Value, gradient and Hessian of sum_i sum_c w_i(c) log pi_i(c) in beta.
// Returns -inf when some subject's cuts are infeasible or a positive-weight
// class has zero probability.
double init_objective(const InitProblem& prob, const Vector& beta, Vector* grad,
                      Matrix* hess) {
  const int k = prob.k;
  const int n_cuts = k - 1;
  const int ns = prob.n_shifts;
  const int p = static_cast<int>(prob.design.cols());
  if (grad) grad->setZero(ns + p);
  if (hess) hess->setZero(ns + p, ns + p);

  double value = 0.0;
  Vector tail(n_cuts), gprime(n_cuts), pi(k), deta(n_cuts), row_sum(n_cuts);
  Vector diag_h(n_cuts), off_h(std::max(n_cuts - 1, 0));
  for (Index i = 0; i < prob.design.rows(); ++i) {
    const auto x = prob.design.row(i);
    const double slope_term = beta.tail(p).dot(x);
    for (int a = 0; a < n_cuts; ++a)
      tail[a] = sigmoid((a >= 1 ? beta[a - 1] : 0.0) + slope_term);

    pi[0] = 1.0 - tail[0];
    for (int c = 1; c < k - 1; ++c) pi[c] = tail[c - 1] - tail[c];
    pi[k - 1] = tail[n_cuts - 1];

    const auto w = prob.weights.row(i);
    for (int c = 0; c < k; ++c) {
      if (pi[c] < -1e-12) return kNegInf;
      if (pi[c] < 0.0) pi[c] = 0.0;
      if (w[c] > 0.0) {
        if (pi[c] <= 0.0) return kNegInf;
        value += w[c] * std::log(pi[c]);
      }
    }
    if (!grad && !hess) continue;

    for (int a = 0; a < n_cuts; ++a) {
      const double g = tail[a] * (1.0 - tail[a]);
      gprime[a] = g * (1.0 - 2.0 * tail[a]);
      deta[a] = g * (ratio(w[a + 1], pi[a + 1]) - ratio(w[a], pi[a]));
      diag_h[a] = gprime[a] * (ratio(w[a + 1], pi[a + 1]) - ratio(w[a], pi[a])) -
                  g * g *
                      (ratio(w[a + 1], pi[a + 1] * pi[a + 1]) +
                       ratio(w[a], pi[a] * pi[a]));
    }
    for (int a = 0; a + 1 < n_cuts; ++a) {
      const double ga = tail[a] * (1.0 - tail[a]);
      const double gb = tail[a + 1] * (1.0 - tail[a + 1]);
      off_h[a] = ga * gb * ratio(w[a + 1], pi[a + 1] * pi[a + 1]);
    }

    if (grad) {
      for (int s = 0; s < ns; ++s) (*grad)[s] += deta[s + 1];
      grad->tail(p) += deta.sum() * x.transpose();
    }
    if (hess) {
      for (int a = 0; a < n_cuts; ++a) {
        row_sum[a] = diag_h[a];
        if (a >= 1) row_sum[a] += off_h[a - 1];
        if (a + 1 < n_cuts) row_sum[a] += off_h[a];
      }
      for (int s = 0; s < ns; ++s) {
        (*hess)(s, s) += diag_h[s + 1];
        if (s + 2 < n_cuts) {
          (*hess)(s, s + 1) += off_h[s + 1];
          (*hess)(s + 1, s) += off_h[s + 1];
        }
        hess->block(s, ns, 1, p) += row_sum[s + 1] * x;
        hess->block(ns, s, p, 1) += row_sum[s + 1] * x.transpose();
      }
      const double total = row_sum.sum();
      hess->block(ns, ns, p, p) += total * x.transpose() * x;
    }
  }
  return value;
}

// Shared Newton-with-halving driver for the concave M-step objectives.
// objective(point, grad, hess) must return -inf outside the feasible set.
// final_value, when non-null, receives the objective at the returned point.
template <typename Objective>
Vector maximize_concave(const Objective& objective, Vector point,
                        FitDiagnostics* diag, double* final_value = nullptr,
                        double* start_value = nullptr) {
  const int dim = static_cast<int>(point.size());
  if (dim == 0) return point;
  Vector grad(dim);
  Matrix hess(dim, dim);
  double value = objective(point, &grad, &hess);
  if (start_value) *start_value = value;
  for (int iter = 0; iter < kMaxNewtonIters; ++iter) {
    if (!std::isfinite(value)) break;
    if (grad.lpNorm<Eigen::Infinity>() < kGradTol) break;

    Vector direction;
    Eigen::LDLT<Matrix> ldlt(-hess);
    bool usable = ldlt.info() == Eigen::Success;
    if (usable) {
      direction = ldlt.solve(grad);
      usable = direction.allFinite() && grad.dot(direction) > 0.0;
    }
    if (!usable) {
      direction = grad / std::max(1.0, grad.lpNorm<Eigen::Infinity>());
      if (diag) ++diag->singular_steps;
    }

    double step = 1.0;
    bool improved = false;
    while (step >= kStepFloor) {
      const Vector trial = point + step * direction;
      const double trial_value = objective(trial, nullptr, nullptr);
      if (std::isfinite(trial_value) && trial_value > value) {
        point = trial;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    value = objective(point, &grad, &hess);
  }
  if (final_value) *final_value = value;
  return point;
}

} // namespace

double expected_init_objective(const ExpectedCounts& counts,
                               const PanelData& panel, const ModelConfig& config,
                               const Vector& beta, Vector* grad, Matrix* hess) {
  if (config.k < 2) return 0.0;
  const InitProblem prob = build_init_problem(counts, panel, config);
  return init_objective(prob, beta, grad, hess);
}

double expected_init_loglik(const ExpectedCounts& counts, const PanelData& panel,
                            const ModelConfig& config, const Vector& beta) {
  return expected_init_objective(counts, panel, config, beta);
}

Vector m_step_beta(const ExpectedCounts& counts, const PanelData& panel,
                   const ModelConfig& config, const Vector& beta_start,
                   FitDiagnostics* diag) {
  if (config.k < 2) return beta_start;
  const InitProblem prob = build_init_problem(counts, panel, config);
  return maximize_concave(
      [&](const Vector& b, Vector* g, Matrix* h) {
        return init_objective(prob, b, g, h);
      },
      beta_start, diag);
}

// ---------------------------------------------------------------------------
// Expected transition objective over the stacked gamma blocks.
// ---------------------------------------------------------------------------

namespace {

// One slice per origin state: its gamma blocks plus the posterior
// transition weights gathered into columns, so every Newton pass is pure
// columnwise array arithmetic over the transition rows.
struct TransProblem {
  Matrix design; // one row per subject-transition
  struct StateSlice {
    std::vector<int> blocks;     // gamma block per destination, <= 2
    std::vector<Vector> w_dest;  // weight column per destination
    Vector total;                // stay + move weights per row
  };
  std::vector<StateSlice> states;
  std::vector<std::pair<int, int>> hess_pairs; // block pairs sharing a row
  Eigen::MatrixXi pair_index;                  // nb x nb -> hess_pairs slot
  int k = 0;
  int n_blocks = 0;
  int p = 0;
};

TransProblem build_trans_problem(const ExpectedCounts& counts,
                                 const PanelData& panel,
                                 const ModelConfig& config) {
  TransProblem prob;
  prob.k = config.k;
  prob.n_blocks = n_gamma_blocks(config);
  prob.p = p_trans(config, panel.n_facilities);
  const long m = panel.total_transitions();
  prob.design.resize(m, prob.p);
  prob.states.resize(config.k);
  prob.pair_index = Eigen::MatrixXi::Constant(prob.n_blocks, prob.n_blocks, -1);
  for (int c = 1; c <= config.k; ++c) {
    auto& slice = prob.states[c - 1];
    for (int d : admissible_destinations(c, config.k))
      slice.blocks.push_back(gamma_block_index(config, c, d));
    slice.w_dest.assign(slice.blocks.size(), Vector(m));
    slice.total.resize(m);
    for (int a : slice.blocks)
      for (int b : slice.blocks)
        if (a <= b && prob.pair_index(a, b) < 0) {
          prob.pair_index(a, b) = static_cast<int>(prob.hess_pairs.size());
          prob.hess_pairs.emplace_back(a, b);
        }
  }

  long row = 0;
  Vector x;
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const SubjectRecord& subj = panel.subjects[i];
    for (int t = 1; t < subj.n_occasions(); ++t) {
      trans_design_row_into(subj, t, config, panel.n_facilities, x);
      prob.design.row(row) = x.transpose();
      const Matrix& w = counts.w_pair[i][t - 1];
      for (int c = 1; c <= config.k; ++c) {
        auto& slice = prob.states[c - 1];
        double total = w(c - 1, c - 1);
        int m_idx = 0;
        for (int d : admissible_destinations(c, config.k)) {
          const double wd = w(c - 1, d - 1);
          slice.w_dest[m_idx++][row] = wd;
          total += wd;
        }
        slice.total[row] = total;
      }
      ++row;
    }
  }
  return prob;
}

double trans_objective(const TransProblem& prob, const Vector& stacked,
                       Vector* grad, Matrix* hess) {
  const int p = prob.p;
  const int nb = prob.n_blocks;
  const Index m_rows = prob.design.rows();

  Matrix gamma_mat(p, nb);
  for (int b = 0; b < nb; ++b) gamma_mat.col(b) = stacked.segment(b * p, p);
  const Matrix logits = prob.design * gamma_mat; // m x nb

  Matrix grad_coef, hess_coef;
  if (grad) grad_coef.setZero(m_rows, nb);
  if (hess) hess_coef.setZero(m_rows, prob.hess_pairs.size());

  // Rows with zero posterior weight contribute exactly 0 to every sum.
  double value = 0.0;
  Eigen::ArrayXd shift(m_rows), denom(m_rows), pa(m_rows), pb(m_rows);
  for (const auto& slice : prob.states) {
    const auto& total = slice.total.array();
    if (slice.blocks.size() == 1) {
      const int b0 = slice.blocks[0];
      const auto l0 = logits.col(b0).array();
      shift = l0.max(0.0);
      pa = (l0 - shift).exp();
      denom = (-shift).exp() + pa;
      value += slice.w_dest[0].dot(logits.col(b0)) -
               (total * (denom.log() + shift)).sum();
      if (!grad && !hess) continue;
      pa /= denom;
      if (grad)
        grad_coef.col(b0).array() += slice.w_dest[0].array() - total * pa;
      if (hess)
        hess_coef.col(prob.pair_index(b0, b0)).array() -=
            total * pa * (1.0 - pa);
    } else {
      const int b0 = slice.blocks[0];
      const int b1 = slice.blocks[1];
      const auto l0 = logits.col(b0).array();
      const auto l1 = logits.col(b1).array();
      shift = l0.max(l1).max(0.0);
      pa = (l0 - shift).exp();
      pb = (l1 - shift).exp();
      denom = (-shift).exp() + pa + pb;
      value += slice.w_dest[0].dot(logits.col(b0)) +
               slice.w_dest[1].dot(logits.col(b1)) -
               (total * (denom.log() + shift)).sum();
      if (!grad && !hess) continue;
      pa /= denom;
      pb /= denom;
      if (grad) {
        grad_coef.col(b0).array() += slice.w_dest[0].array() - total * pa;
        grad_coef.col(b1).array() += slice.w_dest[1].array() - total * pb;
      }
      if (hess) {
        hess_coef.col(prob.pair_index(b0, b0)).array() -=
            total * pa * (1.0 - pa);
        hess_coef.col(prob.pair_index(b1, b1)).array() -=
            total * pb * (1.0 - pb);
        hess_coef.col(prob.pair_index(std::min(b0, b1), std::max(b0, b1)))
            .array() += total * pa * pb;
      }
    }
  }

  if (grad) {
    grad->resize(nb * p);
    const Matrix g = prob.design.transpose() * grad_coef; // p x nb
    for (int b = 0; b < nb; ++b) grad->segment(b * p, p) = g.col(b);
  }
  if (hess) {
    hess->setZero(nb * p, nb * p);
    for (std::size_t q = 0; q < prob.hess_pairs.size(); ++q) {
      const auto [a, b] = prob.hess_pairs[q];
      const Matrix block = prob.design.transpose() *
                           hess_coef.col(q).asDiagonal() * prob.design;
      hess->block(a * p, b * p, p, p) += block;
      if (a != b) hess->block(b * p, a * p, p, p) += block.transpose();
    }
  }
  return value;
}

Vector stack_gamma(const std::vector<Vector>& gamma, int p) {
  Vector stacked(static_cast<int>(gamma.size()) * p);
  for (std::size_t b = 0; b < gamma.size(); ++b)
    stacked.segment(static_cast<int>(b) * p, p) = gamma[b];
  return stacked;
}

std::vector<Vector> unstack_gamma(const Vector& stacked, int n_blocks, int p) {
  std::vector<Vector> gamma(n_blocks);
  for (int b = 0; b < n_blocks; ++b) gamma[b] = stacked.segment(b * p, p);
  return gamma;
}

} // namespace

double expected_trans_objective(const ExpectedCounts& counts,
                                const PanelData& panel, const ModelConfig& config,
                                const std::vector<Vector>& gamma, Vector* grad,
                                Matrix* hess) {
  if (config.k < 2 || panel.total_transitions() == 0) {
    const int dim = n_gamma_blocks(config) * p_trans(config, panel.n_facilities);
    if (grad) grad->setZero(dim);
    if (hess) hess->setZero(dim, dim);
    return 0.0;
  }
  const TransProblem prob = build_trans_problem(counts, panel, config);
  return trans_objective(prob, stack_gamma(gamma, prob.p), grad, hess);
}

double expected_trans_loglik(const ExpectedCounts& counts, const PanelData& panel,
                             const ModelConfig& config,
                             const std::vector<Vector>& gamma) {
  return expected_trans_objective(counts, panel, config, gamma);
}

std::vector<Vector> m_step_gamma(const ExpectedCounts& counts,
                                 const PanelData& panel,
                                 const ModelConfig& config,
                                 const std::vector<Vector>& gamma_start,
                                 FitDiagnostics* diag) {
  if (config.k < 2) return gamma_start;
  if (panel.total_transitions() == 0) {
    if (diag) diag->no_transitions = true;
    return gamma_start;
  }
  const TransProblem prob = build_trans_problem(counts, panel, config);
  const Vector start = stack_gamma(gamma_start, prob.p);

  const auto penalized = [&](const Vector& g, Vector* grad, Matrix* hess) {
    double value = trans_objective(prob, g, grad, hess);
    value -= kGammaRidge * g.squaredNorm();
    if (grad) *grad -= 2.0 * kGammaRidge * g;
    if (hess)
      hess->diagonal().array() -= 2.0 * kGammaRidge;
    return value;
  };
  double end_pen = 0.0, start_pen = 0.0;
  Vector solution = maximize_concave(penalized, start, diag, &end_pen, &start_pen);

  // The ridge may trade a little of the true objective for norm; EM
  // monotonicity requires the unpenalized value not to decrease.
  const double start_pure = start_pen + kGammaRidge * start.squaredNorm();
  const double end_pure = end_pen + kGammaRidge * solution.squaredNorm();
  if (end_pure < start_pure) {
    if (diag) ++diag->gamma_reverts;
    return gamma_start;
  }
  return unstack_gamma(solution, prob.n_blocks, prob.p);
}

// ---------------------------------------------------------------------------
// Response component, combined objective, starts and the EM driver.
// ---------------------------------------------------------------------------

double expected_resp_loglik(const ExpectedCounts& counts, const PanelData& panel,
                            const Matrix& lambda) {
  double value = 0.0;
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& subj = panel.subjects[i];
    const auto& w = counts.w_state[i];
    for (int t = 0; t < subj.n_occasions(); ++t) {
      const Vector logm = response_log_vector(lambda, subj.occasions[t].responses);
      for (int c = 0; c < lambda.cols(); ++c)
        if (w(c, t) > 0.0) value += w(c, t) * logm[c];
    }
  }
  return value;
}

Vector expected_resp_gradient(const ExpectedCounts& counts,
                              const PanelData& panel, const Matrix& lambda) {
  const int J = panel.n_items;
  const int k = static_cast<int>(lambda.cols());
  Vector state_weight = Vector::Zero(k);
  Matrix success_weight = Matrix::Zero(J, k);
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const auto& w = counts.w_state[i];
    const auto& occasions = panel.subjects[i].occasions;
    for (int t = 0; t < static_cast<int>(occasions.size()); ++t) {
      state_weight += w.col(t);
      const IntVector& y = occasions[t].responses;
      for (int j = 0; j < J; ++j)
        if (y[j] == 1) success_weight.row(j) += w.col(t).transpose();
    }
  }
  Vector grad(J * k);
  int pos = 0;
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < k; ++c) {
      const double p = lambda(j, c);
      // Boundary coordinates are outside the differentiable set.
      grad[pos++] = (p <= 0.0 || p >= 1.0)
                        ? 0.0
                        : (success_weight(j, c) - state_weight[c] * p) /
                              (p * (1.0 - p));
    }
  return grad;
}

double expected_complete_loglik(const ExpectedCounts& counts,
                                const PanelData& panel, const ModelConfig& config,
                                const Parameters& theta) {
  double value = 0.0;
  const int k = config.k;
  for (int i = 0; i < panel.n_subjects(); ++i) {
    const SubjectRecord& subj = panel.subjects[i];
    if (k >= 2) {
      const Vector pi = initial_probs(
          theta.beta, init_design_row(subj, config, panel.n_facilities), k);
      for (int c = 0; c < k; ++c)
        if (counts.w1[i][c] > 0.0) value += counts.w1[i][c] * std::log(pi[c]);
    }
    for (int t = 1; t < subj.n_occasions(); ++t) {
      if (k >= 2) {
        const Matrix trans = transition_matrix(
            theta.gamma, trans_design_row(subj, t, config, panel.n_facilities),
            config);
        const Matrix& w = counts.w_pair[i][t - 1];
        for (int c = 0; c < k; ++c)
          for (int d = 0; d < k; ++d)
            if (w(c, d) > 0.0) value += w(c, d) * std::log(trans(c, d));
      }
    }
    for (int t = 0; t < subj.n_occasions(); ++t) {
      const Vector logm =
          response_log_vector(theta.lambda, subj.occasions[t].responses);
      for (int c = 0; c < k; ++c)
        if (counts.w_state[i](c, t) > 0.0)
          value += counts.w_state[i](c, t) * logm[c];
    }
  }
  return value;
}

Vector pooled_item_means(const PanelData& panel) {
  Vector sums = Vector::Zero(panel.n_items);
  long total = 0;
  for (const auto& subj : panel.subjects)
    for (const auto& occ : subj.occasions) {
      sums += occ.responses.cast<double>();
      ++total;
    }
  return sums / static_cast<double>(total);
}

double independence_loglik(const PanelData& panel) {
  const Vector means = pooled_item_means(panel);
  Vector successes = Vector::Zero(panel.n_items);
  long total = 0;
  for (const auto& subj : panel.subjects)
    for (const auto& occ : subj.occasions) {
      successes += occ.responses.cast<double>();
      ++total;
    }
  double value = 0.0;
  for (int j = 0; j < panel.n_items; ++j) {
    const double s = successes[j];
    const double f = static_cast<double>(total) - s;
    if (s > 0.0) value += s * std::log(means[j]);
    if (f > 0.0) value += f * std::log1p(-means[j]);
  }
  return value;
}

Parameters random_start(const PanelData& panel, const ModelConfig& config,
                        std::uint64_t seed, int start_index) {
  std::mt19937_64 eng = derive_stream(seed, kSaltMultiStart, start_index);
  const int k = config.k;
  const int J = panel.n_items;
  const int H = panel.n_facilities;
  Parameters theta;

  theta.lambda.resize(J, k);
  std::vector<double> draws(k);
  for (int j = 0; j < J; ++j) {
    for (int c = 0; c < k; ++c) draws[c] = uniform_range(eng, 0.05, 0.95);
    std::sort(draws.begin(), draws.end());
    for (int c = 0; c < k; ++c) theta.lambda(j, c) = draws[c];
  }

  theta.beta.resize(beta_len(config, H));
  if (k >= 2) {
    const int ns = std::max(k - 2, 0);
    std::vector<double> shifts(ns);
    for (int s = 0; s < ns; ++s) shifts[s] = std::abs(normal01(eng));
    std::sort(shifts.begin(), shifts.end());
    for (int s = 0; s < ns; ++s) theta.beta[s] = -shifts[s];
    for (Index m = ns; m < theta.beta.size(); ++m)
      theta.beta[m] = 0.5 * normal01(eng);
  }

  theta.gamma.resize(n_gamma_blocks(config));
  for (auto& block : theta.gamma) {
    block.resize(p_trans(config, H));
    for (Index m = 0; m < block.size(); ++m) block[m] = 0.5 * normal01(eng);
  }
  return theta;
}

Parameters deterministic_start(const PanelData& panel, const ModelConfig& config) {
  const int k = config.k;
  const int J = panel.n_items;
  const int H = panel.n_facilities;
  const int n = panel.n_subjects();
  Parameters theta;

  // Quantile bins of the per-subject mean illness score seed the lambda
  // columns; clamped away from the boundary so every start survives the
  // warm E-step.
  Matrix item_means(n, J);
  std::vector<std::pair<double, int>> order(n);
  for (int i = 0; i < n; ++i) {
    const auto& occasions = panel.subjects[i].occasions;
    Vector sums = Vector::Zero(J);
    for (const auto& occ : occasions) sums += occ.responses.cast<double>();
    item_means.row(i) = sums.transpose() / static_cast<double>(occasions.size());
    order[i] = {item_means.row(i).mean(), i};
  }
  std::sort(order.begin(), order.end());

  const Vector pooled = pooled_item_means(panel);
  theta.lambda.resize(J, k);
  Vector bin_sizes = Vector::Zero(k);
  for (int c = 0; c < k; ++c) {
    const int lo = static_cast<int>(static_cast<long>(n) * c / k);
    const int hi = static_cast<int>(static_cast<long>(n) * (c + 1) / k);
    bin_sizes[c] = hi - lo;
    if (hi == lo) {
      theta.lambda.col(c) = pooled;
      continue;
    }
    Vector acc = Vector::Zero(J);
    for (int m = lo; m < hi; ++m) acc += item_means.row(order[m].second).transpose();
    theta.lambda.col(c) = acc / static_cast<double>(hi - lo);
  }
  theta.lambda = theta.lambda.cwiseMax(0.01).cwiseMin(0.99);
  const Vector ones = Vector::Ones(k);
  for (int j = 0; j < J; ++j)
    theta.lambda.row(j) =
        weighted_isotonic_fit(theta.lambda.row(j).transpose(), ones).transpose();

  theta.beta = Vector::Zero(beta_len(config, H));
  if (k >= 2) {
    // Cut logits from the empirical bin sizes; the intercept-equivalent
    // column(s) absorb the first cut. Strictly separated so every initial
    // probability starts positive.
    Vector logits(k - 1);
    double tail = 0.0;
    for (int c = k - 1; c >= 1; --c) {
      tail += bin_sizes[c] / n;
      const double clamped = std::clamp(tail, 1e-6, 1.0 - 1e-6);
      logits[c - 1] = std::log(clamped / (1.0 - clamped));
    }
    for (int c = 1; c < k - 1; ++c)
      logits[c] = std::min(logits[c], logits[c - 1] - 1e-3);
    const int ns = std::max(k - 2, 0);
    for (int s = 0; s < ns; ++s) theta.beta[s] = logits[s + 1] - logits[0];
    if (!config.init_covariates.facility) {
      theta.beta[ns] = logits[0];
    } else {
      const int base = ns + p_init(config, H) - H;
      for (int h = 0; h < H; ++h) theta.beta[base + h] = logits[0];
    }
  }

  theta.gamma.assign(n_gamma_blocks(config),
                     Vector::Zero(p_trans(config, H)));
  return theta;
}

Parameters multi_start_init(const PanelData& panel, const ModelConfig& config,
                            const FitSettings& settings,
                            std::vector<double>* warm_logliks) {
  const int total = settings.n_starts + 1;
  std::vector<Parameters> candidates(total);
  std::vector<double> warm(total, kNegInf);
  std::vector<char> usable(total, 0);

  parallel_for(total, [&](std::size_t s) {
    Parameters theta = s == 0 ? deterministic_start(panel, config)
                              : random_start(panel, config, settings.seed,
                                             static_cast<int>(s));
    try {
      ExpectedCounts counts;
      for (int iter = 0; iter < settings.warm_iters; ++iter) {
        e_step(theta, panel, config, counts);
        theta.lambda = m_step_lambda(counts, panel, config.k, theta.lambda);
        theta.beta = m_step_beta(counts, panel, config, theta.beta);
        theta.gamma = m_step_gamma(counts, panel, config, theta.gamma);
      }
      warm[s] = log_likelihood(theta, panel, config);
      candidates[s] = std::move(theta);
      usable[s] = 1;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ZeroLikelihood &&
          err.code() != ErrorCode::InfeasibleCuts)
        throw;
    }
  });

  if (warm_logliks) *warm_logliks = warm;
  int best = -1;
  for (int s = 0; s < total; ++s)
    if (usable[s] && (best < 0 || warm[s] > warm[best])) best = s;
  if (best < 0)
    throw Error(ErrorCode::AllStartsFailed,
                "every starting value produced a zero likelihood");
  return candidates[best];
}

namespace {

FitResult fit_independence(const PanelData& panel, const ModelConfig& config) {
  FitResult res;
  res.v = count_parameters(config, panel.n_items, panel.n_facilities);
  res.theta_hat.lambda = pooled_item_means(panel);
  res.theta_hat.beta.resize(0);
  res.loglik = log_likelihood(res.theta_hat, panel, config);
  res.loglik_trace = {res.loglik};
  res.start_logliks = {res.loglik};
  res.n_iter = 1;
  res.converged = true;
  return res;
}

} // namespace

namespace {

void check_settings(const FitSettings& settings) {
  if (!(settings.tol > 0.0) || settings.max_iter < 1 || settings.n_starts < 1 ||
      settings.warm_iters < 1)
    throw Error(ErrorCode::SchemaError,
                "fit settings need tol > 0 and positive iteration counts");
}

} // namespace

FitResult fit_from(const PanelData& panel, const ModelConfig& config,
                   const FitSettings& settings, Parameters theta0) {
  check_settings(settings);
  if (config.k == 1) return fit_independence(panel, config);

  FitResult res;
  res.v = count_parameters(config, panel.n_items, panel.n_facilities);
  res.theta_hat = std::move(theta0);
  ExpectedCounts counts;
  double prev_ll = std::numeric_limits<double>::quiet_NaN();
  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    const double ll = e_step(res.theta_hat, panel, config, counts);
    res.loglik_trace.push_back(ll);
    res.n_iter = iter;
    res.loglik = ll;
    if (iter > 1 && std::abs(ll - prev_ll) < settings.tol * (1.0 + std::abs(ll))) {
      res.converged = true;
      break;
    }
    prev_ll = ll;
    res.theta_hat.lambda =
        m_step_lambda(counts, panel, config.k, res.theta_hat.lambda, &res.diag);
    res.theta_hat.beta =
        m_step_beta(counts, panel, config, res.theta_hat.beta, &res.diag);
    res.theta_hat.gamma =
        m_step_gamma(counts, panel, config, res.theta_hat.gamma, &res.diag);
  }
  if (!res.converged) {
    res.loglik = log_likelihood(res.theta_hat, panel, config);
    res.loglik_trace.push_back(res.loglik);
  }
  return res;
}

FitResult fit(const PanelData& panel, const ModelConfig& config,
              const FitSettings& settings) {
  check_settings(settings);
  if (config.k == 1) return fit_independence(panel, config);
  std::vector<double> warm;
  Parameters theta0 = multi_start_init(panel, config, settings, &warm);
  FitResult res = fit_from(panel, config, settings, std::move(theta0));
  res.start_logliks = std::move(warm);
  return res;
}

} // namespace lmpanel
