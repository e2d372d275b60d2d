#include "lmpanel/inference.hpp"

#include <cmath>
#include <limits>

#include "lmpanel/em.hpp"
#include "lmpanel/parallel.hpp"

namespace lmpanel {

namespace {
constexpr double kBoundaryTol = 1e-12;
constexpr double kEigRelTol = 1e-10;
const double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

Vector score_vector(const Parameters& theta, const PanelData& panel,
                    const ModelConfig& config) {
  ExpectedCounts counts;
  e_step(theta, panel, config, counts);

  const int v = count_parameters(config, panel.n_items, panel.n_facilities);
  Vector score(v);
  int pos = 0;
  if (config.k >= 2) {
    Vector grad_beta;
    expected_init_objective(counts, panel, config, theta.beta, &grad_beta);
    score.segment(pos, grad_beta.size()) = grad_beta;
    pos += static_cast<int>(grad_beta.size());

    Vector grad_gamma;
    expected_trans_objective(counts, panel, config, theta.gamma, &grad_gamma);
    score.segment(pos, grad_gamma.size()) = grad_gamma;
    pos += static_cast<int>(grad_gamma.size());
  }
  score.segment(pos, panel.n_items * config.k) =
      expected_resp_gradient(counts, panel, theta.lambda);
  return score;
}

std::vector<bool> free_coordinate_mask(const Parameters& theta,
                                       const ModelConfig& config, int J, int H) {
  const int v = count_parameters(config, J, H);
  std::vector<bool> mask(v, true);
  const int lambda_base = v - J * config.k;
  int pos = lambda_base;
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < config.k; ++c, ++pos) {
      const double p = theta.lambda(j, c);
      if (p < kBoundaryTol || p > 1.0 - kBoundaryTol) mask[pos] = false;
    }
  return mask;
}

Matrix central_difference_jacobian(const std::function<Vector(const Vector&)>& f,
                                   const Vector& x, const Vector& steps) {
  const int dim = static_cast<int>(x.size());
  const Index out_dim = f(x).size();
  Matrix jac(out_dim, dim);
  parallel_for(dim, [&](std::size_t j) {
    Vector hi = x, lo = x;
    hi[j] += steps[j];
    lo[j] -= steps[j];
    jac.col(j) = (f(hi) - f(lo)) / (2.0 * steps[j]);
  });
  return jac;
}

namespace {

Vector information_steps(const Vector& flat, const std::vector<bool>& mask,
                         int lambda_base) {
  Vector steps(flat.size());
  for (Index j = 0; j < flat.size(); ++j) {
    double h = std::max(1e-5, 1e-4 * std::abs(flat[j]));
    if (j >= lambda_base && mask[j]) {
      // Keep lambda perturbations inside (0, 1).
      h = std::min({h, flat[j] / 2.0, (1.0 - flat[j]) / 2.0});
    }
    steps[j] = h;
  }
  return steps;
}

} // namespace

Matrix observed_information(const Parameters& theta, const PanelData& panel,
                            const ModelConfig& config) {
  const int J = panel.n_items;
  const int H = panel.n_facilities;
  const Vector flat = flatten(theta, config, J, H);
  const int v = static_cast<int>(flat.size());
  const std::vector<bool> mask = free_coordinate_mask(theta, config, J, H);
  const int lambda_base = v - J * config.k;
  const Vector steps = information_steps(flat, mask, lambda_base);

  Matrix info = Matrix::Zero(v, v);
  std::vector<Vector> columns(v);
  parallel_for(v, [&](std::size_t j) {
    if (!mask[j]) return;
    Vector hi = flat, lo = flat;
    hi[j] += steps[j];
    lo[j] -= steps[j];
    const Vector shi = score_vector(unflatten(hi, config, J, H), panel, config);
    const Vector slo = score_vector(unflatten(lo, config, J, H), panel, config);
    columns[j] = (slo - shi) / (2.0 * steps[j]); // minus the derivative
  });
  for (int j = 0; j < v; ++j)
    if (mask[j]) info.col(j) = columns[j];
  // Zero the rows of excluded coordinates too, then symmetrize.
  for (int j = 0; j < v; ++j)
    if (!mask[j]) info.row(j).setZero();
  info = 0.5 * (info + info.transpose()).eval();
  return info;
}

InferenceResult infer(const Parameters& theta, const PanelData& panel,
                      const ModelConfig& config) {
  const int J = panel.n_items;
  const int H = panel.n_facilities;
  InferenceResult res;
  res.estimate = flatten(theta, config, J, H);
  res.free_mask = free_coordinate_mask(theta, config, J, H);
  const int v = static_cast<int>(res.estimate.size());

  const Matrix info = observed_information(theta, panel, config);
  std::vector<int> free_idx;
  for (int j = 0; j < v; ++j)
    if (res.free_mask[j]) free_idx.push_back(j);
  const int nf = static_cast<int>(free_idx.size());

  Matrix info_free(nf, nf);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b) info_free(a, b) = info(free_idx[a], free_idx[b]);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(info_free);
  const Vector evals = eig.eigenvalues();
  const Matrix evecs = eig.eigenvectors();
  const double max_eig = nf > 0 ? evals.maxCoeff() : 0.0;
  const double threshold = kEigRelTol * std::max(max_eig, 0.0);

  std::vector<bool> kept(nf, false);
  double min_kept = std::numeric_limits<double>::infinity();
  for (int m = 0; m < nf; ++m) {
    kept[m] = evals[m] > threshold;
    if (!kept[m]) res.not_pos_definite = true;
    else min_kept = std::min(min_kept, evals[m]);
  }
  res.info_condition =
      nf > 0 && std::isfinite(min_kept) && min_kept > 0.0
          ? max_eig / min_kept
          : std::numeric_limits<double>::infinity();

  Matrix cov_free = Matrix::Zero(nf, nf);
  for (int m = 0; m < nf; ++m)
    if (kept[m])
      cov_free.noalias() +=
          (1.0 / evals[m]) * evecs.col(m) * evecs.col(m).transpose();

  // SEs become undefined where a dropped eigendirection has weight.
  std::vector<bool> affected(nf, false);
  for (int m = 0; m < nf; ++m)
    if (!kept[m])
      for (int a = 0; a < nf; ++a)
        if (std::abs(evecs(a, m)) > 1e-6) affected[a] = true;

  res.cov = Matrix::Zero(v, v);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b)
      res.cov(free_idx[a], free_idx[b]) = cov_free(a, b);

  res.se = Vector::Constant(v, kNaN);
  res.wald_z = Vector::Constant(v, kNaN);
  res.p_values = Vector::Constant(v, kNaN);
  for (int a = 0; a < nf; ++a) {
    if (affected[a]) continue;
    const int j = free_idx[a];
    const double var = cov_free(a, a);
    if (var < 0.0) continue;
    res.se[j] = std::sqrt(var);
    if (res.se[j] > 0.0) {
      res.wald_z[j] = res.estimate[j] / res.se[j];
      res.p_values[j] = two_sided_p(res.wald_z[j]);
    }
  }
  return res;
}

std::vector<WaldRow> wald_table(const Vector& estimates, const Vector& se,
                                const std::vector<std::string>& names) {
  std::vector<WaldRow> rows;
  rows.reserve(estimates.size());
  for (Index j = 0; j < estimates.size(); ++j) {
    WaldRow row;
    row.name = j < static_cast<Index>(names.size()) ? names[j]
                                                    : "theta" + std::to_string(j);
    row.estimate = estimates[j];
    row.se = se[j];
    if (std::isfinite(se[j]) && se[j] > 0.0) {
      row.z = estimates[j] / se[j];
      row.p = two_sided_p(row.z);
    } else {
      row.z = kNaN;
      row.p = kNaN;
    }
    rows.push_back(row);
  }
  return rows;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

} // namespace lmpanel
