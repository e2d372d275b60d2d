#include <doctest.h>

#include <cmath>
#include <random>

#include "lmpanel/em.hpp"
#include "lmpanel/inference.hpp"
#include "lmpanel/simulate.hpp"

using namespace lmpanel;

namespace {

SimDesign recovery_design(int k, int n, int T, std::uint64_t seed) {
  SimDesign design;
  design.n_subjects = n;
  design.n_facilities = 2;
  design.n_items = 4;
  design.config.k = k;
  design.t_occasions = {static_cast<double>(T), static_cast<double>(T)};
  design.age_range = {70, 90};
  design.gap_days = {60, 120};
  design.seed = seed;
  design.true_params.lambda.resize(4, k);
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < k; ++c)
      design.true_params.lambda(j, c) =
          0.12 + 0.05 * j + (k > 1 ? 0.6 * c / (k - 1) : 0.3);
  design.true_params.beta.resize(beta_len(design.config, 2));
  if (k >= 2) {
    for (int s = 0; s < k - 2; ++s) design.true_params.beta[s] = -0.8 * (s + 1);
    design.true_params.beta.tail(p_init(design.config, 2)) << -0.25, 0.015,
        -0.9, -1.3;
  }
  design.true_params.gamma.assign(n_gamma_blocks(design.config),
                                  Vector::Zero(p_trans(design.config, 2)));
  for (std::size_t b = 0; b < design.true_params.gamma.size(); ++b) {
    auto& block = design.true_params.gamma[b];
    block << 0.2 - 0.1 * b, -0.005, 0.003, -1.0, -1.4;
  }
  return design;
}

Parameters interior_random_theta(const ModelConfig& config, int J, int H,
                                 std::mt19937_64& eng) {
  std::uniform_real_distribution<double> unif(0.2, 0.8);
  std::normal_distribution<double> gauss(0.0, 0.3);
  Parameters theta;
  theta.lambda.resize(J, config.k);
  for (int j = 0; j < J; ++j) {
    std::vector<double> draws(config.k);
    for (auto& d : draws) d = unif(eng);
    std::sort(draws.begin(), draws.end());
    for (int c = 0; c < config.k; ++c) theta.lambda(j, c) = draws[c];
  }
  theta.beta.resize(beta_len(config, H));
  const int ns = std::max(config.k - 2, 0);
  double shift = -0.3;
  for (int s = 0; s < ns; ++s) theta.beta[s] = shift -= std::abs(gauss(eng));
  for (Index m = ns; m < theta.beta.size(); ++m) theta.beta[m] = gauss(eng);
  theta.gamma.assign(n_gamma_blocks(config), Vector());
  for (auto& block : theta.gamma) {
    block.resize(p_trans(config, H));
    for (Index m = 0; m < block.size(); ++m) block[m] = gauss(eng);
  }
  return theta;
}

} // namespace

TEST_CASE("score vanishes at an interior maximum") {
  const SimDesign design = recovery_design(2, 120, 4, 21);
  const PanelData panel = simulate_panel(design).panel;
  FitSettings settings;
  settings.seed = 5;
  settings.n_starts = 4;
  settings.warm_iters = 8;
  settings.tol = 1e-11;
  settings.max_iter = 20000;
  const FitResult res = fit(panel, design.config, settings);
  REQUIRE(res.converged);
  REQUIRE(res.theta_hat.lambda.minCoeff() > 1e-6);
  REQUIRE(res.theta_hat.lambda.maxCoeff() < 1.0 - 1e-6);

  const Vector score = score_vector(res.theta_hat, panel, design.config);
  const double threshold = 1e-4 * (1.0 + std::abs(res.loglik));
  const int lambda_base =
      count_parameters(design.config, panel.n_items, panel.n_facilities) -
      panel.n_items * design.config.k;
  for (int m = 0; m < lambda_base; ++m)
    CHECK(std::abs(score[m]) < threshold);
  // Lambda coordinates inside an active isotonic pool satisfy the
  // stationarity condition as a pooled sum.
  for (int j = 0; j < panel.n_items; ++j) {
    double pooled = 0.0;
    for (int c = 0; c < design.config.k; ++c) {
      pooled += score[lambda_base + j * design.config.k + c];
      const bool tied_up = c + 1 < design.config.k &&
                           res.theta_hat.lambda(j, c + 1) ==
                               res.theta_hat.lambda(j, c);
      if (!tied_up) {
        CHECK(std::abs(pooled) < threshold);
        pooled = 0.0;
      }
    }
  }
}

TEST_CASE("single-state Bernoulli score has the closed form") {
  const SimDesign design = recovery_design(1, 40, 3, 22);
  const PanelData panel = simulate_panel(design).panel;
  ModelConfig config;
  config.k = 1;
  Parameters theta;
  theta.lambda = Matrix::Constant(4, 1, 0.37);
  theta.beta.resize(0);

  const Vector score = score_vector(theta, panel, config);
  for (int j = 0; j < 4; ++j) {
    double expected = 0.0;
    for (const auto& subj : panel.subjects)
      for (const auto& occ : subj.occasions)
        expected += (occ.responses[j] - 0.37) / (0.37 * (1.0 - 0.37));
    CHECK(score[j] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("score matches central finite differences of the log-likelihood") {
  std::mt19937_64 eng(23);
  std::uniform_int_distribution<int> kk(1, 3), tt(1, 3), jj(1, 3);
  for (int rep = 0; rep < 6; ++rep) {
    SimDesign design = recovery_design(kk(eng), 20, tt(eng), 200 + rep);
    design.n_items = jj(eng);
    design.true_params.lambda =
        design.true_params.lambda.topRows(design.n_items).eval();
    const PanelData panel = simulate_panel(design).panel;
    const Parameters theta =
        interior_random_theta(design.config, design.n_items, 2, eng);

    const Vector analytic = score_vector(theta, panel, design.config);
    const Vector flat =
        flatten(theta, design.config, design.n_items, panel.n_facilities);
    const double h = 1e-5;
    double worst = 0.0;
    for (Index m = 0; m < flat.size(); ++m) {
      Vector hi = flat, lo = flat;
      hi[m] += h;
      lo[m] -= h;
      const double fd =
          (log_likelihood(unflatten(hi, design.config, design.n_items, 2),
                          panel, design.config) -
           log_likelihood(unflatten(lo, design.config, design.n_items, 2),
                          panel, design.config)) /
          (2.0 * h);
      worst = std::max(worst,
                       std::abs(analytic[m] - fd) / (1.0 + std::abs(fd)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("central differences recover a quadratic's Hessian exactly") {
  // Score of f(x) = -(x-a)'A(x-a)/2 is -A(x-a); its Jacobian is -A.
  Matrix a_mat(3, 3);
  a_mat << 4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0;
  Vector center(3);
  center << 0.3, -0.2, 0.7;
  const auto score = [&](const Vector& x) -> Vector {
    return -a_mat * (x - center);
  };
  Vector x0(3);
  x0 << 1.0, 2.0, -1.0;
  const Matrix jac = central_difference_jacobian(score, x0,
                                                 Vector::Constant(3, 1e-4));
  CHECK((jac + a_mat).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("observed information is symmetric and matches Bernoulli algebra") {
  const SimDesign design = recovery_design(1, 60, 2, 24);
  const PanelData panel = simulate_panel(design).panel;
  ModelConfig config;
  config.k = 1;
  const FitResult res = fit(panel, config, FitSettings{});
  const Matrix info = observed_information(res.theta_hat, panel, config);
  CHECK((info - info.transpose()).cwiseAbs().maxCoeff() < 1e-8);

  const long total = panel.total_occasions();
  for (int j = 0; j < panel.n_items; ++j) {
    const double lam = res.theta_hat.lambda(j, 0);
    const double expected = total / (lam * (1.0 - lam));
    CHECK(info(j, j) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("raw score Jacobian is symmetric up to numerical error") {
  std::mt19937_64 eng(25);
  SimDesign design = recovery_design(2, 25, 3, 26);
  const PanelData panel = simulate_panel(design).panel;
  const Parameters theta = interior_random_theta(design.config, 4, 2, eng);
  const Vector flat = flatten(theta, design.config, 4, 2);
  const auto score = [&](const Vector& x) {
    return score_vector(unflatten(x, design.config, 4, 2), panel,
                        design.config);
  };
  const Matrix jac = central_difference_jacobian(
      score, flat, Vector::Constant(flat.size(), 1e-5));
  CHECK((jac - jac.transpose()).cwiseAbs().maxCoeff() /
            std::max(1.0, jac.cwiseAbs().maxCoeff()) <
        1e-6);
}

TEST_CASE("covariance inverts the information on the free block") {
  const SimDesign design = recovery_design(2, 150, 4, 27);
  const PanelData panel = simulate_panel(design).panel;
  FitSettings settings;
  settings.seed = 6;
  settings.n_starts = 3;
  const FitResult res = fit(panel, design.config, settings);
  const InferenceResult inference = infer(res.theta_hat, panel, design.config);
  REQUIRE_FALSE(inference.not_pos_definite);

  const Matrix info = observed_information(res.theta_hat, panel, design.config);
  std::vector<int> free_idx;
  for (std::size_t m = 0; m < inference.free_mask.size(); ++m)
    if (inference.free_mask[m]) free_idx.push_back(static_cast<int>(m));
  const int nf = static_cast<int>(free_idx.size());
  Matrix product = Matrix::Zero(nf, nf);
  for (int a = 0; a < nf; ++a)
    for (int b = 0; b < nf; ++b) {
      double acc = 0.0;
      for (int c = 0; c < nf; ++c)
        acc += inference.cov(free_idx[a], free_idx[c]) *
               info(free_idx[c], free_idx[b]);
      product(a, b) = acc;
    }
  CHECK((product - Matrix::Identity(nf, nf)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("boundary lambda coordinates are excluded from inference") {
  ModelConfig config;
  config.k = 2;
  Parameters theta;
  theta.lambda.resize(2, 2);
  theta.lambda << 0.0, 0.4, 0.3, 1.0;
  theta.beta = Vector::Zero(beta_len(config, 1));
  theta.gamma.assign(2, Vector::Zero(p_trans(config, 1)));
  const auto mask = free_coordinate_mask(theta, config, 2, 1);
  const int lambda_base = count_parameters(config, 2, 1) - 4;
  CHECK_FALSE(mask[lambda_base + 0]); // lambda(1,1) = 0
  CHECK(mask[lambda_base + 1]);
  CHECK(mask[lambda_base + 2]);
  CHECK_FALSE(mask[lambda_base + 3]); // lambda(2,2) = 1
  for (int m = 0; m < lambda_base; ++m) CHECK(mask[m]);
}

TEST_CASE("standard errors shrink roughly like 1/sqrt(n)") {
  double ratio_sum = 0.0;
  int ratio_count = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const SimDesign small = recovery_design(2, 150, 3, 300 + seed);
    SimDesign big = small;
    big.n_subjects = 300;
    FitSettings settings;
    settings.seed = 9 + seed;
    settings.n_starts = 2;
    settings.warm_iters = 6;

    const PanelData panel_small = simulate_panel(small).panel;
    const PanelData panel_big = simulate_panel(big).panel;
    const FitResult fit_small = fit(panel_small, small.config, settings);
    const FitResult fit_big = fit(panel_big, big.config, settings);
    const InferenceResult inf_small =
        infer(fit_small.theta_hat, panel_small, small.config);
    const InferenceResult inf_big =
        infer(fit_big.theta_hat, panel_big, big.config);
    for (Index m = 0; m < inf_small.se.size(); ++m) {
      if (!std::isfinite(inf_small.se[m]) || !std::isfinite(inf_big.se[m]))
        continue;
      ratio_sum += inf_big.se[m] / inf_small.se[m];
      ++ratio_count;
    }
  }
  REQUIRE(ratio_count > 0);
  const double mean_ratio = ratio_sum / ratio_count;
  CHECK(mean_ratio > 0.6);
  CHECK(mean_ratio < 0.8);
}

TEST_CASE("wald_table matches the published arithmetic") {
  Vector est(3), se(3);
  est << -0.947, 0.0, 0.040;
  se << 0.379, 0.5, 0.006;
  const auto rows = wald_table(est, se, {"a", "b", "c"});
  CHECK(rows[0].z == doctest::Approx(-2.499).epsilon(2e-3));
  CHECK(rows[0].p == doctest::Approx(0.012).epsilon(0.1));
  CHECK(std::abs(rows[0].p - 0.012) < 0.002);
  CHECK(rows[1].z == 0.0);
  CHECK(rows[1].p == 1.0);
  CHECK(rows[2].z > 6.6);
  CHECK(rows[2].z < 7.3);
  CHECK(rows[2].p < 0.001);
}
