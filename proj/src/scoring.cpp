#include "lmpanel/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmpanel/errors.hpp"
#include "lmpanel/inference.hpp"
#include "lmpanel/links.hpp"

namespace lmpanel {

DescriptiveScores descriptive_scores(const PanelData& panel) {
  const int H = panel.n_facilities;
  const int J = panel.n_items;
  std::vector<double> diff_sum(H, 0.0);
  std::vector<long> n_trans(H, 0);

  for (const auto& subj : panel.subjects) {
    if (subj.n_occasions() < 2) continue;
    const int h = subj.facility_index();
    for (int t = 0; t + 1 < subj.n_occasions(); ++t) {
      const double a_now =
          100.0 * subj.occasions[t].responses.sum() / static_cast<double>(J);
      const double a_next =
          100.0 * subj.occasions[t + 1].responses.sum() / static_cast<double>(J);
      diff_sum[h] += a_next - a_now;
      ++n_trans[h];
    }
  }

  DescriptiveScores scores;
  scores.facilities.resize(H);
  for (int h = 0; h < H; ++h) {
    auto& fac = scores.facilities[h];
    fac.n_transitions = n_trans[h];
    fac.defined = n_trans[h] > 0;
    if (fac.defined) fac.a_bar = diff_sum[h] / n_trans[h];
  }

  // Second pass for the dispersion around each facility mean.
  std::vector<double> sq_sum(H, 0.0);
  for (const auto& subj : panel.subjects) {
    if (subj.n_occasions() < 2) continue;
    const int h = subj.facility_index();
    for (int t = 0; t + 1 < subj.n_occasions(); ++t) {
      const double a_now =
          100.0 * subj.occasions[t].responses.sum() / static_cast<double>(J);
      const double a_next =
          100.0 * subj.occasions[t + 1].responses.sum() / static_cast<double>(J);
      const double centered = (a_next - a_now) - scores.facilities[h].a_bar;
      sq_sum[h] += centered * centered;
    }
  }
  for (int h = 0; h < H; ++h)
    if (scores.facilities[h].defined)
      scores.facilities[h].s = std::sqrt(sq_sum[h] / n_trans[h]);
  return scores;
}

namespace {

int quadrant_of(double x, double y) {
  if (x >= 0.0) return y >= 0.0 ? 1 : 4;
  return y >= 0.0 ? 2 : 3;
}

Ellipse confidence_ellipse(const Eigen::Matrix2d& cov2, double a1, double a2) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov2);
  const Eigen::Vector2d evals = eig.eigenvalues(); // ascending
  const Eigen::Vector2d major_dir = eig.eigenvectors().col(1);
  Ellipse ellipse;
  ellipse.center = {a1, a2};
  ellipse.semi_axes = {std::sqrt(kChi2TwoDf95 * std::max(evals[1], 0.0)),
                       std::sqrt(kChi2TwoDf95 * std::max(evals[0], 0.0))};
  double angle = std::atan2(major_dir[1], major_dir[0]);
  if (angle <= -M_PI / 2.0) angle += M_PI;
  if (angle > M_PI / 2.0) angle -= M_PI;
  ellipse.angle = angle;
  return ellipse;
}

} // namespace

FacilityScoreReport facility_contrasts(const Parameters& theta, const Matrix& cov,
                                       const ModelConfig& config, int J, int H) {
  if (config.k < 2 || config.transition_mode != TransitionMode::SharedUpDown)
    throw Error(ErrorCode::NotM2,
                "facility scores are defined only for the shared up/down "
                "(m2) transition model");
  if (!config.trans_covariates.facility)
    throw Error(ErrorCode::NotM2,
                "facility scores need facility dummies in the transition "
                "submodel");

  const std::vector<int> idx1 = gamma_facility_offsets(config, 0, H);
  const std::vector<int> idx2 = gamma_facility_offsets(config, 1, H);
  const Vector flat = flatten(theta, config, J, H);

  Vector g1(H), g2(H);
  for (int h = 0; h < H; ++h) {
    g1[h] = flat[idx1[h]];
    g2[h] = flat[idx2[h]];
  }
  const Vector a1 = g1.array() - g1.mean();
  const Vector a2 = g2.array() - g2.mean();

  Matrix s11(H, H), s12(H, H), s22(H, H);
  for (int a = 0; a < H; ++a)
    for (int b = 0; b < H; ++b) {
      s11(a, b) = cov(idx1[a], idx1[b]);
      s12(a, b) = cov(idx1[a], idx2[b]);
      s22(a, b) = cov(idx2[a], idx2[b]);
    }

  FacilityScoreReport report;
  report.facilities.resize(H);
  for (int h = 0; h < H; ++h) {
    Vector contrast = Vector::Constant(H, -1.0 / H);
    contrast[h] += 1.0;

    FacilityScore& fac = report.facilities[h];
    fac.facility = h + 1;
    fac.improve = a1[h];
    fac.worsen = a2[h];
    fac.cov2(0, 0) = contrast.dot(s11 * contrast);
    fac.cov2(0, 1) = contrast.dot(s12 * contrast);
    fac.cov2(1, 0) = fac.cov2(0, 1);
    fac.cov2(1, 1) = contrast.dot(s22 * contrast);
    if (!fac.cov2.allFinite() || fac.cov2.determinant() <= 0.0)
      throw Error(ErrorCode::DegenerateCov,
                  "score covariance for facility " + std::to_string(h + 1) +
                      " is singular");
    fac.ellipse = confidence_ellipse(fac.cov2, fac.improve, fac.worsen);
    fac.se_improve = std::sqrt(fac.cov2(0, 0));
    fac.se_worsen = std::sqrt(fac.cov2(1, 1));
    fac.z_improve = fac.improve / fac.se_improve;
    fac.z_worsen = fac.worsen / fac.se_worsen;
    fac.p_improve = two_sided_p(fac.z_improve);
    fac.p_worsen = two_sided_p(fac.z_worsen);
    fac.quadrant = quadrant_of(fac.improve, fac.worsen);
  }
  return report;
}

void unidimensional_scores(FacilityScoreReport& report) {
  for (auto& fac : report.facilities) {
    fac.score = fac.improve - fac.worsen;
    const double var =
        fac.cov2(0, 0) - 2.0 * fac.cov2(0, 1) + fac.cov2(1, 1);
    fac.se = std::sqrt(std::max(var, 0.0));
    fac.z = fac.se > 0.0 ? fac.score / fac.se
                         : std::numeric_limits<double>::quiet_NaN();
    fac.p = two_sided_p(fac.z);
    fac.ci95 = {fac.score - kNormal975 * fac.se, fac.score + kNormal975 * fac.se};
  }
  // Descending by score, facility id breaking ties.
  std::vector<int> order(report.facilities.size());
  for (std::size_t h = 0; h < order.size(); ++h) order[h] = static_cast<int>(h);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = report.facilities[a].score;
    const double sb = report.facilities[b].score;
    if (sa != sb) return sa > sb;
    return a < b;
  });
  for (std::size_t r = 0; r < order.size(); ++r)
    report.facilities[order[r]].rank = static_cast<int>(r) + 1;
}

Vector average_initial_probs(const Parameters& theta, const PanelData& panel,
                             const ModelConfig& config) {
  if (config.k == 1) return Vector::Ones(1);
  Vector mean = Vector::Zero(config.k);
  for (const auto& subj : panel.subjects)
    mean += initial_probs(theta.beta,
                          init_design_row(subj, config, panel.n_facilities),
                          config.k);
  return mean / panel.n_subjects();
}

std::vector<std::vector<int>> classify(const std::vector<Matrix>& state_marginals) {
  std::vector<std::vector<int>> labels;
  labels.reserve(state_marginals.size());
  for (const auto& marginals : state_marginals) {
    std::vector<int> path(marginals.cols());
    for (Index t = 0; t < marginals.cols(); ++t) {
      int best = 0;
      for (Index c = 1; c < marginals.rows(); ++c)
        if (marginals(c, t) > marginals(best, t)) best = static_cast<int>(c);
      path[t] = best + 1;
    }
    labels.push_back(std::move(path));
  }
  return labels;
}

} // namespace lmpanel
