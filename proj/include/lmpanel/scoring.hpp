#pragma once

#include <array>
#include <vector>

#include "lmpanel/config.hpp"
#include "lmpanel/panel.hpp"
#include "lmpanel/types.hpp"

namespace lmpanel {

struct FacilityDescriptive {
  double a_bar = 0.0; // mean differential score, points per occasion step
  double s = 0.0;     // dispersion of the differential scores
  long n_transitions = 0;
  bool defined = false;
};

struct DescriptiveScores {
  std::vector<FacilityDescriptive> facilities;
};

// Per-occasion score a_it = 100 * (share of items answered 1); facility
// summaries over subjects observed at least twice.
DescriptiveScores descriptive_scores(const PanelData& panel);

struct Ellipse {
  Eigen::Vector2d center;
  Eigen::Vector2d semi_axes; // major first
  double angle = 0.0;        // of the major axis, in (-pi/2, pi/2]
};

struct FacilityScore {
  int facility = 0; // 1-based
  double improve = 0.0;
  double worsen = 0.0;
  Eigen::Matrix2d cov2;
  Ellipse ellipse;
  double se_improve = 0.0, z_improve = 0.0, p_improve = 0.0;
  double se_worsen = 0.0, z_worsen = 0.0, p_worsen = 0.0;
  int quadrant = 0;
  // unidimensional part
  double score = 0.0;
  double se = 0.0, z = 0.0, p = 0.0;
  std::array<double, 2> ci95{0.0, 0.0};
  int rank = 0;
};

struct FacilityScoreReport {
  std::vector<FacilityScore> facilities;
  Vector avg_initial_probs;
};

// Bidimensional scores: the facility coefficients of the shared improvement
// and worsening blocks, centered on their unweighted mean, with delta-method
// 2x2 covariances and 95% ellipses. Requires an M2 fit with facility dummies
// in the transition submodel.
FacilityScoreReport facility_contrasts(const Parameters& theta, const Matrix& cov,
                                       const ModelConfig& config, int n_items,
                                       int n_facilities);

// Completes the report with the unidimensional scores, their confidence
// intervals and the descending ranking.
void unidimensional_scores(FacilityScoreReport& report);

Vector average_initial_probs(const Parameters& theta, const PanelData& panel,
                             const ModelConfig& config);

// Modal-state labels (1-based); ties resolve to the lowest state.
std::vector<std::vector<int>> classify(const std::vector<Matrix>& state_marginals);

constexpr double kChi2TwoDf95 = 5.991;
constexpr double kNormal975 = 1.96;

} // namespace lmpanel
