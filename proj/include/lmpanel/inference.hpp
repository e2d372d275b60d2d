#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lmpanel/config.hpp"
#include "lmpanel/panel.hpp"
#include "lmpanel/types.hpp"

namespace lmpanel {

// Observed-data score via the Fisher identity: the expected complete-data
// score at theta, assembled from one E-step. Coordinates for lambda entries
// at the 0/1 boundary are reported as 0 (outside the differentiable set).
Vector score_vector(const Parameters& theta, const PanelData& panel,
                    const ModelConfig& config);

// True for coordinates the observed information differentiates; false for
// boundary lambda entries.
std::vector<bool> free_coordinate_mask(const Parameters& theta,
                                       const ModelConfig& config, int n_items,
                                       int n_facilities);

// Minus the central-difference Jacobian of the score, symmetrized; rows and
// columns of excluded coordinates are zero.
Matrix observed_information(const Parameters& theta, const PanelData& panel,
                            const ModelConfig& config);

// Column j is (f(x + h_j e_j) - f(x - h_j e_j)) / (2 h_j).
Matrix central_difference_jacobian(const std::function<Vector(const Vector&)>& f,
                                   const Vector& x, const Vector& steps);

struct InferenceResult {
  Vector estimate;
  Vector se;       // NaN where undefined
  Vector wald_z;   // NaN where undefined
  Vector p_values; // NaN where undefined
  Matrix cov;      // pseudo-inverse of the information on the free set
  double info_condition = 0.0;
  bool not_pos_definite = false;
  std::vector<bool> free_mask;
};

InferenceResult infer(const Parameters& theta, const PanelData& panel,
                      const ModelConfig& config);

struct WaldRow {
  std::string name;
  double estimate;
  double se;
  double z;
  double p;
};

std::vector<WaldRow> wald_table(const Vector& estimates, const Vector& se,
                                const std::vector<std::string>& names);

double normal_cdf(double z);
double two_sided_p(double z);

} // namespace lmpanel
