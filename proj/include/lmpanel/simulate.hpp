#pragma once

#include <cstdint>
#include <vector>

#include "lmpanel/config.hpp"
#include "lmpanel/panel.hpp"

namespace lmpanel {

// Fixed value when lo == hi, otherwise uniform over [lo, hi].
struct RangeSpec {
  double lo = 0.0;
  double hi = 0.0;
  bool fixed() const { return lo == hi; }
};

struct SimDesign {
  int n_subjects = 0;
  int n_facilities = 1;
  int n_items = 1;
  ModelConfig config;
  RangeSpec t_occasions{1, 1}; // integer-valued
  RangeSpec age_range{70, 90};
  RangeSpec gap_days{90, 90};
  Vector facility_probs; // empty = uniform
  double female_prob = 0.5;
  Parameters true_params;
  std::uint64_t seed = 1;
};

struct SimResult {
  PanelData panel;
  std::vector<std::vector<int>> states; // hidden paths, 1-based, for tests
};

// Draws covariates, the latent chain and the responses subject by subject,
// each subject on its own derived RNG stream; fully determined by the seed.
SimResult simulate_panel(const SimDesign& design);

} // namespace lmpanel
