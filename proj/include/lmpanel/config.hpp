#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lmpanel/types.hpp"

namespace lmpanel {

// M1 keeps one coefficient vector per admissible (origin, destination)
// pair; M2 shares one vector for every move toward a better state and one
// for every move toward a worse state.
enum class TransitionMode { UnrestrictedTridiag, SharedUpDown };

struct InitCovariates {
  bool gender = true;
  bool age = true;
  bool facility = true;
};

struct TransCovariates {
  bool gender = true;
  bool age = true;
  bool time_gap = true;
  bool facility = true;
};

struct ModelConfig {
  int k = 2;
  TransitionMode transition_mode = TransitionMode::SharedUpDown;
  InitCovariates init_covariates;
  TransCovariates trans_covariates;
};

// Destinations reachable from state c (1-based) under the tridiagonal
// structure: K_1 = {2}, K_k = {k-1}, K_c = {c-1, c+1} otherwise.
std::vector<int> admissible_destinations(int c, int k);

// A submodel design carries an explicit intercept column exactly when its
// facility dummies are disabled (the H dummies span the intercept).
int p_init(const ModelConfig& config, int n_facilities);
int p_trans(const ModelConfig& config, int n_facilities);

// (k-2)+ cut shifts followed by p_init slopes; 0 when k = 1.
int beta_len(const ModelConfig& config, int n_facilities);

// Ordered (c, d) pairs owning a gamma block. M1: row-major over admissible
// pairs. M2: two blocks, reported as (0,-1) for improvement and (0,+1) for
// worsening. Empty when k = 1.
std::vector<std::pair<int, int>> gamma_pairs(const ModelConfig& config);
int n_gamma_blocks(const ModelConfig& config);

// Index of the gamma block governing the move c -> d; -1 if inadmissible.
int gamma_block_index(const ModelConfig& config, int c, int d);

struct Parameters {
  Vector beta;               // cut shifts then covariate slopes
  std::vector<Vector> gamma; // one vector per block, gamma_pairs order
  Matrix lambda;             // J x k conditional response probabilities
};

int count_parameters(const ModelConfig& config, int n_items, int n_facilities);

// Validates dimensions, finiteness, the lambda ordering and the cut-shift
// ordering. Throws SchemaError on violation.
void check_parameters(const Parameters& theta, const ModelConfig& config,
                      int n_items, int n_facilities);

// Fixed flattening: beta, gamma blocks in enumeration order, lambda
// row-major by item. flatten/unflatten are mutually inverse.
Vector flatten(const Parameters& theta, const ModelConfig& config,
               int n_items, int n_facilities);
Parameters unflatten(const Vector& flat, const ModelConfig& config,
                     int n_items, int n_facilities);

// Names aligned with the flattening order, for Wald tables and reports.
std::vector<std::string> parameter_names(const ModelConfig& config, int n_items,
                                         int n_facilities,
                                         const std::vector<std::string>& item_labels);

// Offsets of the facility-dummy coefficients of a gamma block within the
// flattened vector; empty if facility dummies are disabled for transitions.
std::vector<int> gamma_facility_offsets(const ModelConfig& config, int block,
                                        int n_facilities);

std::string transition_mode_name(TransitionMode mode);

} // namespace lmpanel
