#pragma once

#include <vector>

#include "lmpanel/config.hpp"
#include "lmpanel/links.hpp"
#include "lmpanel/panel.hpp"
#include "lmpanel/types.hpp"

namespace lmpanel {

// Per-subject model inputs at a fixed theta: initial vector, transition
// matrix per occasion t >= 2 and log response vectors (k x T).
struct SubjectInputs {
  Vector pi;
  std::vector<Matrix> trans; // T-1 matrices, trans[t-1] governs move into t
  Matrix log_m;              // k x T
  int T() const { return static_cast<int>(log_m.cols()); }
  int k() const { return static_cast<int>(log_m.rows()); }
};

SubjectInputs build_subject_inputs(const SubjectRecord& subject,
                                   const Parameters& theta,
                                   const ModelConfig& config, int n_facilities);

// Reuses the storage in inputs; the response table must match theta.lambda.
void build_subject_inputs_into(const SubjectRecord& subject,
                               const Parameters& theta, const ModelConfig& config,
                               int n_facilities, const ResponseLogTable& table,
                               SubjectInputs& inputs);

struct SubjectLikelihood {
  double log_manifest = 0.0;
  Matrix scaled_forward;  // k x T, columns sum to 1
  Vector log_scale;       // per-occasion log normalizers, sums to log_manifest
  Matrix scaled_backward; // k x T, scaled with the forward normalizers
};

struct PosteriorSummary {
  Matrix state_marginals;            // k x T
  std::vector<Matrix> pair_marginals; // T-1 banded k x k matrices
};

// Scaled forward recursion; throws ZeroLikelihood when a scale factor
// vanishes (the data are impossible under theta).
SubjectLikelihood forward(const SubjectInputs& inputs);

// Fills scaled_backward; requires the forward pass (shares its scales).
void backward(const SubjectInputs& inputs, SubjectLikelihood& fb);

PosteriorSummary posterior(const SubjectInputs& inputs,
                           const SubjectLikelihood& fb);
PosteriorSummary posterior(const SubjectInputs& inputs);

// Scratch buffers for the fused recursions; reusable across subjects.
struct FBWorkspace {
  Matrix resp; // shifted linear response probabilities, k x T
  Matrix fwd;
  Matrix bwd;
  Vector shift;
  Vector log_scale;
  Vector raw_scale;
  Vector buf;
};

// Forward, backward and posterior weights written into caller storage;
// returns the log manifest probability.
double posterior_into(const SubjectInputs& inputs, FBWorkspace& ws,
                      Matrix& w_state, std::vector<Matrix>& w_pair);

// Sorts then Neumaier-sums, so the result is invariant under permutations
// of the inputs.
double permutation_invariant_sum(std::vector<double> values);

Vector subject_logliks(const Parameters& theta, const PanelData& panel,
                       const ModelConfig& config);

double log_likelihood(const Parameters& theta, const PanelData& panel,
                      const ModelConfig& config);

} // namespace lmpanel
