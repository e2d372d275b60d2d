#include "lmpanel/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmpanel/errors.hpp"
#include "lmpanel/links.hpp"

namespace lmpanel {

void build_subject_inputs_into(const SubjectRecord& subject,
                               const Parameters& theta, const ModelConfig& config,
                               int H, const ResponseLogTable& table,
                               SubjectInputs& inputs) {
  const int k = config.k;
  const int T = subject.n_occasions();
  if (k == 1) {
    inputs.pi = Vector::Ones(1);
  } else {
    Vector x;
    init_design_row_into(subject, config, H, x);
    initial_probs_into(theta.beta, x, k, inputs.pi);
  }
  inputs.trans.resize(T - 1);
  Vector xt;
  for (int t = 1; t < T; ++t) {
    if (k == 1) {
      inputs.trans[t - 1] = Matrix::Ones(1, 1);
    } else {
      trans_design_row_into(subject, t, config, H, xt);
      transition_matrix_into(theta.gamma, xt, config, inputs.trans[t - 1]);
    }
  }
  inputs.log_m.resize(k, T);
  Vector logm;
  for (int t = 0; t < T; ++t) {
    response_log_vector_into(table, subject.occasions[t].responses, logm);
    inputs.log_m.col(t) = logm;
  }
}

SubjectInputs build_subject_inputs(const SubjectRecord& subject,
                                   const Parameters& theta,
                                   const ModelConfig& config, int H) {
  SubjectInputs inputs;
  build_subject_inputs_into(subject, theta, config, H,
                            make_response_log_table(theta.lambda), inputs);
  return inputs;
}

namespace {

// Shifted linear responses plus the forward pass; fills resp, shift, fwd,
// log_scale and raw_scale. Throws ZeroLikelihood on a vanishing scale.
void run_forward(const SubjectInputs& inputs, FBWorkspace& ws) {
  const int k = inputs.k();
  const int T = inputs.T();
  ws.resp.resize(k, T);
  ws.fwd.resize(k, T);
  ws.shift.resize(T);
  ws.log_scale.resize(T);
  ws.raw_scale.resize(T);
  ws.buf.resize(k);

  for (int t = 0; t < T; ++t) {
    const double shift = inputs.log_m.col(t).maxCoeff();
    if (!std::isfinite(shift))
      throw Error(ErrorCode::ZeroLikelihood,
                  "all response probabilities vanish at occasion " +
                      std::to_string(t + 1));
    ws.shift[t] = shift;
    ws.resp.col(t) = (inputs.log_m.col(t).array() - shift).exp();

    if (t == 0)
      ws.buf = ws.resp.col(0).cwiseProduct(inputs.pi);
    else
      ws.buf = ws.resp.col(t).cwiseProduct(inputs.trans[t - 1].transpose() *
                                           ws.fwd.col(t - 1));
    const double scale = ws.buf.sum();
    if (scale <= 0.0)
      throw Error(ErrorCode::ZeroLikelihood,
                  "zero scale factor at occasion " + std::to_string(t + 1));
    ws.fwd.col(t) = ws.buf / scale;
    ws.raw_scale[t] = scale;
    ws.log_scale[t] = std::log(scale) + shift;
  }
}

// Backward vectors normalized with the forward scales.
void run_backward(const SubjectInputs& inputs, FBWorkspace& ws) {
  const int k = inputs.k();
  const int T = inputs.T();
  ws.bwd.resize(k, T);
  ws.bwd.col(T - 1).setOnes();
  for (int t = T - 2; t >= 0; --t) {
    ws.buf = ws.resp.col(t + 1).cwiseProduct(ws.bwd.col(t + 1));
    ws.bwd.col(t) = (inputs.trans[t] * ws.buf) / ws.raw_scale[t + 1];
  }
}

} // namespace

SubjectLikelihood forward(const SubjectInputs& inputs) {
  FBWorkspace ws;
  run_forward(inputs, ws);
  SubjectLikelihood fb;
  fb.scaled_forward = ws.fwd;
  fb.log_scale = ws.log_scale;
  fb.log_manifest = ws.log_scale.sum();
  return fb;
}

void backward(const SubjectInputs& inputs, SubjectLikelihood& fb) {
  FBWorkspace ws;
  run_forward(inputs, ws);
  run_backward(inputs, ws);
  fb.scaled_backward = ws.bwd;
}

double posterior_into(const SubjectInputs& inputs, FBWorkspace& ws,
                      Matrix& w_state, std::vector<Matrix>& w_pair) {
  const int k = inputs.k();
  const int T = inputs.T();
  run_forward(inputs, ws);
  run_backward(inputs, ws);

  w_state.resize(k, T);
  for (int t = 0; t < T; ++t) {
    ws.buf = ws.fwd.col(t).cwiseProduct(ws.bwd.col(t));
    w_state.col(t) = ws.buf / ws.buf.sum();
  }
  w_pair.resize(T - 1);
  for (int t = 1; t < T; ++t) {
    ws.buf = ws.resp.col(t).cwiseProduct(ws.bwd.col(t)) / ws.raw_scale[t];
    Matrix& pair = w_pair[t - 1];
    pair = ws.fwd.col(t - 1).asDiagonal() * inputs.trans[t - 1] *
           ws.buf.asDiagonal();
    pair /= pair.sum();
  }
  return ws.log_scale.sum();
}

PosteriorSummary posterior(const SubjectInputs& inputs,
                           const SubjectLikelihood& fb) {
  const int k = inputs.k();
  const int T = inputs.T();
  PosteriorSummary post;
  post.state_marginals.resize(k, T);
  for (int t = 0; t < T; ++t) {
    Vector v = fb.scaled_forward.col(t).cwiseProduct(fb.scaled_backward.col(t));
    post.state_marginals.col(t) = v / v.sum();
  }
  post.pair_marginals.reserve(T - 1);
  for (int t = 1; t < T; ++t) {
    const double shift = inputs.log_m.col(t).maxCoeff();
    const Vector m = (inputs.log_m.col(t).array() - shift).exp();
    const double scale = std::exp(fb.log_scale[t] - shift);
    Matrix pair = fb.scaled_forward.col(t - 1).asDiagonal() *
                  inputs.trans[t - 1] *
                  m.cwiseProduct(fb.scaled_backward.col(t)).asDiagonal();
    pair /= scale;
    pair /= pair.sum();
    post.pair_marginals.push_back(std::move(pair));
  }
  return post;
}

PosteriorSummary posterior(const SubjectInputs& inputs) {
  SubjectLikelihood fb = forward(inputs);
  backward(inputs, fb);
  return posterior(inputs, fb);
}

double permutation_invariant_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

Vector subject_logliks(const Parameters& theta, const PanelData& panel,
                       const ModelConfig& config) {
  const int n = panel.n_subjects();
  const ResponseLogTable table = make_response_log_table(theta.lambda);
  Vector lls(n);
  SubjectInputs inputs;
  FBWorkspace ws;
  for (int i = 0; i < n; ++i) {
    try {
      build_subject_inputs_into(panel.subjects[i], theta, config,
                                panel.n_facilities, table, inputs);
      run_forward(inputs, ws);
      lls[i] = ws.log_scale.sum();
    } catch (const Error& err) {
      if (err.code() == ErrorCode::ZeroLikelihood)
        throw Error(ErrorCode::ZeroLikelihood,
                    "subject " + panel.subjects[i].subject_id + ": " + err.what());
      throw;
    }
  }
  return lls;
}

double log_likelihood(const Parameters& theta, const PanelData& panel,
                      const ModelConfig& config) {
  const Vector lls = subject_logliks(theta, panel, config);
  return permutation_invariant_sum(
      std::vector<double>(lls.data(), lls.data() + lls.size()));
}

} // namespace lmpanel
