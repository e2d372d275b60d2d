#include "lmpanel/config.hpp"

#include <cmath>

#include "lmpanel/errors.hpp"

namespace lmpanel {

std::vector<int> admissible_destinations(int c, int k) {
  if (k <= 1) return {};
  if (c == 1) return {2};
  if (c == k) return {k - 1};
  return {c - 1, c + 1};
}

namespace {

std::vector<std::string> init_slope_names(const ModelConfig& config, int H) {
  std::vector<std::string> names;
  if (!config.init_covariates.facility) names.push_back("const");
  if (config.init_covariates.gender) names.push_back("gender");
  if (config.init_covariates.age) names.push_back("age");
  if (config.init_covariates.facility)
    for (int h = 1; h <= H; ++h) names.push_back("fac" + std::to_string(h));
  return names;
}

std::vector<std::string> trans_slope_names(const ModelConfig& config, int H) {
  std::vector<std::string> names;
  if (!config.trans_covariates.facility) names.push_back("const");
  if (config.trans_covariates.gender) names.push_back("gender");
  if (config.trans_covariates.age) names.push_back("age");
  if (config.trans_covariates.time_gap) names.push_back("time");
  if (config.trans_covariates.facility)
    for (int h = 1; h <= H; ++h) names.push_back("fac" + std::to_string(h));
  return names;
}

} // namespace

int p_init(const ModelConfig& config, int H) {
  const auto& cov = config.init_covariates;
  return (cov.facility ? H : 1) + (cov.gender ? 1 : 0) + (cov.age ? 1 : 0);
}

int p_trans(const ModelConfig& config, int H) {
  const auto& cov = config.trans_covariates;
  return (cov.facility ? H : 1) + (cov.gender ? 1 : 0) + (cov.age ? 1 : 0) +
         (cov.time_gap ? 1 : 0);
}

int beta_len(const ModelConfig& config, int H) {
  if (config.k < 2) return 0;
  return std::max(config.k - 2, 0) + p_init(config, H);
}

std::vector<std::pair<int, int>> gamma_pairs(const ModelConfig& config) {
  const int k = config.k;
  if (k < 2) return {};
  if (config.transition_mode == TransitionMode::SharedUpDown)
    return {{0, -1}, {0, +1}};
  std::vector<std::pair<int, int>> pairs;
  for (int c = 1; c <= k; ++c)
    for (int d : admissible_destinations(c, k)) pairs.emplace_back(c, d);
  return pairs;
}

int n_gamma_blocks(const ModelConfig& config) {
  if (config.k < 2) return 0;
  return config.transition_mode == TransitionMode::SharedUpDown ? 2
                                                                : 2 * (config.k - 1);
}

int gamma_block_index(const ModelConfig& config, int c, int d) {
  const int k = config.k;
  if (k < 2 || d < 1 || d > k || (d != c - 1 && d != c + 1)) return -1;
  if (config.transition_mode == TransitionMode::SharedUpDown)
    return d == c - 1 ? 0 : 1;
  int index = 0;
  for (int row = 1; row <= k; ++row) {
    for (int dest : admissible_destinations(row, k)) {
      if (row == c && dest == d) return index;
      ++index;
    }
  }
  return -1;
}

int count_parameters(const ModelConfig& config, int J, int H) {
  const int k = config.k;
  int v = J * k;
  if (k >= 2) {
    v += beta_len(config, H);
    v += n_gamma_blocks(config) * p_trans(config, H);
  }
  return v;
}

void check_parameters(const Parameters& theta, const ModelConfig& config,
                      int J, int H) {
  const int k = config.k;
  if (theta.lambda.rows() != J || theta.lambda.cols() != k)
    throw Error(ErrorCode::SchemaError, "lambda has wrong dimensions");
  if (!theta.lambda.allFinite() || theta.lambda.minCoeff() < 0.0 ||
      theta.lambda.maxCoeff() > 1.0)
    throw Error(ErrorCode::SchemaError, "lambda entries outside [0,1]");
  for (int j = 0; j < J; ++j)
    for (int c = 1; c < k; ++c)
      if (theta.lambda(j, c) < theta.lambda(j, c - 1))
        throw Error(ErrorCode::SchemaError,
                    "lambda row " + std::to_string(j + 1) + " is not nondecreasing");

  if (theta.beta.size() != beta_len(config, H))
    throw Error(ErrorCode::SchemaError, "beta has wrong length");
  if (theta.beta.size() > 0 && !theta.beta.allFinite())
    throw Error(ErrorCode::SchemaError, "beta has non-finite entries");
  const int n_shifts = k >= 2 ? std::max(k - 2, 0) : 0;
  double prev = 0.0;
  for (int s = 0; s < n_shifts; ++s) {
    if (theta.beta[s] > prev)
      throw Error(ErrorCode::SchemaError, "cut shifts are not nonincreasing from 0");
    prev = theta.beta[s];
  }

  if (static_cast<int>(theta.gamma.size()) != n_gamma_blocks(config))
    throw Error(ErrorCode::SchemaError, "gamma has wrong number of blocks");
  const int pt = k >= 2 ? p_trans(config, H) : 0;
  for (const auto& block : theta.gamma) {
    if (block.size() != pt)
      throw Error(ErrorCode::SchemaError, "gamma block has wrong length");
    if (!block.allFinite())
      throw Error(ErrorCode::SchemaError, "gamma block has non-finite entries");
  }
}

Vector flatten(const Parameters& theta, const ModelConfig& config, int J, int H) {
  const int v = count_parameters(config, J, H);
  Vector flat(v);
  int pos = 0;
  for (Index i = 0; i < theta.beta.size(); ++i) flat[pos++] = theta.beta[i];
  for (const auto& block : theta.gamma)
    for (Index i = 0; i < block.size(); ++i) flat[pos++] = block[i];
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < config.k; ++c) flat[pos++] = theta.lambda(j, c);
  return flat;
}

Parameters unflatten(const Vector& flat, const ModelConfig& config, int J, int H) {
  if (flat.size() != count_parameters(config, J, H))
    throw Error(ErrorCode::SchemaError, "flattened parameter vector has wrong length");
  Parameters theta;
  int pos = 0;
  const int nb = beta_len(config, H);
  theta.beta = flat.segment(pos, nb);
  pos += nb;
  const int blocks = n_gamma_blocks(config);
  const int pt = blocks > 0 ? p_trans(config, H) : 0;
  theta.gamma.resize(blocks);
  for (int b = 0; b < blocks; ++b) {
    theta.gamma[b] = flat.segment(pos, pt);
    pos += pt;
  }
  theta.lambda.resize(J, config.k);
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < config.k; ++c) theta.lambda(j, c) = flat[pos++];
  return theta;
}

std::vector<std::string> parameter_names(const ModelConfig& config, int J, int H,
                                         const std::vector<std::string>& item_labels) {
  std::vector<std::string> names;
  const int k = config.k;
  if (k >= 2) {
    for (int s = 1; s <= k - 2; ++s) names.push_back("init:shift" + std::to_string(s));
    for (const auto& slope : init_slope_names(config, H)) names.push_back("init:" + slope);
    const auto slopes = trans_slope_names(config, H);
    for (const auto& pair : gamma_pairs(config)) {
      std::string prefix;
      if (config.transition_mode == TransitionMode::SharedUpDown)
        prefix = pair.second < 0 ? "improve:" : "worsen:";
      else
        prefix = "trans" + std::to_string(pair.first) + ">" +
                 std::to_string(pair.second) + ":";
      for (const auto& slope : slopes) names.push_back(prefix + slope);
    }
  }
  for (int j = 0; j < J; ++j) {
    const std::string item =
        j < static_cast<int>(item_labels.size()) ? item_labels[j]
                                                 : "item_" + std::to_string(j + 1);
    for (int c = 1; c <= k; ++c)
      names.push_back("lambda:" + item + ":state" + std::to_string(c));
  }
  return names;
}

std::vector<int> gamma_facility_offsets(const ModelConfig& config, int block, int H) {
  if (!config.trans_covariates.facility || config.k < 2) return {};
  const int pt = p_trans(config, H);
  const int base = beta_len(config, H) + block * pt + (pt - H);
  std::vector<int> offsets(H);
  for (int h = 0; h < H; ++h) offsets[h] = base + h;
  return offsets;
}

std::string transition_mode_name(TransitionMode mode) {
  return mode == TransitionMode::SharedUpDown ? "m2" : "m1";
}

} // namespace lmpanel
