#include "oracles.hpp"

#include <cmath>
#include <limits>

namespace oracles {

PathOracle enumerate_paths(const SubjectInputs& inputs) {
  const int k = inputs.k();
  const int T = inputs.T();
  PathOracle oracle;
  oracle.state_marginals = Matrix::Zero(k, T);
  oracle.pair_marginals.assign(T - 1, Matrix::Zero(k, k));

  const Matrix resp = inputs.log_m.array().exp();
  std::vector<int> path(T, 0);
  long n_paths = 1;
  for (int t = 0; t < T; ++t) n_paths *= k;

  for (long code = 0; code < n_paths; ++code) {
    long rest = code;
    for (int t = 0; t < T; ++t) {
      path[t] = static_cast<int>(rest % k);
      rest /= k;
    }
    double weight = inputs.pi[path[0]] * resp(path[0], 0);
    for (int t = 1; t < T; ++t)
      weight *= inputs.trans[t - 1](path[t - 1], path[t]) * resp(path[t], t);
    if (weight == 0.0) continue;
    oracle.manifest += weight;
    for (int t = 0; t < T; ++t) oracle.state_marginals(path[t], t) += weight;
    for (int t = 1; t < T; ++t)
      oracle.pair_marginals[t - 1](path[t - 1], path[t]) += weight;
  }
  oracle.state_marginals /= oracle.manifest;
  for (auto& pair : oracle.pair_marginals) pair /= oracle.manifest;
  return oracle;
}

SubjectInputs random_subject_inputs(std::mt19937_64& eng, int k, int T) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  SubjectInputs inputs;
  inputs.pi.resize(k);
  for (int c = 0; c < k; ++c) inputs.pi[c] = unif(eng);
  inputs.pi /= inputs.pi.sum();

  inputs.trans.resize(T - 1);
  for (auto& trans : inputs.trans) {
    trans = Matrix::Zero(k, k);
    for (int c = 0; c < k; ++c) {
      trans(c, c) = unif(eng);
      if (c > 0) trans(c, c - 1) = unif(eng);
      if (c + 1 < k) trans(c, c + 1) = unif(eng);
      trans.row(c) /= trans.row(c).sum();
    }
  }

  inputs.log_m.resize(k, T);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < k; ++c) inputs.log_m(c, t) = std::log(unif(eng));
  return inputs;
}

namespace {

double bernoulli_term(double mean, double weight, double v) {
  if (weight <= 0.0) return 0.0;
  double value = 0.0;
  if (mean > 0.0) {
    if (v <= 0.0) return -std::numeric_limits<double>::infinity();
    value += mean * std::log(v);
  }
  if (mean < 1.0) {
    if (v >= 1.0) return -std::numeric_limits<double>::infinity();
    value += (1.0 - mean) * std::log(1.0 - v);
  }
  return weight * value;
}

} // namespace

Vector grid_isotonic_argmax(const Vector& means, const Vector& weights,
                            double step) {
  const int k = static_cast<int>(means.size());
  const int n_grid = static_cast<int>(std::lround(1.0 / step)) + 1;

  // best[c][g): maximum over monotone assignments of states 0..c with the
  // state-c value at grid slot <= g; argmax reconstructed from choices.
  Matrix best(k, n_grid);
  Eigen::MatrixXi choice(k, n_grid);
  for (int c = 0; c < k; ++c) {
    double running = -std::numeric_limits<double>::infinity();
    int running_arg = 0;
    for (int g = 0; g < n_grid; ++g) {
      const double v = g * step;
      const double here =
          bernoulli_term(means[c], weights[c], v) +
          (c > 0 ? best(c - 1, g) : 0.0);
      if (here > running) {
        running = here;
        running_arg = g;
      }
      best(c, g) = running;
      choice(c, g) = running_arg;
    }
  }

  Vector out(k);
  int g = n_grid - 1;
  for (int c = k - 1; c >= 0; --c) {
    g = choice(c, g);
    out[c] = g * step;
  }
  return out;
}

Vector grid_search_argmax(const std::function<double(const Vector&)>& f,
                          const Vector& lo, const Vector& hi,
                          double coarse_step, double fine_step) {
  const int dim = static_cast<int>(lo.size());
  const auto scan = [&](const Vector& from, const Vector& to, double step) {
    std::vector<int> sizes(dim);
    long total = 1;
    for (int d = 0; d < dim; ++d) {
      sizes[d] = static_cast<int>(std::floor((to[d] - from[d]) / step)) + 1;
      total *= sizes[d];
    }
    Vector best_point = from;
    double best_value = -std::numeric_limits<double>::infinity();
    Vector point(dim);
    for (long code = 0; code < total; ++code) {
      long rest = code;
      for (int d = 0; d < dim; ++d) {
        point[d] = from[d] + (rest % sizes[d]) * step;
        rest /= sizes[d];
      }
      const double value = f(point);
      if (value > best_value) {
        best_value = value;
        best_point = point;
      }
    }
    return best_point;
  };

  const Vector coarse = scan(lo, hi, coarse_step);
  Vector from(dim), to(dim);
  for (int d = 0; d < dim; ++d) {
    from[d] = std::max(lo[d], coarse[d] - 2.0 * coarse_step);
    to[d] = std::min(hi[d], coarse[d] + 2.0 * coarse_step);
  }
  return scan(from, to, fine_step);
}

lmpanel::DescriptiveScores naive_descriptive(const lmpanel::PanelData& panel) {
  const int H = panel.n_facilities;
  lmpanel::DescriptiveScores scores;
  scores.facilities.resize(H);
  for (int h = 0; h < H; ++h) {
    double num = 0.0;
    long denom = 0;
    for (const auto& subj : panel.subjects) {
      if (subj.facility[h] != 1 || subj.n_occasions() < 2) continue;
      for (int t = 0; t + 1 < subj.n_occasions(); ++t) {
        const double a0 = 100.0 * subj.occasions[t].responses.sum() /
                          static_cast<double>(panel.n_items);
        const double a1 = 100.0 * subj.occasions[t + 1].responses.sum() /
                          static_cast<double>(panel.n_items);
        num += a1 - a0;
        denom += 1;
      }
    }
    auto& fac = scores.facilities[h];
    fac.n_transitions = denom;
    fac.defined = denom > 0;
    if (!fac.defined) continue;
    fac.a_bar = num / denom;
    double sq = 0.0;
    for (const auto& subj : panel.subjects) {
      if (subj.facility[h] != 1 || subj.n_occasions() < 2) continue;
      for (int t = 0; t + 1 < subj.n_occasions(); ++t) {
        const double a0 = 100.0 * subj.occasions[t].responses.sum() /
                          static_cast<double>(panel.n_items);
        const double a1 = 100.0 * subj.occasions[t + 1].responses.sum() /
                          static_cast<double>(panel.n_items);
        sq += ((a1 - a0) - fac.a_bar) * ((a1 - a0) - fac.a_bar);
      }
    }
    fac.s = std::sqrt(sq / denom);
  }
  return scores;
}

} // namespace oracles
