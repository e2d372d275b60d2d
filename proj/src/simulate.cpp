#include "lmpanel/simulate.hpp"

#include <cstdio>

#include "lmpanel/errors.hpp"
#include "lmpanel/links.hpp"
#include "lmpanel/parallel.hpp"
#include "lmpanel/rng.hpp"

namespace lmpanel {

namespace {

std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%06d", index + 1);
  return buf;
}

} // namespace

SimResult simulate_panel(const SimDesign& design) {
  const int k = design.config.k;
  const int J = design.n_items;
  const int H = design.n_facilities;
  if (design.n_subjects < 1)
    throw Error(ErrorCode::SchemaError, "design needs at least one subject");
  if (design.t_occasions.lo < 1)
    throw Error(ErrorCode::SchemaError, "occasion counts must be >= 1");
  check_parameters(design.true_params, design.config, J, H);
  Vector fac_probs = design.facility_probs.size() == 0
                         ? Vector::Constant(H, 1.0 / H)
                         : design.facility_probs;
  if (fac_probs.size() != H)
    throw Error(ErrorCode::SchemaError, "facility_probs length must be H");

  SimResult result;
  result.panel.n_items = J;
  result.panel.n_facilities = H;
  result.panel.subjects.resize(design.n_subjects);
  result.states.resize(design.n_subjects);

  parallel_for(design.n_subjects, [&](std::size_t i) {
    std::mt19937_64 eng = derive_stream(design.seed, kSaltSimulate, i);
    SubjectRecord subj;
    subj.subject_id = subject_name(static_cast<int>(i));
    subj.gender = bernoulli(eng, design.female_prob) ? 1 : 0;
    subj.facility = IntVector::Zero(H);
    subj.facility[categorical(eng, fac_probs)] = 1;

    const int T =
        design.t_occasions.fixed()
            ? static_cast<int>(design.t_occasions.lo)
            : uniform_int(eng, static_cast<int>(design.t_occasions.lo),
                          static_cast<int>(design.t_occasions.hi));
    subj.occasions.resize(T);
    double age = design.age_range.fixed()
                     ? design.age_range.lo
                     : uniform_range(eng, design.age_range.lo, design.age_range.hi);
    for (int t = 0; t < T; ++t) {
      auto& occ = subj.occasions[t];
      if (t == 0) {
        occ.days_since_prev = 0.0;
      } else {
        occ.days_since_prev =
            design.gap_days.fixed()
                ? design.gap_days.lo
                : uniform_range(eng, design.gap_days.lo, design.gap_days.hi);
        age += occ.days_since_prev / 365.25;
      }
      occ.age_years = age;
    }

    std::vector<int>& path = result.states[i];
    path.resize(T);
    for (int t = 0; t < T; ++t) {
      int state;
      if (k == 1) {
        state = 0;
      } else if (t == 0) {
        const Vector pi =
            initial_probs(design.true_params.beta,
                          init_design_row(subj, design.config, H), k);
        state = categorical(eng, pi);
      } else {
        const Matrix trans = transition_matrix(
            design.true_params.gamma,
            trans_design_row(subj, t, design.config, H), design.config);
        state = categorical(eng, trans.row(path[t - 1] - 1).transpose());
      }
      path[t] = state + 1;

      auto& occ = subj.occasions[t];
      occ.responses.resize(J);
      for (int j = 0; j < J; ++j)
        occ.responses[j] =
            bernoulli(eng, design.true_params.lambda(j, state)) ? 1 : 0;
    }
    result.panel.subjects[i] = std::move(subj);
  });

  result.panel = validate_panel(std::move(result.panel));
  return result;
}

} // namespace lmpanel
