#include <doctest.h>

#include <random>

#include "lmpanel/config.hpp"
#include "lmpanel/errors.hpp"
#include "lmpanel/panel.hpp"

using namespace lmpanel;

namespace {

SubjectRecord make_subject(const std::string& id, int facility, int H, int T,
                           int J, int response_value = 0) {
  SubjectRecord subj;
  subj.subject_id = id;
  subj.gender = 0;
  subj.facility = IntVector::Zero(H);
  subj.facility[facility] = 1;
  for (int t = 0; t < T; ++t) {
    Occasion occ;
    occ.age_years = 80.0 + t * 0.25;
    occ.days_since_prev = t == 0 ? 0.0 : 91.0;
    occ.responses = IntVector::Constant(J, response_value);
    subj.occasions.push_back(occ);
  }
  return subj;
}

ModelConfig full_config(int k, TransitionMode mode) {
  ModelConfig config;
  config.k = k;
  config.transition_mode = mode;
  return config;
}

} // namespace

TEST_CASE("validate_panel accepts a minimal panel") {
  PanelData panel = validate_panel({make_subject("a", 0, 1, 1, 2)}, 2, 1);
  CHECK(panel.n_subjects() == 1);
  CHECK(panel.n_items == 2);
  CHECK(panel.subjects[0].n_occasions() == 1);
}

TEST_CASE("validate_panel rejects contract violations") {
  SUBCASE("non-binary response") {
    auto subj = make_subject("a", 0, 1, 1, 2);
    subj.occasions[0].responses[1] = 2;
    CHECK_THROWS_WITH_AS(validate_panel({subj}, 2, 1), doctest::Contains("NON_BINARY"),
                         Error);
  }
  SUBCASE("two facilities set") {
    auto subj = make_subject("a", 0, 2, 1, 2);
    subj.facility[1] = 1;
    CHECK_THROWS_WITH_AS(validate_panel({subj}, 2, 2), doctest::Contains("BAD_FACILITY"),
                         Error);
  }
  SUBCASE("empty panel") {
    CHECK_THROWS_WITH_AS(validate_panel({}, 2, 1), doctest::Contains("EMPTY_PANEL"),
                         Error);
  }
  SUBCASE("wrong response length is a missing value") {
    auto subj = make_subject("a", 0, 1, 1, 3);
    CHECK_THROWS_WITH_AS(validate_panel({subj}, 2, 1), doctest::Contains("MISSING_VALUE"),
                         Error);
  }
  SUBCASE("decreasing age") {
    auto subj = make_subject("a", 0, 1, 2, 2);
    subj.occasions[1].age_years = subj.occasions[0].age_years - 1.0;
    CHECK_THROWS_AS(validate_panel({subj}, 2, 1), Error);
  }
}

TEST_CASE("validate_panel is idempotent") {
  auto subj = make_subject("a", 0, 2, 3, 2);
  subj.occasions[0].days_since_prev = 55.0; // normalized away
  PanelData once = validate_panel({subj, make_subject("b", 1, 2, 1, 2, 1)}, 2, 2);
  PanelData twice = validate_panel(once);
  REQUIRE(once.n_subjects() == twice.n_subjects());
  CHECK(once.subjects[0].occasions[0].days_since_prev == 0.0);
  for (int i = 0; i < once.n_subjects(); ++i) {
    CHECK(once.subjects[i].subject_id == twice.subjects[i].subject_id);
    for (int t = 0; t < once.subjects[i].n_occasions(); ++t) {
      CHECK(once.subjects[i].occasions[t].age_years ==
            twice.subjects[i].occasions[t].age_years);
      CHECK(once.subjects[i].occasions[t].days_since_prev ==
            twice.subjects[i].occasions[t].days_since_prev);
      CHECK(once.subjects[i].occasions[t].responses ==
            twice.subjects[i].occasions[t].responses);
    }
  }
}

TEST_CASE("admissible destinations form the tridiagonal band") {
  CHECK(admissible_destinations(1, 5) == std::vector<int>{2});
  CHECK(admissible_destinations(5, 5) == std::vector<int>{4});
  CHECK(admissible_destinations(3, 5) == std::vector<int>{2, 4});
  CHECK(admissible_destinations(1, 1).empty());
}

TEST_CASE("count_parameters reproduces the published counts") {
  const int J = 9, H = 11;
  ModelConfig m1 = full_config(1, TransitionMode::UnrestrictedTridiag);
  CHECK(count_parameters(m1, J, H) == 9);

  m1.k = 7;
  CHECK(count_parameters(m1, J, H) == 249);

  ModelConfig m10 = full_config(7, TransitionMode::SharedUpDown);
  m10.init_covariates.gender = false;
  m10.trans_covariates.gender = false;
  m10.trans_covariates.age = false;
  CHECK(p_init(m10, H) == 12);
  CHECK(p_trans(m10, H) == 12);
  CHECK(count_parameters(m10, J, H) == 104);

  m1.k = 2;
  CHECK(count_parameters(m1, J, H) == 59);
  m1.k = 3;
  CHECK(count_parameters(m1, J, H) == 97);
}

TEST_CASE("count_parameters agrees with explicit coordinate enumeration") {
  // Hand-built dimension arithmetic, independent of the layout helpers:
  // J*k response probabilities, (k-2)+ cut shifts, one slope per design
  // column, one transition block per admissible ordered pair (two for the
  // shared model).
  const int J = 9, H = 11;
  for (int k : {2, 3}) {
    ModelConfig config = full_config(k, TransitionMode::UnrestrictedTridiag);
    int free_coords = J * k;
    free_coords += (k > 2 ? k - 2 : 0) + (1 + 1 + H);
    int pairs = 0;
    for (int c = 1; c <= k; ++c) pairs += (c == 1 || c == k) ? 1 : 2;
    free_coords += pairs * (1 + 1 + 1 + H);
    CHECK(count_parameters(config, J, H) == free_coords);
  }
}

TEST_CASE("flatten and unflatten are mutually inverse") {
  std::mt19937_64 eng(2024);
  std::uniform_int_distribution<int> kk(1, 10), jj(1, 12), hh(1, 15), bit(0, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 60; ++rep) {
    ModelConfig config;
    config.k = kk(eng);
    config.transition_mode = bit(eng) ? TransitionMode::SharedUpDown
                                      : TransitionMode::UnrestrictedTridiag;
    config.init_covariates = {bit(eng) == 1, bit(eng) == 1, bit(eng) == 1};
    config.trans_covariates = {bit(eng) == 1, bit(eng) == 1, bit(eng) == 1,
                               bit(eng) == 1};
    const int J = jj(eng), H = hh(eng);

    Parameters theta;
    theta.lambda.resize(J, config.k);
    for (int j = 0; j < J; ++j) {
      std::vector<double> draws(config.k);
      for (auto& d : draws) d = unif(eng);
      std::sort(draws.begin(), draws.end());
      for (int c = 0; c < config.k; ++c) theta.lambda(j, c) = draws[c];
    }
    theta.beta.resize(beta_len(config, H));
    const int ns = config.k >= 2 ? std::max(config.k - 2, 0) : 0;
    double shift = 0.0;
    for (int s = 0; s < ns; ++s) theta.beta[s] = shift -= std::abs(gauss(eng));
    for (Index m = ns; m < theta.beta.size(); ++m) theta.beta[m] = gauss(eng);
    theta.gamma.assign(n_gamma_blocks(config), Vector());
    for (auto& block : theta.gamma) {
      block.resize(p_trans(config, H));
      for (Index m = 0; m < block.size(); ++m) block[m] = gauss(eng);
    }
    check_parameters(theta, config, J, H);

    const Vector flat = flatten(theta, config, J, H);
    REQUIRE(flat.size() == count_parameters(config, J, H));
    const Parameters back = unflatten(flat, config, J, H);
    CHECK(back.beta == theta.beta);
    CHECK(back.lambda == theta.lambda);
    REQUIRE(back.gamma.size() == theta.gamma.size());
    for (std::size_t b = 0; b < theta.gamma.size(); ++b)
      CHECK(back.gamma[b] == theta.gamma[b]);
    CHECK(flatten(back, config, J, H) == flat);
  }
}

TEST_CASE("parameter names align with the flattening") {
  ModelConfig config = full_config(3, TransitionMode::SharedUpDown);
  const auto names = parameter_names(config, 2, 2, {"A", "B"});
  REQUIRE(static_cast<int>(names.size()) == count_parameters(config, 2, 2));
  CHECK(names[0] == "init:shift1");
  CHECK(names[1] == "init:gender");
  CHECK(names[2] == "init:age");
  CHECK(names[3] == "init:fac1");
  CHECK(names[5] == "improve:gender");
  CHECK(names.back() == "lambda:B:state3");

  config.trans_covariates.facility = false;
  const auto no_fac = parameter_names(config, 2, 2, {"A", "B"});
  CHECK(no_fac[5] == "improve:const");
}

TEST_CASE("check_parameters rejects ordering violations") {
  ModelConfig config = full_config(3, TransitionMode::SharedUpDown);
  Parameters theta;
  theta.lambda.resize(1, 3);
  theta.lambda << 0.5, 0.4, 0.6; // not nondecreasing
  theta.beta = Vector::Zero(beta_len(config, 1));
  theta.gamma.assign(2, Vector::Zero(p_trans(config, 1)));
  CHECK_THROWS_AS(check_parameters(theta, config, 1, 1), Error);
  theta.lambda << 0.4, 0.5, 0.6;
  CHECK_NOTHROW(check_parameters(theta, config, 1, 1));
  theta.beta[0] = 0.5; // positive cut shift
  CHECK_THROWS_AS(check_parameters(theta, config, 1, 1), Error);
}
