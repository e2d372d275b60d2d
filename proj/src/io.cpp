#include "lmpanel/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>

#include "lmpanel/errors.hpp"
#include "lmpanel/rng.hpp"

namespace lmpanel {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

long parse_long(const std::string& field, long line_no, const std::string& col) {
  char* end = nullptr;
  const long value = std::strtol(field.c_str(), &end, 10);
  if (end == field.c_str() || *end != '\0')
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": column " + col +
                    " is not an integer: '" + field + "'");
  return value;
}

double parse_double(const std::string& field, long line_no, const std::string& col) {
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || !std::isfinite(value))
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": column " + col +
                    " is not a number: '" + field + "'");
  return value;
}

struct RawRow {
  long occasion;
  long facility_id;
  int gender;
  double age;
  double gap;
  IntVector responses;
  long line_no;
};

} // namespace

PanelData parse_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::ParseError, "empty input, header row expected");
  const auto header = split_csv_line(line);
  const std::vector<std::string> fixed = {"subject_id", "occasion", "facility_id",
                                          "gender", "age", "days_since_prev"};
  if (header.size() < fixed.size() + 1)
    throw Error(ErrorCode::SchemaError, "header has too few columns");
  for (std::size_t c = 0; c < fixed.size(); ++c)
    if (header[c] != fixed[c])
      throw Error(ErrorCode::SchemaError,
                  "header column " + std::to_string(c + 1) + " must be '" +
                      fixed[c] + "', found '" + header[c] + "'");
  const int J = static_cast<int>(header.size() - fixed.size());
  for (int j = 0; j < J; ++j) {
    const std::string expected = "item_" + std::to_string(j + 1);
    if (header[fixed.size() + j] != expected)
      throw Error(ErrorCode::SchemaError,
                  "response column " + std::to_string(fixed.size() + j + 1) +
                      " must be '" + expected + "'");
  }

  std::vector<std::string> subject_order;
  std::map<std::string, std::vector<RawRow>> rows_by_subject;
  long line_no = 1;
  long max_facility = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c)
      if (fields[c].empty())
        throw Error(ErrorCode::MissingValue,
                    "line " + std::to_string(line_no) + ": column " + header[c] +
                        " is empty");

    RawRow row;
    row.line_no = line_no;
    row.occasion = parse_long(fields[1], line_no, "occasion");
    row.facility_id = parse_long(fields[2], line_no, "facility_id");
    const long gender = parse_long(fields[3], line_no, "gender");
    row.gender = static_cast<int>(gender);
    row.age = parse_double(fields[4], line_no, "age");
    row.gap = parse_double(fields[5], line_no, "days_since_prev");
    row.responses.resize(J);
    for (int j = 0; j < J; ++j)
      row.responses[j] = static_cast<int>(
          parse_long(fields[fixed.size() + j], line_no, header[fixed.size() + j]));

    if (row.occasion < 1)
      throw Error(ErrorCode::SchemaError,
                  "line " + std::to_string(line_no) + ": occasion must be >= 1");
    if (row.facility_id < 1)
      throw Error(ErrorCode::BadFacility,
                  "line " + std::to_string(line_no) + ": facility_id must be >= 1");
    max_facility = std::max(max_facility, row.facility_id);

    const std::string& id = fields[0];
    auto it = rows_by_subject.find(id);
    if (it == rows_by_subject.end()) {
      subject_order.push_back(id);
      it = rows_by_subject.emplace(id, std::vector<RawRow>{}).first;
    }
    it->second.push_back(std::move(row));
  }
  if (subject_order.empty())
    throw Error(ErrorCode::EmptyPanel, "file contains no data rows");

  const int H = static_cast<int>(max_facility);
  std::vector<SubjectRecord> subjects;
  subjects.reserve(subject_order.size());
  for (const auto& id : subject_order) {
    auto& rows = rows_by_subject[id];
    std::sort(rows.begin(), rows.end(),
              [](const RawRow& a, const RawRow& b) { return a.occasion < b.occasion; });
    SubjectRecord subj;
    subj.subject_id = id;
    subj.gender = rows.front().gender;
    subj.facility = IntVector::Zero(H);
    subj.facility[static_cast<int>(rows.front().facility_id) - 1] = 1;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const RawRow& row = rows[t];
      if (row.occasion != static_cast<long>(t) + 1)
        throw Error(ErrorCode::SchemaError,
                    "subject " + id + ": occasions must run 1.." +
                        std::to_string(rows.size()) + " without gaps (line " +
                        std::to_string(row.line_no) + ")");
      if (row.facility_id != rows.front().facility_id)
        throw Error(ErrorCode::SchemaError,
                    "subject " + id + ": facility changes across occasions");
      if (row.gender != rows.front().gender)
        throw Error(ErrorCode::SchemaError,
                    "subject " + id + ": gender changes across occasions");
      Occasion occ;
      occ.age_years = row.age;
      occ.days_since_prev = row.gap;
      occ.responses = row.responses;
      subj.occasions.push_back(std::move(occ));
    }
    subjects.push_back(std::move(subj));
  }
  return validate_panel(std::move(subjects), J, H);
}

PanelData parse_panel_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return parse_panel_csv(in);
}

void write_panel_csv(const PanelData& panel, std::ostream& out) {
  out << "subject_id,occasion,facility_id,gender,age,days_since_prev";
  for (int j = 1; j <= panel.n_items; ++j) out << ",item_" << j;
  out << "\n";
  char buf[32];
  for (const auto& subj : panel.subjects) {
    const int fac = subj.facility_index() + 1;
    for (int t = 0; t < subj.n_occasions(); ++t) {
      const auto& occ = subj.occasions[t];
      out << subj.subject_id << ',' << (t + 1) << ',' << fac << ','
          << subj.gender << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", occ.age_years);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", occ.days_since_prev);
      out << buf;
      for (int j = 0; j < panel.n_items; ++j) out << ',' << occ.responses[j];
      out << "\n";
    }
  }
}

void write_panel_csv_file(const PanelData& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_panel_csv(panel, out);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

double round6(double x) {
  if (!std::isfinite(x)) return x;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::strtod(buf, nullptr);
}

Json json_num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return round6(x);
}

namespace {

Json json_vector(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(json_num(v[i]));
  return arr;
}

Json json_matrix(const Matrix& m) {
  Json rows = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(json_num(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const Json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

Matrix matrix_from_json(const Json& rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = nr > 0 ? rows[0].size() : 0;
  Matrix m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
  return m;
}

std::string timestamp_utc() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

RangeSpec range_from_json(const Json& j, const std::string& name) {
  RangeSpec spec;
  if (j.contains("fixed")) {
    spec.lo = spec.hi = j["fixed"].get<double>();
  } else if (j.contains("min") && j.contains("max")) {
    spec.lo = j["min"].get<double>();
    spec.hi = j["max"].get<double>();
  } else {
    throw Error(ErrorCode::SchemaError,
                name + " must carry either 'fixed' or 'min'/'max'");
  }
  if (spec.hi < spec.lo)
    throw Error(ErrorCode::SchemaError, name + ": max below min");
  return spec;
}

} // namespace

Json config_to_json(const ModelConfig& config, int n_items, int n_facilities,
                    int n_subjects, const std::vector<std::string>& item_labels) {
  Json j;
  j["k"] = config.k;
  j["model"] = transition_mode_name(config.transition_mode);
  j["init_covariates"] = {{"gender", config.init_covariates.gender},
                          {"age", config.init_covariates.age},
                          {"facility", config.init_covariates.facility}};
  j["trans_covariates"] = {{"gender", config.trans_covariates.gender},
                           {"age", config.trans_covariates.age},
                           {"time_gap", config.trans_covariates.time_gap},
                           {"facility", config.trans_covariates.facility}};
  j["n_items"] = n_items;
  j["n_facilities"] = n_facilities;
  j["n_subjects"] = n_subjects;
  j["item_labels"] = item_labels;
  return j;
}

Json config_to_json(const ModelConfig& config, const PanelData& panel) {
  return config_to_json(config, panel.n_items, panel.n_facilities,
                        panel.n_subjects(), panel.item_labels);
}

ModelConfig config_from_json(const Json& j) {
  ModelConfig config;
  config.k = j.at("k").get<int>();
  const std::string mode = j.at("model").get<std::string>();
  if (mode == "m1")
    config.transition_mode = TransitionMode::UnrestrictedTridiag;
  else if (mode == "m2")
    config.transition_mode = TransitionMode::SharedUpDown;
  else
    throw Error(ErrorCode::SchemaError, "model must be 'm1' or 'm2'");
  if (j.contains("init_covariates")) {
    const Json& c = j["init_covariates"];
    config.init_covariates.gender = c.value("gender", true);
    config.init_covariates.age = c.value("age", true);
    config.init_covariates.facility = c.value("facility", true);
  }
  if (j.contains("trans_covariates")) {
    const Json& c = j["trans_covariates"];
    config.trans_covariates.gender = c.value("gender", true);
    config.trans_covariates.age = c.value("age", true);
    config.trans_covariates.time_gap = c.value("time_gap", true);
    config.trans_covariates.facility = c.value("facility", true);
  }
  return config;
}

Json parameters_to_json(const Parameters& theta, bool quantize) {
  Json j;
  if (quantize) {
    j["beta"] = json_vector(theta.beta);
    Json gamma = Json::array();
    for (const auto& block : theta.gamma) gamma.push_back(json_vector(block));
    j["gamma"] = std::move(gamma);
    j["lambda"] = json_matrix(theta.lambda);
  } else {
    j["beta"] = std::vector<double>(theta.beta.data(),
                                    theta.beta.data() + theta.beta.size());
    Json gamma = Json::array();
    for (const auto& block : theta.gamma)
      gamma.push_back(
          std::vector<double>(block.data(), block.data() + block.size()));
    j["gamma"] = std::move(gamma);
    Json lambda = Json::array();
    for (Index r = 0; r < theta.lambda.rows(); ++r) {
      Json row = Json::array();
      for (Index c = 0; c < theta.lambda.cols(); ++c)
        row.push_back(theta.lambda(r, c));
      lambda.push_back(std::move(row));
    }
    j["lambda"] = std::move(lambda);
  }
  return j;
}

Parameters parameters_from_json(const Json& j, const ModelConfig& config,
                                int n_items, int n_facilities) {
  Parameters theta;
  theta.beta = vector_from_json(j.at("beta"));
  for (const auto& block : j.at("gamma")) theta.gamma.push_back(vector_from_json(block));
  theta.lambda = matrix_from_json(j.at("lambda"));
  check_parameters(theta, config, n_items, n_facilities);
  return theta;
}

SimDesign parse_sim_design(const Json& j) {
  SimDesign design;
  try {
    design.n_subjects = j.at("n_subjects").get<int>();
    design.n_facilities = j.at("n_facilities").get<int>();
    design.n_items = j.at("n_items").get<int>();
    design.config = config_from_json(j);
    design.t_occasions = range_from_json(j.at("t_occasions"), "t_occasions");
    if (j.contains("age_range"))
      design.age_range = range_from_json(j["age_range"], "age_range");
    if (j.contains("gap_days"))
      design.gap_days = range_from_json(j["gap_days"], "gap_days");
    if (j.contains("facility_probs"))
      design.facility_probs = vector_from_json(j["facility_probs"]);
    design.female_prob = j.value("female_prob", 0.5);
    design.seed = j.value("seed", 1ull);
    design.true_params = parameters_from_json(j.at("parameters"), design.config,
                                              design.n_items, design.n_facilities);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("design: ") + e.what());
  }
  return design;
}

SimDesign parse_sim_design_file(const std::string& path) {
  return parse_sim_design(read_json_file(path));
}

Json truth_to_json(const SimDesign& design, const SimResult& result) {
  Json j;
  j["format_version"] = "1";
  j["kind"] = "truth";
  j["seed"] = design.seed;
  j["rng"] = rng_description();
  j["parameters"] = parameters_to_json(design.true_params, false);
  Json states = Json::array();
  for (std::size_t i = 0; i < result.states.size(); ++i)
    states.push_back({{"subject_id", result.panel.subjects[i].subject_id},
                      {"states", result.states[i]}});
  j["states"] = std::move(states);
  return j;
}

Json descriptive_to_json(const DescriptiveScores& scores) {
  Json arr = Json::array();
  for (std::size_t h = 0; h < scores.facilities.size(); ++h) {
    const auto& fac = scores.facilities[h];
    Json row;
    row["facility"] = h + 1;
    row["defined"] = fac.defined;
    row["a_bar"] = fac.defined ? json_num(fac.a_bar) : Json(nullptr);
    row["s"] = fac.defined ? json_num(fac.s) : Json(nullptr);
    row["n_transitions"] = fac.n_transitions;
    arr.push_back(std::move(row));
  }
  return arr;
}

Json facility_scores_to_json(const FacilityScoreReport& report) {
  Json j;
  Json bi = Json::array();
  for (const auto& fac : report.facilities) {
    Json row;
    row["facility"] = fac.facility;
    row["improve"] = json_num(fac.improve);
    row["improve_se"] = json_num(fac.se_improve);
    row["improve_z"] = json_num(fac.z_improve);
    row["improve_p"] = json_num(fac.p_improve);
    row["worsen"] = json_num(fac.worsen);
    row["worsen_se"] = json_num(fac.se_worsen);
    row["worsen_z"] = json_num(fac.z_worsen);
    row["worsen_p"] = json_num(fac.p_worsen);
    row["cov"] = json_matrix(fac.cov2);
    row["ellipse"] = {{"center", Json::array({json_num(fac.ellipse.center[0]),
                                              json_num(fac.ellipse.center[1])})},
                      {"semi_axes", Json::array({json_num(fac.ellipse.semi_axes[0]),
                                                 json_num(fac.ellipse.semi_axes[1])})},
                      {"angle", json_num(fac.ellipse.angle)}};
    row["quadrant"] = fac.quadrant;
    bi.push_back(std::move(row));
  }
  j["bidimensional"] = std::move(bi);

  Json uni = Json::array();
  for (const auto& fac : report.facilities) {
    Json row;
    row["facility"] = fac.facility;
    row["estimate"] = json_num(fac.score);
    row["se"] = json_num(fac.se);
    row["z"] = json_num(fac.z);
    row["p"] = json_num(fac.p);
    row["ci95"] = Json::array({json_num(fac.ci95[0]), json_num(fac.ci95[1])});
    row["rank"] = fac.rank;
    uni.push_back(std::move(row));
  }
  j["unidimensional"] = std::move(uni);
  j["avg_initial_probs"] = json_vector(report.avg_initial_probs);
  return j;
}

Json build_fit_report(const PanelData& panel, const ModelConfig& config,
                      const FitResult& fit_result, const InferenceResult& inference,
                      const FitSettings& settings, double loglik0, double s_value,
                      const DescriptiveScores& descriptive,
                      const Vector& avg_initial_probs,
                      const std::vector<std::vector<int>>& classifications,
                      const Json& invocation) {
  Json j;
  j["format_version"] = "1";
  j["kind"] = "fit_report";
  j["timestamp"] = timestamp_utc();
  j["rng"] = rng_description();
  j["invocation"] = invocation;
  j["config"] = config_to_json(config, panel);

  Json fit_j;
  fit_j["loglik"] = json_num(fit_result.loglik);
  fit_j["loglik0"] = json_num(loglik0);
  fit_j["v"] = fit_result.v;
  fit_j["bic"] = json_num(bic(fit_result.loglik, fit_result.v, panel.n_subjects()));
  fit_j["r2"] = config.k >= 2
                    ? json_num(r_squared(fit_result.loglik, loglik0,
                                         panel.n_subjects(), panel.n_items))
                    : Json(nullptr);
  fit_j["s_index"] = json_num(s_value);
  fit_j["n_iter"] = fit_result.n_iter;
  fit_j["converged"] = fit_result.converged;
  fit_j["seed"] = settings.seed;
  fit_j["n_starts"] = settings.n_starts;
  fit_j["warm_iters"] = settings.warm_iters;
  fit_j["tol"] = settings.tol;
  fit_j["max_iter"] = settings.max_iter;
  Json warm = Json::array();
  for (double ll : fit_result.start_logliks) warm.push_back(json_num(ll));
  fit_j["start_logliks"] = std::move(warm);
  fit_j["diagnostics"] = {{"singular_steps", fit_result.diag.singular_steps},
                          {"empty_state_events", fit_result.diag.empty_state_events},
                          {"gamma_reverts", fit_result.diag.gamma_reverts},
                          {"no_transitions", fit_result.diag.no_transitions}};
  j["fit"] = std::move(fit_j);

  j["parameters"] = parameters_to_json(fit_result.theta_hat, true);

  const auto names =
      parameter_names(config, panel.n_items, panel.n_facilities, panel.item_labels);
  const auto rows = wald_table(inference.estimate, inference.se, names);
  Json table = Json::array();
  for (const auto& row : rows)
    table.push_back({{"name", row.name},
                     {"estimate", json_num(row.estimate)},
                     {"se", json_num(row.se)},
                     {"z", json_num(row.z)},
                     {"p", json_num(row.p)}});
  j["parameter_table"] = std::move(table);

  Json lambda = Json::array();
  for (int jj = 0; jj < panel.n_items; ++jj) {
    Json row;
    row["item"] = panel.item_labels[jj];
    Json probs = Json::array();
    for (int c = 0; c < config.k; ++c)
      probs.push_back(json_num(fit_result.theta_hat.lambda(jj, c)));
    row["probs"] = std::move(probs);
    lambda.push_back(std::move(row));
  }
  j["lambda"] = std::move(lambda);

  Json excluded = Json::array();
  for (std::size_t m = 0; m < inference.free_mask.size(); ++m)
    if (!inference.free_mask[m]) excluded.push_back(names[m]);
  j["inference"] = {{"cov", json_matrix(inference.cov)},
                    {"info_condition", json_num(inference.info_condition)},
                    {"not_pos_definite", inference.not_pos_definite},
                    {"excluded", std::move(excluded)}};

  j["avg_initial_probs"] = json_vector(avg_initial_probs);
  j["scores"] = {{"descriptive", descriptive_to_json(descriptive)},
                 {"bidimensional", nullptr},
                 {"unidimensional", nullptr}};

  Json classification = Json::array();
  for (int i = 0; i < panel.n_subjects(); ++i)
    classification.push_back({{"subject_id", panel.subjects[i].subject_id},
                              {"states", classifications[i]}});
  j["classification"] = std::move(classification);
  return j;
}

Json build_selection_report(const PanelData& panel, const SelectionReport& report,
                            const Json& invocation) {
  Json j;
  j["format_version"] = "1";
  j["kind"] = "selection_report";
  j["timestamp"] = timestamp_utc();
  j["invocation"] = invocation;
  j["n_subjects"] = panel.n_subjects();
  j["n_items"] = panel.n_items;
  j["n_facilities"] = panel.n_facilities;
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    Json r;
    r["label"] = row.label;
    r["k"] = row.k;
    r["v"] = row.v;
    r["ok"] = row.ok;
    if (row.ok) {
      r["loglik"] = json_num(row.loglik);
      r["bic"] = json_num(row.bic);
      r["r2"] = json_num(row.r2);
      r["s_index"] = json_num(row.s);
      r["converged"] = row.fit.converged;
    } else {
      r["error"] = row.error;
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  j["chosen_model"] = report.chosen_model;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

void write_states_csv(const PanelData& panel,
                      const std::vector<std::vector<int>>& labels,
                      std::ostream& out) {
  out << "subject_id,occasion,state\n";
  for (int i = 0; i < panel.n_subjects(); ++i)
    for (std::size_t t = 0; t < labels[i].size(); ++t)
      out << panel.subjects[i].subject_id << ',' << (t + 1) << ',' << labels[i][t]
          << "\n";
}

} // namespace lmpanel
