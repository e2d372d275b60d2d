#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmpanel/config.hpp"
#include "lmpanel/em.hpp"
#include "lmpanel/inference.hpp"
#include "lmpanel/panel.hpp"
#include "lmpanel/scoring.hpp"
#include "lmpanel/selection.hpp"
#include "lmpanel/simulate.hpp"

namespace lmpanel {

using Json = nlohmann::ordered_json;

// Long-format panel CSV: subject_id, occasion, facility_id, gender, age,
// days_since_prev, item_1..item_J. Occasions must index 1..T_i per subject.
PanelData parse_panel_csv(std::istream& in);
PanelData parse_panel_csv_file(const std::string& path);
void write_panel_csv(const PanelData& panel, std::ostream& out);
void write_panel_csv_file(const PanelData& panel, const std::string& path);

// Report numbers are written at 6 significant digits; non-finite values
// serialize as null.
double round6(double x);
Json json_num(double x);

Json config_to_json(const ModelConfig& config, const PanelData& panel);
Json config_to_json(const ModelConfig& config, int n_items, int n_facilities,
                    int n_subjects, const std::vector<std::string>& item_labels);
ModelConfig config_from_json(const Json& j);

Json parameters_to_json(const Parameters& theta, bool quantize);
Parameters parameters_from_json(const Json& j, const ModelConfig& config,
                                int n_items, int n_facilities);

SimDesign parse_sim_design(const Json& j);
SimDesign parse_sim_design_file(const std::string& path);
Json truth_to_json(const SimDesign& design, const SimResult& result);

Json descriptive_to_json(const DescriptiveScores& scores);
Json facility_scores_to_json(const FacilityScoreReport& report);

// Full fit report: config, fit indices, Wald table, lambda matrix,
// descriptive scores, covariance and classifications; score sections are
// null until the score step fills them.
Json build_fit_report(const PanelData& panel, const ModelConfig& config,
                      const FitResult& fit_result, const InferenceResult& inference,
                      const FitSettings& settings, double loglik0, double s_value,
                      const DescriptiveScores& descriptive,
                      const Vector& avg_initial_probs,
                      const std::vector<std::vector<int>>& classifications,
                      const Json& invocation);

Json build_selection_report(const PanelData& panel, const SelectionReport& report,
                            const Json& invocation);

Json read_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);

void write_states_csv(const PanelData& panel,
                      const std::vector<std::vector<int>>& labels,
                      std::ostream& out);

} // namespace lmpanel
