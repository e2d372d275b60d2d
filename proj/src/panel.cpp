#include "lmpanel/panel.hpp"

#include <cmath>

#include "lmpanel/errors.hpp"

namespace lmpanel {

int SubjectRecord::facility_index() const {
  int idx = -1;
  for (Index h = 0; h < facility.size(); ++h) {
    if (facility[h] == 1) {
      if (idx >= 0) return -1;
      idx = static_cast<int>(h);
    } else if (facility[h] != 0) {
      return -1;
    }
  }
  return idx;
}

long PanelData::total_occasions() const {
  long total = 0;
  for (const auto& s : subjects) total += s.n_occasions();
  return total;
}

long PanelData::total_transitions() const {
  long total = 0;
  for (const auto& s : subjects) total += s.n_occasions() - 1;
  return total;
}

std::vector<std::string> default_item_labels(int n_items) {
  if (n_items == 9) {
    return {"CC1", "CC2", "CC3", "ADL1", "ADL2", "ADL3", "ADL4", "SC1", "SC2"};
  }
  std::vector<std::string> labels;
  labels.reserve(n_items);
  for (int j = 1; j <= n_items; ++j) labels.push_back("item_" + std::to_string(j));
  return labels;
}

PanelData validate_panel(std::vector<SubjectRecord> subjects, int n_items,
                         int n_facilities, std::vector<std::string> item_labels) {
  if (subjects.empty()) throw Error(ErrorCode::EmptyPanel, "panel has no subjects");
  if (n_items < 1) throw Error(ErrorCode::SchemaError, "n_items must be >= 1");
  if (n_facilities < 1) throw Error(ErrorCode::SchemaError, "n_facilities must be >= 1");

  for (auto& subj : subjects) {
    const std::string& id = subj.subject_id;
    if (subj.occasions.empty())
      throw Error(ErrorCode::SchemaError, "subject " + id + " has no occasions");
    if (subj.gender != 0 && subj.gender != 1)
      throw Error(ErrorCode::SchemaError, "subject " + id + " has gender outside {0,1}");
    if (subj.facility.size() != n_facilities || subj.facility_index() < 0)
      throw Error(ErrorCode::BadFacility,
                  "subject " + id + " facility assignment is not one-hot over H=" +
                      std::to_string(n_facilities));

    double prev_age = -1.0;
    for (std::size_t t = 0; t < subj.occasions.size(); ++t) {
      auto& occ = subj.occasions[t];
      if (occ.responses.size() != n_items)
        throw Error(ErrorCode::MissingValue,
                    "subject " + id + " occasion " + std::to_string(t + 1) + " has " +
                        std::to_string(occ.responses.size()) + " responses, expected " +
                        std::to_string(n_items));
      for (Index j = 0; j < occ.responses.size(); ++j) {
        const int y = occ.responses[j];
        if (y != 0 && y != 1)
          throw Error(ErrorCode::NonBinaryResponse,
                      "subject " + id + " occasion " + std::to_string(t + 1) + " item " +
                          std::to_string(j + 1) + " has value " + std::to_string(y));
      }
      if (!std::isfinite(occ.age_years) || !std::isfinite(occ.days_since_prev))
        throw Error(ErrorCode::MissingValue,
                    "subject " + id + " occasion " + std::to_string(t + 1) +
                        " has a non-finite covariate");
      if (t == 0) {
        occ.days_since_prev = 0.0; // never read by the model
      } else if (occ.days_since_prev < 0.0) {
        throw Error(ErrorCode::SchemaError,
                    "subject " + id + " occasion " + std::to_string(t + 1) +
                        " has negative days_since_prev");
      }
      if (occ.age_years < prev_age)
        throw Error(ErrorCode::SchemaError,
                    "subject " + id + " age decreases at occasion " + std::to_string(t + 1));
      prev_age = occ.age_years;
    }
  }

  PanelData panel;
  panel.subjects = std::move(subjects);
  panel.n_items = n_items;
  panel.n_facilities = n_facilities;
  panel.item_labels = item_labels.empty() ? default_item_labels(n_items)
                                          : std::move(item_labels);
  if (static_cast<int>(panel.item_labels.size()) != n_items)
    throw Error(ErrorCode::SchemaError, "item_labels length does not match n_items");
  return panel;
}

PanelData validate_panel(PanelData panel) {
  return validate_panel(std::move(panel.subjects), panel.n_items, panel.n_facilities,
                        std::move(panel.item_labels));
}

} // namespace lmpanel
