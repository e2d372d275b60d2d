#pragma once

#include <string>
#include <vector>

#include "lmpanel/types.hpp"

namespace lmpanel {

// One questionnaire administration. days_since_prev is 0 on the first
// occasion and is never read by any model equation.
struct Occasion {
  double age_years = 0.0;
  double days_since_prev = 0.0;
  IntVector responses; // length J, each entry 0 or 1
};

struct SubjectRecord {
  std::string subject_id;
  int gender = 0;      // 1 = female, 0 = male
  IntVector facility;  // one-hot over H facilities
  std::vector<Occasion> occasions;

  int n_occasions() const { return static_cast<int>(occasions.size()); }
  // 0-based index of the hosting facility; -1 if not one-hot.
  int facility_index() const;
};

struct PanelData {
  std::vector<SubjectRecord> subjects;
  int n_items = 0;      // J
  int n_facilities = 0; // H
  std::vector<std::string> item_labels;

  int n_subjects() const { return static_cast<int>(subjects.size()); }
  long total_occasions() const;
  long total_transitions() const; // sum of (T_i - 1)
};

// CC1..SC2 for J = 9, generic labels otherwise.
std::vector<std::string> default_item_labels(int n_items);

// Checks every invariant, normalizes the first-occasion gap to 0 and
// fills in default item labels. Idempotent.
PanelData validate_panel(std::vector<SubjectRecord> subjects, int n_items,
                         int n_facilities,
                         std::vector<std::string> item_labels = {});

PanelData validate_panel(PanelData panel);

} // namespace lmpanel
