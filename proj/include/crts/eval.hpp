#pragma once

// Three-valued evaluation of expression graphs and patient matching.
//
// Patient records are usually incomplete, so criteria evaluate into strong
// Kleene logic: AND is minimum and OR is maximum under
// False < Unknown < True, NOT swaps True/False and fixes Unknown. A fact
// missing from an open-world record is Unknown; under a closed-world record
// it is False (except lab values, whose absence is never evidence).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crts/expr.hpp"
#include "crts/model.hpp"

namespace crts {

enum class TruthValue { False = 0, Unknown = 1, True = 2 };

inline TruthValue tv_and(TruthValue a, TruthValue b) { return a < b ? a : b; }
inline TruthValue tv_or(TruthValue a, TruthValue b) { return a > b ? a : b; }
inline TruthValue tv_not(TruthValue a) {
  if (a == TruthValue::True) return TruthValue::False;
  if (a == TruthValue::False) return TruthValue::True;
  return TruthValue::Unknown;
}
const char* truth_token(TruthValue v);  // "True" | "False" | "Unknown"

enum class FactStatus { Current, Past };

struct PatientDemographics {
  std::optional<double> age;  // years
  std::optional<std::string> gender;
  std::optional<std::string> ethnicity;
  std::optional<std::string> country;
  friend bool operator==(const PatientDemographics&, const PatientDemographics&) = default;
};

// negated marks an explicit "does not have" assertion.
struct ConditionEntry {
  std::optional<std::string> cui;
  std::optional<std::string> name;
  FactStatus status = FactStatus::Current;
  bool negated = false;
  friend bool operator==(const ConditionEntry&, const ConditionEntry&) = default;
};

struct InterventionEntry {
  std::optional<std::string> cui;
  std::optional<std::string> name;
  FactStatus status = FactStatus::Current;
  friend bool operator==(const InterventionEntry&, const InterventionEntry&) = default;
};

struct LabObservation {
  std::string key;
  double value = 0;
  std::optional<std::string> unit;
  std::optional<std::string> observed_at;
  friend bool operator==(const LabObservation&, const LabObservation&) = default;
};

struct PatientRecord {
  PatientDemographics demographics;
  std::vector<ConditionEntry> conditions;
  std::vector<InterventionEntry> interventions;
  std::vector<LabObservation> labs;
  bool closed_world = false;
  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct MatchConfig {
  std::optional<bool> closed_world_override;
  bool unit_strict = true;
};

struct TraceEntry {
  BlockId block_id;
  TruthValue value = TruthValue::Unknown;
  std::string reason;
};

struct SuggestionItem {
  BlockId id;
  std::string name;
  std::optional<std::string> intervention_type;
  std::optional<DictionaryRef> concept_ref;
  std::optional<std::string> modifier_text;
  std::optional<std::string> grade;
};

struct MatchResult {
  TruthValue verdict = TruthValue::Unknown;
  std::vector<TraceEntry> trace;                 // one entry per population leaf
  std::vector<SuggestionItem> suggestion_summary;  // filled unless verdict is False
  // COMPARED_TO wiring from the suggestion, reporting only: (left, right) ids.
  std::vector<std::pair<BlockId, BlockId>> comparisons;
};

// Per-criterion truth against a patient record.
TruthValue eval_criterion(const Demographics& block, const PatientRecord& p, const MatchConfig& cfg);
TruthValue eval_criterion(const Disorder& block, const PatientRecord& p, const MatchConfig& cfg);
TruthValue eval_criterion(const Intervention& block, const PatientRecord& p, const MatchConfig& cfg);
TruthValue eval_criterion(const LabCriterion& block, const PatientRecord& p, const MatchConfig& cfg);

// Precondition: criterion.key and obs.key agree under case-folding.
TruthValue compare_lab(const LabCriterion& criterion, const LabObservation& obs,
                       const MatchConfig& cfg);

// Bottom-up Kleene fold. Empty graph evaluates True (vacuous conjunction).
// Throws Error{MISSING_LEAF} when a leaf has no value and
// Error{COMPARISON_NODE} when the graph contains COMPARED_TO.
TruthValue eval_graph(const ExprGraph& graph, const std::map<BlockId, TruthValue>& leaf_values);

// Evaluates the population against the patient and folds the section graph.
// Suggestion and Outcome are never matched; the suggestion is reported when
// the verdict is True or Unknown. Throws Error{INVALID_DOCUMENT} if rec does
// not validate.
MatchResult match_recommendation(const Recommendation& rec, const PatientRecord& patient,
                                 const MatchConfig& cfg = {});

// "Applies" | "Does not apply" | "Insufficient data"
const char* verdict_text(TruthValue v);

}  // namespace crts
