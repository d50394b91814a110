#pragma once

// Typed data model for structured clinical recommendations: a document is a
// Population (who it targets), a Suggestion (what is advised) and an Outcome
// (what following the advice is expected to achieve), each built from typed
// concept blocks wired together by AND/OR/COMPARED_TO expressions.

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace crts {

// Block ids are document-unique tokens. Numeric strings are the common case
// but any whitespace-free token is accepted.
using BlockId = std::string;

enum class TimePeriod { Current, Past, Unspecified };

enum class Operator { LT, LE, GT, GE, EQ, NE, InRange };

enum class ExprType { And, Or, ComparedTo };

// Inclusive on both endpoints.
struct NumericRange {
  double low = 0;
  double high = 0;
  friend bool operator==(const NumericRange&, const NumericRange&) = default;
};

using NumericValue = std::variant<double, NumericRange>;

inline bool is_range(const NumericValue& v) { return std::holds_alternative<NumericRange>(v); }

// Reference into a concept dictionary, e.g. {"UMLS", "C0007930"}.
struct DictionaryRef {
  std::string dictionary;
  std::string dict_id;
  friend bool operator==(const DictionaryRef&, const DictionaryRef&) = default;
};

struct AgeConstraint {
  Operator op = Operator::EQ;
  NumericValue value = 0.0;  // years
  friend bool operator==(const AgeConstraint&, const AgeConstraint&) = default;
};

// At least one of the four attributes must be present.
struct Demographics {
  BlockId id;
  std::optional<AgeConstraint> age;
  std::optional<std::string> gender;
  std::optional<std::string> ethnicity;
  std::optional<std::string> country;
  friend bool operator==(const Demographics&, const Demographics&) = default;
};

struct Disorder {
  BlockId id;
  std::string name;
  std::optional<DictionaryRef> concept_ref;
  TimePeriod time_period = TimePeriod::Unspecified;
  bool negation = false;  // true: the population must NOT have the disorder
  friend bool operator==(const Disorder&, const Disorder&) = default;
};

struct Intervention {
  BlockId id;
  std::string name;
  std::optional<std::string> intervention_type;  // e.g. "Chemicals & Drugs"
  std::optional<DictionaryRef> concept_ref;
  TimePeriod time_period = TimePeriod::Unspecified;
  std::optional<std::string> modifier_text;  // verbatim hedge, e.g. "was taking"
  std::optional<std::string> grade;          // evidence grade token, e.g. "2B"
  friend bool operator==(const Intervention&, const Intervention&) = default;
};

// op == InRange if and only if value holds a range.
struct LabCriterion {
  BlockId id;
  std::string key;  // result name, e.g. "LVEF"
  NumericValue value = 0.0;
  Operator op = Operator::EQ;
  std::optional<std::string> unit;
  std::optional<std::string> temporal;
  friend bool operator==(const LabCriterion&, const LabCriterion&) = default;
};

struct GeneralOutcome {
  BlockId id;
  std::string outcome_text;
  friend bool operator==(const GeneralOutcome&, const GeneralOutcome&) = default;
};

// Joins previously defined blocks (or other expression outputs) under one
// output id. AND/OR take two or more inputs, COMPARED_TO exactly two.
struct ExprNode {
  ExprType expr_type = ExprType::And;
  std::vector<BlockId> inputs;
  BlockId output;
  friend bool operator==(const ExprNode&, const ExprNode&) = default;
};

struct Population {
  std::vector<Demographics> demographics;
  std::vector<Disorder> disorders;
  std::vector<Intervention> interventions;
  std::vector<LabCriterion> lab_criteria;
  std::vector<ExprNode> exprs;  // COMPARED_TO not allowed here
  friend bool operator==(const Population&, const Population&) = default;
};

struct Suggestion {
  std::vector<Intervention> interventions;
  std::vector<ExprNode> exprs;
  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

struct Outcome {
  std::vector<GeneralOutcome> general;
  std::vector<LabCriterion> lab_criteria;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct Source {
  std::string origin;  // e.g. "UpToDate"
  std::vector<std::string> citations;
  friend bool operator==(const Source&, const Source&) = default;
};

struct Recommendation {
  std::string doc_id;
  std::optional<std::string> source_text;  // the verbatim recommendation sentence
  std::optional<Source> source;
  Population population;
  Suggestion suggestion;
  Outcome outcome;
  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Issue {
  std::string code;
  std::string path;  // e.g. "population.disorder[0].name"
  std::string message;
  friend bool operator==(const Issue&, const Issue&) = default;
};

// A document is valid iff errors is empty. Violations are data, not failures.
struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;
  bool valid() const { return errors.empty(); }
  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

// Error codes: BAD_ID, DUPLICATE_ID, DANGLING_REF, CYCLE_DETECTED,
// EMPTY_DOCUMENT, EMPTY_FIELD, EMPTY_DEMOGRAPHICS, BAD_RANGE,
// OPERATOR_VALUE_MISMATCH, BAD_ARITY, COMPARISON_IN_POPULATION.
// Warning codes: BAD_CUI_SHAPE.
ValidationReport validate(const Recommendation& rec);

// Wire-token helpers shared by the XML and JSON codecs.
const char* operator_token(Operator op);                          // "<=", "in", ...
std::optional<Operator> operator_from_token(std::string_view t);  // accepts "≤"/"≥" too
const char* time_period_token(TimePeriod tp);
std::optional<TimePeriod> time_period_from_token(std::string_view t);
const char* expr_type_token(ExprType t);
std::optional<ExprType> expr_type_from_token(std::string_view t);

}  // namespace crts
