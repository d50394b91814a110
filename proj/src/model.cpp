#include "crts/model.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "crts/util.hpp"

namespace crts {

const char* operator_token(Operator op) {
  switch (op) {
    case Operator::LT: return "<";
    case Operator::LE: return "<=";
    case Operator::GT: return ">";
    case Operator::GE: return ">=";
    case Operator::EQ: return "=";
    case Operator::NE: return "!=";
    case Operator::InRange: return "in";
  }
  return "=";
}

std::optional<Operator> operator_from_token(std::string_view t) {
  if (t == "<") return Operator::LT;
  if (t == "<=" || t == "\xe2\x89\xa4") return Operator::LE;  // U+2264
  if (t == ">") return Operator::GT;
  if (t == ">=" || t == "\xe2\x89\xa5") return Operator::GE;  // U+2265
  if (t == "=" || t == "==") return Operator::EQ;
  if (t == "!=") return Operator::NE;
  if (t == "in") return Operator::InRange;
  return std::nullopt;
}

const char* time_period_token(TimePeriod tp) {
  switch (tp) {
    case TimePeriod::Current: return "current";
    case TimePeriod::Past: return "past";
    case TimePeriod::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::optional<TimePeriod> time_period_from_token(std::string_view t) {
  std::string s = to_lower(t);
  if (s == "current") return TimePeriod::Current;
  if (s == "past") return TimePeriod::Past;
  if (s == "unspecified") return TimePeriod::Unspecified;
  return std::nullopt;
}

const char* expr_type_token(ExprType t) {
  switch (t) {
    case ExprType::And: return "AND";
    case ExprType::Or: return "OR";
    case ExprType::ComparedTo: return "COMPARED_TO";
  }
  return "AND";
}

std::optional<ExprType> expr_type_from_token(std::string_view t) {
  std::string s = to_lower(t);
  if (s == "and") return ExprType::And;
  if (s == "or") return ExprType::Or;
  if (s == "compared_to") return ExprType::ComparedTo;
  return std::nullopt;
}

namespace {

class Validator {
 public:
  explicit Validator(const Recommendation& rec) : rec_(rec) {}

  ValidationReport run() {
    if (!is_token(rec_.doc_id)) error("BAD_ID", "recommendation.id", "doc id must be a non-empty token");
    if (rec_.source) {
      if (trim(rec_.source->origin).empty())
        error("EMPTY_FIELD", "source.origin", "source origin must be non-empty");
      for (size_t i = 0; i < rec_.source->citations.size(); ++i)
        if (trim(rec_.source->citations[i]).empty())
          error("EMPTY_FIELD", "source.citation[" + std::to_string(i) + "]", "citation must be non-empty");
    }

    check_population();
    check_suggestion();
    check_outcome();
    report_duplicates();

    if (population_block_count_ == 0 && suggestion_block_count_ == 0)
      error("EMPTY_DOCUMENT", "recommendation",
            "document has no population and no suggestion blocks");

    return std::move(report_);
  }

 private:
  void check_population() {
    const auto& pop = rec_.population;
    std::set<BlockId> section_ids;

    for (size_t i = 0; i < pop.demographics.size(); ++i) {
      const auto& d = pop.demographics[i];
      std::string p = "population.demographics[" + std::to_string(i) + "]";
      record_id(d.id, p + ".id", section_ids);
      ++population_block_count_;
      if (!d.age && !d.gender && !d.ethnicity && !d.country)
        error("EMPTY_DEMOGRAPHICS", p, "demographics block carries no attribute");
      if (d.age) check_age(*d.age, p + ".age");
    }
    for (size_t i = 0; i < pop.disorders.size(); ++i) {
      const auto& d = pop.disorders[i];
      std::string p = "population.disorder[" + std::to_string(i) + "]";
      record_id(d.id, p + ".id", section_ids);
      ++population_block_count_;
      if (trim(d.name).empty()) error("EMPTY_FIELD", p + ".name", "disorder name must be non-empty");
      if (d.concept_ref) check_concept(*d.concept_ref, p);
    }
    for (size_t i = 0; i < pop.interventions.size(); ++i) {
      check_intervention(pop.interventions[i], "population.intervention[" + std::to_string(i) + "]",
                         section_ids);
      ++population_block_count_;
    }
    for (size_t i = 0; i < pop.lab_criteria.size(); ++i) {
      check_lab(pop.lab_criteria[i], "population.labResults[" + std::to_string(i) + "]", section_ids);
      ++population_block_count_;
    }
    check_exprs(pop.exprs, "population", section_ids, /*allow_compared_to=*/false);
  }

  void check_suggestion() {
    const auto& sug = rec_.suggestion;
    std::set<BlockId> section_ids;
    for (size_t i = 0; i < sug.interventions.size(); ++i) {
      check_intervention(sug.interventions[i], "suggestion.intervention[" + std::to_string(i) + "]",
                         section_ids);
      ++suggestion_block_count_;
    }
    check_exprs(sug.exprs, "suggestion", section_ids, /*allow_compared_to=*/true);
  }

  void check_outcome() {
    const auto& out = rec_.outcome;
    std::set<BlockId> section_ids;
    for (size_t i = 0; i < out.general.size(); ++i) {
      const auto& g = out.general[i];
      std::string p = "outcome.generalOutcome[" + std::to_string(i) + "]";
      record_id(g.id, p + ".id", section_ids);
      if (trim(g.outcome_text).empty())
        error("EMPTY_FIELD", p + ".outcomeText", "outcome text must be non-empty");
    }
    for (size_t i = 0; i < out.lab_criteria.size(); ++i)
      check_lab(out.lab_criteria[i], "outcome.labResults[" + std::to_string(i) + "]", section_ids);
  }

  void check_intervention(const Intervention& iv, const std::string& p, std::set<BlockId>& ids) {
    record_id(iv.id, p + ".id", ids);
    if (trim(iv.name).empty()) error("EMPTY_FIELD", p + ".name", "intervention name must be non-empty");
    if (iv.intervention_type && trim(*iv.intervention_type).empty())
      error("EMPTY_FIELD", p + ".type", "intervention type must be non-empty when present");
    if (iv.concept_ref) check_concept(*iv.concept_ref, p);
    if (iv.grade && trim(*iv.grade).empty())
      error("EMPTY_FIELD", p + ".grade", "grade must be non-empty when present");
  }

  void check_lab(const LabCriterion& lab, const std::string& p, std::set<BlockId>& ids) {
    record_id(lab.id, p + ".id", ids);
    if (trim(lab.key).empty()) error("EMPTY_FIELD", p + ".key", "lab key must be non-empty");
    check_operator_value(lab.op, lab.value, p);
  }

  void check_age(const AgeConstraint& age, const std::string& p) {
    check_operator_value(age.op, age.value, p);
    if (is_range(age.value)) {
      const auto& r = std::get<NumericRange>(age.value);
      if (r.low < 0) error("BAD_RANGE", p, "age must be non-negative");
    } else if (std::get<double>(age.value) < 0) {
      error("BAD_RANGE", p, "age must be non-negative");
    }
  }

  void check_operator_value(Operator op, const NumericValue& value, const std::string& p) {
    if ((op == Operator::InRange) != is_range(value))
      error("OPERATOR_VALUE_MISMATCH", p,
            "operator 'in' requires a range value and vice versa");
    if (is_range(value)) {
      const auto& r = std::get<NumericRange>(value);
      if (r.low > r.high) error("BAD_RANGE", p, "range low exceeds high");
    }
  }

  void check_concept(const DictionaryRef& ref, const std::string& p) {
    if (trim(ref.dictionary).empty())
      error("EMPTY_FIELD", p + ".dictionary", "dictionary name must be non-empty");
    if (trim(ref.dict_id).empty())
      error("EMPTY_FIELD", p + ".dictId", "dictionary id must be non-empty");
    else if (ref.dictionary == "UMLS" && !is_cui_shape(ref.dict_id))
      warning("BAD_CUI_SHAPE", p + ".dictId",
              "'" + ref.dict_id + "' does not look like a UMLS CUI (C followed by 7 digits)");
  }

  static bool is_cui_shape(const std::string& s) {
    if (s.size() != 8 || s[0] != 'C') return false;
    return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
  }

  void check_exprs(const std::vector<ExprNode>& exprs, const std::string& section,
                   std::set<BlockId>& section_ids, bool allow_compared_to) {
    // Outputs are referenceable from any expression in the section, in any
    // order, as long as the result stays acyclic.
    for (size_t i = 0; i < exprs.size(); ++i) {
      std::string p = section + ".expr[" + std::to_string(i) + "]";
      record_id(exprs[i].output, p + ".outputConceptId", section_ids);
    }
    for (size_t i = 0; i < exprs.size(); ++i) {
      const auto& e = exprs[i];
      std::string p = section + ".expr[" + std::to_string(i) + "]";
      if (e.expr_type == ExprType::ComparedTo) {
        if (!allow_compared_to)
          error("COMPARISON_IN_POPULATION", p, "COMPARED_TO is not allowed in population expressions");
        if (e.inputs.size() != 2)
          error("BAD_ARITY", p, "COMPARED_TO takes exactly two inputs");
      } else if (e.inputs.size() < 2) {
        error("BAD_ARITY", p, "AND/OR take at least two inputs");
      }
      for (size_t j = 0; j < e.inputs.size(); ++j) {
        if (!section_ids.count(e.inputs[j]))
          error("DANGLING_REF", p + ".inputConceptId[" + std::to_string(j) + "]",
                "input '" + e.inputs[j] + "' does not name a block or expression output in this section");
      }
    }
    if (has_cycle(exprs))
      error("CYCLE_DETECTED", section + ".expr", "expression outputs form a cycle");
  }

  static bool has_cycle(const std::vector<ExprNode>& exprs) {
    std::map<BlockId, size_t> by_output;
    for (size_t i = 0; i < exprs.size(); ++i) by_output[exprs[i].output] = i;
    std::vector<int> state(exprs.size(), 0);  // 0 unseen, 1 on stack, 2 done
    // Iterative DFS; inputs that are plain blocks are terminal.
    std::vector<std::pair<size_t, size_t>> stack;
    for (size_t start = 0; start < exprs.size(); ++start) {
      if (state[start]) continue;
      stack.push_back({start, 0});
      state[start] = 1;
      while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child >= exprs[node].inputs.size()) {
          state[node] = 2;
          stack.pop_back();
          continue;
        }
        auto it = by_output.find(exprs[node].inputs[child++]);
        if (it == by_output.end()) continue;
        if (state[it->second] == 1) return true;
        if (state[it->second] == 0) {
          state[it->second] = 1;
          stack.push_back({it->second, 0});
        }
      }
    }
    return false;
  }

  void record_id(const BlockId& id, const std::string& path, std::set<BlockId>& section_ids) {
    if (!is_token(id)) {
      error("BAD_ID", path, "id must be a non-empty token without whitespace");
      return;
    }
    section_ids.insert(id);
    id_paths_[id].push_back(path);
  }

  void report_duplicates() {
    // Flag every occurrence of a shared id: one error per offending path.
    for (const auto& [id, paths] : id_paths_) {
      if (paths.size() < 2) continue;
      for (const auto& p : paths)
        error("DUPLICATE_ID", p, "id '" + id + "' is used more than once in this document");
    }
  }

  void error(const char* code, const std::string& path, const std::string& msg) {
    report_.errors.push_back({code, path, msg});
  }
  void warning(const char* code, const std::string& path, const std::string& msg) {
    report_.warnings.push_back({code, path, msg});
  }

  const Recommendation& rec_;
  ValidationReport report_;
  std::map<BlockId, std::vector<std::string>> id_paths_;
  size_t population_block_count_ = 0;
  size_t suggestion_block_count_ = 0;
};

}  // namespace

ValidationReport validate(const Recommendation& rec) { return Validator(rec).run(); }

}  // namespace crts
