#include "crts/eval.hpp"

#include <algorithm>

#include "crts/error.hpp"
#include "crts/util.hpp"

namespace crts {

const char* truth_token(TruthValue v) {
  switch (v) {
    case TruthValue::True: return "True";
    case TruthValue::False: return "False";
    case TruthValue::Unknown: return "Unknown";
  }
  return "Unknown";
}

const char* verdict_text(TruthValue v) {
  switch (v) {
    case TruthValue::True: return "Applies";
    case TruthValue::False: return "Does not apply";
    case TruthValue::Unknown: return "Insufficient data";
  }
  return "Insufficient data";
}

namespace {

bool closed_world(const PatientRecord& p, const MatchConfig& cfg) {
  return cfg.closed_world_override.value_or(p.closed_world);
}

// Concept identity: dictionary ids win when both sides have one; otherwise
// fall back to case-folded name equality. No synonym expansion.
bool concept_matches(const std::optional<DictionaryRef>& block_concept,
                     const std::string& block_name, const std::optional<std::string>& entry_cui,
                     const std::optional<std::string>& entry_name) {
  if (block_concept && entry_cui)
    return normalize_token(block_concept->dict_id) == normalize_token(*entry_cui);
  if (entry_name && !block_name.empty())
    return normalize_token(block_name) == normalize_token(*entry_name);
  return false;
}

// Exact-status match: a Past criterion needs a past-status entry; a current
// condition is not inferred to have held in the past. Unspecified takes both.
bool status_matches(TimePeriod wanted, FactStatus status) {
  switch (wanted) {
    case TimePeriod::Current: return status == FactStatus::Current;
    case TimePeriod::Past: return status == FactStatus::Past;
    case TimePeriod::Unspecified: return true;
  }
  return true;
}

bool number_satisfies(double observed, Operator op, const NumericValue& value) {
  if (op == Operator::InRange) {
    const auto& r = std::get<NumericRange>(value);
    return observed >= r.low && observed <= r.high;
  }
  double threshold = std::get<double>(value);
  switch (op) {
    case Operator::LT: return observed < threshold;
    case Operator::LE: return observed <= threshold;
    case Operator::GT: return observed > threshold;
    case Operator::GE: return observed >= threshold;
    case Operator::EQ: return observed == threshold;
    case Operator::NE: return observed != threshold;
    default: return false;
  }
}

TruthValue from_bool(bool b) { return b ? TruthValue::True : TruthValue::False; }

}  // namespace

TruthValue eval_criterion(const Demographics& block, const PatientRecord& p,
                          const MatchConfig& cfg) {
  (void)cfg;
  TruthValue acc = TruthValue::True;
  if (block.age) {
    TruthValue t = p.demographics.age
                       ? from_bool(number_satisfies(*p.demographics.age, block.age->op, block.age->value))
                       : TruthValue::Unknown;
    acc = tv_and(acc, t);
  }
  auto check = [&](const std::optional<std::string>& wanted, const std::optional<std::string>& have) {
    if (!wanted) return;
    TruthValue t = have ? from_bool(normalize_token(*wanted) == normalize_token(*have))
                        : TruthValue::Unknown;
    acc = tv_and(acc, t);
  };
  check(block.gender, p.demographics.gender);
  check(block.ethnicity, p.demographics.ethnicity);
  check(block.country, p.demographics.country);
  return acc;
}

TruthValue eval_criterion(const Disorder& block, const PatientRecord& p, const MatchConfig& cfg) {
  // A matching positive entry asserts presence; a matching negated entry
  // asserts absence; no entry is Unknown (open world) or False (closed).
  TruthValue base = closed_world(p, cfg) ? TruthValue::False : TruthValue::Unknown;
  for (const auto& entry : p.conditions) {
    if (!concept_matches(block.concept_ref, block.name, entry.cui, entry.name)) continue;
    if (!status_matches(block.time_period, entry.status)) continue;
    base = entry.negated ? TruthValue::False : TruthValue::True;
    if (base == TruthValue::True) break;
  }
  return block.negation ? tv_not(base) : base;
}

TruthValue eval_criterion(const Intervention& block, const PatientRecord& p,
                          const MatchConfig& cfg) {
  TruthValue base = closed_world(p, cfg) ? TruthValue::False : TruthValue::Unknown;
  for (const auto& entry : p.interventions) {
    if (!concept_matches(block.concept_ref, block.name, entry.cui, entry.name)) continue;
    if (!status_matches(block.time_period, entry.status)) continue;
    return TruthValue::True;
  }
  return base;
}

TruthValue compare_lab(const LabCriterion& criterion, const LabObservation& obs,
                       const MatchConfig& cfg) {
  if (criterion.unit && obs.unit && normalize_unit(*criterion.unit) != normalize_unit(*obs.unit) &&
      cfg.unit_strict)
    return TruthValue::Unknown;
  return from_bool(number_satisfies(obs.value, criterion.op, criterion.value));
}

TruthValue eval_criterion(const LabCriterion& block, const PatientRecord& p,
                          const MatchConfig& cfg) {
  // An unmeasured value is never evidence, even under a closed world.
  std::string key = normalize_token(block.key);
  TruthValue acc = TruthValue::Unknown;
  bool any = false;
  for (const auto& obs : p.labs) {
    if (normalize_token(obs.key) != key) continue;
    TruthValue t = compare_lab(block, obs, cfg);
    acc = any ? tv_or(acc, t) : t;
    any = true;
  }
  return any ? acc : TruthValue::Unknown;
}

TruthValue eval_graph(const ExprGraph& graph, const std::map<BlockId, TruthValue>& leaf_values) {
  if (graph.empty()) return TruthValue::True;  // vacuous conjunction
  std::vector<TruthValue> memo(graph.nodes.size(), TruthValue::Unknown);
  std::vector<char> done(graph.nodes.size(), 0);

  // Nodes created by build_expr_graph/normalize_to_dnf are already in
  // children-before-parent order except for expression wiring, so recurse.
  auto eval_node = [&](auto&& self, int idx) -> TruthValue {
    if (done[idx]) return memo[idx];
    const auto& n = graph.nodes[idx];
    TruthValue result;
    if (n.leaf) {
      auto it = leaf_values.find(n.id);
      if (it == leaf_values.end())
        throw Error("MISSING_LEAF", "no truth value for leaf '" + n.id + "'");
      result = it->second;
    } else if (n.type == ExprType::ComparedTo) {
      throw Error("COMPARISON_NODE", "COMPARED_TO carries no truth semantics");
    } else {
      bool is_and = n.type == ExprType::And;
      result = is_and ? TruthValue::True : TruthValue::False;
      for (int c : n.children)
        result = is_and ? tv_and(result, self(self, c)) : tv_or(result, self(self, c));
    }
    memo[idx] = result;
    done[idx] = 1;
    return result;
  };
  return eval_node(eval_node, graph.root);
}

MatchResult match_recommendation(const Recommendation& rec, const PatientRecord& patient,
                                 const MatchConfig& cfg) {
  ValidationReport report = validate(rec);
  if (!report.valid())
    throw Error("INVALID_DOCUMENT", "cannot match an invalid document; first error: " +
                                        report.errors[0].code + " at " + report.errors[0].path);

  MatchResult result;
  std::map<BlockId, TruthValue> leaves;
  bool cw = closed_world(patient, cfg);
  std::string world = cw ? "closed world" : "open world";

  auto add = [&](const BlockId& id, TruthValue v, std::string reason) {
    leaves[id] = v;
    result.trace.push_back({id, v, std::move(reason)});
  };

  for (const auto& b : rec.population.demographics)
    add(b.id, eval_criterion(b, patient, cfg), "demographics");
  for (const auto& b : rec.population.disorders) {
    TruthValue v = eval_criterion(b, patient, cfg);
    std::string label = b.concept_ref ? b.concept_ref->dict_id : b.name;
    std::string reason = "disorder " + label + " (" + time_period_token(b.time_period) +
                         (b.negation ? ", negated" : "") + ", " + world + ")";
    add(b.id, v, std::move(reason));
  }
  for (const auto& b : rec.population.interventions) {
    TruthValue v = eval_criterion(b, patient, cfg);
    std::string label = b.concept_ref ? b.concept_ref->dict_id : b.name;
    add(b.id, v, "intervention " + label + " (" + time_period_token(b.time_period) + ", " + world + ")");
  }
  for (const auto& b : rec.population.lab_criteria) {
    TruthValue v = eval_criterion(b, patient, cfg);
    add(b.id, v, "lab " + b.key + " " + operator_token(b.op) + " " +
                     (is_range(b.value)
                          ? format_number(std::get<NumericRange>(b.value).low) + ".." +
                                format_number(std::get<NumericRange>(b.value).high)
                          : format_number(std::get<double>(b.value))));
  }

  result.verdict = eval_graph(build_expr_graph(rec.population), leaves);

  if (result.verdict != TruthValue::False) {
    for (const auto& iv : rec.suggestion.interventions)
      result.suggestion_summary.push_back(
          {iv.id, iv.name, iv.intervention_type, iv.concept_ref, iv.modifier_text, iv.grade});
    for (const auto& e : rec.suggestion.exprs)
      if (e.expr_type == ExprType::ComparedTo && e.inputs.size() == 2)
        result.comparisons.push_back({e.inputs[0], e.inputs[1]});
  }
  return result;
}

}  // namespace crts
