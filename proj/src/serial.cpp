#include "crts/serial.hpp"

#include <json.hpp>

#include "crts/error.hpp"
#include "crts/util.hpp"
#include "crts/xml.hpp"

namespace crts {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error("SCHEMA_VIOLATION", path + ": " + what);
}

[[noreturn]] void value_error(const std::string& path, const std::string& what) {
  throw Error("VALUE_PARSE", path + ": " + what);
}

NumericValue parse_value_text(const std::string& text, const std::string& path) {
  size_t sep = text.find("..");
  if (sep != std::string::npos) {
    auto lo = parse_number(trim(text.substr(0, sep)));
    auto hi = parse_number(trim(text.substr(sep + 2)));
    if (!lo || !hi) value_error(path, "'" + text + "' is not a numeric range");
    return NumericRange{*lo, *hi};
  }
  auto v = parse_number(trim(text));
  if (!v) value_error(path, "'" + text + "' is not a number");
  return *v;
}

std::string value_to_text(const NumericValue& v) {
  if (is_range(v)) {
    const auto& r = std::get<NumericRange>(v);
    return format_number(r.low) + ".." + format_number(r.high);
  }
  return format_number(std::get<double>(v));
}

// ---------------------------------------------------------------------------
// XML reading

class XmlReader {
 public:
  XmlReader(const ParseOptions& opts, std::vector<Issue>* warnings)
      : opts_(opts), warnings_(warnings) {}

  Recommendation read(const XmlNode& root) {
    if (root.name != "recommendation")
      schema_error("/", "root element must be <recommendation>, found <" + root.name + ">");
    check_attrs(root, {"id"}, "recommendation");
    Recommendation rec;
    if (const auto* id = root.attr("id")) rec.doc_id = *id;
    else schema_error("recommendation", "missing id attribute");

    bool saw_pop = false, saw_sug = false, saw_out = false, saw_text = false, saw_src = false;
    for (const auto& c : root.children) {
      if (c.name == "sourceText") {
        if (saw_text) schema_error("sourceText", "repeated element");
        saw_text = true;
        rec.source_text = scalar_text(c, "sourceText");
      } else if (c.name == "source") {
        if (saw_src) schema_error("source", "repeated element");
        saw_src = true;
        rec.source = read_source(c);
      } else if (c.name == "population") {
        if (saw_pop) schema_error("population", "repeated element");
        saw_pop = true;
        rec.population = read_population(c);
      } else if (c.name == "suggestion") {
        if (saw_sug) schema_error("suggestion", "repeated element");
        saw_sug = true;
        rec.suggestion = read_suggestion(c);
      } else if (c.name == "outcome") {
        if (saw_out) schema_error("outcome", "repeated element");
        saw_out = true;
        rec.outcome = read_outcome(c);
      } else {
        unknown_element(c.name, "recommendation");
      }
    }
    if (!root.text.empty()) schema_error("recommendation", "unexpected text content");

    size_t blocks = rec.population.demographics.size() + rec.population.disorders.size() +
                    rec.population.interventions.size() + rec.population.lab_criteria.size() +
                    rec.suggestion.interventions.size();
    if (blocks == 0)
      schema_error("recommendation", "document carries no population or suggestion blocks");
    return rec;
  }

 private:
  void unknown_element(const std::string& name, const std::string& path) {
    if (opts_.strict) schema_error(path, "unknown element <" + name + ">");
    if (warnings_) warnings_->push_back({"UNKNOWN_ELEMENT", path, "skipped unknown element <" + name + ">"});
  }

  void check_attrs(const XmlNode& n, std::initializer_list<const char*> allowed,
                   const std::string& path) {
    for (const auto& [k, v] : n.attrs) {
      bool ok = false;
      for (const char* a : allowed)
        if (k == a) ok = true;
      if (ok) continue;
      if (opts_.strict) schema_error(path, "unknown attribute '" + k + "'");
      if (warnings_)
        warnings_->push_back({"UNKNOWN_ATTRIBUTE", path, "skipped unknown attribute '" + k + "'"});
    }
  }

  // Scalar elements carry text only.
  std::string scalar_text(const XmlNode& n, const std::string& path) {
    check_attrs(n, {}, path);
    if (!n.children.empty()) schema_error(path, "expected text content, found child elements");
    return n.text;
  }

  Source read_source(const XmlNode& n) {
    check_attrs(n, {}, "source");
    Source src;
    bool saw_origin = false;
    for (const auto& c : n.children) {
      if (c.name == "origin") {
        if (saw_origin) schema_error("source.origin", "repeated element");
        saw_origin = true;
        src.origin = scalar_text(c, "source.origin");
      } else if (c.name == "citation") {
        src.citations.push_back(scalar_text(c, "source.citation"));
      } else {
        unknown_element(c.name, "source");
      }
    }
    if (!saw_origin) schema_error("source", "missing <origin>");
    return src;
  }

  Population read_population(const XmlNode& n) {
    check_attrs(n, {}, "population");
    Population pop;
    for (const auto& c : n.children) {
      std::string path = "population." + c.name;
      if (c.name == "demographics") pop.demographics.push_back(read_demographics(c, path));
      else if (c.name == "disorder") pop.disorders.push_back(read_disorder(c, path));
      else if (c.name == "intervention") pop.interventions.push_back(read_intervention(c, path));
      else if (c.name == "labResults") pop.lab_criteria.push_back(read_lab(c, path));
      else if (c.name == "expr") pop.exprs.push_back(read_expr(c, path));
      else unknown_element(c.name, "population");
    }
    if (!n.text.empty()) schema_error("population", "unexpected text content");
    return pop;
  }

  Suggestion read_suggestion(const XmlNode& n) {
    check_attrs(n, {}, "suggestion");
    Suggestion sug;
    for (const auto& c : n.children) {
      std::string path = "suggestion." + c.name;
      if (c.name == "intervention") sug.interventions.push_back(read_intervention(c, path));
      else if (c.name == "expr") sug.exprs.push_back(read_expr(c, path));
      else unknown_element(c.name, "suggestion");
    }
    if (!n.text.empty()) schema_error("suggestion", "unexpected text content");
    return sug;
  }

  Outcome read_outcome(const XmlNode& n) {
    check_attrs(n, {}, "outcome");
    Outcome out;
    for (const auto& c : n.children) {
      std::string path = "outcome." + c.name;
      if (c.name == "generalOutcome") out.general.push_back(read_general(c, path));
      else if (c.name == "labResults") out.lab_criteria.push_back(read_lab(c, path));
      else unknown_element(c.name, "outcome");
    }
    if (!n.text.empty()) schema_error("outcome", "unexpected text content");
    return out;
  }

  // Collects single-occurrence scalar children; returns presence by name.
  class Fields {
   public:
    Fields(XmlReader& r, const XmlNode& n, const std::string& path,
           std::initializer_list<const char*> known)
        : reader_(r), path_(path) {
      for (const auto& c : n.children) {
        bool ok = false;
        for (const char* k : known)
          if (c.name == k) ok = true;
        if (!ok) {
          reader_.unknown_element(c.name, path);
          continue;
        }
        if (!nodes_.emplace(c.name, &c).second)
          schema_error(path + "." + c.name, "repeated element");
      }
    }

    bool has(const std::string& name) const { return nodes_.count(name) != 0; }

    std::string get(const std::string& name) {
      return reader_.scalar_text(*nodes_.at(name), path_ + "." + name);
    }

    std::string require(const std::string& name) {
      if (!has(name)) schema_error(path_, "missing <" + name + ">");
      return get(name);
    }

    const XmlNode* node(const std::string& name) const { return nodes_.at(name); }

   private:
    XmlReader& reader_;
    std::string path_;
    std::map<std::string, const XmlNode*> nodes_;
  };

  Demographics read_demographics(const XmlNode& n, const std::string& path) {
    check_attrs(n, {}, path);
    Fields f(*this, n, path, {"id", "age", "gender", "ethnicity", "country"});
    Demographics d;
    d.id = f.require("id");
    if (f.has("age")) {
      const XmlNode* age = f.node("age");
      check_attrs(*age, {"op"}, path + ".age");
      AgeConstraint c;
      if (const auto* op = age->attr("op")) {
        auto parsed = operator_from_token(*op);
        if (!parsed) value_error(path + ".age", "unknown operator token '" + *op + "'");
        c.op = *parsed;
      }
      if (!age->children.empty()) schema_error(path + ".age", "expected text content");
      c.value = parse_value_text(age->text, path + ".age");
      d.age = c;
    }
    if (f.has("gender")) d.gender = f.get("gender");
    if (f.has("ethnicity")) d.ethnicity = f.get("ethnicity");
    if (f.has("country")) d.country = f.get("country");
    return d;
  }

  std::optional<DictionaryRef> read_concept(Fields& f, const std::string& path, bool allow_umls_shorthand) {
    bool has_pair = f.has("dictionary") || f.has("dictId");
    if (allow_umls_shorthand && f.has("UMLSDictId")) {
      if (has_pair) schema_error(path, "<UMLSDictId> conflicts with <dictionary>/<dictId>");
      return DictionaryRef{"UMLS", f.get("UMLSDictId")};
    }
    if (!has_pair) return std::nullopt;
    if (!f.has("dictionary") || !f.has("dictId"))
      schema_error(path, "<dictionary> and <dictId> must appear together");
    return DictionaryRef{f.get("dictionary"), f.get("dictId")};
  }

  TimePeriod read_timeperiod(Fields& f, const std::string& path) {
    if (!f.has("timeperiod")) return TimePeriod::Unspecified;
    std::string t = f.get("timeperiod");
    auto tp = time_period_from_token(t);
    if (!tp) value_error(path + ".timeperiod", "unknown time period '" + t + "'");
    return *tp;
  }

  Disorder read_disorder(const XmlNode& n, const std::string& path) {
    check_attrs(n, {}, path);
    Fields f(*this, n, path, {"id", "name", "UMLSDictId", "dictionary", "dictId", "timeperiod", "negation"});
    Disorder d;
    d.id = f.require("id");
    d.name = f.require("name");
    d.concept_ref = read_concept(f, path, /*allow_umls_shorthand=*/true);
    d.time_period = read_timeperiod(f, path);
    if (f.has("negation")) {
      std::string v = to_lower(f.get("negation"));
      if (v == "true") d.negation = true;
      else if (v == "false") d.negation = false;
      else value_error(path + ".negation", "expected 'true' or 'false'");
    }
    return d;
  }

  Intervention read_intervention(const XmlNode& n, const std::string& path) {
    check_attrs(n, {}, path);
    Fields f(*this, n, path,
             {"id", "name", "type", "dictionary", "dictId", "timeperiod", "modifier", "grade"});
    Intervention iv;
    iv.id = f.require("id");
    iv.name = f.require("name");
    if (f.has("type")) iv.intervention_type = f.get("type");
    iv.concept_ref = read_concept(f, path, /*allow_umls_shorthand=*/false);
    iv.time_period = read_timeperiod(f, path);
    if (f.has("modifier")) iv.modifier_text = f.get("modifier");
    if (f.has("grade")) iv.grade = f.get("grade");
    return iv;
  }

  LabCriterion read_lab(const XmlNode& n, const std::string& path) {
    check_attrs(n, {}, path);
    Fields f(*this, n, path, {"id", "key", "value", "operator", "unit", "temporal"});
    LabCriterion lab;
    lab.id = f.require("id");
    lab.key = f.require("key");
    lab.value = parse_value_text(f.require("value"), path + ".value");
    std::string op = f.require("operator");
    auto parsed = operator_from_token(trim(op));
    if (!parsed) value_error(path + ".operator", "unknown operator token '" + op + "'");
    lab.op = *parsed;
    if (f.has("unit")) lab.unit = f.get("unit");
    if (f.has("temporal")) lab.temporal = f.get("temporal");
    return lab;
  }

  GeneralOutcome read_general(const XmlNode& n, const std::string& path) {
    check_attrs(n, {}, path);
    Fields f(*this, n, path, {"id", "outcomeText"});
    GeneralOutcome g;
    g.id = f.require("id");
    g.outcome_text = f.require("outcomeText");
    return g;
  }

  ExprNode read_expr(const XmlNode& n, const std::string& path) {
    check_attrs(n, {"type"}, path);
    const auto* type = n.attr("type");
    if (!type) schema_error(path, "missing type attribute");
    auto parsed = expr_type_from_token(*type);
    if (!parsed) value_error(path, "unknown expression type '" + *type + "'");
    ExprNode e;
    e.expr_type = *parsed;
    bool saw_output = false;
    for (const auto& c : n.children) {
      if (c.name == "inputConceptId") {
        e.inputs.push_back(scalar_text(c, path + ".inputConceptId"));
      } else if (c.name == "outputConceptId") {
        if (saw_output) schema_error(path + ".outputConceptId", "repeated element");
        saw_output = true;
        e.output = scalar_text(c, path + ".outputConceptId");
      } else {
        unknown_element(c.name, path);
      }
    }
    if (e.inputs.empty()) schema_error(path, "missing <inputConceptId>");
    if (!saw_output) schema_error(path, "missing <outputConceptId>");
    return e;
  }

  ParseOptions opts_;
  std::vector<Issue>* warnings_;

  friend class Fields;
};

// ---------------------------------------------------------------------------
// XML writing

XmlNode scalar_node(std::string name, std::string text) {
  XmlNode n;
  n.name = std::move(name);
  n.text = std::move(text);
  return n;
}

void append_concept(XmlNode& parent, const std::optional<DictionaryRef>& ref, bool umls_shorthand) {
  if (!ref) return;
  if (umls_shorthand && ref->dictionary == "UMLS") {
    parent.children.push_back(scalar_node("UMLSDictId", ref->dict_id));
    return;
  }
  parent.children.push_back(scalar_node("dictionary", ref->dictionary));
  parent.children.push_back(scalar_node("dictId", ref->dict_id));
}

XmlNode demographics_node(const Demographics& d) {
  XmlNode n;
  n.name = "demographics";
  n.children.push_back(scalar_node("id", d.id));
  if (d.age) {
    XmlNode age = scalar_node("age", value_to_text(d.age->value));
    age.attrs.push_back({"op", operator_token(d.age->op)});
    n.children.push_back(std::move(age));
  }
  if (d.gender) n.children.push_back(scalar_node("gender", *d.gender));
  if (d.ethnicity) n.children.push_back(scalar_node("ethnicity", *d.ethnicity));
  if (d.country) n.children.push_back(scalar_node("country", *d.country));
  return n;
}

XmlNode disorder_node(const Disorder& d) {
  XmlNode n;
  n.name = "disorder";
  n.children.push_back(scalar_node("id", d.id));
  n.children.push_back(scalar_node("name", d.name));
  append_concept(n, d.concept_ref, /*umls_shorthand=*/true);
  n.children.push_back(scalar_node("timeperiod", time_period_token(d.time_period)));
  n.children.push_back(scalar_node("negation", d.negation ? "true" : "false"));
  return n;
}

XmlNode intervention_node(const Intervention& iv) {
  XmlNode n;
  n.name = "intervention";
  n.children.push_back(scalar_node("id", iv.id));
  n.children.push_back(scalar_node("name", iv.name));
  if (iv.intervention_type) n.children.push_back(scalar_node("type", *iv.intervention_type));
  append_concept(n, iv.concept_ref, /*umls_shorthand=*/false);
  n.children.push_back(scalar_node("timeperiod", time_period_token(iv.time_period)));
  if (iv.modifier_text) n.children.push_back(scalar_node("modifier", *iv.modifier_text));
  if (iv.grade) n.children.push_back(scalar_node("grade", *iv.grade));
  return n;
}

XmlNode lab_node(const LabCriterion& lab) {
  XmlNode n;
  n.name = "labResults";
  n.children.push_back(scalar_node("id", lab.id));
  n.children.push_back(scalar_node("key", lab.key));
  n.children.push_back(scalar_node("value", value_to_text(lab.value)));
  n.children.push_back(scalar_node("operator", operator_token(lab.op)));
  if (lab.unit) n.children.push_back(scalar_node("unit", *lab.unit));
  if (lab.temporal) n.children.push_back(scalar_node("temporal", *lab.temporal));
  return n;
}

XmlNode expr_node(const ExprNode& e) {
  XmlNode n;
  n.name = "expr";
  n.attrs.push_back({"type", expr_type_token(e.expr_type)});
  for (const auto& in : e.inputs) n.children.push_back(scalar_node("inputConceptId", in));
  n.children.push_back(scalar_node("outputConceptId", e.output));
  return n;
}

XmlNode general_node(const GeneralOutcome& g) {
  XmlNode n;
  n.name = "generalOutcome";
  n.children.push_back(scalar_node("id", g.id));
  n.children.push_back(scalar_node("outcomeText", g.outcome_text));
  return n;
}

void require_valid(const Recommendation& rec) {
  ValidationReport report = validate(rec);
  if (!report.valid())
    throw Error("INVALID_DOCUMENT", "document has " + std::to_string(report.errors.size()) +
                                        " validation error(s); first: " + report.errors[0].code +
                                        " at " + report.errors[0].path);
}

// ---------------------------------------------------------------------------
// JSON

json number_to_json(double v) {
  // Integral values travel as JSON integers so both codecs print "40".
  if (v >= -9007199254740992.0 && v <= 9007199254740992.0 &&
      v == static_cast<double>(static_cast<long long>(v)))
    return static_cast<long long>(v);
  return v;
}

json value_to_json(const NumericValue& v) {
  if (is_range(v)) {
    const auto& r = std::get<NumericRange>(v);
    return json{{"low", number_to_json(r.low)}, {"high", number_to_json(r.high)}};
  }
  return number_to_json(std::get<double>(v));
}

}  // namespace

Recommendation parse_xml(std::string_view bytes, const ParseOptions& opts,
                         std::vector<Issue>* warnings) {
  XmlNode root = xml_parse(bytes);
  return XmlReader(opts, warnings).read(root);
}

std::string write_xml(const Recommendation& rec) {
  require_valid(rec);
  XmlNode root;
  root.name = "recommendation";
  root.attrs.push_back({"id", rec.doc_id});
  if (rec.source_text) root.children.push_back(scalar_node("sourceText", *rec.source_text));
  if (rec.source) {
    XmlNode src;
    src.name = "source";
    src.children.push_back(scalar_node("origin", rec.source->origin));
    for (const auto& c : rec.source->citations) src.children.push_back(scalar_node("citation", c));
    root.children.push_back(std::move(src));
  }

  XmlNode pop;
  pop.name = "population";
  for (const auto& b : rec.population.demographics) pop.children.push_back(demographics_node(b));
  for (const auto& b : rec.population.disorders) pop.children.push_back(disorder_node(b));
  for (const auto& b : rec.population.interventions) pop.children.push_back(intervention_node(b));
  for (const auto& b : rec.population.lab_criteria) pop.children.push_back(lab_node(b));
  for (const auto& e : rec.population.exprs) pop.children.push_back(expr_node(e));
  root.children.push_back(std::move(pop));

  XmlNode sug;
  sug.name = "suggestion";
  for (const auto& b : rec.suggestion.interventions) sug.children.push_back(intervention_node(b));
  for (const auto& e : rec.suggestion.exprs) sug.children.push_back(expr_node(e));
  root.children.push_back(std::move(sug));

  XmlNode out;
  out.name = "outcome";
  for (const auto& b : rec.outcome.general) out.children.push_back(general_node(b));
  for (const auto& b : rec.outcome.lab_criteria) out.children.push_back(lab_node(b));
  root.children.push_back(std::move(out));

  return xml_serialize(root);
}

// ---------------------------------------------------------------------------
// JSON mirror

namespace {

json concept_fields(const std::optional<DictionaryRef>& ref, bool umls_shorthand) {
  json j = json::object();
  if (!ref) return j;
  if (umls_shorthand && ref->dictionary == "UMLS") {
    j["UMLSDictId"] = ref->dict_id;
  } else {
    j["dictionary"] = ref->dictionary;
    j["dictId"] = ref->dict_id;
  }
  return j;
}

json demographics_to_json(const Demographics& d) {
  json j;
  j["id"] = d.id;
  if (d.age) {
    json age;
    age["op"] = operator_token(d.age->op);
    age["value"] = value_to_json(d.age->value);
    j["age"] = age;
  }
  if (d.gender) j["gender"] = *d.gender;
  if (d.ethnicity) j["ethnicity"] = *d.ethnicity;
  if (d.country) j["country"] = *d.country;
  return j;
}

json disorder_to_json(const Disorder& d) {
  json j = concept_fields(d.concept_ref, /*umls_shorthand=*/true);
  j["id"] = d.id;
  j["name"] = d.name;
  j["timeperiod"] = time_period_token(d.time_period);
  j["negation"] = d.negation;
  return j;
}

json intervention_to_json(const Intervention& iv) {
  json j = concept_fields(iv.concept_ref, /*umls_shorthand=*/false);
  j["id"] = iv.id;
  j["name"] = iv.name;
  if (iv.intervention_type) j["type"] = *iv.intervention_type;
  j["timeperiod"] = time_period_token(iv.time_period);
  if (iv.modifier_text) j["modifier"] = *iv.modifier_text;
  if (iv.grade) j["grade"] = *iv.grade;
  return j;
}

json lab_to_json(const LabCriterion& lab) {
  json j;
  j["id"] = lab.id;
  j["key"] = lab.key;
  j["value"] = value_to_json(lab.value);
  j["operator"] = operator_token(lab.op);
  if (lab.unit) j["unit"] = *lab.unit;
  if (lab.temporal) j["temporal"] = *lab.temporal;
  return j;
}

json expr_to_json(const ExprNode& e) {
  json j;
  j["type"] = expr_type_token(e.expr_type);
  j["inputConceptId"] = e.inputs;
  j["outputConceptId"] = e.output;
  return j;
}

json general_to_json(const GeneralOutcome& g) {
  json j;
  j["id"] = g.id;
  j["outcomeText"] = g.outcome_text;
  return j;
}

class JsonReader {
 public:
  JsonReader(const ParseOptions& opts, std::vector<Issue>* warnings)
      : opts_(opts), warnings_(warnings) {}

  Recommendation read(const json& root) {
    if (!root.is_object()) schema_error("/", "root must be a JSON object");
    check_keys(root, {"id", "sourceText", "source", "population", "suggestion", "outcome"}, "/");
    Recommendation rec;
    rec.doc_id = get_string(root, "id", "/", /*required=*/true);
    if (root.contains("sourceText"))
      rec.source_text = get_string(root, "sourceText", "/", true);
    if (root.contains("source")) rec.source = read_source(root.at("source"));
    if (root.contains("population")) rec.population = read_population(root.at("population"));
    if (root.contains("suggestion")) rec.suggestion = read_suggestion(root.at("suggestion"));
    if (root.contains("outcome")) rec.outcome = read_outcome(root.at("outcome"));

    size_t blocks = rec.population.demographics.size() + rec.population.disorders.size() +
                    rec.population.interventions.size() + rec.population.lab_criteria.size() +
                    rec.suggestion.interventions.size();
    if (blocks == 0) schema_error("/", "document carries no population or suggestion blocks");
    return rec;
  }

 private:
  void check_keys(const json& obj, std::initializer_list<const char*> known,
                  const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
      bool ok = false;
      for (const char* k : known)
        if (key == k) ok = true;
      if (ok) continue;
      if (opts_.strict) schema_error(path, "unknown key '" + key + "'");
      if (warnings_)
        warnings_->push_back({"UNKNOWN_ELEMENT", path, "skipped unknown key '" + key + "'"});
    }
  }

  static std::string get_string(const json& obj, const char* key, const std::string& path,
                                bool required) {
    if (!obj.contains(key)) {
      if (required) schema_error(path, std::string("missing key '") + key + "'");
      return {};
    }
    if (!obj.at(key).is_string()) schema_error(path + "." + key, "expected a string");
    return obj.at(key).get<std::string>();
  }

  static NumericValue read_value(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_object() && v.contains("low") && v.contains("high") && v.size() == 2 &&
        v.at("low").is_number() && v.at("high").is_number())
      return NumericRange{v.at("low").get<double>(), v.at("high").get<double>()};
    schema_error(path, "expected a number or {low, high}");
  }

  Source read_source(const json& v) {
    if (!v.is_object()) schema_error("source", "expected an object");
    check_keys(v, {"origin", "citation"}, "source");
    Source src;
    src.origin = get_string(v, "origin", "source", true);
    if (v.contains("citation")) {
      if (!v.at("citation").is_array()) schema_error("source.citation", "expected an array");
      for (const auto& c : v.at("citation")) {
        if (!c.is_string()) schema_error("source.citation", "expected strings");
        src.citations.push_back(c.get<std::string>());
      }
    }
    return src;
  }

  template <typename Fn>
  void read_list(const json& section, const char* key, const std::string& path, Fn fn) {
    if (!section.contains(key)) return;
    const json& arr = section.at(key);
    if (!arr.is_array()) schema_error(path + "." + key, "expected an array");
    size_t i = 0;
    for (const auto& item : arr) {
      std::string p = path + "." + key + "[" + std::to_string(i++) + "]";
      if (!item.is_object()) schema_error(p, "expected an object");
      fn(item, p);
    }
  }

  Population read_population(const json& v) {
    if (!v.is_object()) schema_error("population", "expected an object");
    check_keys(v, {"demographics", "disorder", "intervention", "labResults", "expr"}, "population");
    Population pop;
    read_list(v, "demographics", "population",
              [&](const json& j, const std::string& p) { pop.demographics.push_back(read_demographics(j, p)); });
    read_list(v, "disorder", "population",
              [&](const json& j, const std::string& p) { pop.disorders.push_back(read_disorder(j, p)); });
    read_list(v, "intervention", "population",
              [&](const json& j, const std::string& p) { pop.interventions.push_back(read_intervention(j, p)); });
    read_list(v, "labResults", "population",
              [&](const json& j, const std::string& p) { pop.lab_criteria.push_back(read_lab(j, p)); });
    read_list(v, "expr", "population",
              [&](const json& j, const std::string& p) { pop.exprs.push_back(read_expr(j, p)); });
    return pop;
  }

  Suggestion read_suggestion(const json& v) {
    if (!v.is_object()) schema_error("suggestion", "expected an object");
    check_keys(v, {"intervention", "expr"}, "suggestion");
    Suggestion sug;
    read_list(v, "intervention", "suggestion",
              [&](const json& j, const std::string& p) { sug.interventions.push_back(read_intervention(j, p)); });
    read_list(v, "expr", "suggestion",
              [&](const json& j, const std::string& p) { sug.exprs.push_back(read_expr(j, p)); });
    return sug;
  }

  Outcome read_outcome(const json& v) {
    if (!v.is_object()) schema_error("outcome", "expected an object");
    check_keys(v, {"generalOutcome", "labResults"}, "outcome");
    Outcome out;
    read_list(v, "generalOutcome", "outcome",
              [&](const json& j, const std::string& p) { out.general.push_back(read_general(j, p)); });
    read_list(v, "labResults", "outcome",
              [&](const json& j, const std::string& p) { out.lab_criteria.push_back(read_lab(j, p)); });
    return out;
  }

  Demographics read_demographics(const json& v, const std::string& path) {
    check_keys(v, {"id", "age", "gender", "ethnicity", "country"}, path);
    Demographics d;
    d.id = get_string(v, "id", path, true);
    if (v.contains("age")) {
      const json& age = v.at("age");
      if (!age.is_object()) schema_error(path + ".age", "expected an object");
      check_keys(age, {"op", "value"}, path + ".age");
      AgeConstraint c;
      if (age.contains("op")) {
        std::string t = get_string(age, "op", path + ".age", true);
        auto op = operator_from_token(t);
        if (!op) value_error(path + ".age", "unknown operator token '" + t + "'");
        c.op = *op;
      }
      if (!age.contains("value")) schema_error(path + ".age", "missing key 'value'");
      c.value = read_value(age.at("value"), path + ".age.value");
      d.age = c;
    }
    if (v.contains("gender")) d.gender = get_string(v, "gender", path, true);
    if (v.contains("ethnicity")) d.ethnicity = get_string(v, "ethnicity", path, true);
    if (v.contains("country")) d.country = get_string(v, "country", path, true);
    return d;
  }

  std::optional<DictionaryRef> read_concept(const json& v, const std::string& path,
                                            bool allow_umls_shorthand) {
    bool has_pair = v.contains("dictionary") || v.contains("dictId");
    if (allow_umls_shorthand && v.contains("UMLSDictId")) {
      if (has_pair) schema_error(path, "'UMLSDictId' conflicts with 'dictionary'/'dictId'");
      return DictionaryRef{"UMLS", get_string(v, "UMLSDictId", path, true)};
    }
    if (!has_pair) return std::nullopt;
    if (!v.contains("dictionary") || !v.contains("dictId"))
      schema_error(path, "'dictionary' and 'dictId' must appear together");
    return DictionaryRef{get_string(v, "dictionary", path, true), get_string(v, "dictId", path, true)};
  }

  TimePeriod read_timeperiod(const json& v, const std::string& path) {
    if (!v.contains("timeperiod")) return TimePeriod::Unspecified;
    std::string t = get_string(v, "timeperiod", path, true);
    auto tp = time_period_from_token(t);
    if (!tp) value_error(path + ".timeperiod", "unknown time period '" + t + "'");
    return *tp;
  }

  Disorder read_disorder(const json& v, const std::string& path) {
    check_keys(v, {"id", "name", "UMLSDictId", "dictionary", "dictId", "timeperiod", "negation"}, path);
    Disorder d;
    d.id = get_string(v, "id", path, true);
    d.name = get_string(v, "name", path, true);
    d.concept_ref = read_concept(v, path, /*allow_umls_shorthand=*/true);
    d.time_period = read_timeperiod(v, path);
    if (v.contains("negation")) {
      if (!v.at("negation").is_boolean()) schema_error(path + ".negation", "expected a boolean");
      d.negation = v.at("negation").get<bool>();
    }
    return d;
  }

  Intervention read_intervention(const json& v, const std::string& path) {
    check_keys(v, {"id", "name", "type", "dictionary", "dictId", "timeperiod", "modifier", "grade"},
               path);
    Intervention iv;
    iv.id = get_string(v, "id", path, true);
    iv.name = get_string(v, "name", path, true);
    if (v.contains("type")) iv.intervention_type = get_string(v, "type", path, true);
    iv.concept_ref = read_concept(v, path, /*allow_umls_shorthand=*/false);
    iv.time_period = read_timeperiod(v, path);
    if (v.contains("modifier")) iv.modifier_text = get_string(v, "modifier", path, true);
    if (v.contains("grade")) iv.grade = get_string(v, "grade", path, true);
    return iv;
  }

  LabCriterion read_lab(const json& v, const std::string& path) {
    check_keys(v, {"id", "key", "value", "operator", "unit", "temporal"}, path);
    LabCriterion lab;
    lab.id = get_string(v, "id", path, true);
    lab.key = get_string(v, "key", path, true);
    if (!v.contains("value")) schema_error(path, "missing key 'value'");
    lab.value = read_value(v.at("value"), path + ".value");
    std::string op = get_string(v, "operator", path, true);
    auto parsed = operator_from_token(trim(op));
    if (!parsed) value_error(path + ".operator", "unknown operator token '" + op + "'");
    lab.op = *parsed;
    if (v.contains("unit")) lab.unit = get_string(v, "unit", path, true);
    if (v.contains("temporal")) lab.temporal = get_string(v, "temporal", path, true);
    return lab;
  }

  GeneralOutcome read_general(const json& v, const std::string& path) {
    check_keys(v, {"id", "outcomeText"}, path);
    GeneralOutcome g;
    g.id = get_string(v, "id", path, true);
    g.outcome_text = get_string(v, "outcomeText", path, true);
    return g;
  }

  ExprNode read_expr(const json& v, const std::string& path) {
    check_keys(v, {"type", "inputConceptId", "outputConceptId"}, path);
    ExprNode e;
    std::string t = get_string(v, "type", path, true);
    auto parsed = expr_type_from_token(t);
    if (!parsed) value_error(path, "unknown expression type '" + t + "'");
    e.expr_type = *parsed;
    if (!v.contains("inputConceptId")) schema_error(path, "missing key 'inputConceptId'");
    if (!v.at("inputConceptId").is_array()) schema_error(path + ".inputConceptId", "expected an array");
    for (const auto& in : v.at("inputConceptId")) {
      if (!in.is_string()) schema_error(path + ".inputConceptId", "expected strings");
      e.inputs.push_back(in.get<std::string>());
    }
    if (e.inputs.empty()) schema_error(path, "'inputConceptId' must be non-empty");
    e.output = get_string(v, "outputConceptId", path, true);
    return e;
  }

  ParseOptions opts_;
  std::vector<Issue>* warnings_;
};

json parse_json_or_throw(std::string_view bytes) {
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error("JSON_MALFORMED", e.what());
  }
}

}  // namespace

Recommendation parse_json(std::string_view bytes, const ParseOptions& opts,
                          std::vector<Issue>* warnings) {
  json root = parse_json_or_throw(bytes);
  return JsonReader(opts, warnings).read(root);
}

std::string write_json(const Recommendation& rec) {
  require_valid(rec);
  json j;
  j["id"] = rec.doc_id;
  if (rec.source_text) j["sourceText"] = *rec.source_text;
  if (rec.source) {
    json src;
    src["origin"] = rec.source->origin;
    src["citation"] = rec.source->citations;
    j["source"] = src;
  }

  json pop;
  pop["demographics"] = json::array();
  pop["disorder"] = json::array();
  pop["intervention"] = json::array();
  pop["labResults"] = json::array();
  pop["expr"] = json::array();
  for (const auto& b : rec.population.demographics) pop["demographics"].push_back(demographics_to_json(b));
  for (const auto& b : rec.population.disorders) pop["disorder"].push_back(disorder_to_json(b));
  for (const auto& b : rec.population.interventions) pop["intervention"].push_back(intervention_to_json(b));
  for (const auto& b : rec.population.lab_criteria) pop["labResults"].push_back(lab_to_json(b));
  for (const auto& e : rec.population.exprs) pop["expr"].push_back(expr_to_json(e));
  j["population"] = pop;

  json sug;
  sug["intervention"] = json::array();
  sug["expr"] = json::array();
  for (const auto& b : rec.suggestion.interventions) sug["intervention"].push_back(intervention_to_json(b));
  for (const auto& e : rec.suggestion.exprs) sug["expr"].push_back(expr_to_json(e));
  j["suggestion"] = sug;

  json out;
  out["generalOutcome"] = json::array();
  out["labResults"] = json::array();
  for (const auto& b : rec.outcome.general) out["generalOutcome"].push_back(general_to_json(b));
  for (const auto& b : rec.outcome.lab_criteria) out["labResults"].push_back(lab_to_json(b));
  j["outcome"] = out;

  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

// ---------------------------------------------------------------------------
// Patient records

namespace {

void check_patient_keys(const json& obj, std::initializer_list<const char*> known,
                        const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) schema_error(path, "unknown key '" + key + "'");
  }
}

FactStatus read_status(const json& v, const std::string& path) {
  if (!v.contains("status")) return FactStatus::Current;
  if (!v.at("status").is_string()) schema_error(path + ".status", "expected a string");
  std::string s = to_lower(v.at("status").get<std::string>());
  if (s == "current") return FactStatus::Current;
  if (s == "past") return FactStatus::Past;
  value_error(path + ".status", "expected 'current' or 'past'");
}

void read_concept_keys(const json& v, const std::string& path, std::optional<std::string>& cui,
                       std::optional<std::string>& name) {
  if (v.contains("cui")) {
    if (!v.at("cui").is_string()) schema_error(path + ".cui", "expected a string");
    cui = v.at("cui").get<std::string>();
  }
  if (v.contains("name")) {
    if (!v.at("name").is_string()) schema_error(path + ".name", "expected a string");
    name = v.at("name").get<std::string>();
  }
  if (!cui && !name) schema_error(path, "entry needs at least one of 'cui' or 'name'");
}

}  // namespace

PatientRecord parse_patient_json(std::string_view bytes) {
  json root = parse_json_or_throw(bytes);
  if (!root.is_object()) schema_error("/", "patient record must be a JSON object");
  check_patient_keys(root, {"demographics", "conditions", "interventions", "labs", "closed_world"},
                     "/");
  PatientRecord p;

  if (root.contains("demographics")) {
    const json& d = root.at("demographics");
    if (!d.is_object()) schema_error("demographics", "expected an object");
    check_patient_keys(d, {"age", "gender", "ethnicity", "country"}, "demographics");
    if (d.contains("age")) {
      if (!d.at("age").is_number()) schema_error("demographics.age", "expected a number");
      double age = d.at("age").get<double>();
      if (age < 0) value_error("demographics.age", "age must be non-negative");
      p.demographics.age = age;
    }
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
      if (!d.contains(key)) return std::nullopt;
      if (!d.at(key).is_string()) schema_error(std::string("demographics.") + key, "expected a string");
      return d.at(key).get<std::string>();
    };
    p.demographics.gender = opt_string("gender");
    p.demographics.ethnicity = opt_string("ethnicity");
    p.demographics.country = opt_string("country");
  }

  if (root.contains("conditions")) {
    if (!root.at("conditions").is_array()) schema_error("conditions", "expected an array");
    size_t i = 0;
    for (const auto& c : root.at("conditions")) {
      std::string path = "conditions[" + std::to_string(i++) + "]";
      if (!c.is_object()) schema_error(path, "expected an object");
      check_patient_keys(c, {"cui", "name", "status", "negated"}, path);
      ConditionEntry entry;
      read_concept_keys(c, path, entry.cui, entry.name);
      entry.status = read_status(c, path);
      if (c.contains("negated")) {
        if (!c.at("negated").is_boolean()) schema_error(path + ".negated", "expected a boolean");
        entry.negated = c.at("negated").get<bool>();
      }
      p.conditions.push_back(std::move(entry));
    }
  }

  if (root.contains("interventions")) {
    if (!root.at("interventions").is_array()) schema_error("interventions", "expected an array");
    size_t i = 0;
    for (const auto& c : root.at("interventions")) {
      std::string path = "interventions[" + std::to_string(i++) + "]";
      if (!c.is_object()) schema_error(path, "expected an object");
      check_patient_keys(c, {"cui", "name", "status"}, path);
      InterventionEntry entry;
      read_concept_keys(c, path, entry.cui, entry.name);
      entry.status = read_status(c, path);
      p.interventions.push_back(std::move(entry));
    }
  }

  if (root.contains("labs")) {
    if (!root.at("labs").is_array()) schema_error("labs", "expected an array");
    size_t i = 0;
    for (const auto& l : root.at("labs")) {
      std::string path = "labs[" + std::to_string(i++) + "]";
      if (!l.is_object()) schema_error(path, "expected an object");
      check_patient_keys(l, {"key", "value", "unit", "observed_at"}, path);
      LabObservation obs;
      if (!l.contains("key") || !l.at("key").is_string()) schema_error(path, "missing string key 'key'");
      obs.key = l.at("key").get<std::string>();
      if (trim(obs.key).empty()) value_error(path + ".key", "key must be non-empty");
      if (!l.contains("value") || !l.at("value").is_number())
        schema_error(path, "missing numeric key 'value'");
      obs.value = l.at("value").get<double>();
      if (l.contains("unit")) {
        if (!l.at("unit").is_string()) schema_error(path + ".unit", "expected a string");
        obs.unit = l.at("unit").get<std::string>();
      }
      if (l.contains("observed_at")) {
        if (!l.at("observed_at").is_string()) schema_error(path + ".observed_at", "expected a string");
        obs.observed_at = l.at("observed_at").get<std::string>();
      }
      p.labs.push_back(std::move(obs));
    }
  }

  if (root.contains("closed_world")) {
    if (!root.at("closed_world").is_boolean()) schema_error("closed_world", "expected a boolean");
    p.closed_world = root.at("closed_world").get<bool>();
  }
  return p;
}

}  // namespace crts
