#include "crts/index.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <optional>

#include "crts/error.hpp"
#include "crts/util.hpp"

namespace crts {

const char* section_token(Section s) {
  switch (s) {
    case Section::Population: return "population";
    case Section::Suggestion: return "suggestion";
    case Section::Outcome: return "outcome";
  }
  throw Error("UNKNOWN_FACET", "bad section value");
}

const char* facet_token(Facet f) {
  switch (f) {
    case Facet::ConceptId: return "conceptid";
    case Facet::ConceptName: return "conceptname";
    case Facet::LabKey: return "labkey";
    case Facet::InterventionType: return "interventiontype";
    case Facet::DisorderNegated: return "disordernegated";
  }
  throw Error("UNKNOWN_FACET", "bad facet value");
}

namespace {

std::optional<Section> section_from_token(std::string_view t) {
  if (t == "population") return Section::Population;
  if (t == "suggestion") return Section::Suggestion;
  if (t == "outcome") return Section::Outcome;
  return std::nullopt;
}

std::optional<Facet> facet_from_token(std::string_view t) {
  if (t == "conceptid") return Facet::ConceptId;
  if (t == "conceptname") return Facet::ConceptName;
  if (t == "labkey") return Facet::LabKey;
  if (t == "interventiontype") return Facet::InterventionType;
  if (t == "disordernegated") return Facet::DisorderNegated;
  return std::nullopt;
}

void post(RecommendationIndex& index, Section s, Facet f, std::string_view raw,
          const std::string& doc_id) {
  std::string value = normalize_token(raw);
  if (value.empty()) return;
  index.postings[{s, f, std::move(value)}].insert(doc_id);
}

void post_intervention(RecommendationIndex& index, Section s, const Intervention& iv,
                       const std::string& doc_id) {
  if (iv.concept_ref) post(index, s, Facet::ConceptId, iv.concept_ref->dict_id, doc_id);
  post(index, s, Facet::ConceptName, iv.name, doc_id);
  if (iv.intervention_type) post(index, s, Facet::InterventionType, *iv.intervention_type, doc_id);
}

void post_lab(RecommendationIndex& index, Section s, const LabCriterion& lab,
              const std::string& doc_id) {
  post(index, s, Facet::LabKey, lab.key, doc_id);
  LabPosting p;
  p.section = s;
  p.key = normalize_token(lab.key);
  p.doc_id = doc_id;
  p.op = lab.op;
  if (is_range(lab.value)) {
    p.low = std::get<NumericRange>(lab.value).low;
    p.high = std::get<NumericRange>(lab.value).high;
  } else {
    p.low = std::get<double>(lab.value);
    p.high = p.low;
  }
  index.labs.push_back(std::move(p));
}

// Half-open/closed interval endpoints for satisfiability checks.
struct Interval {
  double lo, hi;
  bool lo_open, hi_open;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// A criterion or query term denotes a set of admissible values; NE splits in
// two rays, everything else is one interval.
std::vector<Interval> intervals_for(Operator op, double low, double high) {
  switch (op) {
    case Operator::LT: return {{-kInf, low, true, true}};
    case Operator::LE: return {{-kInf, low, true, false}};
    case Operator::GT: return {{low, kInf, true, true}};
    case Operator::GE: return {{low, kInf, false, true}};
    case Operator::EQ: return {{low, low, false, false}};
    case Operator::NE: return {{-kInf, low, true, true}, {low, kInf, true, true}};
    case Operator::InRange: return {{low, high, false, false}};
  }
  return {};
}

bool intervals_intersect(const Interval& a, const Interval& b) {
  double lo = std::max(a.lo, b.lo);
  double hi = std::min(a.hi, b.hi);
  if (lo < hi) return true;
  if (lo > hi) return false;
  bool lo_open = (a.lo == lo && a.lo_open) || (b.lo == lo && b.lo_open);
  bool hi_open = (a.hi == hi && a.hi_open) || (b.hi == hi && b.hi_open);
  return !lo_open && !hi_open;
}

bool constraint_satisfiable(const LabPosting& criterion, Operator op, double value) {
  auto a = intervals_for(criterion.op, criterion.low, criterion.high);
  auto b = intervals_for(op, value, value);
  for (const auto& x : a)
    for (const auto& y : b)
      if (intervals_intersect(x, y)) return true;
  return false;
}

std::string escape_field(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out += c;
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw Error("INDEX_FORMAT", "dangling escape");
    if (s[i] == '\\') out += '\\';
    else if (s[i] == 't') out += '\t';
    else if (s[i] == 'n') out += '\n';
    else throw Error("INDEX_FORMAT", "bad escape");
  }
  return out;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

void add_document(RecommendationIndex& index, const Recommendation& rec) {
  if (index.docs.count(rec.doc_id))
    throw Error("DUPLICATE_DOC_ID", "doc id '" + rec.doc_id + "' is already indexed");
  index.docs.emplace(rec.doc_id, rec);
  const std::string& id = rec.doc_id;

  for (const auto& d : rec.population.disorders) {
    if (d.concept_ref) post(index, Section::Population, Facet::ConceptId, d.concept_ref->dict_id, id);
    post(index, Section::Population, Facet::ConceptName, d.name, id);
    post(index, Section::Population, Facet::DisorderNegated, d.negation ? "true" : "false", id);
  }
  for (const auto& iv : rec.population.interventions)
    post_intervention(index, Section::Population, iv, id);
  for (const auto& lab : rec.population.lab_criteria) post_lab(index, Section::Population, lab, id);

  for (const auto& iv : rec.suggestion.interventions)
    post_intervention(index, Section::Suggestion, iv, id);

  for (const auto& g : rec.outcome.general)
    post(index, Section::Outcome, Facet::ConceptName, g.outcome_text, id);
  for (const auto& lab : rec.outcome.lab_criteria) post_lab(index, Section::Outcome, lab, id);

  std::sort(index.labs.begin(), index.labs.end());
  index.labs.erase(std::unique(index.labs.begin(), index.labs.end()), index.labs.end());
}

RecommendationIndex build_index(const std::vector<Recommendation>& corpus) {
  RecommendationIndex index;
  for (const auto& rec : corpus) add_document(index, rec);
  return index;
}

std::vector<std::string> query(const RecommendationIndex& index, const Query& q) {
  std::set<std::string> result;
  bool first = true;
  for (const auto& c : q.conjuncts) {
    std::set<std::string> hits;
    if (c.lab_constraint) {
      for (const auto& lab : index.labs)
        if (lab.section == Section::Population && lab.key == c.lab_key &&
            constraint_satisfiable(lab, c.op, c.value))
          hits.insert(lab.doc_id);
    } else {
      section_token(c.key.section);  // range checks; throws UNKNOWN_FACET
      facet_token(c.key.facet);
      auto it = index.postings.find(c.key);
      if (it != index.postings.end()) hits = it->second;
    }
    if (first) {
      result = std::move(hits);
      first = false;
    } else {
      std::set<std::string> merged;
      std::set_intersection(result.begin(), result.end(), hits.begin(), hits.end(),
                            std::inserter(merged, merged.begin()));
      result = std::move(merged);
    }
    if (result.empty()) break;
  }
  return {result.begin(), result.end()};
}

Query parse_query(const std::string& text) {
  // Conjuncts are separated by a whitespace-delimited uppercase AND.
  std::vector<std::string> parts;
  std::string rest = text;
  for (;;) {
    size_t pos = std::string::npos;
    for (size_t i = 0; i + 5 <= rest.size(); ++i) {
      if (rest.compare(i, 3, "AND") != 0) continue;
      bool ws_before = i > 0 && std::isspace(static_cast<unsigned char>(rest[i - 1]));
      bool ws_after = i + 3 < rest.size() && std::isspace(static_cast<unsigned char>(rest[i + 3]));
      if (ws_before && ws_after) {
        pos = i;
        break;
      }
    }
    if (pos == std::string::npos) break;
    parts.push_back(rest.substr(0, pos));
    rest = rest.substr(pos + 3);
  }
  parts.push_back(rest);

  Query q;
  for (const auto& part : parts) {
    std::string conjunct = trim(part);
    if (conjunct.empty()) throw Error("QUERY_SYNTAX", "empty conjunct");
    q.conjuncts.push_back([&] {
      QueryConjunct c;

      // Facet path form: section.kind.leaf=value
      auto try_facet = [&]() -> bool {
        size_t eq = conjunct.find('=');
        if (eq == std::string::npos) return false;
        std::string path = trim(conjunct.substr(0, eq));
        if (path.find_first_of("<>") != std::string::npos) return false;
        std::string value = trim(conjunct.substr(eq + 1));
        size_t d1 = path.find('.');
        size_t d2 = d1 == std::string::npos ? std::string::npos : path.find('.', d1 + 1);
        if (d1 == std::string::npos || d2 == std::string::npos) return false;
        auto section = section_from_token(path.substr(0, d1));
        std::string kind = path.substr(d1 + 1, d2 - d1 - 1);
        std::string leaf = path.substr(d2 + 1);
        if (!section) throw Error("QUERY_SYNTAX", "unknown section in '" + path + "'");
        std::optional<Facet> facet;
        if (kind == "disorder" && leaf == "cui") facet = Facet::ConceptId;
        else if (kind == "disorder" && leaf == "name") facet = Facet::ConceptName;
        else if (kind == "disorder" && leaf == "negated") facet = Facet::DisorderNegated;
        else if (kind == "intervention" && leaf == "cui") facet = Facet::ConceptId;
        else if (kind == "intervention" && leaf == "name") facet = Facet::ConceptName;
        else if (kind == "intervention" && leaf == "type") facet = Facet::InterventionType;
        else if (kind == "lab" && leaf == "key") facet = Facet::LabKey;
        else if (kind == "outcome" && leaf == "name") facet = Facet::ConceptName;
        if (!facet) {
          if (kind == "lab") return false;  // maybe a constraint like lab.LVEF=40
          throw Error("QUERY_SYNTAX", "unknown path '" + path + "'");
        }
        if (*facet == Facet::DisorderNegated && value != "true" && value != "false")
          throw Error("QUERY_SYNTAX", "negated takes true or false");
        if (value.empty()) throw Error("QUERY_SYNTAX", "empty value in '" + conjunct + "'");
        c.key = {*section, *facet, normalize_token(value)};
        return true;
      };
      if (try_facet()) return c;

      // Lab constraint form: population.lab.KEY op number
      const std::string prefix = "population.lab.";
      if (conjunct.rfind(prefix, 0) != 0)
        throw Error("QUERY_SYNTAX", "cannot parse conjunct '" + conjunct + "'");
      std::string tail = conjunct.substr(prefix.size());
      size_t op_pos = tail.find_first_of("<>=");
      if (op_pos == std::string::npos || op_pos == 0)
        throw Error("QUERY_SYNTAX", "expected an operator in '" + conjunct + "'");
      size_t op_len = (op_pos + 1 < tail.size() && tail[op_pos + 1] == '=') ? 2 : 1;
      std::string op_token = tail.substr(op_pos, op_len);
      auto op = operator_from_token(op_token);
      if (!op || *op == Operator::NE || *op == Operator::InRange)
        throw Error("QUERY_SYNTAX", "unsupported operator '" + op_token + "'");
      auto number = parse_number(trim(tail.substr(op_pos + op_len)));
      if (!number) throw Error("QUERY_SYNTAX", "expected a number in '" + conjunct + "'");
      c.lab_constraint = true;
      c.lab_key = normalize_token(tail.substr(0, op_pos));
      if (c.lab_key.empty()) throw Error("QUERY_SYNTAX", "empty lab key");
      c.op = *op;
      c.value = *number;
      return c;
    }());
  }
  return q;
}

std::string write_index(const RecommendationIndex& index) {
  std::string out = "CRTSIDX 1\n";
  for (const auto& [key, docs] : index.postings) {
    out += "P\t";
    out += section_token(key.section);
    out += '\t';
    out += facet_token(key.facet);
    out += '\t';
    out += escape_field(key.value);
    for (const auto& d : docs) {
      out += '\t';
      out += d;
    }
    out += '\n';
  }
  auto labs = index.labs;
  std::sort(labs.begin(), labs.end());
  for (const auto& lab : labs) {
    out += "L\t";
    out += section_token(lab.section);
    out += '\t';
    out += escape_field(lab.key);
    out += '\t';
    out += lab.doc_id;
    out += '\t';
    out += operator_token(lab.op);
    out += '\t';
    out += format_number(lab.low);
    if (lab.op == Operator::InRange) {
      out += '\t';
      out += format_number(lab.high);
    }
    out += '\n';
  }
  return out;
}

RecommendationIndex read_index(std::string_view bytes) {
  RecommendationIndex index;
  size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (pos >= bytes.size()) return std::nullopt;
    size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    auto line = bytes.substr(pos, end - pos);
    pos = end + 1;
    return line;
  };

  auto header = next_line();
  if (!header || *header != "CRTSIDX 1")
    throw Error("INDEX_FORMAT", "missing or unsupported CRTSIDX header");

  while (auto line = next_line()) {
    if (line->empty()) continue;
    auto fields = split_tabs(*line);
    if (fields[0] == "P") {
      if (fields.size() < 5) throw Error("INDEX_FORMAT", "short posting line");
      auto section = section_from_token(fields[1]);
      auto facet = facet_from_token(fields[2]);
      if (!section || !facet)
        throw Error("UNKNOWN_FACET", "unknown section or facet token in index file");
      IndexKey key{*section, *facet, unescape_field(fields[3])};
      for (size_t i = 4; i < fields.size(); ++i) {
        if (fields[i].empty()) throw Error("INDEX_FORMAT", "empty doc id in posting line");
        index.postings[key].insert(fields[i]);
      }
    } else if (fields[0] == "L") {
      if (fields.size() < 6) throw Error("INDEX_FORMAT", "short lab line");
      auto section = section_from_token(fields[1]);
      if (!section) throw Error("UNKNOWN_FACET", "unknown section token in index file");
      LabPosting lab;
      lab.section = *section;
      lab.key = unescape_field(fields[2]);
      lab.doc_id = fields[3];
      auto op = operator_from_token(fields[4]);
      if (!op) throw Error("INDEX_FORMAT", "bad operator token in lab line");
      lab.op = *op;
      auto low = parse_number(fields[5]);
      if (!low) throw Error("INDEX_FORMAT", "bad number in lab line");
      lab.low = *low;
      lab.high = lab.low;
      if (lab.op == Operator::InRange) {
        if (fields.size() < 7) throw Error("INDEX_FORMAT", "range lab line needs two numbers");
        auto high = parse_number(fields[6]);
        if (!high) throw Error("INDEX_FORMAT", "bad number in lab line");
        lab.high = *high;
      }
      index.labs.push_back(std::move(lab));
    } else {
      throw Error("INDEX_FORMAT", "unknown record type '" + fields[0] + "'");
    }
  }
  std::sort(index.labs.begin(), index.labs.end());
  return index;
}

}  // namespace crts
