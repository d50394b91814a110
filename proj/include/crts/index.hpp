#pragma once

// Faceted retrieval over a recommendation corpus. Every concept id, concept
// name, lab key and intervention type is posted per section under a
// normalized token; queries are conjunctions of facet-equality terms plus
// optional lab-value constraints resolved by interval satisfiability.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "crts/model.hpp"

namespace crts {

enum class Section { Population, Suggestion, Outcome };

enum class Facet { ConceptId, ConceptName, LabKey, InterventionType, DisorderNegated };

struct IndexKey {
  Section section = Section::Population;
  Facet facet = Facet::ConceptId;
  std::string value;  // case-folded, trimmed
  friend auto operator<=>(const IndexKey&, const IndexKey&) = default;
};

// One population/outcome lab criterion flattened to (doc, key, constraint);
// kept beside the postings so value queries survive index reload.
struct LabPosting {
  Section section = Section::Population;
  std::string key;  // normalized
  std::string doc_id;
  Operator op = Operator::EQ;
  double low = 0;
  double high = 0;  // only read when op == InRange
  friend auto operator<=>(const LabPosting&, const LabPosting&) = default;
};

struct RecommendationIndex {
  std::map<IndexKey, std::set<std::string>> postings;
  std::vector<LabPosting> labs;  // sorted
  std::map<std::string, Recommendation> docs;
};

struct QueryConjunct {
  bool lab_constraint = false;
  IndexKey key;       // facet term (lab_constraint == false)
  std::string lab_key;  // normalized; constraint term only
  Operator op = Operator::EQ;
  double value = 0;
  friend bool operator==(const QueryConjunct&, const QueryConjunct&) = default;
};

struct Query {
  std::vector<QueryConjunct> conjuncts;  // non-empty; all must hold
  friend bool operator==(const Query&, const Query&) = default;
};

// Throws Error{DUPLICATE_DOC_ID}. Folding add_document over any permutation
// of the corpus yields the same index.
RecommendationIndex build_index(const std::vector<Recommendation>& corpus);
void add_document(RecommendationIndex& index, const Recommendation& rec);

// Sorted doc ids satisfying every conjunct. Throws Error{UNKNOWN_FACET} on
// out-of-range section/facet values.
std::vector<std::string> query(const RecommendationIndex& index, const Query& q);

// Grammar: conjunct ("AND" conjunct)*
//   conjunct := path "=" value
//             | "population.lab." key op number        (op: < <= > >= =)
//   path     := section "." kind "." leaf
//   section  := population | suggestion | outcome
//   kind.leaf: disorder.{cui|name|negated} | intervention.{cui|name|type}
//              | lab.key | outcome.name
// Throws Error{QUERY_SYNTAX}.
Query parse_query(const std::string& text);

// "CRTSIDX 1" file image: postings and lab constraints, sorted, UTF-8, LF.
std::string write_index(const RecommendationIndex& index);
// Rebuilds postings/labs (docs stay empty). Throws Error{INDEX_FORMAT} on a
// bad header or line shape, Error{UNKNOWN_FACET} on unknown facet tokens.
RecommendationIndex read_index(std::string_view bytes);

const char* section_token(Section s);
const char* facet_token(Facet f);

}  // namespace crts
