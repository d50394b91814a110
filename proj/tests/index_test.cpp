#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "crts/error.hpp"
#include "crts/index.hpp"
#include "crts/serial.hpp"

#include "generators.hpp"
#include "oracles.hpp"

using namespace crts;
using namespace crts::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Recommendation> appendix_corpus() {
  std::vector<Recommendation> corpus;
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(CRTS_CORPUS_DIR))
    if (entry.path().extension() == ".xml") paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) corpus.push_back(parse_xml(slurp(p)));
  return corpus;
}

std::vector<Recommendation> random_corpus(Rng& rng, int n) {
  std::vector<Recommendation> corpus;
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "doc-%03d", i);
    corpus.push_back(random_recommendation(rng, buf));
  }
  return corpus;
}

// Queries drawn from the corpus vocabulary so hits are common.
Query random_query(Rng& rng, const std::vector<Recommendation>& corpus, int conjuncts) {
  Query q;
  for (int i = 0; i < conjuncts; ++i) {
    const auto& rec = corpus[static_cast<size_t>(rng.range(0, static_cast<int>(corpus.size()) - 1))];
    QueryConjunct c;
    int kind = rng.range(0, 6);
    switch (kind) {
      case 0:
        if (!rec.population.disorders.empty()) {
          const auto& d = rec.population.disorders[0];
          if (d.concept_ref && rng.chance(0.5))
            c.key = {Section::Population, Facet::ConceptId, normalize_token(d.concept_ref->dict_id)};
          else
            c.key = {Section::Population, Facet::ConceptName, normalize_token(d.name)};
          break;
        }
        [[fallthrough]];
      case 1:
        c.key = {Section::Population, Facet::DisorderNegated, rng.chance(0.5) ? "true" : "false"};
        break;
      case 2:
        if (!rec.suggestion.interventions.empty()) {
          const auto& iv = rec.suggestion.interventions[0];
          if (iv.intervention_type && rng.chance(0.4))
            c.key = {Section::Suggestion, Facet::InterventionType, normalize_token(*iv.intervention_type)};
          else
            c.key = {Section::Suggestion, Facet::ConceptName, normalize_token(iv.name)};
          break;
        }
        [[fallthrough]];
      case 3:
        if (!rec.population.lab_criteria.empty()) {
          c.key = {Section::Population, Facet::LabKey,
                   normalize_token(rec.population.lab_criteria[0].key)};
          break;
        }
        [[fallthrough]];
      case 4:
        if (!rec.outcome.general.empty()) {
          c.key = {Section::Outcome, Facet::ConceptName,
                   normalize_token(rec.outcome.general[0].outcome_text)};
          break;
        }
        [[fallthrough]];
      case 5: {
        // lab value constraint, keyed to a real lab when available
        c.lab_constraint = true;
        c.lab_key = rec.population.lab_criteria.empty()
                        ? "lvef"
                        : normalize_token(rec.population.lab_criteria[0].key);
        static const std::vector<Operator> ops = {Operator::LT, Operator::LE, Operator::GT,
                                                  Operator::GE, Operator::EQ};
        c.op = ops[static_cast<size_t>(rng.range(0, 4))];
        c.value = rng.range(0, 400) + (rng.chance(0.3) ? 0.5 : 0.0);
        break;
      }
      default:
        c.key = {Section::Population, Facet::ConceptName, "heart failure"};
    }
    if (!c.lab_constraint && c.key.value.empty())
      c.key = {Section::Population, Facet::ConceptName, "heart failure"};
    q.conjuncts.push_back(std::move(c));
  }
  return q;
}

}  // namespace

TEST_CASE("empty corpus, empty answers") {
  auto index = build_index({});
  CHECK(index.postings.empty());
  Query q;
  q.conjuncts.push_back({false, {Section::Population, Facet::ConceptId, "c0018801"}, "", Operator::EQ, 0});
  CHECK(query(index, q).empty());
}

TEST_CASE("heart failure posting matches a linear scan of the corpus") {
  auto corpus = appendix_corpus();
  auto index = build_index(corpus);

  IndexKey key{Section::Population, Facet::ConceptId, "c0018801"};
  REQUIRE(index.postings.count(key));
  std::vector<std::string> posted(index.postings.at(key).begin(), index.postings.at(key).end());

  std::vector<std::string> expected;
  for (const auto& rec : corpus)
    for (const auto& d : rec.population.disorders)
      if (d.concept_ref && d.concept_ref->dict_id == "C0018801") {
        expected.push_back(rec.doc_id);
        break;
      }
  std::sort(expected.begin(), expected.end());
  CHECK(posted == expected);
  CHECK(posted.size() == 6);
}

TEST_CASE("spec queries over the shipped corpus") {
  auto corpus = appendix_corpus();
  auto index = build_index(corpus);

  auto hf = query(index, parse_query("population.disorder.cui=C0018801"));
  CHECK(hf == ref_query(corpus, parse_query("population.disorder.cui=C0018801")));
  CHECK(hf == std::vector<std::string>{"appendix-02", "appendix-04", "appendix-05", "appendix-06",
                                       "appendix-07", "appendix-08"});

  auto diuretics = query(index, parse_query("suggestion.intervention.name=diuretics"));
  CHECK(diuretics == std::vector<std::string>{"appendix-09"});
  CHECK(diuretics == ref_query(corpus, parse_query("suggestion.intervention.name=diuretics")));

  // two conjuncts behave as set intersection
  auto a = query(index, parse_query("population.disorder.cui=C0018801"));
  auto b = query(index, parse_query("population.disorder.cui=C0428772"));
  auto both = query(index,
                    parse_query("population.disorder.cui=C0018801 AND population.disorder.cui=C0428772"));
  std::vector<std::string> expected;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(expected));
  CHECK(both == expected);

  // lab constraint: LVEF <= 40 criterion is satisfiable with <= 35 but not > 50
  CHECK(query(index, parse_query("population.lab.LVEF<=35")) ==
        std::vector<std::string>{"appendix-02"});
  CHECK(query(index, parse_query("population.lab.LVEF>50")).empty());
  CHECK(query(index, parse_query("population.lab.Rassi score>=12")) ==
        std::vector<std::string>{"appendix-03"});
}

TEST_CASE("query grammar") {
  auto q = parse_query("population.disorder.cui=C0018801");
  REQUIRE(q.conjuncts.size() == 1);
  CHECK(!q.conjuncts[0].lab_constraint);
  CHECK(q.conjuncts[0].key.section == Section::Population);
  CHECK(q.conjuncts[0].key.facet == Facet::ConceptId);
  CHECK(q.conjuncts[0].key.value == "c0018801");

  auto two = parse_query("population.lab.LVEF<=40 AND suggestion.intervention.type=drug");
  REQUIRE(two.conjuncts.size() == 2);
  CHECK(two.conjuncts[0].lab_constraint);
  CHECK(two.conjuncts[0].lab_key == "lvef");
  CHECK(two.conjuncts[0].op == Operator::LE);
  CHECK(two.conjuncts[0].value == 40.0);
  CHECK(two.conjuncts[1].key.facet == Facet::InterventionType);

  // values may contain spaces; section/kind/leaf combos are checked
  auto spaced = parse_query("suggestion.intervention.name=beta blocker therapy");
  CHECK(spaced.conjuncts[0].key.value == "beta blocker therapy");

  CHECK(parse_query("population.disorder.negated=true").conjuncts[0].key.facet ==
        Facet::DisorderNegated);
  CHECK(parse_query("outcome.outcome.name=to reduce shocks").conjuncts[0].key.section ==
        Section::Outcome);
  CHECK(parse_query("population.lab.key=LVEF").conjuncts[0].key.facet == Facet::LabKey);

  for (const char* bad : {"population.bogus=1", "", "x", "population.disorder.cui", "AND",
                          "population.lab.<=40", "suggestion.lab.LVEF<=40",
                          "population.disorder.negated=maybe", "population.disorder.type=x"}) {
    CAPTURE(bad);
    try {
      parse_query(bad);
      FAIL_CHECK("expected QUERY_SYNTAX for: " << bad);
    } catch (const Error& e) {
      CHECK(e.code() == "QUERY_SYNTAX");
    }
  }
}

TEST_CASE("duplicate doc ids are rejected") {
  Rng rng(42);
  auto rec = random_recommendation(rng, "same");
  try {
    build_index({rec, rec});
    FAIL("expected DUPLICATE_DOC_ID");
  } catch (const Error& e) {
    CHECK(e.code() == "DUPLICATE_DOC_ID");
  }
}

TEST_CASE("index equals a linear scan over random corpora and queries") {
  Rng rng(31415);
  auto corpus = random_corpus(rng, 60);
  auto index = build_index(corpus);
  for (int i = 0; i < 120; ++i) {
    auto q = random_query(rng, corpus, rng.range(1, 3));
    CAPTURE(i);
    CHECK(query(index, q) == ref_query(corpus, q));
  }
}

TEST_CASE("adding a conjunct never grows the result") {
  Rng rng(2718);
  auto corpus = random_corpus(rng, 40);
  auto index = build_index(corpus);
  for (int i = 0; i < 60; ++i) {
    auto q = random_query(rng, corpus, rng.range(1, 2));
    auto base = query(index, q);
    auto extended = q;
    extended.conjuncts.push_back(random_query(rng, corpus, 1).conjuncts[0]);
    auto narrowed = query(index, extended);
    CHECK(std::includes(base.begin(), base.end(), narrowed.begin(), narrowed.end()));
  }
}

TEST_CASE("building equals folding add_document in any order") {
  Rng rng(12);
  auto corpus = random_corpus(rng, 20);
  auto reference = build_index(corpus);

  std::mt19937_64 shuffler(99);
  for (int round = 0; round < 5; ++round) {
    auto shuffled = corpus;
    std::shuffle(shuffled.begin(), shuffled.end(), shuffler);
    RecommendationIndex folded;
    for (const auto& rec : shuffled) add_document(folded, rec);
    CHECK(folded.postings == reference.postings);
    CHECK(folded.labs == reference.labs);
    CHECK(folded.docs.size() == reference.docs.size());
  }
}

TEST_CASE("index file round trip preserves postings and answers") {
  Rng rng(5555);
  auto corpus = random_corpus(rng, 30);
  auto index = build_index(corpus);
  std::string bytes = write_index(index);
  CHECK(bytes.rfind("CRTSIDX 1\n", 0) == 0);

  auto loaded = read_index(bytes);
  CHECK(loaded.postings == index.postings);
  CHECK(loaded.labs == index.labs);
  CHECK(write_index(loaded) == bytes);

  for (int i = 0; i < 40; ++i) {
    auto q = random_query(rng, corpus, rng.range(1, 2));
    CHECK(query(loaded, q) == query(index, q));
  }
}

TEST_CASE("index file errors") {
  try {
    read_index("BOGUS 9\n");
    FAIL("expected INDEX_FORMAT");
  } catch (const Error& e) {
    CHECK(e.code() == "INDEX_FORMAT");
  }
  try {
    read_index("CRTSIDX 1\nP\tpopulation\tflavor\tx\tdoc-1\n");
    FAIL("expected UNKNOWN_FACET");
  } catch (const Error& e) {
    CHECK(e.code() == "UNKNOWN_FACET");
  }
  for (const char* bad : {"CRTSIDX 1\nP\tpopulation\tconceptid\n",
                          "CRTSIDX 1\nL\tpopulation\tlvef\tdoc-1\t<=\tforty\n",
                          "CRTSIDX 1\nQ\twhat\n"}) {
    CAPTURE(bad);
    try {
      read_index(bad);
      FAIL_CHECK("expected INDEX_FORMAT");
    } catch (const Error& e) {
      CHECK(e.code() == "INDEX_FORMAT");
    }
  }
}
