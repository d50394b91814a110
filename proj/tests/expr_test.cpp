#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crts/error.hpp"
#include "crts/expr.hpp"
#include "crts/serial.hpp"

#include "generators.hpp"
#include "oracles.hpp"

using namespace crts;
using namespace crts::testing;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Recommendation load_corpus(const std::string& name) {
  return parse_xml(slurp(std::string(CRTS_CORPUS_DIR) + "/" + name));
}

Population section_with_blocks(std::initializer_list<const char*> ids) {
  Population pop;
  for (const char* id : ids) {
    Disorder d;
    d.id = id;
    d.name = std::string("block ") + id;
    pop.disorders.push_back(std::move(d));
  }
  return pop;
}

}  // namespace

TEST_CASE("unwired blocks fall under an implicit AND root") {
  auto graph = build_expr_graph(section_with_blocks({"1", "2"}));
  REQUIRE(graph.root >= 0);
  const auto& root = graph.nodes[graph.root];
  CHECK(!root.leaf);
  CHECK(root.type == ExprType::And);
  REQUIRE(root.children.size() == 2);
  CHECK(graph.nodes[root.children[0]].id == "1");
  CHECK(graph.nodes[root.children[1]].id == "2");
}

TEST_CASE("single unwired block is the root itself") {
  auto graph = build_expr_graph(section_with_blocks({"1"}));
  REQUIRE(graph.root >= 0);
  CHECK(graph.nodes[graph.root].leaf);
  CHECK(graph.nodes[graph.root].id == "1");
}

TEST_CASE("empty section gives an empty graph") {
  auto graph = build_expr_graph(Population{});
  CHECK(graph.empty());
  CHECK(graph.leaf_ids().empty());
}

TEST_CASE("worked example population: explicit AND root over two leaves") {
  auto rec = load_corpus("figure4.xml");
  auto graph = build_expr_graph(rec.population);
  REQUIRE(graph.root >= 0);
  const auto& root = graph.nodes[graph.root];
  CHECK(root.id == "3");
  CHECK(root.type == ExprType::And);
  auto leaves = graph.leaf_ids();
  CHECK(leaves == std::vector<std::string>{"1", "2"});
}

TEST_CASE("nested OR layers feed the outer AND (ICD example)") {
  auto rec = load_corpus("appendix-01.xml");
  auto graph = build_expr_graph(rec.population);
  REQUIRE(graph.root >= 0);
  CHECK(graph.leaf_ids().size() == 5);
  const auto& root = graph.nodes[graph.root];
  CHECK(root.type == ExprType::And);
  REQUIRE(root.children.size() == 2);
  for (int c : root.children) {
    CHECK(!graph.nodes[c].leaf);
    CHECK(graph.nodes[c].type == ExprType::Or);
    for (int leaf : graph.nodes[c].children) CHECK(graph.nodes[leaf].leaf);
  }
}

TEST_CASE("graph leaves equal the section's block ids") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    auto rec = random_recommendation(rng, "doc");
    auto graph = build_expr_graph(rec.population);
    std::set<std::string> expected;
    for (const auto& b : rec.population.demographics) expected.insert(b.id);
    for (const auto& b : rec.population.disorders) expected.insert(b.id);
    for (const auto& b : rec.population.interventions) expected.insert(b.id);
    for (const auto& b : rec.population.lab_criteria) expected.insert(b.id);
    auto leaves = graph.leaf_ids();
    CHECK(std::set<std::string>(leaves.begin(), leaves.end()) == expected);
  }
}

TEST_CASE("cyclic expressions cannot form a rooted graph") {
  Population pop = section_with_blocks({"1", "2"});
  pop.exprs = {{ExprType::And, {"1", "b"}, "a"}, {ExprType::Or, {"2", "a"}, "b"}};
  CHECK_THROWS_AS(build_expr_graph(pop), Error);
}

TEST_CASE("distribution: AND over OR") {
  Formula f;
  f.kind = Formula::Kind::And;
  Formula a{Formula::Kind::Leaf, "a", {}};
  Formula sub{Formula::Kind::Or, "", {{Formula::Kind::Leaf, "b", {}}, {Formula::Kind::Leaf, "c", {}}}};
  f.children = {a, sub};
  auto graph = build_expr_graph(formula_to_population(f));
  auto terms = dnf_terms(normalize_to_dnf(graph));
  CHECK(terms == std::vector<std::vector<std::string>>{{"a", "b"}, {"a", "c"}});
}

TEST_CASE("existing DNF is a fixed point") {
  Formula f;
  f.kind = Formula::Kind::Or;
  Formula sub{Formula::Kind::And, "", {{Formula::Kind::Leaf, "a", {}}, {Formula::Kind::Leaf, "b", {}}}};
  f.children = {sub, {Formula::Kind::Leaf, "c", {}}};
  auto graph = build_expr_graph(formula_to_population(f));
  auto dnf = normalize_to_dnf(graph);
  CHECK(dnf_terms(dnf) == std::vector<std::vector<std::string>>{{"a", "b"}, {"c"}});

  // shape: OR root, one AND term and one bare leaf
  const auto& root = dnf.nodes[dnf.root];
  CHECK(root.type == ExprType::Or);
  REQUIRE(root.children.size() == 2);
  CHECK(!dnf.nodes[root.children[0]].leaf);
  CHECK(dnf.nodes[root.children[1]].leaf);
}

TEST_CASE("normalization preserves the two-valued truth table") {
  Rng rng(101);
  for (int round = 0; round < 150; ++round) {
    Formula f = random_formula(rng, 8);
    auto leaves = formula_leaves(f);
    auto graph = build_expr_graph(formula_to_population(f));
    auto dnf = normalize_to_dnf(graph);

    for (uint32_t bits = 0; bits < (1u << leaves.size()); ++bits) {
      std::map<std::string, bool> bool_assignment;
      std::map<std::string, TruthValue> tv_assignment;
      for (size_t i = 0; i < leaves.size(); ++i) {
        bool v = bits & (1u << i);
        bool_assignment[leaves[i]] = v;
        tv_assignment[leaves[i]] = v ? TruthValue::True : TruthValue::False;
      }
      bool expected = ref_eval_bool(f, bool_assignment);
      CHECK(eval_graph(graph, tv_assignment) == (expected ? TruthValue::True : TruthValue::False));
      CHECK(eval_graph(dnf, tv_assignment) == (expected ? TruthValue::True : TruthValue::False));
    }
  }
}

TEST_CASE("normalization is idempotent") {
  Rng rng(202);
  for (int round = 0; round < 200; ++round) {
    Formula f = random_formula(rng, 8);
    auto graph = build_expr_graph(formula_to_population(f));
    auto once = normalize_to_dnf(graph);
    auto twice = normalize_to_dnf(once);
    CHECK(dnf_terms(once) == dnf_terms(twice));
    REQUIRE(once.nodes.size() == twice.nodes.size());
    CHECK(once.root == twice.root);
  }
}

TEST_CASE("normalization rejects comparison nodes") {
  Population pop = section_with_blocks({"1", "2"});
  pop.exprs = {{ExprType::ComparedTo, {"1", "2"}, "3"}};
  auto graph = build_expr_graph(pop);
  try {
    normalize_to_dnf(graph);
    FAIL("expected COMPARISON_NODE");
  } catch (const Error& e) {
    CHECK(e.code() == "COMPARISON_NODE");
  }
}

TEST_CASE("term count is capped") {
  // AND of 13 two-leaf ORs expands to 2^13 incomparable terms.
  Population pop;
  ExprNode top;
  top.expr_type = ExprType::And;
  top.output = "top";
  for (int i = 0; i < 13; ++i) {
    for (int j = 0; j < 2; ++j) {
      Disorder d;
      d.id = "L" + std::to_string(i) + "_" + std::to_string(j);
      d.name = d.id;
      pop.disorders.push_back(std::move(d));
    }
    ExprNode e;
    e.expr_type = ExprType::Or;
    e.inputs = {"L" + std::to_string(i) + "_0", "L" + std::to_string(i) + "_1"};
    e.output = "o" + std::to_string(i);
    pop.exprs.push_back(e);
    top.inputs.push_back(e.output);
  }
  pop.exprs.push_back(top);
  auto graph = build_expr_graph(pop);
  try {
    normalize_to_dnf(graph);
    FAIL("expected DNF_BLOWUP");
  } catch (const Error& e) {
    CHECK(e.code() == "DNF_BLOWUP");
  }
}

TEST_CASE("shared subexpressions stay references, not copies") {
  // the DNF graph holds one leaf node per id however many terms use it
  Population pop = section_with_blocks({"1", "2", "3"});
  pop.exprs = {{ExprType::Or, {"1", "2"}, "8"},
               {ExprType::And, {"8", "3"}, "9"},
               {ExprType::Or, {"8", "9"}, "10"}};
  auto dnf = normalize_to_dnf(build_expr_graph(pop));
  std::map<std::string, int> leaf_count;
  for (const auto& n : dnf.nodes)
    if (n.leaf) ++leaf_count[n.id];
  for (const auto& [id, count] : leaf_count) CHECK(count == 1);
  // absorption applies: OR(x, AND(x,3)) == x
  CHECK(dnf_terms(dnf) == std::vector<std::vector<std::string>>{{"1"}, {"2"}});
}
