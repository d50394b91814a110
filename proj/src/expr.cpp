#include "crts/expr.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "crts/error.hpp"

namespace crts {

std::vector<BlockId> ExprGraph::leaf_ids() const {
  std::vector<BlockId> out;
  std::set<BlockId> seen;
  for (const auto& n : nodes)
    if (n.leaf && seen.insert(n.id).second) out.push_back(n.id);
  return out;
}

namespace {

ExprGraph build_graph(const std::vector<BlockId>& block_ids, const std::vector<ExprNode>& exprs) {
  ExprGraph g;
  std::map<BlockId, int> index_of;

  for (const auto& id : block_ids) {
    index_of[id] = static_cast<int>(g.nodes.size());
    g.nodes.push_back({true, ExprType::And, id, {}});
  }
  // Expression outputs may reference each other in any order; allocate all
  // internal nodes first, wire children second.
  for (const auto& e : exprs) {
    index_of[e.output] = static_cast<int>(g.nodes.size());
    g.nodes.push_back({false, e.expr_type, e.output, {}});
  }
  std::set<BlockId> consumed;
  size_t internal_base = block_ids.size();
  for (size_t i = 0; i < exprs.size(); ++i) {
    auto& node = g.nodes[internal_base + i];
    for (const auto& in : exprs[i].inputs) {
      auto it = index_of.find(in);
      if (it == index_of.end())
        throw Error("DANGLING_REF", "expression input '" + in + "' is not defined in this section");
      node.children.push_back(it->second);
      consumed.insert(in);
    }
  }

  std::vector<int> top;  // outputs nothing consumes, in node order
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (!consumed.count(g.nodes[i].id)) top.push_back(static_cast<int>(i));

  if (top.empty()) {
    if (g.nodes.empty()) return g;  // empty section
    throw Error("CYCLE_DETECTED", "every expression output is consumed; the graph has no root");
  }
  if (top.size() == 1) {
    g.root = top[0];
    return g;
  }
  // Implicit root: unwired criteria all apply simultaneously.
  ExprGraph::Node root{false, ExprType::And, "", top};
  g.nodes.push_back(std::move(root));
  g.root = static_cast<int>(g.nodes.size()) - 1;
  return g;
}

using Term = std::vector<BlockId>;  // sorted unique leaf ids

// Keeps the term list minimal: drops duplicates and any term that is a
// superset of another (absorption); both are lattice identities, so the
// three-valued semantics is unchanged.
void minimize(std::vector<Term>& terms) {
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  // Absorption: a term containing a strictly smaller term is redundant.
  // Equal-size subsets are equal and already deduplicated.
  std::vector<Term> out;
  for (size_t i = 0; i < terms.size(); ++i) {
    bool absorbed = false;
    for (size_t j = 0; j < terms.size() && !absorbed; ++j) {
      if (terms[j].size() < terms[i].size() &&
          std::includes(terms[i].begin(), terms[i].end(), terms[j].begin(), terms[j].end()))
        absorbed = true;
    }
    if (!absorbed) out.push_back(terms[i]);
  }
  terms = std::move(out);
}

std::vector<Term> node_terms(const ExprGraph& g, int idx, std::map<int, std::vector<Term>>& memo) {
  auto it = memo.find(idx);
  if (it != memo.end()) return it->second;

  const auto& n = g.nodes[idx];
  std::vector<Term> result;
  if (n.leaf) {
    result = {{n.id}};
  } else if (n.type == ExprType::ComparedTo) {
    throw Error("COMPARISON_NODE", "COMPARED_TO nodes have no normal form");
  } else if (n.type == ExprType::Or) {
    for (int c : n.children) {
      auto sub = node_terms(g, c, memo);
      result.insert(result.end(), sub.begin(), sub.end());
    }
    minimize(result);
  } else {  // And: cross product of the children's term lists
    result = {{}};
    for (int c : n.children) {
      auto sub = node_terms(g, c, memo);
      std::vector<Term> next;
      for (const auto& a : result) {
        for (const auto& b : sub) {
          Term merged;
          std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
          next.push_back(std::move(merged));
          if (next.size() > kDnfTermLimit) {
            minimize(next);
            if (next.size() > kDnfTermLimit)
              throw Error("DNF_BLOWUP",
                          "normal form exceeds " + std::to_string(kDnfTermLimit) + " terms");
          }
        }
      }
      minimize(next);
      if (next.size() > kDnfTermLimit)
        throw Error("DNF_BLOWUP", "normal form exceeds " + std::to_string(kDnfTermLimit) + " terms");
      result = std::move(next);
    }
  }
  if (result.size() > kDnfTermLimit)
    throw Error("DNF_BLOWUP", "normal form exceeds " + std::to_string(kDnfTermLimit) + " terms");
  memo[idx] = result;
  return result;
}

}  // namespace

ExprGraph build_expr_graph(const Population& section) {
  std::vector<BlockId> ids;
  for (const auto& b : section.demographics) ids.push_back(b.id);
  for (const auto& b : section.disorders) ids.push_back(b.id);
  for (const auto& b : section.interventions) ids.push_back(b.id);
  for (const auto& b : section.lab_criteria) ids.push_back(b.id);
  return build_graph(ids, section.exprs);
}

ExprGraph build_expr_graph(const Suggestion& section) {
  std::vector<BlockId> ids;
  for (const auto& b : section.interventions) ids.push_back(b.id);
  return build_graph(ids, section.exprs);
}

std::vector<std::vector<BlockId>> dnf_terms(const ExprGraph& graph) {
  if (graph.empty()) return {};
  std::map<int, std::vector<Term>> memo;
  return node_terms(graph, graph.root, memo);
}

ExprGraph normalize_to_dnf(const ExprGraph& graph) {
  ExprGraph out;
  if (graph.empty()) return out;
  auto terms = dnf_terms(graph);

  std::map<BlockId, int> leaf_index;
  // Leaves keep their first-appearance order from the source graph.
  for (const auto& n : graph.nodes) {
    if (!n.leaf || leaf_index.count(n.id)) continue;
    bool used = std::any_of(terms.begin(), terms.end(), [&](const Term& t) {
      return std::binary_search(t.begin(), t.end(), n.id);
    });
    if (!used) continue;
    leaf_index[n.id] = static_cast<int>(out.nodes.size());
    out.nodes.push_back({true, ExprType::And, n.id, {}});
  }

  std::vector<int> term_nodes;
  for (const auto& t : terms) {
    if (t.size() == 1) {
      term_nodes.push_back(leaf_index.at(t[0]));
      continue;
    }
    std::vector<int> children;
    for (const auto& id : t) children.push_back(leaf_index.at(id));
    out.nodes.push_back({false, ExprType::And, "", std::move(children)});
    term_nodes.push_back(static_cast<int>(out.nodes.size()) - 1);
  }
  if (term_nodes.size() == 1) {
    out.root = term_nodes[0];
    return out;
  }
  out.nodes.push_back({false, ExprType::Or, "", std::move(term_nodes)});
  out.root = static_cast<int>(out.nodes.size()) - 1;
  return out;
}

}  // namespace crts
