#pragma once

// Expression graphs over concept blocks. A section's blocks are the leaves;
// its ExprNodes become internal AND/OR/COMPARED_TO nodes. Blocks that no
// expression consumes are conjoined under an implicit AND root, so a section
// that lists criteria without wiring them still reads "all of these hold".

#include <string>
#include <vector>

#include "crts/model.hpp"

namespace crts {

struct ExprGraph {
  struct Node {
    bool leaf = true;
    ExprType type = ExprType::And;  // internal nodes only
    BlockId id;                     // block id for leaves, output id for internal nodes
    std::vector<int> children;      // indices into nodes
  };

  std::vector<Node> nodes;
  int root = -1;  // -1: empty graph (no blocks at all)

  bool empty() const { return root < 0; }
  std::vector<BlockId> leaf_ids() const;  // in first-appearance order
};

// Section must have passed validate(). Throws Error{CYCLE_DETECTED} if the
// expressions are cyclic anyway.
ExprGraph build_expr_graph(const Population& section);
ExprGraph build_expr_graph(const Suggestion& section);

// Disjunctive normal form: each term is a sorted, deduplicated set of leaf
// ids; terms are absorption-minimized and sorted. Throws
// Error{COMPARISON_NODE} on COMPARED_TO nodes and Error{DNF_BLOWUP} when any
// intermediate term count exceeds kDnfTermLimit.
inline constexpr size_t kDnfTermLimit = 4096;

std::vector<std::vector<BlockId>> dnf_terms(const ExprGraph& graph);

// Same computation, rendered back as an OR-of-ANDs graph (single-leaf terms
// collapse to the leaf itself, a single term collapses to the AND node).
ExprGraph normalize_to_dnf(const ExprGraph& graph);

}  // namespace crts
