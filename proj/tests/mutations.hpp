#pragma once

// Single-corruption mutants of canonical corpus files. Every mutant changes
// document semantics and must be caught: either strict parse throws or
// validate reports the expected code. Deleting an element whose absence has
// a documented default yields an equivalent document, so those are not
// generated.

#include <map>
#include <string>
#include <vector>

namespace crts::testing {

struct Mutation {
  std::string label;
  std::string bytes;
  std::vector<std::string> acceptable_codes;
};

namespace mutation_detail {

inline bool find_span(const std::string& bytes, const std::string& open, const std::string& close,
                      size_t& begin, size_t& end) {
  begin = bytes.find(open);
  if (begin == std::string::npos) return false;
  end = bytes.find(close, begin);
  if (end == std::string::npos) return false;
  end += close.size();
  return true;
}

inline bool delete_span(std::string& bytes, const std::string& tag) {
  size_t b, e;
  if (!find_span(bytes, "<" + tag + ">", "</" + tag + ">", b, e)) return false;
  bytes.erase(b, e - b);
  return true;
}

inline bool duplicate_span(std::string& bytes, const std::string& tag) {
  size_t b, e;
  if (!find_span(bytes, "<" + tag + ">", "</" + tag + ">", b, e)) return false;
  bytes.insert(e, bytes.substr(b, e - b));
  return true;
}

inline bool replace_first(std::string& bytes, const std::string& from, const std::string& to) {
  size_t pos = bytes.find(from);
  if (pos == std::string::npos) return false;
  bytes.replace(pos, from.size(), to);
  return true;
}

}  // namespace mutation_detail

// files: name -> canonical XML bytes.
inline std::vector<Mutation> corpus_mutations(const std::map<std::string, std::string>& files) {
  using namespace mutation_detail;
  std::vector<Mutation> out;
  auto add = [&](const std::string& file, const char* kind, std::string mutated,
                 std::vector<std::string> codes) {
    out.push_back({file + ":" + kind, std::move(mutated), std::move(codes)});
  };

  for (const auto& [name, bytes] : files) {
    // element deletions with detectable consequences
    for (const char* tag : {"id", "name", "outputConceptId"}) {
      std::string m = bytes;
      if (delete_span(m, tag)) add(name, (std::string("delete-") + tag).c_str(), m, {"SCHEMA_VIOLATION"});
    }
    {
      std::string m = bytes;
      if (delete_span(m, "value")) add(name, "delete-value", m, {"SCHEMA_VIOLATION"});
    }
    {
      std::string m = bytes;
      if (delete_span(m, "operator")) add(name, "delete-operator", m, {"SCHEMA_VIOLATION"});
    }
    {
      std::string m = bytes;
      if (delete_span(m, "outcomeText")) add(name, "delete-outcomeText", m, {"SCHEMA_VIOLATION"});
    }
    {
      // dropping a whole referenced block strands its expression input
      std::string m = bytes;
      if (delete_span(m, "disorder")) add(name, "delete-disorder-block", m, {"DANGLING_REF"});
    }

    // duplication with the same id
    {
      std::string m = bytes;
      if (duplicate_span(m, "disorder")) add(name, "duplicate-disorder", m, {"DUPLICATE_ID"});
    }
    {
      std::string m = bytes;
      if (duplicate_span(m, "intervention")) add(name, "duplicate-intervention", m, {"DUPLICATE_ID"});
    }

    // operator token corruption
    {
      std::string m = bytes;
      if (replace_first(m, "<operator>&lt;=</operator>", "<operator>=&lt;</operator>"))
        add(name, "corrupt-operator-le", m, {"VALUE_PARSE"});
    }
    {
      std::string m = bytes;
      if (replace_first(m, "<operator>&gt;=</operator>", "<operator>&gt;&gt;</operator>"))
        add(name, "corrupt-operator-ge", m, {"VALUE_PARSE"});
    }
    {
      std::string m = bytes;
      if (replace_first(m, "type=\"AND\"", "type=\"NAND\""))
        add(name, "corrupt-expr-type", m, {"VALUE_PARSE"});
    }

    // dangling expression reference
    {
      std::string m = bytes;
      size_t b, e;
      if (find_span(m, "<inputConceptId>", "</inputConceptId>", b, e)) {
        m.replace(b, e - b, "<inputConceptId>999</inputConceptId>");
        add(name, "dangling-input", m, {"DANGLING_REF"});
      }
    }
  }
  return out;
}

}  // namespace crts::testing
