#pragma once

// Wire formats: the condensed XML layout, its JSON mirror, and the patient
// record input. Parsing is strict by default: unknown elements or keys are
// schema violations; in lenient mode they are skipped and reported as
// warnings. Serialization is canonical, so write(parse(write(r))) is a
// byte-level fixpoint.

#include <string>
#include <string_view>
#include <vector>

#include "crts/eval.hpp"
#include "crts/model.hpp"

namespace crts {

struct ParseOptions {
  bool strict = true;
};

// Throws Error{XML_MALFORMED | SCHEMA_VIOLATION | VALUE_PARSE}. In lenient
// mode unknown elements/attributes are collected into *warnings (code
// UNKNOWN_ELEMENT / UNKNOWN_ATTRIBUTE) instead of failing.
Recommendation parse_xml(std::string_view bytes, const ParseOptions& opts = {},
                         std::vector<Issue>* warnings = nullptr);

// Canonical XML bytes. Throws Error{INVALID_DOCUMENT} unless validate(rec)
// reports zero errors.
std::string write_xml(const Recommendation& rec);

// Throws Error{JSON_MALFORMED | SCHEMA_VIOLATION | VALUE_PARSE}.
Recommendation parse_json(std::string_view bytes, const ParseOptions& opts = {},
                          std::vector<Issue>* warnings = nullptr);

// Deterministic JSON: sorted keys, 2-space indent, sections always present
// with every list key (possibly empty). Throws Error{INVALID_DOCUMENT}.
std::string write_json(const Recommendation& rec);

// Patient input. Always strict: unknown keys are schema violations.
PatientRecord parse_patient_json(std::string_view bytes);

}  // namespace crts
