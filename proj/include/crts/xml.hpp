#pragma once

// Small XML document model, just enough for the recommendation wire format:
// elements, attributes, character data, comments, an optional declaration.
// No namespaces, no DOCTYPE, no CDATA, no processing instructions.

#include <string>
#include <string_view>
#include <vector>

namespace crts {

struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;  // document order
  std::vector<XmlNode> children;
  std::string text;  // concatenated character data, outer whitespace trimmed

  const XmlNode* child(std::string_view name) const;
  const std::string* attr(std::string_view name) const;
};

// Throws Error{XML_MALFORMED} on anything that is not well formed.
XmlNode xml_parse(std::string_view bytes);

// Canonical bytes: UTF-8, LF, declaration line, 2-space indentation,
// attributes sorted by name, text-only elements on one line, empty elements
// self-closed. Serializing a parse of its own output is the identity.
std::string xml_serialize(const XmlNode& root);

std::string xml_escape_text(std::string_view s);
std::string xml_escape_attr(std::string_view s);

}  // namespace crts
