#include "crts/xml.hpp"

#include <algorithm>
#include <cctype>

#include "crts/error.hpp"
#include "crts/util.hpp"

namespace crts {

const XmlNode* XmlNode::child(std::string_view n) const {
  for (const auto& c : children)
    if (c.name == n) return &c;
  return nullptr;
}

const std::string* XmlNode::attr(std::string_view n) const {
  for (const auto& [k, v] : attrs)
    if (k == n) return &v;
  return nullptr;
}

namespace {

[[noreturn]] void malformed(const std::string& what, size_t pos) {
  throw Error("XML_MALFORMED", what + " (offset " + std::to_string(pos) + ")");
}

class Parser {
 public:
  // Far deeper than the recommendation schema ever nests; guards the
  // recursive descent against nesting bombs.
  static constexpr int kMaxDepth = 64;

  explicit Parser(std::string_view in) : in_(in) {}

  XmlNode run() {
    skip_prolog();
    XmlNode root = parse_element();
    skip_misc();
    if (pos_ != in_.size()) malformed("trailing content after root element", pos_);
    return root;
  }

 private:
  bool starts_with(std::string_view s) const { return in_.substr(pos_, s.size()) == s; }

  char peek() const { return pos_ < in_.size() ? in_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) malformed(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) ++pos_;
  }

  void skip_comment() {
    size_t end = in_.find("-->", pos_ + 4);
    if (end == std::string_view::npos) malformed("unterminated comment", pos_);
    pos_ = end + 3;
  }

  void skip_prolog() {
    skip_ws();
    if (starts_with("\xef\xbb\xbf")) pos_ += 3;  // tolerate a BOM on input
    skip_ws();
    if (starts_with("<?xml")) {
      size_t end = in_.find("?>", pos_);
      if (end == std::string_view::npos) malformed("unterminated XML declaration", pos_);
      pos_ = end + 2;
    }
    skip_misc();
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<!--")) {
        skip_comment();
        continue;
      }
      if (starts_with("<!")) malformed("DOCTYPE and CDATA are not supported", pos_);
      if (starts_with("<?")) malformed("processing instructions are not supported", pos_);
      return;
    }
  }

  static bool name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
  }
  static bool name_char(char c) {
    return name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
  }

  std::string parse_name() {
    if (!name_start(peek())) malformed("expected a name", pos_);
    size_t b = pos_;
    while (pos_ < in_.size() && name_char(in_[pos_])) ++pos_;
    return std::string(in_.substr(b, pos_ - b));
  }

  std::string decode_entities(std::string_view raw, size_t at) {
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size();) {
      char c = raw[i];
      if (c == '<') malformed("'<' in content", at + i);
      if (c != '&') {
        out += c;
        ++i;
        continue;
      }
      size_t semi = raw.find(';', i + 1);
      if (semi == std::string_view::npos) malformed("unterminated entity", at + i);
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out += '&';
      else if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else if (!ent.empty() && ent[0] == '#') out += decode_charref(ent, at + i);
      else malformed("unknown entity '&" + std::string(ent) + ";'", at + i);
      i = semi + 1;
    }
    return out;
  }

  static std::string decode_charref(std::string_view ent, size_t pos) {
    ent.remove_prefix(1);
    int base = 10;
    if (!ent.empty() && (ent[0] == 'x' || ent[0] == 'X')) {
      base = 16;
      ent.remove_prefix(1);
    }
    if (ent.empty()) malformed("empty character reference", pos);
    unsigned long cp = 0;
    for (char c : ent) {
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
      else malformed("bad character reference", pos);
      cp = cp * base + static_cast<unsigned long>(d);
      if (cp > 0x10FFFF) malformed("character reference out of range", pos);
    }
    // encode as UTF-8
    std::string out;
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
    return out;
  }

  XmlNode parse_element(int depth = 0) {
    if (depth > kMaxDepth) malformed("element nesting exceeds " + std::to_string(kMaxDepth), pos_);
    expect('<');
    XmlNode node;
    node.name = parse_name();
    parse_attrs(node);
    if (starts_with("/>")) {
      pos_ += 2;
      return node;
    }
    expect('>');
    std::string raw_text;
    for (;;) {
      if (pos_ >= in_.size()) malformed("unterminated element <" + node.name + ">", pos_);
      if (starts_with("<!--")) {
        skip_comment();
        continue;
      }
      if (starts_with("</")) {
        pos_ += 2;
        std::string close = parse_name();
        if (close != node.name)
          malformed("mismatched close tag </" + close + "> for <" + node.name + ">", pos_);
        skip_ws();
        expect('>');
        break;
      }
      if (peek() == '<') {
        node.children.push_back(parse_element(depth + 1));
        continue;
      }
      size_t b = pos_;
      while (pos_ < in_.size() && in_[pos_] != '<') ++pos_;
      raw_text += decode_entities(in_.substr(b, pos_ - b), b);
    }
    node.text = trim(raw_text);
    if (!node.text.empty() && !node.children.empty())
      malformed("mixed text and element content in <" + node.name + ">", pos_);
    return node;
  }

  void parse_attrs(XmlNode& node) {
    for (;;) {
      bool had_ws = false;
      while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) {
        ++pos_;
        had_ws = true;
      }
      if (peek() == '>' || starts_with("/>")) return;
      if (!had_ws) malformed("expected whitespace before attribute", pos_);
      std::string name = parse_name();
      skip_ws();
      expect('=');
      skip_ws();
      char quote = peek();
      if (quote != '"' && quote != '\'') malformed("attribute value must be quoted", pos_);
      ++pos_;
      size_t b = pos_;
      while (pos_ < in_.size() && in_[pos_] != quote) ++pos_;
      if (pos_ >= in_.size()) malformed("unterminated attribute value", b);
      std::string value = decode_entities(in_.substr(b, pos_ - b), b);
      ++pos_;
      for (const auto& [k, v] : node.attrs)
        if (k == name) malformed("duplicate attribute '" + name + "'", b);
      node.attrs.push_back({std::move(name), std::move(value)});
    }
  }

  std::string_view in_;
  size_t pos_ = 0;
};

void write_node(const XmlNode& node, std::string& out, int depth) {
  std::string indent(static_cast<size_t>(depth) * 2, ' ');
  out += indent;
  out += '<';
  out += node.name;
  auto attrs = node.attrs;
  std::sort(attrs.begin(), attrs.end());
  for (const auto& [k, v] : attrs) {
    out += ' ';
    out += k;
    out += "=\"";
    out += xml_escape_attr(v);
    out += '"';
  }
  if (node.children.empty() && node.text.empty()) {
    out += "/>\n";
    return;
  }
  out += '>';
  if (node.children.empty()) {
    out += xml_escape_text(node.text);
  } else {
    out += '\n';
    for (const auto& c : node.children) write_node(c, out, depth + 1);
    out += indent;
  }
  out += "</";
  out += node.name;
  out += ">\n";
}

}  // namespace

XmlNode xml_parse(std::string_view bytes) { return Parser(bytes).run(); }

std::string xml_serialize(const XmlNode& root) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  write_node(root, out, 0);
  return out;
}

std::string xml_escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string xml_escape_attr(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace crts
