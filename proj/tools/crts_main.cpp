// crts: validate, convert, match, query and normalize recommendation files.
//
// Exit codes: 0 success (for match: at least one "Applies"), 1 validation
// errors or no applicable recommendation, 2 usage/query syntax errors,
// 3 I/O or parse failures.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "crts/error.hpp"
#include "crts/eval.hpp"
#include "crts/expr.hpp"
#include "crts/index.hpp"
#include "crts/serial.hpp"
#include "crts/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

bool use_color() {
  const char* env = std::getenv("CRTS_COLOR");
  if (env && std::string(env) == "0") return false;
  return isatty(fileno(stdout));
}

std::string paint(const std::string& s, const char* code) {
  if (!use_color()) return s;
  return std::string("\033[") + code + "m" + s + "\033[0m";
}

std::string verdict_paint(crts::TruthValue v) {
  const char* text = crts::verdict_text(v);
  switch (v) {
    case crts::TruthValue::True: return paint(text, "32");
    case crts::TruthValue::False: return paint(text, "31");
    default: return paint(text, "33");
  }
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_like_xml(const std::string& bytes) {
  for (char c : bytes) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '<';
  }
  return false;
}

crts::Recommendation parse_any(const std::string& bytes, const crts::ParseOptions& opts,
                               std::vector<crts::Issue>* warnings) {
  if (looks_like_xml(bytes)) return crts::parse_xml(bytes, opts, warnings);
  return crts::parse_json(bytes, opts, warnings);
}

json issue_json(const crts::Issue& issue) {
  return json{{"code", issue.code}, {"path", issue.path}, {"message", issue.message}};
}

int cmd_validate(std::vector<std::string> paths, bool strict, const std::string& format) {
  std::sort(paths.begin(), paths.end());
  crts::ParseOptions opts{strict};
  bool any_io = false, any_invalid = false;
  json out_files = json::array();

  for (const auto& path : paths) {
    auto bytes = read_file(path);
    if (!bytes) {
      any_io = true;
      if (format == "json")
        out_files.push_back({{"path", path}, {"status", "error"}, {"code", "IO"},
                             {"message", "cannot read file"}});
      else
        std::cout << path << ": " << paint("ERROR", "31") << " cannot read file\n";
      continue;
    }
    std::vector<crts::Issue> warnings;
    crts::Recommendation rec;
    try {
      rec = parse_any(*bytes, opts, &warnings);
    } catch (const crts::Error& e) {
      any_io = true;
      if (format == "json")
        out_files.push_back({{"path", path}, {"status", "error"}, {"code", e.code()},
                             {"message", e.what()}});
      else
        std::cout << path << ": " << paint("ERROR", "31") << " " << e.what() << "\n";
      continue;
    }
    crts::ValidationReport report = crts::validate(rec);
    report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
    if (!report.valid()) any_invalid = true;

    if (format == "json") {
      out_files.push_back({{"path", path},
                           {"status", report.valid() ? "ok" : "invalid"},
                           {"errors", json::array()},
                           {"warnings", json::array()}});
      for (const auto& i : report.errors) out_files.back()["errors"].push_back(issue_json(i));
      for (const auto& i : report.warnings) out_files.back()["warnings"].push_back(issue_json(i));
    } else {
      auto plural = [](size_t n, const char* noun) {
        return std::to_string(n) + " " + noun + (n == 1 ? "" : "s");
      };
      std::cout << path << ": " << (report.valid() ? paint("OK", "32") : paint("INVALID", "31"));
      if (!report.errors.empty()) std::cout << " (" << plural(report.errors.size(), "error") << ")";
      if (!report.warnings.empty())
        std::cout << " (" << plural(report.warnings.size(), "warning") << ")";
      std::cout << "\n";
      for (const auto& i : report.errors)
        std::cout << "  error " << i.code << " at " << i.path << ": " << i.message << "\n";
      for (const auto& i : report.warnings)
        std::cout << "  warning " << i.code << " at " << i.path << ": " << i.message << "\n";
    }
  }
  if (format == "json") std::cout << json{{"files", out_files}}.dump(2) << "\n";
  if (any_io) return kExitIo;
  return any_invalid ? kExitInvalid : kExitOk;
}

int cmd_convert(const std::string& path, const std::string& to, bool strict) {
  auto bytes = read_file(path);
  if (!bytes) {
    std::cerr << "crts: cannot read " << path << "\n";
    return kExitIo;
  }
  try {
    crts::Recommendation rec = parse_any(*bytes, {strict}, nullptr);
    std::cout << (to == "json" ? crts::write_json(rec) : crts::write_xml(rec));
    return kExitOk;
  } catch (const crts::Error& e) {
    std::cerr << "crts: " << e.what() << "\n";
    return std::string(e.code()) == "INVALID_DOCUMENT" ? kExitInvalid : kExitIo;
  }
}

void print_suggestions(const crts::MatchResult& result) {
  for (const auto& s : result.suggestion_summary) {
    std::cout << "  suggest: " << s.name;
    if (s.intervention_type) std::cout << " [" << *s.intervention_type << "]";
    if (s.grade) std::cout << " grade=" << *s.grade;
    if (s.modifier_text) std::cout << " modifier=\"" << *s.modifier_text << "\"";
    std::cout << "\n";
  }
  for (const auto& [left, right] : result.comparisons)
    std::cout << "  compared: " << left << " vs " << right << "\n";
}

int cmd_match(std::vector<std::string> rec_paths, const std::string& patient_path,
              bool closed_world, bool trace, const std::string& format) {
  auto patient_bytes = read_file(patient_path);
  if (!patient_bytes) {
    std::cerr << "crts: cannot read " << patient_path << "\n";
    return kExitIo;
  }
  crts::PatientRecord patient;
  try {
    patient = crts::parse_patient_json(*patient_bytes);
  } catch (const crts::Error& e) {
    std::cerr << "crts: " << patient_path << ": " << e.what() << "\n";
    return kExitIo;
  }
  crts::MatchConfig cfg;
  if (closed_world) cfg.closed_world_override = true;

  std::sort(rec_paths.begin(), rec_paths.end());
  bool any_applies = false;
  json out = json::array();
  for (const auto& path : rec_paths) {
    auto bytes = read_file(path);
    if (!bytes) {
      std::cerr << "crts: cannot read " << path << "\n";
      return kExitIo;
    }
    crts::Recommendation rec;
    crts::MatchResult result;
    try {
      rec = parse_any(*bytes, {}, nullptr);
      result = crts::match_recommendation(rec, patient, cfg);
    } catch (const crts::Error& e) {
      std::cerr << "crts: " << path << ": " << e.what() << "\n";
      return std::string(e.code()) == "INVALID_DOCUMENT" ? kExitInvalid : kExitIo;
    }
    if (result.verdict == crts::TruthValue::True) any_applies = true;

    if (format == "json") {
      json entry{{"doc", rec.doc_id},
                 {"path", path},
                 {"verdict", crts::verdict_text(result.verdict)},
                 {"suggestions", json::array()}};
      for (const auto& s : result.suggestion_summary) {
        json sj{{"id", s.id}, {"name", s.name}};
        if (s.intervention_type) sj["type"] = *s.intervention_type;
        if (s.grade) sj["grade"] = *s.grade;
        if (s.modifier_text) sj["modifier"] = *s.modifier_text;
        entry["suggestions"].push_back(sj);
      }
      if (trace) {
        entry["trace"] = json::array();
        for (const auto& t : result.trace)
          entry["trace"].push_back({{"id", t.block_id},
                                    {"value", crts::truth_token(t.value)},
                                    {"reason", t.reason}});
      }
      out.push_back(entry);
    } else {
      std::cout << rec.doc_id << ": " << verdict_paint(result.verdict) << "\n";
      if (trace) {
        for (const auto& t : result.trace)
          std::cout << "  " << t.block_id << " = " << crts::truth_token(t.value) << "  (" << t.reason
                    << ")\n";
        print_suggestions(result);
      }
    }
  }
  if (format == "json") std::cout << json{{"results", out}}.dump(2) << "\n";
  return any_applies ? kExitOk : kExitInvalid;
}

int cmd_query(const std::string& corpus_dir, const std::string& query_text,
              const std::string& index_path, const std::string& format) {
  crts::Query q;
  try {
    q = crts::parse_query(query_text);
  } catch (const crts::Error& e) {
    std::cerr << "crts: " << e.what() << "\n";
    return kExitUsage;
  }

  crts::RecommendationIndex index;
  if (!index_path.empty() && fs::exists(index_path)) {
    auto bytes = read_file(index_path);
    if (!bytes) {
      std::cerr << "crts: cannot read " << index_path << "\n";
      return kExitIo;
    }
    try {
      index = crts::read_index(*bytes);
    } catch (const crts::Error& e) {
      std::cerr << "crts: " << index_path << ": " << e.what() << "\n";
      return kExitIo;
    }
  } else {
    std::error_code ec;
    if (!fs::is_directory(corpus_dir, ec)) {
      std::cerr << "crts: not a directory: " << corpus_dir << "\n";
      return kExitIo;
    }
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      if (ext == ".xml" || ext == ".json") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    try {
      for (const auto& path : paths) {
        auto bytes = read_file(path);
        if (!bytes) {
          std::cerr << "crts: cannot read " << path << "\n";
          return kExitIo;
        }
        crts::Recommendation rec = parse_any(*bytes, {}, nullptr);
        auto report = crts::validate(rec);
        if (!report.valid()) {
          std::cerr << "crts: " << path << ": invalid document (" << report.errors[0].code << " at "
                    << report.errors[0].path << ")\n";
          return kExitIo;
        }
        crts::add_document(index, rec);
      }
    } catch (const crts::Error& e) {
      std::cerr << "crts: " << e.what() << "\n";
      return kExitIo;
    }
    if (!index_path.empty()) {
      std::ofstream out(index_path, std::ios::binary);
      if (!out) {
        std::cerr << "crts: cannot write " << index_path << "\n";
        return kExitIo;
      }
      out << crts::write_index(index);
    }
  }

  std::vector<std::string> docs;
  try {
    docs = crts::query(index, q);
  } catch (const crts::Error& e) {
    std::cerr << "crts: " << e.what() << "\n";
    return kExitUsage;
  }
  if (format == "json") {
    std::cout << json{{"docs", docs}}.dump(2) << "\n";
  } else {
    for (const auto& d : docs) std::cout << d << "\n";
  }
  return kExitOk;
}

int cmd_dnf(const std::string& path, const std::string& format) {
  auto bytes = read_file(path);
  if (!bytes) {
    std::cerr << "crts: cannot read " << path << "\n";
    return kExitIo;
  }
  try {
    crts::Recommendation rec = parse_any(*bytes, {}, nullptr);
    auto report = crts::validate(rec);
    if (!report.valid()) {
      std::cerr << "crts: " << path << ": invalid document (" << report.errors[0].code << " at "
                << report.errors[0].path << ")\n";
      return kExitInvalid;
    }
    auto graph = crts::normalize_to_dnf(crts::build_expr_graph(rec.population));
    auto terms = crts::dnf_terms(graph);
    if (format == "json") {
      std::cout << json{{"doc", rec.doc_id}, {"disjuncts", terms}}.dump(2) << "\n";
    } else if (terms.empty()) {
      std::cout << "TRUE\n";
    } else {
      for (const auto& t : terms) {
        for (size_t i = 0; i < t.size(); ++i) std::cout << (i ? " AND " : "") << t[i];
        std::cout << "\n";
      }
    }
    return kExitOk;
  } catch (const crts::Error& e) {
    std::cerr << "crts: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured clinical recommendation corpora: validate, convert, match, query."};
  app.require_subcommand(1);

  std::string format = "text";

  auto* validate_cmd = app.add_subcommand("validate", "Validate recommendation files");
  std::vector<std::string> validate_paths;
  bool lenient = false;
  validate_cmd->add_option("files", validate_paths, "Recommendation files")->required();
  validate_cmd->add_flag("--lenient", lenient, "Collect unknown elements as warnings");
  validate_cmd->add_flag("--strict", "Reject unknown elements (default)");
  validate_cmd->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  auto* convert_cmd = app.add_subcommand("convert", "Convert between XML and JSON");
  std::string convert_input, convert_to;
  convert_cmd->add_option("input", convert_input, "Input file (format auto-detected)")->required();
  convert_cmd->add_option("--to", convert_to, "Target format")
      ->required()
      ->check(CLI::IsMember({"xml", "json"}));
  convert_cmd->add_flag("--lenient", lenient, "Collect unknown elements as warnings");
  convert_cmd->add_flag("--strict", "Reject unknown elements (default)");

  auto* match_cmd = app.add_subcommand("match", "Match recommendations against a patient record");
  std::vector<std::string> match_paths;
  std::string patient_path;
  bool closed_world = false, trace = false;
  match_cmd->add_option("files", match_paths, "Recommendation files")->required();
  match_cmd->add_option("--patient", patient_path, "Patient record (JSON)")->required();
  match_cmd->add_flag("--closed-world", closed_world, "Treat missing facts as false");
  match_cmd->add_flag("--trace", trace, "Print per-criterion truth values");
  match_cmd->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  auto* query_cmd = app.add_subcommand("query", "Query a corpus directory");
  std::string corpus_dir, query_text, index_path;
  query_cmd->add_option("corpus", corpus_dir, "Directory of recommendation files")->required();
  query_cmd->add_option("query", query_text, "Query string")->required();
  query_cmd->add_option("--index", index_path, "Index cache file (loaded if present, else written)");
  query_cmd->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  auto* dnf_cmd = app.add_subcommand("dnf", "Print the population expression in DNF");
  std::string dnf_path;
  dnf_cmd->add_option("file", dnf_path, "Recommendation file")->required();
  dnf_cmd->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(validate_paths, !lenient, format);
    if (convert_cmd->parsed()) return cmd_convert(convert_input, convert_to, !lenient);
    if (match_cmd->parsed()) return cmd_match(match_paths, patient_path, closed_world, trace, format);
    if (query_cmd->parsed()) return cmd_query(corpus_dir, query_text, index_path, format);
    if (dnf_cmd->parsed()) return cmd_dnf(dnf_path, format);
  } catch (const std::exception& e) {
    std::cerr << "crts: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
