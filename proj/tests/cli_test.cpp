#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the installed binary with stderr folded into stdout.
RunResult run(const std::string& args) {
  std::string cmd = std::string(CRTS_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string corpus(const std::string& name) {
  return std::string(CRTS_CORPUS_DIR) + "/" + name;
}

std::string data(const std::string& name) { return std::string(CRTS_DATA_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("crts-test-" + std::to_string(getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("validate: corpus is clean, exit 0") {
  auto r = run("validate " + std::string(CRTS_CORPUS_DIR) + "/*.xml");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("OK") != std::string::npos);
  CHECK(r.out.find("INVALID") == std::string::npos);
  CHECK(r.out.find("\033[") == std::string::npos);  // piped: no color
}

TEST_CASE("validate: dangling reference exits 1 and names the code") {
  TempDir tmp;
  std::string bad = slurp(corpus("appendix-09.xml"));
  auto pos = bad.find("<inputConceptId>1</inputConceptId>");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, std::string("<inputConceptId>1</inputConceptId>").size(),
              "<inputConceptId>77</inputConceptId>");
  std::ofstream(tmp.path / "bad.xml") << bad;

  auto r = run("validate " + (tmp.path / "bad.xml").string());
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("DANGLING_REF") != std::string::npos);
}

TEST_CASE("validate: unreadable and unparseable files exit 3") {
  auto r = run("validate /nonexistent/file.xml");
  CHECK(r.exit_code == 3);

  TempDir tmp;
  std::ofstream(tmp.path / "junk.xml") << "this is not xml at all";
  auto r2 = run("validate " + (tmp.path / "junk.xml").string());
  CHECK(r2.exit_code == 3);
}

TEST_CASE("validate: json report shape") {
  auto r = run("validate --format=json " + corpus("appendix-09.xml"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"files\"") != std::string::npos);
  CHECK(r.out.find("\"status\": \"ok\"") != std::string::npos);
}

TEST_CASE("convert: canonical xml is a fixpoint; json round trips") {
  std::string canonical = slurp(corpus("appendix-01.xml"));
  auto x = run("convert --to=xml " + corpus("appendix-01.xml"));
  CHECK(x.exit_code == 0);
  CHECK(x.out == canonical);

  TempDir tmp;
  auto j = run("convert --to=json " + corpus("appendix-01.xml"));
  CHECK(j.exit_code == 0);
  std::ofstream(tmp.path / "doc.json") << j.out;
  auto back = run("convert --to=xml " + (tmp.path / "doc.json").string());
  CHECK(back.exit_code == 0);
  CHECK(back.out == canonical);
}

TEST_CASE("convert: corrupt input exits 3") {
  TempDir tmp;
  std::ofstream(tmp.path / "broken.xml") << "<recommendation id='x'><population>";
  auto r = run("convert --to=json " + (tmp.path / "broken.xml").string());
  CHECK(r.exit_code == 3);
}

TEST_CASE("match: the three worked-example scenarios") {
  auto applies = run("match --patient " + data("patient-ccc-icd.json") + " " + corpus("figure4.xml"));
  CHECK(applies.exit_code == 0);
  CHECK(applies.out.find("figure4: Applies") != std::string::npos);

  auto unknown =
      run("match --patient " + data("patient-ccc-only.json") + " " + corpus("figure4.xml"));
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.out.find("figure4: Insufficient data") != std::string::npos);

  auto no = run("match --closed-world --patient " + data("patient-empty.json") + " " +
                corpus("figure4.xml"));
  CHECK(no.exit_code == 1);
  CHECK(no.out.find("figure4: Does not apply") != std::string::npos);
}

TEST_CASE("match: trace lists leaves and suggestions") {
  auto r = run("match --trace --patient " + data("patient-ccc-icd.json") + " " +
               corpus("figure4.xml"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("1 = True") != std::string::npos);
  CHECK(r.out.find("2 = True") != std::string::npos);
  CHECK(r.out.find("suggest: Amiodarone") != std::string::npos);
  CHECK(r.out.find("suggest: Beta blocker therapy") != std::string::npos);
}

TEST_CASE("match: missing patient file exits 3") {
  auto r = run("match --patient /nonexistent/patient.json " + corpus("figure4.xml"));
  CHECK(r.exit_code == 3);
}

TEST_CASE("query: spec examples and exits") {
  auto hf = run("query " + std::string(CRTS_CORPUS_DIR) + " 'population.disorder.cui=C0018801'");
  CHECK(hf.exit_code == 0);
  CHECK(hf.out ==
        "appendix-02\nappendix-04\nappendix-05\nappendix-06\nappendix-07\nappendix-08\n");

  auto diuretics =
      run("query " + std::string(CRTS_CORPUS_DIR) + " 'suggestion.intervention.name=diuretics'");
  CHECK(diuretics.out == "appendix-09\n");

  auto bad = run("query " + std::string(CRTS_CORPUS_DIR) + " 'population.bogus=1'");
  CHECK(bad.exit_code == 2);

  TempDir tmp;
  auto empty = run("query " + tmp.path.string() + " 'population.disorder.cui=C0018801'");
  CHECK(empty.exit_code == 0);
  CHECK(empty.out.empty());
}

TEST_CASE("query: --index caches and reloads") {
  TempDir tmp;
  auto idx = (tmp.path / "corpus.idx").string();
  auto first = run("query --index " + idx + " " + std::string(CRTS_CORPUS_DIR) +
                   " 'population.disorder.cui=C0018801'");
  CHECK(first.exit_code == 0);
  REQUIRE(fs::exists(idx));
  std::string header = slurp(idx).substr(0, 10);
  CHECK(header == "CRTSIDX 1\n");

  auto second = run("query --index " + idx + " " + std::string(CRTS_CORPUS_DIR) +
                    " 'population.disorder.cui=C0018801'");
  CHECK(second.exit_code == 0);
  CHECK(second.out == first.out);
}

TEST_CASE("dnf: population normal form, one term per line") {
  auto r = run("dnf " + corpus("appendix-01.xml"));
  CHECK(r.exit_code == 0);
  CHECK(r.out ==
        "1 AND 4\n1 AND 5\n2 AND 4\n2 AND 5\n3 AND 4\n3 AND 5\n");

  auto simple = run("dnf " + corpus("appendix-09.xml"));
  CHECK(simple.out == "1 AND 2\n");

  auto js = run("dnf --format=json " + corpus("appendix-09.xml"));
  CHECK(js.out.find("\"disjuncts\"") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("no-such-command").exit_code == 2);
  CHECK(run("convert --to=yaml x.xml").exit_code == 2);
  CHECK(run("match").exit_code == 2);
}
