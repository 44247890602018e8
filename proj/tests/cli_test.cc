#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lambdaehr/text.h"

namespace lambdaehr {
namespace {

namespace fs = std::filesystem;

const std::string kData = LAMBDAEHR_DATA_DIR;

std::string Dir() {
  static const std::string dir = [] {
    fs::path p = fs::path(LAMBDAEHR_TEST_TMP_DIR) / "cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
  }();
  return dir;
}

std::string Quote(const std::string &s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

// Runs the CLI with stdout and stderr captured into files under Dir().
int Cli(const std::string &args, std::string *out = nullptr, std::string *err = nullptr) {
  std::string o = Dir() + "/stdout.txt", e = Dir() + "/stderr.txt";
  std::string cmd = "cd " + Quote(Dir()) + " && env -u LAMBDAEHR_REGISTRY " +
                    Quote(LAMBDAEHR_CLI) + " " + args + " >" + o + " 2>" + e;
  int status = std::system(cmd.c_str());
  if (out) *out = ReadFile(o);
  if (err) *err = ReadFile(e);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t Lines(const std::string &path) {
  std::size_t n = 0;
  for (char c : ReadFile(path)) n += c == '\n';
  return n;
}

TEST_CASE("usage errors") {
  std::string out, err;
  CHECK(Cli("frobnicate", &out, &err) == 1);
  CHECK(err.find("Usage:") != std::string::npos);
  CHECK(Cli("", &out, &err) == 1);
  CHECK(Cli("train --mode grammar", &out, &err) == 1);
  CHECK(err.find("lambdaehr train") != std::string::npos);
  CHECK(Cli("eval", &out, &err) == 1);
  CHECK(Cli("eval cd --data " + Quote(kData + "/icu_like.json"), &out, &err) == 1);
  CHECK(Cli("--help", &out, &err) == 0);
  CHECK(out.find("gen-data") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  WriteFile(Dir() + "/bad.jsonl", "{\"id\": \"a\", \"question\": \"q\", \"lf\": \"count(\"}\n");
  std::string err;
  CHECK(Cli("preprocess bad.jsonl -o out.jsonl", nullptr, &err) == 2);
  CHECK(err.find("bad.jsonl:1") != std::string::npos);
  WriteFile(Dir() + "/two.jsonl",
            "{\"id\": \"a\", \"question\": \"how many\", \"lf\": \"count(λx.has_concept(x, C1))\"}\n");
  CHECK(Cli("eval cv --mode lexicon --data two.jsonl --k 10") == 2);
}

TEST_CASE("generate, evaluate and parse") {
  REQUIRE(Cli("gen-data " + Quote(kData + "/icu_like.json") + " -o icu.jsonl") == 0);
  CHECK(Lines(Dir() + "/icu.jsonl") == 401);
  REQUIRE(fs::exists(Dir() + "/icu.jsonl.manifest.json"));
  auto manifest = nlohmann::json::parse(ReadFile(Dir() + "/icu.jsonl.manifest.json"));
  for (const char *key : {"command", "config", "seeds", "inputs", "outputs", "version",
                          "duration_seconds", "argv"}) {
    CHECK(manifest.contains(key));
  }

  std::string spec = kData + "/icu_like.json";
  WriteFile(Dir() + "/lexicon.json", "{\"mode\": \"lexicon\", \"spec\": \"" + spec +
                                         "\", \"ranker\": {\"epochs\": 30, \"learning_rate\": "
                                         "0.05, \"depth_limit\": 3}}\n");
  REQUIRE(Cli("eval cv --k 10 --config lexicon.json --data icu.jsonl -o cv.json "
              "--predictions cv.jsonl --seed 4") == 0);
  auto report = nlohmann::json::parse(ReadFile(Dir() + "/cv.json"));
  CHECK(report["predictions"].size() == 401);
  CHECK(Lines(Dir() + "/cv.jsonl") == 401);

  REQUIRE(Cli("train --config lexicon.json --train icu.jsonl -o icu.ckpt") == 0);
  std::string entities =
      R"([{"start":4,"end":7,"kind":"person","value":"her"},)"
      R"({"start":8,"end":19,"kind":"concept","value":"C0005903"},)"
      R"({"start":31,"end":34,"kind":"measurement","value":"38C"}])";
  std::string out;
  REQUIRE(Cli("parse --model icu.ckpt --question " + Quote("Did her temperature fall below 38C?") +
                  " --entities " + Quote(entities),
              &out) == 0);
  CHECK(out == "delta(λx.has_concept(x, C0005903) ∧ less_than(x, '38C'))\n");

  REQUIRE(Cli("eval cd --model icu.ckpt --data icu.jsonl -o cd.json") == 0);
  REQUIRE(Cli("analyze --reports cv.json cd.json -o analysis.txt", &out) == 0);
  CHECK(out.find("CV") != std::string::npos);
}

TEST_CASE("replaying manifests reproduces artifacts") {
  REQUIRE(Cli("gen-data " + Quote(kData + "/fhir_like.json") + " --seed 9 -o fhir.jsonl") == 0);
  REQUIRE(Cli("augment fhir.jsonl --strategy entity --count 300 --seed 2 -o aug.jsonl") == 0);
  REQUIRE(Cli("preprocess fhir.jsonl -o pp.jsonl") == 0);
  for (const char *artifact : {"fhir.jsonl", "aug.jsonl", "pp.jsonl"}) {
    std::string path = Dir() + "/" + artifact;
    std::string before = ReadFile(path);
    fs::remove(path);
    CHECK(Cli("replay " + Quote(path + ".manifest.json")) == 0);
    CHECK(ReadFile(path) == before);
  }
  CHECK(Lines(Dir() + "/aug.jsonl") == 300);
}

}  // namespace
}  // namespace lambdaehr
