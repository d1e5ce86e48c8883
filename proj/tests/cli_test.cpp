#include "susyfact/io.hpp"

#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>

using namespace susyfact;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SUSYFACT_CLI;
const std::string kConfigs = SUSYFACT_CONFIG_DIR;

fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("susyfact_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string err;
};

/// Runs the CLI with stderr captured; args are passed through the shell verbatim.
Run run(const std::string& args) {
  fs::path err = scratch() / "stderr.txt";
  std::string cmd = kCli + " " + args + " 2> " + err.string() + " > /dev/null";
  int st = std::system(cmd.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(err)};
}

std::string cfg(const char* f) { return kConfigs + "/" + f; }

json report(const char* name) { return json::parse(slurp(scratch() / name)); }

}  // namespace

TEST_CASE("check on the bundled Witten operator") {
  auto out = (scratch() / "witten.json").string();
  auto r = run("check --operator " + cfg("witten.json") + " --phi \"2V\" --out " + out);
  CHECK(r.code == 0);
  auto j = report("witten.json");
  CHECK(j["status"] == "verified");
  CHECK(j["schema_version"] == kSchemaVersion);
}

TEST_CASE("check on unequal temperatures fails the kernel condition") {
  auto out = (scratch() / "unequal.json").string();
  auto r = run("check --config " + cfg("chain_unequal.json") + " --phi \"phi0 + 2*deltaW/alpha1\" --out " + out);
  CHECK(r.code == 1);
  auto j = report("unequal.json");
  CHECK(j["status"] == "necessary_condition_failed");
  CHECK(j.contains("witness"));
  for (const char* c : {"chain_equal.json", "chain_decoupled.json"}) CHECK(run("check --config " + cfg(c)).code == 0);
}

TEST_CASE("construct and verify-models") {
  auto out = (scratch() / "kfp.json").string();
  CHECK(run("construct --operator " + cfg("kfp.json") + " --out " + out).code == 0);
  auto j = report("kfp.json");
  CHECK(j["status"] == "constructed");
  CHECK(j["structure"].contains("A"));
  CHECK(run("construct --model kfp_n1").code == 0);
  auto models = (scratch() / "models.json").string();
  CHECK(run("verify-models --out " + models).code == 0);
  auto m = report("models.json");
  CHECK(m["all_pass"] == true);
  CHECK(m["models"].size() == 7);
}

TEST_CASE("obstruct on the bundled chains") {
  auto out = (scratch() / "obstruct.json").string();
  CHECK(run("obstruct --config " + cfg("chain_unequal.json") + " --out " + out).code == 0);
  auto j = report("obstruct.json")["obstruction"];
  std::string v = j["verdict"];
  CHECK((v == "blowup_at_minimum" || v == "nonsmooth_at_saddle"));
  CHECK(j["lambda_dot_alpha"][0].get<double>() > 0);
  CHECK(j["nearest_integer_distance"].get<double>() > 1e-3);

  auto eq = (scratch() / "obstruct_eq.json").string();
  CHECK(run("obstruct --config " + cfg("chain_equal.json") + " --out " + eq).code == 0);
  auto e = report("obstruct_eq.json")["obstruction"];
  CHECK(e["rhs_zero"] == true);
  CHECK(e["verdict"] == "inconclusive");
}

TEST_CASE("spectral and flow artifacts") {
  auto out = (scratch() / "spec.json").string();
  CHECK(run("spectral --w-grid=-1,1,2 --out " + out).code == 0);
  auto j = report("spec.json");
  REQUIRE(j["rows"].size() == 3);
  CHECK(j["rows"][0]["class"] == "one_negative");
  CHECK(j["rows"][2]["class"] == "all_re_positive");
  CHECK(slurp(scratch() / "spec.csv").rfind("w,re1,im1,re2,im2,re3,im3,class\n", 0) == 0);

  auto fout = (scratch() / "flow.json").string();
  CHECK(run("flow --config " + cfg("chain_decoupled.json") + " --out " + fout).code == 0);
  CHECK(report("flow.json")["ok"] == true);
  std::string csv = slurp(scratch() / "flow.csv");
  CHECK(csv.rfind("t,x1,x2,y1,y2,z1,z2,phi0\n", 0) == 0);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run("").code == 2);
  CHECK(run("check --bogus").code == 2);
  CHECK(run("check --operator " + cfg("witten.json") + " --phi \"2W\"").code == 2);
  CHECK(run("check --operator /nonexistent.json").code == 2);
  CHECK(run("spectral --w-grid=1:2").code == 2);
  CHECK(run("obstruct --config " + cfg("chain_unequal.json") + " --tol-overrides nonsense=1").code == 2);

  fs::path bad = scratch() / "bad_chain.json";
  std::ofstream(bad) << "{\"n\": 1, \"W1\": \"x1^2 +\", \"W2\": \"x2^2/2\", \"alpha1\": 1, \"alpha2\": 2}";
  auto r = run("flow --config " + bad.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("/W1: column") != std::string::npos);
}

TEST_CASE("repeated runs are byte identical") {
  for (const std::string& args : std::vector<std::string>{"spectral --w-grid=-3:3:13", "flow --seed 7 --config " + cfg("chain_unequal.json"),
                                 "obstruct --config " + cfg("chain_unequal.json")}) {
    auto a = (scratch() / "rep_a.json").string(), b = (scratch() / "rep_b.json").string();
    for (const char* f : {"rep_a.json", "rep_b.json", "rep_a.csv", "rep_b.csv"}) fs::remove(scratch() / f);
    REQUIRE(run(args + " --out " + a).code == 0);
    REQUIRE(run(args + " --out " + b).code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(scratch() / "rep_a.csv") == slurp(scratch() / "rep_b.csv"));
  }
}
