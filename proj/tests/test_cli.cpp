#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bakr/data.hpp"

using namespace bakr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bakr_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string dir(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(BAKR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("simulate --no-such-flag 1") == 2);
  TempDir tmp;
  CHECK(run_cli("simulate --kind scenario --rho 1.5 --n 60 --p 60 --out " +
                tmp.dir("sim")) == 2);
  CHECK(run_cli("simulate --kind nonsense --out " + tmp.dir("sim")) == 2);
}

TEST_CASE("data errors exit with code 3") {
  TempDir tmp;
  CHECK(run_cli("fit --x /no/such/file.csv --y /no/such/y.csv --out " +
                tmp.dir("fit")) == 3);
}

TEST_CASE("simulate, fit, predict, associate round trip") {
  TempDir tmp;
  const std::string sim = tmp.dir("sim");
  REQUIRE(run_cli("simulate --kind scenario --n 60 --p 55 --h2 0.6 --rho 0.5 "
                  "--seed 3 --out " + sim) == 0);
  CHECK(fs::exists(fs::path(sim) / "X.csv"));
  CHECK(fs::exists(fs::path(sim) / "y.csv"));
  CHECK(fs::exists(fs::path(sim) / "truth.json"));
  CHECK(fs::exists(fs::path(sim) / "config.resolved.ini"));
  const DesignMatrix x = load_matrix(sim + "/X.csv");
  CHECK(x.n() == 60);
  CHECK(x.p() == 55);

  const std::string fit = tmp.dir("fit");
  REQUIRE(run_cli("fit --x " + sim + "/X.csv --y " + sim + "/y.csv --h 1 "
                  "--iters 400 --burnin 200 --seed 5 --holdout 0.3 --out " +
                  fit) == 0);
  for (const char* name : {"theta.bin", "projection.bin", "sidecar.json",
                           "beta_summary.csv", "summary.json", "split.csv",
                           "config.resolved.ini"}) {
    CHECK(fs::exists(fs::path(fit) / name));
  }
  const std::string summary = slurp(fs::path(fit) / "summary.json");
  CHECK(summary.find("holdout_mspe") != std::string::npos);

  const std::string pred = tmp.dir("pred");
  REQUIRE(run_cli("predict --chain " + fit + " --x-star " + sim +
                  "/X.csv --out " + pred) == 0);
  const std::string predictions = slurp(fs::path(pred) / "predictions.csv");
  CHECK(std::count(predictions.begin(), predictions.end(), '\n') == 61);

  const std::string assoc = tmp.dir("assoc");
  REQUIRE(run_cli("associate --chain " + fit + " --out " + assoc) == 0);
  const std::string ppaa_csv = slurp(fs::path(assoc) / "ppaa.csv");
  CHECK(std::count(ppaa_csv.begin(), ppaa_csv.end(), '\n') == 56);

  const std::string assoc_perm = tmp.dir("assoc_perm");
  REQUIRE(run_cli("associate --chain " + fit + " --perms 2 --fwer 0.05 --out " +
                  assoc_perm) == 0);
  const std::string calibration = slurp(fs::path(assoc_perm) / "calibration.json");
  CHECK(calibration.find("\"n_perm\": 2") != std::string::npos);
  CHECK(calibration.find("permutation") != std::string::npos);

  SUBCASE("rerunning fit from its resolved config is bit-identical") {
    const std::string fit2 = tmp.dir("fit2");
    REQUIRE(run_cli("fit --config " + fit + "/config.resolved.ini --out " +
                    fit2) == 0);
    CHECK(slurp(fs::path(fit) / "theta.bin") == slurp(fs::path(fit2) / "theta.bin"));
    CHECK(slurp(fs::path(fit) / "summary.json") ==
          slurp(fs::path(fit2) / "summary.json"));
    CHECK(slurp(fs::path(fit) / "beta_summary.csv") ==
          slurp(fs::path(fit2) / "beta_summary.csv"));
  }

  SUBCASE("flags override config values") {
    const std::string fit3 = tmp.dir("fit3");
    REQUIRE(run_cli("fit --config " + fit + "/config.resolved.ini --seed 6 "
                    "--out " + fit3) == 0);
    CHECK(slurp(fs::path(fit) / "theta.bin") != slurp(fs::path(fit3) / "theta.bin"));
  }
}

TEST_CASE("predict requires a complete chain directory") {
  TempDir tmp;
  CHECK(run_cli("predict --chain " + tmp.dir("nochain") + " --x-star foo.csv "
                "--out " + tmp.dir("pred")) == 3);
}

TEST_CASE("benchmark emits one row per grid cell plus the baseline") {
  TempDir tmp;
  const std::string bench = tmp.dir("bench");
  REQUIRE(run_cli("benchmark --kind scenario --n 60 --p 55 --datasets 1 "
                  "--h-grid 1 --iters 300 --burnin 150 --train-frac 0.5 "
                  "--seed 11 --out " + bench) == 0);
  const std::string results = slurp(fs::path(bench) / "results.csv");
  CHECK(std::count(results.begin(), results.end(), '\n') == 3);  // header + 2
  CHECK(results.find("bakr") != std::string::npos);
  CHECK(results.find("linear") != std::string::npos);
  CHECK(fs::exists(fs::path(bench) / "summary.json"));
}

TEST_CASE("output root environment variable resolves relative paths") {
  TempDir tmp;
  setenv("BAKR_OUTPUT_ROOT", tmp.path.c_str(), 1);
  REQUIRE(run_cli("simulate --kind polynomial --n 40 --p 30 --n-causal 4 "
                  "--seed 2 --out envsim") == 0);
  unsetenv("BAKR_OUTPUT_ROOT");
  CHECK(fs::exists(tmp.path / "envsim" / "X.csv"));
}
