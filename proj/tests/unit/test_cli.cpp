#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"
#include "fixtures.hpp"
#include "mcox/simulation.hpp"
#include "reports.hpp"

using namespace mcox;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "mcox");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_app(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

cli::Json load_json(const fs::path& file) { return cli::Json::parse(fixture::read_file(file)); }

const char* kFeatures = "x1,x2,x3,x4,x5";

fs::path simulated_csv(const fs::path& dir, std::size_t n, std::uint64_t seed) {
  const fs::path file = dir / "data.csv";
  const Outcome o = run({"simulate", "--n", std::to_string(n), "--seed", std::to_string(seed), "--reps", "0",
                         "--data-out", file.string(), "--out", (dir / "sim").string()});
  REQUIRE(o.code == 0);
  return file;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fit on simulated data") {
    const fs::path dir = fixture::temp_dir("cli-fit");
    const fs::path csv = simulated_csv(dir, 10000, 3);
    const Outcome o = run({"fit", "--data", csv.string(), "--features", kFeatures, "--out", (dir / "o").string()});
    REQUIRE(o.code == 0);
    const cli::Json j = load_json(dir / "o" / "result.json");
    CHECK(j["schema"] == cli::kFitSchema);
    const Eigen::VectorXd beta0 = default_beta0();
    for (int k = 0; k < 5; ++k) {
      const double est = j["beta"][k];
      const double se = std::sqrt(static_cast<double>(j["variance"][k][k]));
      CHECK(std::abs(est - beta0[k]) < 3 * se);
    }
    CHECK(fs::exists(dir / "o" / "report.csv"));
  }

  TEST_CASE("empty csv is an input error") {
    const fs::path dir = fixture::temp_dir("cli-empty");
    std::ofstream(dir / "e.csv") << "time,status,x1\n";
    const Outcome o = run({"fit", "--data", (dir / "e.csv").string(), "--features", "x1", "--out", dir.string()});
    CHECK(o.code == 1);
    CHECK(o.err.find("EmptyDataset") != std::string::npos);
  }

  TEST_CASE("missing column and unreadable file are input errors") {
    const fs::path dir = fixture::temp_dir("cli-missing");
    std::ofstream(dir / "m.csv") << "time,status,x1\n1,1,0\n";
    const Outcome a = run({"fit", "--data", (dir / "m.csv").string(), "--features", "zz", "--out", dir.string()});
    CHECK(a.code == 1);
    CHECK(a.err.find("MissingColumn") != std::string::npos);
    const Outcome b = run({"fit", "--data", (dir / "nope.csv").string(), "--features", "x1", "--out", dir.string()});
    CHECK(b.code == 1);
  }

  TEST_CASE("iteration cap exits 2 and still writes the result") {
    const fs::path dir = fixture::temp_dir("cli-maxiter");
    const fs::path csv = simulated_csv(dir, 5000, 4);
    const Outcome o = run({"fit", "--data", csv.string(), "--features", kFeatures, "--max-iter", "1", "--out",
                           (dir / "o").string()});
    CHECK(o.code == 2);
    const cli::Json j = load_json(dir / "o" / "result.json");
    CHECK(j["converged"] == false);
  }

  TEST_CASE("mcox shrinks the standard errors") {
    const fs::path dir = fixture::temp_dir("cli-mcox");
    const fs::path csv = simulated_csv(dir, 100000, 5);
    const Outcome o = run({"mcox", "--data", csv.string(), "--features", kFeatures, "--r", "1000", "--moment", "opt",
                           "--with-oses", "--out", (dir / "o").string()});
    REQUIRE(o.code == 0);
    const cli::Json j = load_json(dir / "o" / "result.json");
    double ase_mcox = 0.0, ase_uni = 0.0;
    for (int k = 0; k < 5; ++k) {
      ase_mcox += std::sqrt(static_cast<double>(j["variance"][k][k])) / 5;
      ase_uni += std::sqrt(static_cast<double>(j["uni_variance"][k][k])) / 5;
    }
    CHECK(ase_mcox < ase_uni);
    CHECK(j.contains("beta_oses"));
    CHECK(j["timings_ms"].contains("moment_pass"));
  }

  TEST_CASE("r equal to n warns and reproduces the full fit") {
    const fs::path dir = fixture::temp_dir("cli-rn");
    const fs::path csv = simulated_csv(dir, 2000, 6);
    const Outcome m = run({"mcox", "--data", csv.string(), "--features", kFeatures, "--r", "2000", "--out",
                           (dir / "m").string()});
    REQUIRE(m.code == 0);
    CHECK(m.err.find("warning") != std::string::npos);
    const Outcome f = run({"fit", "--data", csv.string(), "--features", kFeatures, "--out", (dir / "f").string()});
    REQUIRE(f.code == 0);
    const cli::Json jm = load_json(dir / "m" / "result.json");
    const cli::Json jf = load_json(dir / "f" / "result.json");
    CHECK_FALSE(jm["warnings"].empty());
    for (int k = 0; k < 5; ++k) {
      CHECK(static_cast<double>(jm["beta_mcox"][k]) == static_cast<double>(jf["beta"][k]));
    }
  }

  TEST_CASE("same seed gives identical output at any thread count") {
    const fs::path dir = fixture::temp_dir("cli-determinism");
    const fs::path csv = simulated_csv(dir, 20000, 7);
    std::vector<std::string> docs;
    for (const char* threads : {"1", "8", "1"}) {
      const fs::path o = dir / (std::string("t") + threads + std::to_string(docs.size()));
      REQUIRE(run({"mcox", "--data", csv.string(), "--features", kFeatures, "--r", "500", "--seed", "11",
                   "--with-oses", "--threads", threads, "--out", o.string()})
                  .code == 0);
      docs.push_back(cli::strip_timing(load_json(o / "result.json")).dump(2));
    }
    CHECK(docs[0] == docs[1]);
    CHECK(docs[0] == docs[2]);
  }

  TEST_CASE("aft and linear moments from the command line") {
    const fs::path dir = fixture::temp_dir("cli-moments");
    const fs::path csv = simulated_csv(dir, 20000, 8);
    CHECK(run({"mcox", "--data", csv.string(), "--features", kFeatures, "--r", "500", "--moment", "aft", "--out",
               (dir / "a").string()})
              .code == 0);
    std::ofstream(dir / "m.csv") << "0,0,1,0,0,0,0\n0,1,0,0,0,0,0\n";
    CHECK(run({"mcox", "--data", csv.string(), "--features", kFeatures, "--r", "500", "--moment",
               "linear:" + (dir / "m.csv").string(), "--out", (dir / "l").string()})
              .code == 0);
    CHECK(load_json(dir / "l" / "result.json")["moment"] == "linear");
    CHECK(run({"mcox", "--data", csv.string(), "--features", kFeatures, "--r", "500", "--moment", "bogus", "--out",
               (dir / "b").string()})
              .code == 1);
  }

  TEST_CASE("time-dependent path through the command line") {
    const fs::path dir = fixture::temp_dir("cli-dep");
    const fs::path file = dir / "dep.csv";
    REQUIRE(run({"simulate", "--n", "3000", "--covariate", "time-dependent", "--reps", "0", "--data-out",
                 file.string(), "--out", (dir / "s").string()})
                .code == 0);
    const Outcome o = run({"mcox", "--data", file.string(), "--features", "x1,x2,x3,x4,x5,eps1,eps2,eps3,eps4,eps5",
                           "--path", "poly:sum:1,t", "--r", "500", "--out", (dir / "o").string()});
    CHECK(o.code == 0);
    CHECK(load_json(dir / "o" / "result.json")["path"] == "poly:sum:1,t");
  }

  TEST_CASE("minimal simulate run") {
    const fs::path dir = fixture::temp_dir("cli-sim");
    const Outcome o = run({"simulate", "--n", "2000", "--r", "200", "--reps", "2", "--out", dir.string()});
    REQUIRE(o.code == 0);
    const cli::Json j = load_json(dir / "result.json");
    CHECK(j["schema"] == cli::kSimulateSchema);
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "plots.gp"));
    CHECK(run({"simulate", "--n", "2000", "--reps", "1", "--out", dir.string()}).code == 1);
  }

  TEST_CASE("bench emits a slope table") {
    const fs::path dir = fixture::temp_dir("cli-bench");
    const Outcome o = run({"bench", "--grid", "n:20000,40000", "--r", "300", "--repeats", "1", "--out", dir.string()});
    REQUIRE(o.code == 0);
    const cli::Json j = load_json(dir / "result.json");
    REQUIRE_FALSE(j["slopes"].empty());
    bool flagged = false;
    for (const auto& s : j["slopes"]) flagged = flagged || s.contains("holds");
    CHECK(flagged);
    CHECK(o.out.find("slope") != std::string::npos);
  }

  TEST_CASE("usage errors") {
    const Outcome a = run({"frobnicate"});
    CHECK(a.code == 1);
    CHECK(a.err.find("Usage") != std::string::npos);
    CHECK(run({}).code == 1);
    CHECK(run({"mcox", "--data", "x.csv", "--features", "a"}).code == 1);
  }
}
