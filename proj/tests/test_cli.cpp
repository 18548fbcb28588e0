#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const char* kBin = BELL_LAB_BIN;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("bell_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string cmd =
      std::string(kBin) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("worker count never changes the output bytes") {
  struct Case {
    const char* name;
    std::string args;
    const char* file;
  };
  const std::vector<Case> cases = {
      {"chsh", "chsh --model quantum --n 4000 --save-trials", "chsh_report"},
      {"chsh-trials", "chsh --model quantum --n 4000 --save-trials",
       "pair_trials"},
      {"quadruples", "quadruples --model lrhvm --n 4000",
       "quadruple_report"},
      {"violation-freq",
       "violation-freq --model shvm-boundary --n 300 --reps 200",
       "violation_freq"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    TempDir d1("w1"), d4("w4");
    REQUIRE(run(c.args + " --seed 99 --workers 1 --out-dir " +
                d1.path.string()) == 0);
    REQUIRE(run(c.args + " --seed 99 --workers 4 --out-dir " +
                d4.path.string()) == 0);
    const fs::path f1 = d1.path / (std::string(c.file) + ".csv");
    const fs::path f4 = d4.path / (std::string(c.file) + ".csv");
    REQUIRE(fs::exists(f1));
    REQUIRE(fs::exists(f4));
    CHECK(slurp(f1) == slurp(f4));
  }
}

TEST_CASE("angle suffixes: degrees and radians describe the same design") {
  TempDir deg("deg"), rad("rad");
  REQUIRE(run("chsh --model lrhvm --n 2000 --angles 0d,90d,45d,135d "
              "--seed 7 --out-dir " +
              deg.path.string()) == 0);
  REQUIRE(run("chsh --model lrhvm --n 2000 --angles "
              "0,1.5707963267948966,0.7853981633974483,2.356194490192345 "
              "--seed 7 --out-dir " +
              rad.path.string()) == 0);
  CHECK(slurp(deg.path / "chsh_report.csv") ==
        slurp(rad.path / "chsh_report.csv"));
}

TEST_CASE("config files feed options and the command line wins") {
  TempDir d("cfg");
  const fs::path cfg = d.path / "lab.ini";
  {
    std::ofstream c(cfg);
    c << "seed=77\n";
  }
  REQUIRE(run("--config " + cfg.string() + " bertrand --n 2000 --out-dir " +
              d.path.string()) == 0);
  const std::string from_config = slurp(d.path / "bertrand.csv");
  CHECK(from_config.find("seed=77") != std::string::npos);

  TempDir d2("cfg2");
  REQUIRE(run("--config " + cfg.string() +
              " --seed 88 bertrand --n 2000 --out-dir " +
              d2.path.string()) == 0);
  const std::string overridden = slurp(d2.path / "bertrand.csv");
  CHECK(overridden.find("seed=88") != std::string::npos);
  CHECK(overridden.find("seed=77") == std::string::npos);
}

TEST_CASE("jsonl format emits one json object per line with meta first") {
  TempDir d("jsonl");
  REQUIRE(run("bertrand --n 1000 --seed 5 --format jsonl --out-dir " +
              d.path.string()) == 0);
  const fs::path f = d.path / "bertrand.jsonl";
  REQUIRE(fs::exists(f));
  std::ifstream in(f);
  std::string first;
  std::getline(in, first);
  CHECK(first.find("\"kind\"") != std::string::npos);
  CHECK(first.find("\"seed\"") != std::string::npos);
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // one per protocol
}

TEST_CASE("every file header records tool, command, and seed") {
  TempDir d("meta");
  REQUIRE(run("quadruples --model lrhvm --n 500 --seed 31 --out-dir " +
              d.path.string()) == 0);
  const std::string text = slurp(d.path / "quadruple_report.csv");
  CHECK(text.find("# tool=bell-lab") != std::string::npos);
  CHECK(text.find("# command=quadruples") != std::string::npos);
  CHECK(text.find("# seed=31") != std::string::npos);
  CHECK(text.find("# workers=") == std::string::npos);
}

TEST_CASE("reshuffle round-trips its own quadruple trials") {
  TempDir d("rt");
  REQUIRE(run("quadruples --model lrhvm --n 800 --seed 13 --save-trials "
              "--out-dir " +
              d.path.string()) == 0);
  const fs::path trials = d.path / "quadruple_trials.csv";
  REQUIRE(fs::exists(trials));
  REQUIRE(run("reshuffle --quadruples " + trials.string() + " --out-dir " +
              d.path.string()) == 0);
  const std::string text = slurp(d.path / "reshuffle.csv");
  CHECK(text.find("feasible=1") != std::string::npos);

  // Independently sampled pair sheets are not reshuffleable.
  TempDir d2("rt2");
  REQUIRE(run("reshuffle --model quantum --n 4000 --seed 17 --out-dir " +
              d2.path.string()) == 0);
  const std::string infeasible = slurp(d2.path / "reshuffle.csv");
  CHECK(infeasible.find("feasible=0") != std::string::npos);
  CHECK(infeasible.find("violated_condition=") != std::string::npos);
  CHECK(infeasible.find("max_count_excess=") != std::string::npos);
}

TEST_CASE("purity and fine-structure consume recorded run files") {
  TempDir d("runs");
  // Two fixture runs with a planted frequency difference.
  for (int k = 0; k < 2; ++k) {
    std::ofstream out(d.path / ("run" + std::to_string(k) + ".csv"));
    out << "trial,outcome\n";
    for (int i = 0; i < 1200; ++i) {
      const int flip = (i * 7919 + k * 104729) % 10;
      const int v = flip < (k == 0 ? 3 : 7) ? 1 : -1;
      out << i << "," << v << "\n";
    }
  }
  REQUIRE(run("purity --runs " + (d.path / "run0.csv").string() + " " +
              (d.path / "run1.csv").string() + " --min-subset 250 --out-dir " +
              d.path.string()) == 0);
  const std::string purity = slurp(d.path / "purity.csv");
  CHECK(purity.find("symbols") != std::string::npos);
  CHECK(purity.find("pure=0") != std::string::npos);

  REQUIRE(run("fine-structure --run " + (d.path / "run0.csv").string() +
              " --max-lag 20 --out-dir " + d.path.string()) == 0);
  const std::string fine = slurp(d.path / "fine_structure.csv");
  CHECK(fine.find("autocorr") != std::string::npos);
  CHECK(fine.find("periodogram") != std::string::npos);
}

TEST_CASE("bad invocations exit 1 without stack traces") {
  CHECK(run("chsh --model no-such-model --n 100") == 1);
  CHECK(run("chsh --angles 1,2,3 --n 100") == 1);
  CHECK(run("reshuffle --counts /nonexistent/file.csv") == 1);
  CHECK(run("violation-freq --reps 0") == 1);
  CHECK(run("definitely-not-a-subcommand") == 1);
  CHECK(run("purity") == 1);  // --runs is required
  TempDir d("neg");
  CHECK(run("coincidence --windows -1e-5 --n 1000 --out-dir " +
            d.path.string()) == 1);
}

TEST_CASE("help and version exit cleanly") {
  CHECK(run("--help") == 0);
  CHECK(run("chsh --help") == 0);
  CHECK(run("--version") == 0);
}
