#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(CPSV_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scenario(int c) {
  return std::string(CPSV_SOURCE_DIR) + "/scenarios/di-case" + std::to_string(c) + ".json";
}

fs::path temp_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("cpsvuln-cli-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Named column of a CSV file with a header row.
std::vector<double> column(const fs::path& p, const std::string& name) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  for (std::stringstream hs(line); std::getline(hs, line, ',');) head.push_back(line);
  size_t idx = head.size();
  for (size_t k = 0; k < head.size(); ++k)
    if (head[k] == name) idx = k;
  std::vector<double> out;
  if (idx == head.size()) return out;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (size_t k = 0; k <= idx; ++k) std::getline(ls, cell, ',');
    out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace

TEST(Cli, ClassifyGoldenTriple) {
  const char* names[] = {"\"strictly-vulnerable\"", "\"vulnerable\"", "\"invulnerable\""};
  for (int c = 1; c <= 3; ++c) {
    const CliRun r = run("classify " + scenario(c));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find(std::string("\"class\": ") + names[c - 1]), std::string::npos) << r.out;
  }
}

TEST(Cli, StrictAttackOnCaseOne) {
  const fs::path d = temp_dir("attack1");
  const CliRun r = run("attack " + scenario(1) + " --steps 80 --out-dir " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto dz = column(d / "trajectory.csv", "dz_norm");
  const auto de = column(d / "trajectory.csv", "de_norm");
  ASSERT_EQ(dz.size(), 81u);
  double max_dz = 0, max_de = 0;
  for (double x : dz) max_dz = std::max(max_dz, x);
  for (double x : de) max_de = std::max(max_de, x);
  EXPECT_LE(max_dz, 1e-8);
  EXPECT_GT(max_de, 1e3);
  EXPECT_TRUE(fs::exists(d / "trajectory.svg"));
  EXPECT_TRUE(fs::exists(d / "attack.json"));
  fs::remove_all(d);
}

TEST(Cli, MarginalAttackOnCaseTwo) {
  const fs::path d = temp_dir("attack2");
  const CliRun r = run("attack " + scenario(2) + " --steps 400 --out-dir " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto dz = column(d / "trajectory.csv", "dz_norm");
  const auto de = column(d / "trajectory.csv", "de_norm");
  ASSERT_EQ(de.size(), 401u);
  for (double x : dz) EXPECT_LE(x, 1.0 + 1e-9);
  EXPECT_GE(de[400], 10 * de[40] * (1 - 1e-12));
  fs::remove_all(d);
}

TEST(Cli, AttackOnInvulnerableIsRefused) {
  const fs::path d = temp_dir("attack3");
  EXPECT_EQ(run("attack " + scenario(3) + " --out-dir " + d.string()).code, 4);
  EXPECT_FALSE(fs::exists(d / "trajectory.csv"));
  fs::remove_all(d);
}

TEST(Cli, BoundExitCodes) {
  const CliRun ok = run("bound " + scenario(3));
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("\"converged\": true"), std::string::npos);
  const CliRun bad = run("bound " + scenario(2));
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.out.find("\"converged\": false"), std::string::npos);  // partial report kept
}

TEST(Cli, InvalidInputs) {
  const fs::path d = temp_dir("invalid");
  EXPECT_EQ(run("classify /nonexistent.json").code, 2);
  std::ofstream(d / "broken.json") << "{\"A\": ";
  EXPECT_EQ(run("classify " + (d / "broken.json").string()).code, 2);
  std::ofstream(d / "nok.json") << R"({"A": [[1,0],[1,1]], "B": [[1],[0]], "C": [[1,0],[0,1]],
                                        "L": [[-1,-0.25]]})";
  EXPECT_EQ(run("classify " + (d / "nok.json").string()).code, 2);
  std::ofstream(d / "bad-attack.json") << "[1, 2";
  EXPECT_EQ(run("simulate " + scenario(2) + " --attack-file " + (d / "bad-attack.json").string() +
                " --out-dir " + d.string())
                .code,
            2);
  EXPECT_EQ(run("frobnicate " + scenario(1)).code, 2);
  EXPECT_EQ(run("attack " + scenario(1) + " --steps -3").code, 2);
  fs::remove_all(d);
}

TEST(Cli, DeterministicOutputs) {
  const fs::path a = temp_dir("det-a"), b = temp_dir("det-b");
  for (const fs::path& d : {a, b}) {
    ASSERT_EQ(run("attack " + scenario(2) + " --steps 120 --out-dir " + d.string()).code, 0);
    ASSERT_EQ(run("reachset " + scenario(3) + " --samples 40 --dirs 36 --out-dir " + d.string()).code, 0);
    ASSERT_EQ(run("simulate " + scenario(2) + " --attack-file " + (d / "attack.json").string() +
                  " --steps 120 --out-dir " + d.string())
                  .code,
              0);
  }
  for (const char* f : {"trajectory.csv", "attack.json", "reachset.csv", "reachset.svg", "simulate.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, SimulatedPlanMatchesReplay) {
  const fs::path d = temp_dir("sim");
  ASSERT_EQ(run("attack " + scenario(2) + " --steps 400 --out-dir " + d.string()).code, 0);
  const auto replay = column(d / "trajectory.csv", "de_norm");
  ASSERT_EQ(run("simulate " + scenario(2) + " --attack-file " + (d / "attack.json").string() +
                " --seed 7 --steps 400 --out-dir " + d.string())
                .code,
            0);
  const auto noisy = column(d / "simulate.csv", "de_norm");
  ASSERT_EQ(noisy.size(), replay.size());
  for (size_t t = 0; t < noisy.size(); ++t) EXPECT_NEAR(noisy[t], replay[t], 1e-10 * (1 + replay[t]));
  fs::remove_all(d);
}

TEST(Cli, SimulateWithoutAttackHasZeroDeltas) {
  const fs::path d = temp_dir("sim0");
  ASSERT_EQ(run("simulate " + scenario(1) + " --seed 3 --steps 50 --out-dir " + d.string()).code, 0);
  for (const char* col : {"de_norm", "dz_norm"}) {
    const auto v = column(d / "simulate.csv", col);
    ASSERT_EQ(v.size(), 51u);
    for (double x : v) EXPECT_EQ(x, 0.0);
  }
  fs::remove_all(d);
}

TEST(Cli, ReachSetArtifacts) {
  const fs::path d = temp_dir("reach");
  const CliRun r = run("reachset " + scenario(3) + " --samples 60 --out-dir " + d.string());
  ASSERT_EQ(r.code, 0);
  const std::string csv = slurp(d / "reachset.csv");
  EXPECT_EQ(csv.rfind("kind,index,p_i,p_j,norm,max_de", 0), 0u);
  EXPECT_NE(slurp(d / "reachset.svg").find("<polygon"), std::string::npos);
  EXPECT_EQ(run("reachset " + scenario(2) + " --out-dir " + d.string()).code, 3);
  fs::remove_all(d);
}
