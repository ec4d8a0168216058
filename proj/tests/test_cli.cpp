#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <map>
#include <sstream>

#include "naa/attack.hpp"

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(NAA_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST(Cli, NoArgumentsIsAUsageError) { EXPECT_EQ(run("").code, 2); }

TEST(Cli, UnknownFlagIsAUsageError) {
  EXPECT_EQ(run("attack --dry-run --bogus 3").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, HelpExitsCleanly) { EXPECT_EQ(run("--help").code, 0); }

TEST(Cli, DryRunEchoesTheDefaults) {
  const CliRun r = run("attack --dry-run --loss naa --gamma 1 --n 30");
  ASSERT_EQ(r.code, 0);
  std::map<std::string, std::string> kv;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  EXPECT_NEAR(std::stod(kv.at("epsilon")), 16.0 / 255.0, 1e-17);
  EXPECT_EQ(r.out.rfind("# alpha = epsilon / iterations = ", 0), 0u);
  EXPECT_EQ(kv.at("tap"), "auto");
  EXPECT_EQ(kv.at("iterations"), "10");
  EXPECT_EQ(kv.at("momentum"), "1");
  EXPECT_EQ(kv.at("loss"), "naa");
  EXPECT_EQ(kv.at("steps"), "30");
  EXPECT_EQ(kv.at("gamma"), "1");
  EXPECT_EQ(kv.at("fp"), "linear");
  EXPECT_EQ(kv.at("fn"), "linear");
  EXPECT_EQ(kv.at("dim.probability"), "0.7");
  EXPECT_EQ(kv.at("pim.amplification"), "2.5");
  EXPECT_EQ(kv.at("pim.kernel"), "3");
  EXPECT_EQ(naa::AttackConfig::from_text(r.out), naa::AttackConfig{});
}

TEST(Cli, BadConfigValueExitsWithError) {
  EXPECT_EQ(run("attack --dry-run --set iterations=0").code, 1);
  EXPECT_EQ(run("attack --dry-run --set nope=1").code, 1);
}

TEST(Cli, VerifyPassesInDoublePrecision) {
  const CliRun r = run("--precision f64 verify --fixtures " NAA_FIXTURE_DIR);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}
