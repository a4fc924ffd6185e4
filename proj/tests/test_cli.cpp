#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "test_util.hpp"

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::filesystem::path& capture) {
  const std::string cmd = std::string(CIR_CLI) + " " + args + " > " + capture.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream is(capture);
  std::stringstream ss;
  ss << is.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(Cli, NoArgumentsIsUsageError) {
  const auto dir = cir::test::scratch_dir("cli_noargs");
  EXPECT_EQ(run("", dir / "out").code, 1);
  EXPECT_EQ(run("bogus-command", dir / "out").code, 1);
  EXPECT_EQ(run("train --bogus", dir / "out").code, 1);
}

TEST(Cli, HelpListsConfigKeys) {
  const auto dir = cir::test::scratch_dir("cli_help");
  const auto r = run("synth --help", dir / "out");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("synth.text_synthesis_ratio"), std::string::npos);
  EXPECT_NE(r.out.find("refine.judge_retries"), std::string::npos);
}

TEST(Cli, OracleSlerpPasses) {
  const auto dir = cir::test::scratch_dir("cli_oracle");
  const auto r = run("oracle slerp", dir / "out");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("PASS slerp", 0), 0u) << r.out;
}

TEST(Cli, DataErrorsExitTwo) {
  const auto dir = cir::test::scratch_dir("cli_data");
  EXPECT_EQ(run("eval --index /nonexistent.cirf --queries q.jsonl --ckpt c.json", dir / "out").code, 2);
  std::ofstream(dir / "bad.json") << R"({"synth": {"alpah": 1}})";
  EXPECT_EQ(run("train --config " + (dir / "bad.json").string() + " --out " + (dir / "ck.json").string(),
                dir / "out").code,
            2);
}

TEST(Cli, JudgeFailureExitsThree) {
  const auto dir = cir::test::scratch_dir("cli_judge");
  const std::string data = CIR_DATA_DIR;
  std::ofstream(dir / "c.json") << R"({"refine": {"judge_timeout_ms": 200, "judge_retries": 0, "concurrency": 1}})";
  const auto r = run("refine --benchmark " + data + "/benchmark.jsonl --index " + data +
                         "/items.cirf --judge http://127.0.0.1:1/judge --out " + (dir / "r.jsonl").string() +
                         " --config " + (dir / "c.json").string(),
                     dir / "out");
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, TrainThenEvalOnBundledFixture) {
  const auto dir = cir::test::scratch_dir("cli_train_eval");
  const std::string data = CIR_DATA_DIR;
  const auto ck = (dir / "ck.json").string();
  ASSERT_EQ(run("train --config " + data + "/config.json --out " + ck, dir / "train.out").code, 0);
  const auto r = run("eval --index " + data + "/items.cirf --queries " + data + "/queries.jsonl --ckpt " + ck,
                     dir / "eval.out");
  ASSERT_EQ(r.code, 0);
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report["num_queries"].get<int>(), 64);
  EXPECT_GE(report["recall_at"]["1"].get<double>(), 0.95);
}

TEST(Cli, SeededOutputsAreByteIdentical) {
  const auto dir = cir::test::scratch_dir("cli_determinism");
  const std::string data = CIR_DATA_DIR;
  for (const char* tag : {"a", "b"}) {
    const auto sub = dir / tag;
    std::filesystem::create_directories(sub);
    ASSERT_EQ(run("synth --items " + data + "/items.cirf --out " + (sub / "syn.jsonl").string() + " --seed 5",
                  sub / "o")
                  .code,
              0);
    ASSERT_EQ(run("pair --embeddings " + data + "/items.cirf --out " + (sub / "groups.jsonl").string(), sub / "o").code,
              0);
  }
  EXPECT_EQ(slurp(dir / "a" / "syn.jsonl"), slurp(dir / "b" / "syn.jsonl"));
  EXPECT_EQ(slurp(dir / "a" / "groups.jsonl"), slurp(dir / "b" / "groups.jsonl"));
  EXPECT_FALSE(slurp(dir / "a" / "syn.jsonl").empty());
}

TEST(Cli, BuildDatasetAuditsBadResponses) {
  const auto dir = cir::test::scratch_dir("cli_dataset");
  const std::string data = CIR_DATA_DIR;
  const auto r = run("build-dataset --groups " + data + "/groups.jsonl --responses " + data + "/responses --out " +
                         (dir / "ds.jsonl").string() + " --audit " + (dir / "audit.jsonl").string(),
                     dir / "out");
  ASSERT_EQ(r.code, 0);
  const auto ds = slurp(dir / "ds.jsonl");
  const auto audit = slurp(dir / "audit.jsonl");
  EXPECT_NE(ds.find("make the car red again"), std::string::npos);
  EXPECT_EQ(ds.find("hair"), std::string::npos);
  EXPECT_NE(audit.find("UnknownCategory"), std::string::npos);
  EXPECT_NE(audit.find("biometric_keyword"), std::string::npos);
  EXPECT_NE(audit.find("malformed_response"), std::string::npos);
}

}  // namespace
