#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "json.hpp"

#ifdef PROOFGRADE_CLI_PATH

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const fixture::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const std::string cmd = std::string("cd '") + dir.path().string() + "' && '" +
                          PROOFGRADE_CLI_PATH + "' " + args + " > '" + out.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = fixture::read_file(out);
  return r;
}

}  // namespace

TEST(Cli, SynthIngestTrainEvalGradeIsDeterministic) {
  fixture::TempDir dir;
  ASSERT_EQ(run(dir, "synth --records 200 --seed 3 -o corpus.jsonl").code, 0);
  auto r = run(dir, "ingest --corpus corpus.jsonl -o clean.jsonl --split-out split.json --seed 1");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto split = nlohmann::json::parse(fixture::read_file(dir / "split.json"));
  EXPECT_EQ(split["problems"]["P1"]["test"].size(), 30u);

  const std::string train =
      "train --corpus clean.jsonl --split split.json --problem P1 --cache-dir cache "
      "--epochs 20,40 --selection validation ";
  r = run(dir, train + "-o a.pgmd");
  ASSERT_EQ(r.code, 0) << r.out;
  r = run(dir, train + "-o b.pgmd --threads 4");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(fixture::read_file(dir / "a.pgmd"), fixture::read_file(dir / "b.pgmd"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a.pgmd.manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "cache" / "test.pgec"));

  r = run(dir, "eval --model a.pgmd --corpus clean.jsonl --split split.json --cache-dir cache "
               "-o metrics.csv");
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string csv = fixture::read_file(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "problem,rubric,accuracy,f1,tp,fp,tn,fn");

  fixture::write_file(dir / "proof.md", "Proof. By induction on n.");
  r = run(dir, "grade --model a.pgmd --in proof.md --strategy First --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto graded = nlohmann::json::parse(r.out);
  EXPECT_EQ(graded["rubric"].size(), 7u);
}

TEST(Cli, ErrorKindsMapToExitCodes) {
  fixture::TempDir dir;
  fixture::write_file(dir / "bad.ini", "[training]\nnonsense = 1\n");
  auto r = run(dir, "-c bad.ini synth --records 10");
  EXPECT_EQ(r.code, 5) << r.out;
  EXPECT_NE(r.out.find("bad.ini:2"), std::string::npos) << r.out;
  r = run(dir, "ingest --corpus missing.jsonl -o x.jsonl");
  EXPECT_EQ(r.code, 9) << r.out;
  fixture::write_file(dir / "broken.jsonl", "{\"proof_id\": 1}\n");
  r = run(dir, "ingest --corpus broken.jsonl -o x.jsonl");
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_EQ(run(dir, "frobnicate").code, 2);
}

TEST(Cli, StatsWritesTables) {
  fixture::TempDir dir;
  std::string log;
  int ts = 0;
  for (int s = 0; s < 12; ++s)
    for (const char* p : {"P1", "P2"})
      for (int k = 0; k < 2; ++k) {
        nlohmann::ordered_json j;
        j["ts"] = ++ts;
        j["student_id"] = "s" + std::to_string(s);
        j["group"] = s % 3 == 0 ? "SelfEval" : (s % 3 == 1 ? "Random" : "First");
        j["problem_id"] = p;
        j["attempt_index"] = k;
        j["score_percent"] = 100.0 * ((s + k) % 8) / 7.0;
        j["rubric"] = "1010101";
        j["body_hash"] = "h";
        j["latency_ms"] = 1.0;
        j["body_markdown"] = "A proof by induction with enough characters.";
        log += j.dump() + "\n";
      }
  fixture::write_file(dir / "attempts.jsonl", log);
  const auto r = run(dir, "stats --log attempts.jsonl -o out");
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"scores.csv", "posthoc.csv", "regression.csv", "exclusions.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
}

#endif
