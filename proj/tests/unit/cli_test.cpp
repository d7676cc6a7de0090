#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using celt::cli::dispatch;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("celt-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "celt");
    out_.str("");
    err_.str("");
    return dispatch(args, out_, err_);
  }
  std::string p(const char* name) const { return (dir_ / name).string(); }

  // A tiny fine-tuned checkpoint at p("m").
  void train_small() {
    ASSERT_EQ(run({"--seed", "3", "--out", p("corpus.json"), "gen-data", "--dialogues", "12"}), 0);
    ASSERT_EQ(run({"--corpus", p("corpus.json"), "--out", p("vocab.txt"), "build-vocab",
                   "--size", "150"}),
              0)
        << err_.str();
    ASSERT_EQ(run({"--seed", "3", "--corpus", p("corpus.json"), "--checkpoint-out", p("m"),
                   "finetune", "--vocab", p("vocab.txt"), "--epochs", "1"}),
              0)
        << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, GenDataIsByteIdenticalForASeed) {
  ASSERT_EQ(run({"--seed", "7", "--out", p("a.json"), "gen-data", "--dialogues", "20"}), 0);
  ASSERT_EQ(run({"--seed", "7", "--out", p("b.json"), "gen-data", "--dialogues", "20"}), 0);
  ASSERT_EQ(run({"--seed", "8", "--out", p("c.json"), "gen-data", "--dialogues", "20"}), 0);
  EXPECT_EQ(read_text(p("a.json")), read_text(p("b.json")));
  EXPECT_NE(read_text(p("a.json")), read_text(p("c.json")));
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"no-such-command"}), 1);
  EXPECT_EQ(run({"--corpus", p("x.json"), "eval"}), 1);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, InvalidCorpusExitsTwo) {
  std::ofstream(p("bad.json")) << R"({"dialogues": [{"id": "d", "turns": [
      {"speaker": "user", "utterance": "at 7", "labels": {"intent": "x", "user_acts": [],
       "slots": [{"slot": "time", "start_word": 1, "end_word": 5}]}}]}]})";
  EXPECT_EQ(run({"--corpus", p("bad.json"), "--out", p("v.txt"), "build-vocab", "--size", "50"}),
            2);
  EXPECT_NE(err_.str().find("turn 0"), std::string::npos) << err_.str();
}

TEST_F(CliTest, MissingFileExitsThree) {
  EXPECT_EQ(run({"--corpus", p("absent.json"), "--out", p("v.txt"), "build-vocab"}), 3);
}

TEST_F(CliTest, GradCheckPasses) {
  EXPECT_EQ(run({"grad-check"}), 0) << err_.str();
}

TEST_F(CliTest, EvalWritesMetricsAndPredictEmitsFrame) {
  train_small();
  ASSERT_EQ(run({"--corpus", p("corpus.json"), "--checkpoint-in", p("m"), "--out",
                 p("metrics.json"), "eval"}),
            0)
      << err_.str();
  const auto metrics = nlohmann::json::parse(read_text(p("metrics.json")));
  EXPECT_TRUE(metrics.contains("frame_accuracy"));

  ASSERT_EQ(run({"--checkpoint-in", p("m"), "predict", "--utterance", "5",
                 "--history", "book a table", "--history", "how many people",
                 "--system-acts", "request(num_people)"}),
            0)
      << err_.str();
  const auto frame = nlohmann::json::parse(out_.str());
  EXPECT_TRUE(frame.contains("intent"));
  EXPECT_TRUE(frame["user_acts"].is_array());
  EXPECT_TRUE(frame["slots"].is_array());
}
