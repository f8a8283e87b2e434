#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("gka_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    write("groups.json", "[[0, 3], [3, 6]]");
    write("config.json", R"({"kernels": 2, "max_epochs": 5, "batch_size": 16, "seed": 1})");
    ASSERT_EQ(run("synth --n 120 --groups " + path("groups.json") + " --noise 0.1 --seed 4 --out " + path("d.csv")), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static void write(const std::string& name, const std::string& body) { std::ofstream(dir_ / name) << body; }
  static std::string read(const std::string& name) {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static int run(const std::string& args) {
    const std::string cmd =
        std::string(GKA_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static nlohmann::json stdout_json() { return nlohmann::json::parse(read("stdout.txt")); }

  static std::string data_args() { return "--data " + path("d.csv") + " --target y"; }
  static std::string train_args() {
    return "train " + data_args() + " --groups " + path("groups.json") + " --config " + path("config.json") +
           " --out " + path("m.json") + " --quiet";
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, SynthWritesHeaderAndRows) {
  const std::string csv = read("d.csv");
  EXPECT_EQ(csv.rfind("x0,x1,x2,x3,x4,x5,y\n", 0), 0u) << csv.substr(0, 80);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 121);
}

TEST_F(Cli, TrainEvalImportanceRoundTrip) {
  ASSERT_EQ(run(train_args()), 0) << read("stderr.txt");
  const nlohmann::json summary = stdout_json();
  EXPECT_TRUE(summary.contains("best_val_loss"));
  ASSERT_TRUE(fs::exists(path("m.json")));

  ASSERT_EQ(run("eval --ckpt " + path("m.json") + " " + data_args() + " --bins 4"), 0) << read("stderr.txt");
  const nlohmann::json metrics = stdout_json();
  for (const char* key : {"mse", "rmse", "mae", "r2", "ci"}) EXPECT_TRUE(metrics.contains(key)) << key;
  const std::string first = read("stdout.txt");
  ASSERT_EQ(run("eval --ckpt " + path("m.json") + " " + data_args() + " --bins 4"), 0);
  EXPECT_EQ(read("stdout.txt"), first);

  ASSERT_EQ(run("importance --ckpt " + path("m.json") + " " + data_args() + " --out " + path("imp.csv")), 0)
      << read("stderr.txt");
  const std::string imp = read("imp.csv");
  EXPECT_EQ(imp.rfind("feature_index,feature_name,importance\n", 0), 0u);
  EXPECT_EQ(std::count(imp.begin(), imp.end(), '\n'), 7);
}

TEST_F(Cli, TrainingTwiceWritesIdenticalCheckpoints) {
  ASSERT_EQ(run(train_args()), 0);
  const std::string a = read("m.json");
  ASSERT_EQ(run(train_args()), 0);
  EXPECT_EQ(read("m.json"), a);
}

TEST_F(Cli, Baselines) {
  ASSERT_EQ(run("baseline --method pls " + data_args() + " --folds 5"), 0) << read("stderr.txt");
  const nlohmann::json pls = stdout_json();
  EXPECT_EQ(pls.at("method"), "pls");
  EXPECT_EQ(pls.at("test_rows"), 24);
  ASSERT_EQ(run("baseline --method ridge " + data_args() + " --lambda 0.5"), 0) << read("stderr.txt");
  EXPECT_EQ(stdout_json().at("lambda"), 0.5);
  EXPECT_EQ(run("baseline --method ridge " + data_args() + " --components 2"), 2);
  EXPECT_EQ(run("baseline --method lasso " + data_args()), 2);
}

TEST_F(Cli, AblateEmitsCsv) {
  ASSERT_EQ(run("ablate " + data_args() + " --groups " + path("groups.json") + " --config " + path("config.json") +
                " --fractions 0.5,1"),
            0)
      << read("stderr.txt");
  const std::string out = read("stdout.txt");
  EXPECT_EQ(out.rfind("fraction,train_rows,r2_variational,r2_ablated\n", 0), 0u) << out;
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 3);
}

TEST_F(Cli, GradcheckPasses) {
  ASSERT_EQ(run("gradcheck --seed 1"), 0) << read("stderr.txt");
  EXPECT_EQ(stdout_json().at("passed"), true);
}

TEST_F(Cli, UsageAndDataErrorsExitWithTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("train --data " + path("d.csv")), 2);
  EXPECT_EQ(run("eval --ckpt " + path("missing.json") + " " + data_args()), 2);
  EXPECT_EQ(run("eval --ckpt " + path("m.json") + " --data " + path("d.csv") + " --target nope"), 2);
  write("typo.json", R"({"kernals": 3})");
  EXPECT_EQ(run("train " + data_args() + " --config " + path("typo.json") + " --out " + path("t.json")), 2);
  EXPECT_NE(read("stderr.txt").find("kernals"), std::string::npos) << read("stderr.txt");
}

TEST_F(Cli, NumericFailureExitsWithThree) {
  write("hot.json", R"({"kernels": 2, "max_epochs": 3, "learning_rate": 1e200, "grad_clip_norm": 1e300})");
  EXPECT_EQ(run("train " + data_args() + " --groups " + path("groups.json") + " --config " + path("hot.json") +
                " --out " + path("h.json") + " --quiet"),
            3);
  EXPECT_NE(read("stderr.txt").find("epoch"), std::string::npos) << read("stderr.txt");
}

}  // namespace
