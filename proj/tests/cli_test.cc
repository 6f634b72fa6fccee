// Copyright 2026 The RTO Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the rto binary as a subprocess.

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "rto/data.hpp"
#include "rto/metrics.hpp"
#include "rto/status.hpp"

namespace rto {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("rto_cli_") + info->name() + "_" +
            std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  RunResult Run(const std::string& args) const {
    const std::string err_path = Path("stderr.txt");
    const std::string command =
        std::string(RTO_CLI_PATH) + " " + args + " 2>" + err_path;
    RunResult result;
    FILE* pipe = ::popen(command.c_str(), "r");
    if (pipe == nullptr) return result;
    char buffer[4096];
    std::size_t got;
    while ((got = std::fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
      result.out.append(buffer, got);
    }
    const int status = ::pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.err = ReadFile(err_path);
    return result;
  }

  // Toy sample written through the CLI itself.
  std::string Toy(std::size_t n = 60000) const {
    const std::string path = Path("toy.csv");
    const auto r = Run("generate-toy --n " + std::to_string(n) +
                       " --seed 1 --out " + path);
    EXPECT_EQ(r.code, 0) << r.err;
    return path;
  }

  fs::path dir_;
};

int ExitCode(ErrorCode code) { return 10 + static_cast<int>(code); }

TEST_F(CliTest, TrainToyFileGivesSevenTenths) {
  const std::string toy = Toy();
  const auto r = Run("train --input " + toy + " --rho 0.4 --gamma 0.05 --epsilon 0"
                     " --epochs 50 --seed 1 --out-model " + Path("m.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("final dual objective"), std::string::npos);
  EXPECT_NE(r.out.find("nu_2"), std::string::npos);

  std::ofstream(Path("probe.csv")) << "# groups=2\nid,score,group\np,0,2\n";
  const auto p = Run("predict --model " + Path("m.txt") + " --input " +
                     Path("probe.csv"));
  ASSERT_EQ(p.code, 0) << p.err;
  const auto line = p.out.substr(p.out.find("\np,") + 3);
  EXPECT_NEAR(std::stod(line), 0.7, 0.05);
}

TEST_F(CliTest, ErrorExitCodes) {
  EXPECT_EQ(Run("train --input " + Path("missing.csv")).code,
            ExitCode(ErrorCode::kIo));
  const std::string toy = Toy(500);
  const auto r = Run("train --input " + toy + " --gamma 0");
  EXPECT_EQ(r.code, ExitCode(ErrorCode::kInvalidParameter));
  EXPECT_NE(r.err.find("invalid-parameter"), std::string::npos);
  EXPECT_EQ(Run("train --input " + toy + " --no-such-flag 1").code, 2);
  EXPECT_EQ(Run("train --input " + toy + " --criterion odds").code,
            ExitCode(ErrorCode::kUnsupportedCriterion));
  EXPECT_EQ(Run("train --input " + toy + " --schedule bogus").code,
            ExitCode(ErrorCode::kInvalidParameter));
  EXPECT_EQ(Run("--help").code, 0);
}

TEST_F(CliTest, EvaluateZeroMultipliersMatchesDirectComputation) {
  std::ofstream data(Path("u.csv"));
  data << "# groups=2\nid,score,group,label\n";
  std::vector<double> h;
  std::vector<int> groups;
  for (int i = 0; i < 200; ++i) {
    const double f = -1.0 + 2.0 * i / 199.0;
    const int g = (i % 3 == 0) ? 1 : 2;
    data << "r" << i << "," << FormatReal(f) << "," << g << "," << (f > 0) << "\n";
    h.push_back(std::clamp(f / 0.1, 0.0, 1.0));
    groups.push_back(g);
  }
  data.close();
  std::ofstream(Path("zero.model"))
      << "format_version=1\ngamma=0.1\ncriterion=parity\nrho=0.5\nepsilon=0\n"
         "K=2\nseed=0\nschedule=none\nepochs=0\nfinal_dual_objective=0\n"
         "1 0 0\n2 0 0\n";
  const auto r = Run("evaluate --model " + Path("zero.model") + " --input " +
                     Path("u.csv") + " --out-report " + Path("r.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(ReadFile(Path("r.jsonl")));
  EXPECT_NEAR(report["parity_gap"].get<double>(), ParityGap(h, groups, 2), 1e-12);
}

TEST_F(CliTest, EvaluateTrainedModelOnItsTrainingFile) {
  const std::string toy = Toy(20000);
  // Group 1 only has scores of +-1, so its dual is nearly flat around the
  // optimum and the default 50 epochs leave a gap near 0.014.
  ASSERT_EQ(Run("train --input " + toy + " --rho 0.4 --epochs 400 --out-model " +
                Path("m.txt")).code, 0);
  const auto r = Run("evaluate --model " + Path("m.txt") + " --input " + toy +
                     " --out-report " + Path("r.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(ReadFile(Path("r.jsonl")));
  EXPECT_LE(report["parity_gap"].get<double>(), 0.01);
  EXPECT_TRUE(report["expected_accuracy"].is_number());

  std::ofstream(Path("k3.csv")) << "# groups=3\nid,score,group\na,0.1,3\n";
  EXPECT_EQ(Run("evaluate --model " + Path("m.txt") + " --input " +
                Path("k3.csv")).code,
            ExitCode(ErrorCode::kMismatch));
}

TEST_F(CliTest, SweepGridAndDeterminism) {
  const std::string toy = Toy(3000);
  // Split the toy file into disjoint halves by id.
  const auto all = ReadScores(toy);
  Dataset train, val;
  train.group_count = val.group_count = 2;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (i % 2 == 0 ? train : val).examples.push_back(all.examples[i]);
  }
  WriteScores(Path("train.csv"), train);
  WriteScores(Path("val.csv"), val);
  const std::string args = "sweep --input-train " + Path("train.csv") +
                           " --input-val " + Path("val.csv") + " --seed 3 --out ";
  const auto a = Run(args + Path("a.csv"));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(Run(args + Path("b.csv")).code, 0);
  const std::string csv = ReadFile(Path("a.csv"));
  EXPECT_EQ(csv, ReadFile(Path("b.csv")));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
  EXPECT_NE(csv.find(",selected\n"), std::string::npos);

  const auto infeasible = Run("sweep --input-train " + Path("train.csv") +
                              " --input-val " + Path("val.csv") +
                              " --gamma-grid 0.1 --rho-grid 0.2,0.3 --epsilon 2"
                              " --target-epsilon 0.000001");
  ASSERT_EQ(infeasible.code, 0) << infeasible.err;
  EXPECT_NE(infeasible.out.find("infeasible_min_gap"), std::string::npos);
  EXPECT_NE(infeasible.out.find("no feasible point"), std::string::npos);

  EXPECT_EQ(Run("sweep --input-train " + Path("train.csv") + " --input-val " +
                Path("train.csv")).code,
            ExitCode(ErrorCode::kDisjointness));
}

TEST_F(CliTest, OracleCheckPasses) {
  const std::string toy = Toy(300);
  const auto r = Run("oracle-check --input " + toy +
                     " --gamma 0.05 --rho 0.4 --epsilon 0 --seeds 2");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST_F(CliTest, TheoryCheck) {
  const auto vacuous = Run("theory-check --trials 0 --audit-trials 0");
  EXPECT_EQ(vacuous.code, 0);
  EXPECT_NE(vacuous.err.find("warning"), std::string::npos);
  const auto r = Run("theory-check --trials 1000 --audit-trials 3 --seed 2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("1000/1000"), std::string::npos);
}

TEST_F(CliTest, ConfigFileSitsBelowFlags) {
  const std::string toy = Toy(2000);
  std::ofstream(Path("run.cfg")) << "# defaults\ngamma = 0.2\nrho=0.4\n";
  ASSERT_EQ(Run("train --config " + Path("run.cfg") + " --input " + toy +
                " --out-model " + Path("a.model")).code, 0);
  EXPECT_NE(ReadFile(Path("a.model")).find("gamma=0.2"), std::string::npos);
  ASSERT_EQ(Run("train --config " + Path("run.cfg") + " --gamma 0.1 --input " +
                toy + " --out-model " + Path("b.model")).code, 0);
  const std::string b = ReadFile(Path("b.model"));
  EXPECT_NE(b.find("gamma=0.10000000000000001"), std::string::npos);
  EXPECT_NE(b.find("rho=0.40000000000000002"), std::string::npos);
  std::ofstream(Path("bad.cfg")) << "gamma\n";
  EXPECT_EQ(Run("train --config " + Path("bad.cfg") + " --input " + toy).code,
            ExitCode(ErrorCode::kParse));
}

TEST_F(CliTest, TradeoffAndTrace) {
  const std::string toy = Toy(4000);
  const auto all = ReadScores(toy);
  Dataset train, test;
  train.group_count = test.group_count = 2;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (i % 2 == 0 ? train : test).examples.push_back(all.examples[i]);
  }
  WriteScores(Path("train.csv"), train);
  WriteScores(Path("test.csv"), test);
  const auto r = Run("tradeoff --input-train " + Path("train.csv") +
                     " --input-test " + Path("test.csv") +
                     " --rho 0.4 --epsilons 0,0.1 --out " + Path("t.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ReadFile(Path("t.csv")).rfind("epsilon,parity_gap,accuracy\n0,", 0), 0u);

  ASSERT_EQ(Run("train --input " + Path("train.csv") + " --rho 0.4 --epochs 7 "
                "--trace " + Path("trace.csv")).code, 0);
  const std::string trace = ReadFile(Path("trace.csv"));
  EXPECT_EQ(trace.rfind("epoch,dual_objective,nu_1,nu_2\n", 0), 0u);
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 8);
}

}  // namespace
}  // namespace rto
