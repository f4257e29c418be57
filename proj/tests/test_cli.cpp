#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dshn/cli.hpp"
#include "support.hpp"

using namespace dshn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = dshn::testing::scratch_dir("cli"); }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  void small_dataset(const std::string& prefix, const std::string& inter = "4") {
    const auto r = run({"gen-synthetic", "--n", "30", "--classes", "3", "--hmax", "5", "--intra", "5", "--inter",
                        inter, "--seed", "2", "--out", p(prefix)});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenSyntheticWritesDatasetAndManifest) {
  const auto r = run({"gen-synthetic", "--n", "30", "--classes", "3", "--hmax", "5", "--intra", "2", "--inter", "1",
                      "--out", p("syn")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, "vertices=30 hyperedges=9\n");
  for (const auto& f : dataset_files(p("syn"))) EXPECT_TRUE(fs::exists(f));
  const auto m = read_manifest(p("syn") + ".manifest");
  EXPECT_EQ(m.subcommand, "gen-synthetic");
  EXPECT_EQ(*m.flag("n"), "30");
  EXPECT_EQ(*m.flag("intra"), "2");
  EXPECT_EQ(m.outputs.size(), 4u);
  EXPECT_EQ(m.outputs[0].second, file_digest(p("syn") + ".hg"));
}

TEST_F(CliTest, TransformGraph) {
  spit(p("star.arcs"), "4 3\n1 2\n1 3\n1 4\n");
  auto r = run({"transform-graph", "--input", p("star.arcs"), "--out", p("star.hg")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, "vertices=4 hyperedges=1\n");
  const auto h = read_hypergraph(p("star.hg"));
  ASSERT_EQ(h.num_hyperedges(), 1u);
  EXPECT_EQ(h.hyperedge(0).tail, (std::vector<Index>{0}));
  EXPECT_EQ(h.hyperedge(0).head, (std::vector<Index>{1, 2, 3}));

  spit(p("empty.arcs"), "3 0\n");
  r = run({"transform-graph", "--input", p("empty.arcs"), "--out", p("empty.hg")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, "vertices=3 hyperedges=0\n");
}

TEST_F(CliTest, BuildLaplacianAndSpectralPipeline) {
  spit(p("g.arcs"), "4 4\n1 2\n2 3\n3 4\n4 1\n");
  ASSERT_EQ(run({"transform-graph", "--input", p("g.arcs"), "--out", p("g.hg")}).code, cli::kOk);
  auto r = run({"build-laplacian", "--input", p("g.hg"), "--stalk-dim", "2", "--sheaf", "full", "--normalized",
                "--out", p("L.txt")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out.rfind("dimension=8 ", 0), 0u);
  std::istringstream lines(slurp(p("L.txt")));
  std::string line;
  Index rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream toks(line);
    Index cols = 0;
    for (std::string t; toks >> t;) ++cols;
    EXPECT_EQ(cols, 8u);
    ++rows;
  }
  EXPECT_EQ(rows, 8u);

  r = run({"verify-spectral", "--trials", "10", "--seed", "1", "--report", p("spec.txt")});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, slurp(p("spec.txt")));
  EXPECT_EQ(r.out.rfind("trials 10\n", 0), 0u);
}

TEST_F(CliTest, BuildLaplacianSingularDegree) {
  spit(p("h.hg"), "3 1\ne 1 : 1 2 |\n");
  const auto strict = run({"build-laplacian", "--input", p("h.hg"), "--normalized", "--out", p("L.txt")});
  EXPECT_EQ(strict.code, cli::kUsage);
  EXPECT_NE(strict.err.find("--jitter"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("L.txt.manifest")));
  const auto jitter =
      run({"build-laplacian", "--input", p("h.hg"), "--normalized", "--jitter", "1e-8", "--out", p("L.txt")});
  EXPECT_EQ(jitter.code, cli::kOk) << jitter.err;
}

TEST_F(CliTest, TheoremCheck) {
  auto r = run({"theorem-check", "--trials", "0", "--report", p("t.txt")});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(slurp(p("t.txt")), "");
  r = run({"theorem-check", "--trials", "3", "--report", p("t.txt")});
  EXPECT_NE(r.out.find("zhou instances 3"), std::string::npos);
  EXPECT_NE(r.out.find("counterexample"), std::string::npos);
  // Exit status follows the counterexample spectrum comparison.
  EXPECT_EQ(r.code, check_counterexample().spectrum_matches() ? cli::kOk : cli::kCheckFailed);
}

TEST_F(CliTest, TrainWritesMetrics) {
  small_dataset("syn");
  const auto r = run({"train", "--data", p("syn"), "--epochs", "4", "--light", "--hidden", "3",
                      "--spectral-check-every", "2", "--metrics-out", p("m.csv")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out.rfind("best_epoch=", 0), 0u);
  EXPECT_NE(r.out.find("spectral_checks=4/4"), std::string::npos);
  const auto csv = slurp(p("m.csv"));
  EXPECT_EQ(csv.rfind("epoch,train_loss,train_acc,val_acc\n1,", 0), 0u);
  EXPECT_NE(csv.find("\ntest_acc,"), std::string::npos);
}

TEST_F(CliTest, QSweepSingleValueAndUndirectedData) {
  small_dataset("und", "0");
  auto r = run({"q-sweep", "--data", p("und"), "--epochs", "3", "--grid", "0.1", "--out", p("s1.csv")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::istringstream one(slurp(p("s1.csv")));
  std::string header, row, extra;
  std::getline(one, header);
  std::getline(one, row);
  EXPECT_EQ(header, "q,test_acc");
  EXPECT_EQ(row.rfind("0.1,", 0), 0u);
  EXPECT_FALSE(std::getline(one, extra));

  // Without directed hyperedges the charge cannot change anything.
  r = run({"q-sweep", "--data", p("und"), "--epochs", "5", "--grid", "0,0.1,0.25", "--jobs", "3", "--manifest",
           p("sweep.manifest")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::istringstream rows(r.out);
  std::getline(rows, header);
  std::set<std::string> acc;
  Index count = 0;
  while (std::getline(rows, row)) {
    acc.insert(row.substr(row.find(',') + 1));
    ++count;
  }
  EXPECT_EQ(count, 3u);
  EXPECT_EQ(acc.size(), 1u);
}

TEST_F(CliTest, QSweepParallelMatchesSerial) {
  small_dataset("syn");
  const auto serial = run({"q-sweep", "--data", p("syn"), "--epochs", "3", "--grid", "0,0.25", "--jobs", "1",
                           "--manifest", p("a.manifest")});
  const auto parallel = run({"q-sweep", "--data", p("syn"), "--epochs", "3", "--grid", "0,0.25", "--jobs", "2",
                             "--manifest", p("b.manifest")});
  ASSERT_EQ(serial.code, cli::kOk) << serial.err;
  EXPECT_EQ(serial.out, parallel.out);
}

TEST_F(CliTest, ConfigFileDefaultsAndOverrides) {
  small_dataset("syn");
  spit(p("run.cfg"), "# defaults\nepochs = 2\nhidden=3\nlight=true\n");
  auto r = run({"train", "--config", p("run.cfg"), "--data", p("syn"), "--epochs", "3", "--metrics-out", p("m.csv"),
                "--manifest", p("m.manifest")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto m = read_manifest(p("m.manifest"));
  EXPECT_EQ(*m.flag("epochs"), "3");
  EXPECT_EQ(*m.flag("hidden"), "3");
  EXPECT_EQ(*m.flag("light"), "true");
  spit(p("bad.cfg"), "no-such-flag=1\n");
  EXPECT_EQ(run({"train", "--config", p("bad.cfg"), "--data", p("syn")}).code, cli::kUsage);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"no-such-command"}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--data", p("missing")}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--data", p("x"), "--q", "0.3"}).code, cli::kUsage);
  EXPECT_EQ(run({"gen-synthetic", "--n", "31", "--out", p("x")}).code, cli::kUsage);
  EXPECT_EQ(run({"q-sweep", "--data", p("x"), "--grid", "0.5"}).code, cli::kUsage);
  EXPECT_EQ(run({"train", "--help"}).code, cli::kOk);

  small_dataset("syn");
  const auto diverged = run({"train", "--data", p("syn"), "--epochs", "3", "--lr", "1e300", "--no-layer-norm",
                             "--metrics-out", p("d.csv")});
  EXPECT_EQ(diverged.code, cli::kDiverged) << diverged.err;
  EXPECT_TRUE(fs::exists(p("d.csv.manifest")));
}

TEST_F(CliTest, ReplayDetectsChanges) {
  small_dataset("syn");
  ASSERT_EQ(run({"train", "--data", p("syn"), "--epochs", "3", "--dropout", "0.2", "--metrics-out", p("m.csv")}).code,
            cli::kOk);
  auto r = run({"replay", p("m.csv.manifest")});
  EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("replay identical"), std::string::npos);
  EXPECT_EQ(slurp(p("m.csv")), slurp(p("m.csv.replay")));
  EXPECT_TRUE(fs::exists(p("m.csv.manifest.replay")));

  // Tampering with a recorded digest makes the replay report a difference.
  auto text = slurp(p("m.csv.manifest"));
  const auto pos = text.find("stdout=");
  text.replace(pos + 7, 16, "0000000000000000");
  spit(p("m.csv.manifest"), text);
  r = run({"replay", p("m.csv.manifest")});
  EXPECT_EQ(r.code, cli::kCheckFailed);
  EXPECT_NE(r.out.find("replay differs"), std::string::npos);
}
