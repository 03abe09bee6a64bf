#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "d3g/checkpoint.hpp"
#include "d3g/io.hpp"
#include "d3g/linalg.hpp"
#include "d3g/relations.hpp"
#include "d3g_cli/cli.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace d3g {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "d3g");
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& path) {
  const auto text = read_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

json read_json(const std::string& path) { return json::parse(read_file(path)); }

class CliTest : public ::testing::Test {
 protected:
  std::string gen(const std::string& kind, const std::string& name, int seed = 0) {
    const std::string dir = tmp.file(name);
    const auto r = run_cli({"gen", "--kind", kind, "--seed", std::to_string(seed), "--out", dir});
    EXPECT_EQ(r.code, cli::kExitOk) << r.err;
    return dir;
  }

  testing::TempDir tmp{"d3g_cli"};
};

TEST_F(CliTest, GenDg15) {
  const auto a = gen("dg15", "a", 3);
  const auto b = gen("dg15", "b", 3);
  EXPECT_EQ(line_count(a + "/data.csv"), 1501u);
  EXPECT_EQ(line_count(a + "/meta.csv"), 16u);
  for (const char* f : {"data.csv", "meta.csv", "split.csv", "dataset.json"}) {
    EXPECT_EQ(read_file(a + "/" + f), read_file(b + "/" + f)) << f;
  }
  EXPECT_FALSE(fs::exists(a + "/adjacency.txt"));
  EXPECT_EQ(read_json(a + "/dataset.json").at("task"), "classification");
}

TEST_F(CliTest, GenSpatial) {
  const auto d = gen("spatial", "s");
  EXPECT_EQ(line_count(d + "/meta.csv"), 17u);
  EXPECT_EQ(line_count(d + "/adjacency.txt"), 24u);
}

TEST_F(CliTest, GenRejectsUnknownKind) {
  EXPECT_EQ(run_cli({"gen", "--kind", "mnist", "--out", tmp.file("x")}).code, cli::kExitConfig);
}

TEST_F(CliTest, TrainErmThreeSeeds) {
  const auto data = gen("dg15", "d");
  const auto out = tmp.file("erm");
  const auto r = run_cli({"train", "--data", data, "--method", "erm", "--epochs", "2",
                          "--out", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto report = read_json(out + "/report.json");
  EXPECT_EQ(report.at("seeds").size(), 3u);
  const double mean = report.at("summary").at("valid").at("mean");
  double sum = 0.0;
  for (const auto& s : report.at("seeds")) sum += s.at("valid").at("mean").get<double>();
  EXPECT_NEAR(mean, sum / 3.0, 1e-12);
  EXPECT_EQ(report.at("run").at("config").at("epochs"), 2);
  EXPECT_NE(r.out.find("valid mean"), std::string::npos);
  for (int s = 0; s < 3; ++s) {
    EXPECT_TRUE(fs::exists(out + "/checkpoint_seed" + std::to_string(s) + ".json"));
  }
  EXPECT_TRUE(fs::exists(out + "/summary.txt"));
  EXPECT_TRUE(fs::exists(out + "/timing.json"));
}

TEST_F(CliTest, AggregatesRecomputableFromPerDomain) {
  const auto data = gen("dg15", "d");
  const auto out = tmp.file("run");
  ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "1", "--seeds", "1", "--out", out}).code,
            cli::kExitOk);
  const auto test = read_json(out + "/report.json").at("seeds").at(0).at("test");
  double sum = 0.0, worst = 1.0;
  for (const auto& d : test.at("per_domain")) {
    sum += d.at("value").get<double>();
    worst = std::min(worst, d.at("value").get<double>());
  }
  EXPECT_NEAR(test.at("mean").get<double>(), sum / test.at("per_domain").size(), 1e-12);
  EXPECT_EQ(test.at("worst").get<double>(), worst);
}

TEST_F(CliTest, ResumeWithZeroEpochsKeepsMetrics) {
  const auto data = gen("dg15", "d");
  const auto first = tmp.file("first");
  ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "3", "--seeds", "1", "--out", first}).code,
            cli::kExitOk);
  const auto second = tmp.file("second");
  const auto r = run_cli({"train", "--data", data, "--epochs", "0", "--seeds", "1", "--resume",
                          first + "/checkpoint_seed0.json", "--out", second});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto a = read_json(first + "/report.json").at("seeds").at(0);
  const auto b = read_json(second + "/report.json").at("seeds").at(0);
  EXPECT_EQ(a.at("valid"), b.at("valid"));
  EXPECT_EQ(a.at("test"), b.at("test"));
  const auto ck = load_checkpoint(second + "/checkpoint_seed0.json");
  EXPECT_EQ(ck.epochs_completed, 3u);
  EXPECT_EQ(ck.model, load_checkpoint(first + "/checkpoint_seed0.json").model);
}

TEST_F(CliTest, ResumeContinuesTraining) {
  const auto data = gen("dg15", "d");
  const auto first = tmp.file("first");
  ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "1", "--seeds", "1", "--out", first}).code,
            cli::kExitOk);
  const auto second = tmp.file("second");
  ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "2", "--seeds", "1", "--resume",
                     first + "/checkpoint_seed0.json", "--out", second})
                .code,
            cli::kExitOk);
  EXPECT_EQ(load_checkpoint(second + "/checkpoint_seed0.json").epochs_completed, 3u);
  EXPECT_EQ(run_cli({"train", "--data", data, "--method", "erm", "--seeds", "1", "--resume",
                     first + "/checkpoint_seed0.json", "--out", tmp.file("bad")})
                .code,
            cli::kExitConfig);
}

TEST_F(CliTest, ExitCodesAreDistinct) {
  const auto data = gen("dg15", "d");
  const auto no_meta = gen("dg15", "no_meta");
  fs::remove(no_meta + "/meta.csv");
  const int missing = run_cli({"train", "--data", no_meta, "--epochs", "1", "--seeds", "1",
                               "--out", tmp.file("o1")}).code;
  const int nan = run_cli({"train", "--data", data, "--lr", "1e200", "--epochs", "3", "--seeds",
                           "1", "--out", tmp.file("o2")}).code;
  const int config = run_cli({"train", "--data", data, "--beta", "2", "--out", tmp.file("o3")}).code;
  EXPECT_EQ(missing, cli::kExitData);
  EXPECT_EQ(nan, cli::kExitNumerical);
  EXPECT_EQ(config, cli::kExitConfig);
  EXPECT_NE(missing, nan);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run_cli({"train", "--data", tmp.file("nowhere"), "--out", tmp.file("o4")}).code,
            cli::kExitData);
}

TEST_F(CliTest, MissingMetaRowNamesTheDomain) {
  const auto d = gen("dg15", "d");
  const auto meta = read_file(d + "/meta.csv");
  std::istringstream in(meta);
  std::string line, kept;
  for (int k = 0; std::getline(in, line); ++k) {
    if (k != 2) kept += line + "\n";  // drops domain 1
  }
  write_file_atomic(d + "/meta.csv", kept);
  const auto r = run_cli({"train", "--data", d, "--out", tmp.file("o")});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("missing meta-data for domain 1"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalReportsEveryTestDomain) {
  const auto data = gen("dg15", "d");
  const auto run = tmp.file("run");
  ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "2", "--seeds", "1", "--out", run}).code,
            cli::kExitOk);
  const auto ckpt = run + "/checkpoint_seed0.json";
  const auto out = tmp.file("eval.json");
  auto r = run_cli({"eval", "--checkpoint", ckpt, "--data", data, "--out", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto j = read_json(out);
  EXPECT_EQ(j.at("report").at("per_domain").size(), 5u);
  EXPECT_EQ(j.at("report"), read_json(run + "/report.json").at("seeds").at(0).at("test"));
  EXPECT_EQ(j.at("run").at("inference"), "relation");

  r = run_cli({"eval", "--checkpoint", ckpt, "--data", data, "--uniform", "--out", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  j = read_json(out);
  EXPECT_EQ(j.at("run").at("inference"), "uniform");
  EXPECT_EQ(j.at("report").at("per_domain").size(), 5u);

  r = run_cli({"eval", "--checkpoint", ckpt, "--data", data, "--split", "train"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("split train"), std::string::npos);

  const auto spatial = gen("spatial", "s");
  EXPECT_EQ(run_cli({"eval", "--checkpoint", ckpt, "--data", spatial}).code, cli::kExitData);
  EXPECT_EQ(run_cli({"eval", "--checkpoint", tmp.file("none.json"), "--data", data}).code,
            cli::kExitData);
}

TEST_F(CliTest, EvalRwFinetuneNeedsErm) {
  const auto data = gen("dg15", "d");
  const auto run = tmp.file("erm");
  ASSERT_EQ(run_cli({"train", "--data", data, "--method", "erm", "--epochs", "2", "--seeds", "1",
                     "--out", run}).code,
            cli::kExitOk);
  const auto r = run_cli({"eval", "--checkpoint", run + "/checkpoint_seed0.json", "--data", data,
                          "--rwft-epochs", "1", "--out", tmp.file("rw.json")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(read_json(tmp.file("rw.json")).at("run").at("inference"), "rw-ft");
  EXPECT_EQ(run_cli({"eval", "--checkpoint", run + "/checkpoint_seed0.json", "--data", data,
                     "--uniform"}).code,
            cli::kExitConfig);
}

TEST_F(CliTest, AblateTable) {
  const auto out = tmp.file("abl");
  const auto r = run_cli({"ablate", "--gen", "dg15", "--seeds", "1", "--epochs", "2", "--out", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rows = read_json(out + "/ablation.json").at("rows");
  ASSERT_EQ(rows.size(), 6u);
  std::size_t relation = 0, consistency = 0;
  for (const auto& row : rows) {
    relation += row.at("group") == "relation";
    consistency += row.at("group") == "consistency";
  }
  EXPECT_EQ(relation, 4u);
  EXPECT_EQ(consistency, 2u);
  EXPECT_EQ(rows.at(4).at("variant"), "with");
  EXPECT_EQ(rows.at(5).at("lambda"), 0.0);
  EXPECT_NE(rows.at(4).at("histories"), rows.at(5).at("histories"));
  EXPECT_EQ(line_count(out + "/ablation.txt"), 8u);
  EXPECT_EQ(run_cli({"ablate", "--out", out}).code, cli::kExitConfig);
}

TEST_F(CliTest, TheoryTableAndRerun) {
  const std::vector<std::string> args{"theory", "--grid", "8,16,32", "--seeds", "2",
                                      "--oracle-samples", "100000"};
  auto a = args;
  a.insert(a.end(), {"--out", tmp.file("t1")});
  auto b = args;
  b.insert(b.end(), {"--out", tmp.file("t2")});
  const auto r = run_cli(a);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  ASSERT_EQ(run_cli(b).code, cli::kExitOk);
  EXPECT_EQ(line_count(tmp.file("t1") + "/scaling.csv"), 4u);
  const auto j = read_json(tmp.file("t1") + "/theory.json");
  EXPECT_EQ(j.at("scaling").size(), 3u);
  EXPECT_NEAR(j.at("averaging_oracle").at("target").get<double>(), 0.08333, 1e-5);
  EXPECT_EQ(read_file(tmp.file("t1") + "/scaling.csv"), read_file(tmp.file("t2") + "/scaling.csv"));
  EXPECT_EQ(read_file(tmp.file("t1") + "/theory.json"), read_file(tmp.file("t2") + "/theory.json"));
  EXPECT_EQ(run_cli({"theory", "--n-eval", "10", "--out", tmp.file("t3")}).code, cli::kExitConfig);
}

TEST_F(CliTest, ExportFixedRelations) {
  const auto data = gen("dg15", "d");
  const auto out = tmp.file("fixed.csv");
  const auto r = run_cli({"export-relations", "--data", data, "--out", out});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto [ids, m] = read_relation_csv(out);
  ASSERT_EQ(ids.size(), 15u);
  auto paths = dataset_paths_in(data);
  paths.adjacency.clear();
  const auto ds = load_dataset(paths, {TaskKind::kClassification, {}});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const double dtheta = ds.meta.at(ids[i])[0] - ds.meta.at(ids[j])[0];
      EXPECT_NEAR(m(i, j), std::max(0.0, std::cos(dtheta)), 1e-12);
    }
  }
  EXPECT_EQ(asymmetry(m), 0.0);
  EXPECT_EQ(run_cli({"export-relations", "--data", data, "--which", "learned", "--out", out}).code,
            cli::kExitConfig);
}

TEST_F(CliTest, ExportFusedMatchesRecomputation) {
  const auto data = gen("dg15", "d");
  const auto run = tmp.file("run");
  ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "2", "--seeds", "1", "--out", run}).code,
            cli::kExitOk);
  const auto ckpt_path = run + "/checkpoint_seed0.json";
  const double beta = 0.6;
  const auto out = tmp.file("fused.csv");
  ASSERT_EQ(run_cli({"export-relations", "--data", data, "--checkpoint", ckpt_path, "--beta", "0.6",
                     "--out", out}).code,
            cli::kExitOk);
  const auto [ids, m] = read_relation_csv(out);
  EXPECT_EQ(asymmetry(m), 0.0);
  const auto ckpt = load_checkpoint(ckpt_path);
  auto paths = dataset_paths_in(data);
  paths.adjacency.clear();
  const auto ds = load_dataset(paths, {TaskKind::kClassification, {}});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const auto& mi = ds.meta.at(ids[i]);
      const auto& mj = ds.meta.at(ids[j]);
      const double fixed = std::max(0.0, std::cos(mi[0] - mj[0]));
      const double learned =
          i == j ? 1.0 : oracle::learned_relation(ckpt.model.params.relation, mi, mj);
      EXPECT_NEAR(m(i, j), std::max(0.0, beta * fixed + (1.0 - beta) * learned), 1e-12);
    }
  }
}

TEST_F(CliTest, IdenticalConfigGivesIdenticalReports) {
  const auto data = gen("dg15", "d");
  for (const char* name : {"r1", "r2"}) {
    ASSERT_EQ(run_cli({"train", "--data", data, "--epochs", "2", "--seeds", "2", "--out",
                       tmp.file(name)}).code,
              cli::kExitOk);
  }
  EXPECT_EQ(read_file(tmp.file("r1") + "/report.json"), read_file(tmp.file("r2") + "/report.json"));
  EXPECT_EQ(read_file(tmp.file("r1") + "/checkpoint_seed1.json"),
            read_file(tmp.file("r2") + "/checkpoint_seed1.json"));
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  const auto data = gen("dg15", "d");
  const auto cfg = tmp.file("cfg.json");
  write_file_atomic(cfg, R"({"epochs": 1, "lambda": 0.25})");
  const auto out = tmp.file("run");
  ASSERT_EQ(run_cli({"train", "--data", data, "--config", cfg, "--lambda", "0.75", "--seeds", "1",
                     "--out", out}).code,
            cli::kExitOk);
  const auto c = read_json(out + "/report.json").at("run").at("config");
  EXPECT_EQ(c.at("epochs"), 1);
  EXPECT_EQ(c.at("lambda"), 0.75);
  write_file_atomic(cfg, R"({"epoch": 1})");
  EXPECT_EQ(run_cli({"train", "--data", data, "--config", cfg, "--out", out}).code, cli::kExitConfig);
}

}  // namespace
}  // namespace d3g
