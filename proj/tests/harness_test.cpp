// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "maskbf/harness.hpp"

namespace maskbf {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("maskbf_harness_" + name);
  fs::remove_all(p);
  return p;
}

json tiny_plan(const fs::path& out) {
  return json{{"scenarios", {{"synthetic", {{"seed", 4}, {"count", 1}, {"mics", 3}, {"duration", 0.25}}}}},
              {"g", {1.0}},
              {"variations", {"INV-NS"}},
              {"config", {{"iterations", 3}}},
              {"output_dir", out.string()}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Plan, Defaults) {
  const auto p = parse_plan(json{{"variations", {"MinGEV-NS"}}});
  EXPECT_EQ(p.g_list, (std::vector<double>{1.0, 2.0, 4.0}));
  ASSERT_EQ(p.scaling.size(), 1u);
  EXPECT_EQ(p.scaling[0].method, ScalingMethod::ideal);
  EXPECT_FALSE(p.iterations.has_value());
  EXPECT_EQ(p.reference_mic, 1);
  EXPECT_TRUE(std::holds_alternative<SyntheticSource>(p.source));
}

TEST(Plan, Errors) {
  const json bad[] = {
      json::array(),
      json{{"g", {1.0}}},
      json{{"variations", json::array()}},
      json{{"variations", {"NoSuchBF-XY"}}},
      json{{"variations", {"INV-NS"}}, {"g", {-1.0}}},
      json{{"variations", {"INV-NS"}}, {"g", json::array()}},
      json{{"variations", {"INV-NS"}}, {"scaling", {"ban"}}},
      json{{"variations", {"INV-NS"}}, {"scaling", {"louder"}}},
      json{{"variations", {"INV-NS"}}, {"config", {{"iterations", 0}}}},
      json{{"variations", {"INV-NS"}}, {"config", {{"optimizer", "sgd"}}}},
      json{{"variations", {"INV-NS"}}, {"reference_mic", 0}},
      json{{"variations", {"INV-NS"}}, {"scenarios", {{"synthetic", {{"mics", 1}}}}}},
      json{{"variations", {"INV-NS"}}, {"scenarios", {{"manifest", json::array()}}}},
      json{{"variations", {"INV-NS"}}, {"g", "loud"}},
  };
  for (const auto& j : bad) EXPECT_THROW(parse_plan(j), PlanError) << j.dump();
  EXPECT_THROW(load_plan("/nonexistent/plan.json"), PlanError);
}

TEST(Plan, ManifestPathsResolveAgainstBase) {
  const auto p = parse_plan(json{{"variations", {"INV-NS"}},
                                 {"scenarios", {{"manifest", {{{"target", "t.wav"}, {"noise", {"n1.wav", "/abs/n2.wav"}}}}}}}},
                            "/data");
  const auto& m = std::get<std::vector<ManifestEntry>>(p.source);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].name, "utt0");
  EXPECT_EQ(m[0].target[0], fs::path("/data/t.wav"));
  EXPECT_EQ(m[0].noise[1], fs::path("/abs/n2.wav"));
}

TEST(Curves, EmptyAndSingle) {
  EXPECT_EQ(emit_curves({}), "");
  RunRecord r;
  r.variation = "INV-OS";
  r.loss_curve = {0.5, 0.25};
  r.sdr_curve = {3.0, 4.0};
  EXPECT_EQ(emit_curves({r}), "variation,iteration,loss,sdr_db\nINV-OS,1,0.5,3\nINV-OS,2,0.25,4\n");
}

TEST(Curves, IterationsToConverge) {
  RunRecord r;
  EXPECT_EQ(iterations_to_converge(r, 0.1), 0);
  r.sdr_curve = {1.0, 5.0, 9.95, 10.0, 10.02};
  EXPECT_EQ(iterations_to_converge(r, 0.1), 3);
}

TEST(Run, SmallestPlan) {
  const auto out = scratch("smallest");
  const auto res = run_experiment(parse_plan(tiny_plan(out)), 1);
  ASSERT_EQ(res.table.cells.size(), 3u);
  const auto& c = res.table.cells[0];
  EXPECT_EQ(c.variation, "INV-NS");
  EXPECT_EQ(c.utterances, 1);
  EXPECT_EQ(c.failed, 0);
  EXPECT_FALSE(c.baseline);
  EXPECT_TRUE(res.table.cells[1].baseline);
  EXPECT_EQ(res.table.cells[1].variation, "ideal-mmse");
  EXPECT_EQ(res.table.cells[2].variation, "mic-1");
  // the optimized cell sits between the reference mic and the ideal bound
  EXPECT_LE(c.mean_sdr_db, res.table.cells[1].mean_sdr_db + 1e-9);

  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].loss_curve.size(), 3u);
  for (const char* f : {"table.csv", "table.json", "curves.csv"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_TRUE(fs::exists(out / "records" / (res.record_names[0] + ".json")));
  EXPECT_EQ(slurp(out / "curves.csv"), emit_curves(res.records));
  const auto table = json::parse(slurp(out / "table.json"));
  EXPECT_EQ(table.at("cells").size(), 3u);
}

TEST(Run, WorkerCountDoesNotChangeResults) {
  auto plan = tiny_plan(scratch("jobs1"));
  plan["variations"] = {"INV-NS", "MinGEV-NS", kIdealFilterName};
  plan["scaling"] = {"ideal", "mdp"};
  const auto a = run_experiment(parse_plan(plan), 1);
  plan["output_dir"] = scratch("jobs3").string();
  const auto b = run_experiment(parse_plan(plan), 3);
  EXPECT_EQ(a.table.csv(), b.table.csv());
  EXPECT_EQ(emit_curves(a.records), emit_curves(b.records));
}

TEST(Run, IdealFilterRowMatchesBaseline) {
  auto plan = tiny_plan(scratch("ideal"));
  plan["variations"] = {kIdealFilterName};
  const auto res = run_experiment(parse_plan(plan), 1);
  ASSERT_EQ(res.table.cells.size(), 3u);
  EXPECT_NEAR(res.table.cells[0].mean_sdr_db, res.table.cells[1].mean_sdr_db, 1e-9);
}

// Doubling g lowers the reference-mic SDR by 20 log10(2) dB.
TEST(Run, MicBaselineFollowsNoiseGain) {
  auto plan = tiny_plan(scratch("gsweep"));
  plan["g"] = {0.5, 1.0, 2.0};
  const auto res = run_experiment(parse_plan(plan), 1);
  std::vector<double> mic;
  for (const auto& c : res.table.cells)
    if (c.variation == "mic-1") mic.push_back(c.mean_sdr_db);
  ASSERT_EQ(mic.size(), 3u);
  const double step = 20.0 * std::log10(2.0);
  EXPECT_NEAR(mic[0] - mic[1], step, 1e-9);
  EXPECT_NEAR(mic[1] - mic[2], step, 1e-9);
}

TEST(Run, ReferenceMicOutOfRange) {
  auto plan = tiny_plan(scratch("refmic"));
  plan["reference_mic"] = 4;
  EXPECT_THROW(run_experiment(parse_plan(plan), 1), PlanError);
}

}  // namespace
}  // namespace maskbf
