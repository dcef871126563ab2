#include "dmpc/artifacts.hpp"

#include "scenarios.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dmpc;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::string joined_keys(const Json& j) {
  std::string out;
  for (auto it = j.begin(); it != j.end(); ++it) out += (out.empty() ? "" : ",") + it.key();
  return out;
}

/// Lines of a golden file as "label: value" pairs.
std::map<std::string, std::string> golden_map(const std::string& name) {
  std::map<std::string, std::string> m;
  std::ifstream in(fs::path(DMPC_GOLDEN_DIR) / name);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon != std::string::npos) m[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return m;
}

class RunDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dmpc_artifacts_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

ScenarioConfig short_run() {
  ScenarioConfig c = paper_sec6_preset();
  c.followers.count = 2;
  c.horizon = 10;
  c.step_cap = 3;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_F(RunDir, HeadersMatchGoldenFiles) {
  const ScenarioConfig c = short_run();
  const RunResult r = run_scenario(c);
  write_run_artifacts(dir_.string(), c, r, true);

  EXPECT_EQ(first_line(dir_ / "trajectory.csv") + "\n",
            read_file(fs::path(DMPC_GOLDEN_DIR) / "trajectory_header.csv"));
  EXPECT_EQ(trajectory_csv_header(), first_line(dir_ / "trajectory.csv"));
  EXPECT_EQ(first_line(dir_ / "loss_audit.csv") + "\n",
            read_file(fs::path(DMPC_GOLDEN_DIR) / "loss_audit_header.csv"));

  const auto steps_golden = golden_map("steps_keys.txt");
  const Json step = Json::parse(first_line(dir_ / "steps.jsonl"));
  EXPECT_EQ(joined_keys(step), steps_golden.at("step"));
  EXPECT_EQ(joined_keys(step["agents"][0]), steps_golden.at("agent"));

  const auto summary_golden = golden_map("summary_keys.txt");
  const Json summary = Json::parse(read_file(dir_ / "summary.json"));
  const Json cert = Json::parse(read_file(dir_ / "certificate.json"));
  EXPECT_EQ(joined_keys(summary), summary_golden.at("summary"));
  EXPECT_EQ(joined_keys(cert), summary_golden.at("certificate"));
  EXPECT_EQ(summary["schema_version"], kArtifactSchemaVersion);
  EXPECT_EQ(cert["schema_version"], kArtifactSchemaVersion);

  EXPECT_EQ(first_line(dir_ / "plot_top.csv"), "t,agent,px,py");
  EXPECT_EQ(first_line(dir_ / "plot_3d.csv"), "t,agent,px,py,pz");
}

TEST_F(RunDir, ArtifactsRoundTrip) {
  const ScenarioConfig c = short_run();
  const RunResult r = run_scenario(c);
  const RunOutcome outcome = write_run_artifacts(dir_.string(), c, r);
  EXPECT_EQ(outcome, RunOutcome::StepCap);

  const auto frames = read_trajectory_frames((dir_ / "trajectory.csv").string());
  const auto direct = frames_from_steps(r.steps);
  ASSERT_EQ(frames.size(), direct.size());
  for (std::size_t s = 0; s < frames.size(); ++s) {
    EXPECT_EQ(frames[s].t, direct[s].t);
    EXPECT_EQ(frames[s].leader, direct[s].leader);
    EXPECT_EQ(frames[s].follower_ids, direct[s].follower_ids);
    for (std::size_t i = 0; i < frames[s].followers.size(); ++i) {
      EXPECT_EQ(frames[s].followers[i], direct[s].followers[i]);
    }
  }

  const auto steps = read_steps_jsonl((dir_ / "steps.jsonl").string());
  ASSERT_EQ(steps.size(), r.steps.size());
  const Certificate a = certify_run(c, r.steps, direct);
  const Certificate b = certify_run(c, steps, frames);
  EXPECT_EQ(a.collision.min_pairwise, b.collision.min_pairwise);
  EXPECT_EQ(a.gate.max_lambda(), b.gate.max_lambda());
  EXPECT_EQ(a.rho_hat, b.rho_hat);
  EXPECT_EQ(a.decrease_violations, b.decrease_violations);

  EXPECT_EQ(dump_config(load_config((dir_ / "config.json").string())), dump_config(c));
}

TEST_F(RunDir, ReportSummarizesRun) {
  const ScenarioConfig c = short_run();
  write_run_artifacts(dir_.string(), c, run_scenario(c));
  const std::string report = render_report(dir_.string());
  EXPECT_NE(report.find("collision-free: yes"), std::string::npos) << report;
  EXPECT_NE(report.find("safety gate: pass"), std::string::npos) << report;
  EXPECT_NE(report.find("latch steps:"), std::string::npos);
  EXPECT_NE(report.find("rho_hat estimate:"), std::string::npos);
  EXPECT_NE(report.find("lyapunov violations:"), std::string::npos);
}

TEST_F(RunDir, ReportRejectsMissingArtifacts) {
  EXPECT_THROW((void)render_report(dir_.string()), std::runtime_error);
  fs::create_directories(dir_);
  EXPECT_THROW((void)render_report(dir_.string()), std::runtime_error);
}

TEST_F(RunDir, AdversarialRunSurfacesViolations) {
  ScenarioConfig c = dmpc::testing::nominal_single_follower();
  c.seed = 11;
  c.disturbance.kind = DisturbanceKind::Seeded;
  c.disturbance.leader_bound = Vec::Zero(6);
  c.disturbance.follower_bound = Vec::Zero(9);
  c.disturbance.follower_bound.head<3>().setConstant(0.2);
  LinkRule mute;
  mute.from = 0;
  mute.windows.push_back({5, 45});
  c.comm.links.push_back(mute);

  const RunResult r = run_scenario(c);
  const Certificate cert = certify_run(c, r.steps, frames_from_steps(r.steps));
  EXPECT_FALSE(cert.lyapunov_applicable);
  EXPECT_GT(cert.decrease_violations + cert.increase_violations, 0);
  for (const LyapunovStep& s : cert.lyapunov[0].report.steps) {
    if (!s.decrease_ok || !s.nonincreasing) {
      EXPECT_GE(s.t, 5);
      EXPECT_LT(s.t, 45);
    }
  }

  write_run_artifacts(dir_.string(), c, r);
  const std::string report = render_report(dir_.string());
  EXPECT_EQ(report.find("lyapunov violations: 0"), std::string::npos) << report;
  const Json j = Json::parse(read_file(dir_ / "certificate.json"));
  EXPECT_FALSE(j["lyapunov"]["followers"]["f1"]["violating_steps"].empty());
}

TEST(Certificate, FailingCertificateDowngradesSuccess) {
  RunResult r;
  r.outcome = RunOutcome::Success;
  Certificate cert;
  cert.collision.min_pairwise = -0.5;
  EXPECT_EQ(final_outcome(r, cert), RunOutcome::CertificateFailure);
  cert.collision.min_pairwise = 0.5;
  EXPECT_EQ(final_outcome(r, cert), RunOutcome::Success);
  r.outcome = RunOutcome::StepCap;
  cert.collision.min_pairwise = -0.5;
  EXPECT_EQ(final_outcome(r, cert), RunOutcome::StepCap);
}
