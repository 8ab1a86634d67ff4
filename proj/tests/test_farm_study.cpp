#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "pbb/farm.hpp"
#include "pbb/io.hpp"
#include "pbb/study.hpp"

using namespace pbb;
namespace fs = std::filesystem;

namespace {

struct Job {
  int id;
  std::string key() const {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%03d", id);
    return buf;
  }
};

std::vector<Job> shuffled_jobs(int n) {
  std::vector<Job> jobs;
  for (int i = 0; i < n; ++i) jobs.push_back({(i * 37) % n});
  return jobs;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pbb_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_study() {
  RunConfig c = parse_config("g = 20\ndelta = -5\neta = 4.8\ngamma = 0\n");
  c.trajectory.burn_in = 100.0;
  c.study.g_values = {16.0, 20.0, 24.0};
  c.study.eta_over_g = {0.2, 0.24, 0.28};
  c.study.budget = {3000.0, 1};
  c.master_seed = 5;
  return c;
}

std::string trajectory_bytes(std::uint64_t seed) {
  ModelParams p{1.0, 0.01, 20.0, -5.0, 4.8, 40};
  TrajectoryConfig c;
  c.seed = seed;
  c.t_final = 300.0;
  c.burn_in = 50.0;
  const TrajectoryRecord rec = run_trajectory(p, c);
  std::ostringstream os;
  write_record_csv(os, rec, "h");
  write_jumps_csv(os, rec, "h");
  return os.str();
}

}  // namespace

TEST(Farm, ResultsIndependentOfWorkerCount) {
  auto run = [](const Job& j) { return double(j.id) * j.id + 0.5; };
  std::vector<std::string> seen;
  const auto one = farm<double>(shuffled_jobs(50), 1, run, [&](const Job& j, double) {
    seen.push_back(j.key());
  });
  const auto many = farm<double>(shuffled_jobs(50), 8, run, [](const Job&, double) {});
  ASSERT_TRUE(one.complete() && many.complete());
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(one.jobs[i].id, int(i));
    EXPECT_EQ(many.jobs[i].id, int(i));
    EXPECT_EQ(*one.results[i], *many.results[i]);
  }
  // with one worker the completion callback runs in key order
  EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
}

TEST(Farm, FailureIsRecordedAndOthersComplete) {
  int done = 0;
  const auto out = farm<int>(
      shuffled_jobs(20), 4,
      [](const Job& j) {
        if (j.id == 7) throw std::runtime_error("boom");
        return j.id;
      },
      [&](const Job&, int) { ++done; });
  EXPECT_FALSE(out.complete());
  ASSERT_EQ(out.failures.size(), 1u);
  EXPECT_EQ(out.failures[0].key, "007");
  EXPECT_EQ(out.failures[0].what, "boom");
  EXPECT_EQ(done, 19);
  EXPECT_FALSE(out.results[7].has_value());
  EXPECT_EQ(*out.results[8], 8);
}

TEST(Determinism, SameSeedSameBytes) {
  const std::string a = trajectory_bytes(77);
  EXPECT_EQ(a, trajectory_bytes(77));
  EXPECT_NE(a, trajectory_bytes(78));
}

TEST(Points, WorkerCountAndResumeGiveIdenticalAggregates) {
  const RunConfig c = tiny_study();
  std::vector<PointSpec> specs = sweep_specs(c);
  specs.resize(3);
  for (auto& s : specs) s.budget = {300.0, 2};
  const fs::path a = scratch("w1"), b = scratch("w8");
  const PointRun r1 = run_points(specs, a.string(), 1, false);
  const PointRun r8 = run_points(specs, b.string(), 8, false);
  ASSERT_TRUE(r1.failures.empty() && r8.failures.empty());
  std::vector<SweepPoint> p1, p8;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    p1.push_back(*r1.points[i]);
    p8.push_back(*r8.points[i]);
    EXPECT_EQ(p1.back().eta, specs[i].eta);
  }
  EXPECT_EQ(sweep_csv(p1, "h"), sweep_csv(p8, "h"));

  std::vector<std::string> log;
  const PointRun again = run_points(specs, a.string(), 1, true, [&](const std::string& s) {
    log.push_back(s);
  });
  EXPECT_TRUE(log.empty());  // nothing left to simulate
  std::vector<SweepPoint> pr;
  for (const auto& p : again.points) pr.push_back(*p);
  EXPECT_EQ(sweep_csv(pr, "h"), sweep_csv(p1, "h"));

  // a changed spec does not pick up the stored point
  PointSpec other = specs[0];
  other.budget.t_per_seed = 301.0;
  EXPECT_FALSE(load_point(a.string(), other).has_value());
  EXPECT_TRUE(load_point(a.string(), specs[0]).has_value());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Points, PartialRunResumes) {
  const RunConfig c = tiny_study();
  std::vector<PointSpec> specs = sweep_specs(c);
  specs.resize(2);
  for (auto& s : specs) s.budget = {200.0, 1};
  const fs::path d = scratch("partial");
  run_points({specs[0]}, d.string(), 1, false);
  std::vector<std::string> log;
  const PointRun r = run_points(specs, d.string(), 1, true, [&](const std::string& s) {
    log.push_back(s);
  });
  ASSERT_FALSE(log.empty());
  EXPECT_EQ(log[0], "1 point(s) to simulate, 1 reused");
  EXPECT_TRUE(r.points[0] && r.points[1]);
  fs::remove_all(d);
}

TEST(Study, TinyStudyWritesOutputs) {
  const RunConfig c = tiny_study();
  const fs::path d = scratch("study");
  const StudyResult r = run_study(c, d.string(), 1, false);
  EXPECT_EQ(r.sweep.size(), 9u);
  EXPECT_TRUE(r.failures.empty());
  for (const auto& n : r.notes) std::cout << "note: " << n << '\n';
  for (const auto& f : r.failures) std::cout << "failure: " << f.key << ": " << f.what << '\n';
  for (const auto& [g, e] : r.eta_star)
    std::cout << "g=" << g << " eta*=" << e.eta_star << " +- " << e.eta_star_err << '\n';
  EXPECT_FALSE(r.eta_star.empty());
  EXPECT_EQ(r.orbit.size(), r.eta_star.size());
  write_study_outputs(r, c, d.string());
  for (const char* f : {"sweep.csv", "orbit.csv", "scaling.csv", "exponents.json"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  const std::string csv = read_text_file((d / "sweep.csv").string());
  EXPECT_EQ(csv.substr(0, 2), "# ");
  EXPECT_NE(csv.find(config_hash(c)), std::string::npos);
  const json rep = json::parse(read_text_file((d / "exponents.json").string()));
  EXPECT_EQ(rep.at("config_hash"), config_hash(c));
  const json man = study_manifest(c, sweep_specs(c));
  EXPECT_EQ(man.at("format"), "pbb-manifest-1");
  EXPECT_EQ(man.at("points").size(), 9u);

  // a resumed study reuses every point and reproduces the outputs
  const StudyResult again = run_study(c, d.string(), 1, true);
  EXPECT_EQ(sweep_csv(again.sweep, "h"), sweep_csv(r.sweep, "h"));
  EXPECT_EQ(scaling_csv(again, "h"), scaling_csv(r, "h"));
  const StudyResult loaded = load_study(c, d.string());
  EXPECT_TRUE(loaded.failures.empty());
  EXPECT_EQ(scaling_csv(loaded, "h"), scaling_csv(r, "h"));
  fs::remove_all(d);
  EXPECT_EQ(load_study(c, d.string()).failures.size(), 9u);
}
