#ifndef PBB_FARM_HPP
#define PBB_FARM_HPP

// Thread farm for independent jobs. Jobs are sorted by key before dispatch and
// results are returned in that order, so the outcome does not depend on the
// worker count or on completion order.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace pbb {

struct FarmFailure {
  std::string key;
  std::string what;
};

template <class Job, class Result>
struct FarmOutcome {
  std::vector<Job> jobs;  // sorted by key
  std::vector<std::optional<Result>> results;
  std::vector<FarmFailure> failures;

  bool complete() const { return failures.empty(); }
};

/// run(job) -> Result executes on a worker; done(job, result) runs under a
/// lock right after each success (persistence, progress).
template <class Result, class Job, class Run, class Done>
FarmOutcome<Job, Result> farm(std::vector<Job> jobs, int workers, Run run, Done done) {
  std::stable_sort(jobs.begin(), jobs.end(),
                   [](const Job& a, const Job& b) { return a.key() < b.key(); });
  FarmOutcome<Job, Result> out;
  out.results.resize(jobs.size());
  std::vector<std::optional<FarmFailure>> failed(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        Result r = run(jobs[i]);
        std::lock_guard<std::mutex> g(lock);
        done(jobs[i], r);
        out.results[i] = std::move(r);
      } catch (const std::exception& e) {
        failed[i] = FarmFailure{jobs[i].key(), e.what()};
      } catch (...) {
        failed[i] = FarmFailure{jobs[i].key(), "unknown exception"};
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, int(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& f : failed)
    if (f) out.failures.push_back(*f);
  out.jobs = std::move(jobs);
  return out;
}

}  // namespace pbb

#endif  // PBB_FARM_HPP
