#include <benchmark/benchmark.h>

#include "hg/common/clock.hpp"
#include "hg/common/ids.hpp"
#include "hg/common/random.hpp"
#include "hg/queue/job_queue.hpp"
#include "hg/store/database.hpp"

using namespace hg;

// One enqueue, claim and successful ack per iteration.
static void BM_QueueRoundTrip(benchmark::State& state) {
  store::Database db(":memory:");
  IdGenerator ids(std::make_shared<SeededRandom>(1));
  ManualClock clock(Timestamp{1'700'000'000'000});
  queue::JobQueue q(db, ids, clock);
  std::int64_t n = 0;
  for (auto _ : state) {
    q.enqueue("ds_" + std::to_string(n++), "phq8");
    auto job = q.claim("phq8", 60'000);
    q.ack(job->job_id, job->attempts, queue::Outcome::kSuccess);
  }
}
BENCHMARK(BM_QueueRoundTrip)->Unit(benchmark::kMicrosecond);

// Claim latency with a backlog of ready jobs.
static void BM_ClaimWithBacklog(benchmark::State& state) {
  store::Database db(":memory:");
  IdGenerator ids(std::make_shared<SeededRandom>(2));
  ManualClock clock(Timestamp{1'700'000'000'000});
  queue::JobQueue q(db, ids, clock);
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < state.range(0); ++i) q.enqueue("ds_" + std::to_string(n++), "phq8");
  for (auto _ : state) {
    auto job = q.claim("phq8", 60'000);
    q.ack(job->job_id, job->attempts, queue::Outcome::kSuccess);
    state.PauseTiming();
    q.enqueue("ds_" + std::to_string(n++), "phq8");
    state.ResumeTiming();
  }
}
BENCHMARK(BM_ClaimWithBacklog)->Arg(100)->Arg(10'000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
