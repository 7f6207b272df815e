#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hg/common/time.hpp"
#include "hg/domain/entities.hpp"

namespace hg::sim {

struct FleetOptions {
  std::string server_url;
  std::string admin_token;  // may be empty when the server has none
  std::size_t subjects = 10;
  int days = 3;
  double compliance = 1.0;
  std::uint64_t seed = 1;
  // First simulated day; defaults to the day after the server's clock.
  std::optional<Date> start_day;
  // Daily PHQ-8 window.
  TimeOfDay window_start{9 * 3'600'000};
  TimeOfDay window_end{21 * 3'600'000};
  // Rule: PHQ-8 total_score below the threshold assigns a TUG test-set.
  bool with_rule = true;
  double rule_threshold = 10.0;
  std::size_t max_in_flight = 32;
  int upload_retries = 3;
  // How long to wait each evening for workers to drain the day's datasets.
  std::int64_t settle_timeout_ms = 30'000;
};

struct TruthEntry {
  std::string idempotency_key;
  std::size_t subject_index = 0;
  int day = 0;
  std::string test_kind;
  std::optional<int> expected_total;    // phq8
  std::vector<double> step_times;       // tug
  std::size_t rises = 0;                // sit_to_stand
  std::size_t plateaus = 0;             // sit_to_stand
};

struct SubjectReport {
  std::size_t index = 0;
  std::string raw_id;
  double compliance_prob = 0.0;
  std::int64_t delivered = 0;  // task occurrences seen by the device
  std::int64_t attempted = 0;  // compliance coin said yes
  std::int64_t completed = 0;  // uploads accepted by the server
  std::int64_t missed = 0;     // declined or failed uploads
};

struct FleetReport {
  std::string study_name;
  std::uint64_t seed = 0;
  int days = 0;
  double compliance = 0.0;
  std::int64_t delivered = 0;
  std::int64_t attempted = 0;
  std::int64_t completed = 0;
  std::int64_t missed = 0;
  bool settled = true;  // every evening drained within the timeout
  std::vector<SubjectReport> subjects;
  std::vector<TruthEntry> truth;

  // Server-side handles; not part of the deterministic report.
  std::string study_id;
  std::string researcher_token;
  Date first_day;
};

// Drives a server running on a virtual clock: enrolls the fleet, creates a
// daily PHQ-8 task (and the TUG rule), then plays each day. Analytic
// workers must be attached to the same server for results to appear.
FleetReport run_fleet(const FleetOptions& options);

// Deterministic for a fixed seed: server ids and dates are left out.
Json to_json(const FleetReport& report);

}  // namespace hg::sim
