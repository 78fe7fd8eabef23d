#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hrcache/hr_cache.hpp"
#include "hrcache/policies.hpp"
#include "hrcache/trace.hpp"

namespace hrcache {

struct SimOptions {
    // Requests before this index warm the cache without being measured.
    // Unset = auto: hrcache measures after its first trained window,
    // baselines from request 0.
    std::optional<uint64_t> warmup;
    WindowConfig window;
    bool timing = false;  // wall_time stays 0 unless set, keeping reports reproducible
};

struct SimReport {
    std::string policy;
    uint64_t capacity = 0;
    uint64_t warmup_requests = 0;
    uint64_t measured_requests = 0;
    double object_hit_ratio = 0.0;
    double byte_hit_ratio = 0.0;
    double byte_miss_ratio = 0.0;
    uint64_t miss_bytes = 0;
    uint64_t predictions_made = 0;
    uint64_t prediction_calls = 0;
    uint64_t features_built = 0;
    double wall_time = 0.0;
};

nlohmann::json report_to_json(const SimReport& r);

SimReport run_sim(const Trace& trace, std::string_view policy,
                  uint64_t capacity, const SimOptions& opts = {});

struct ReductionEntry {
    std::string policy;
    uint64_t capacity = 0;
    double reduction_pct = 0.0;  // (miss_bytes(lru) - miss_bytes(p)) / miss_bytes(lru) * 100
    bool lru_zero_miss = false;
};

struct ComparisonReport {
    std::vector<std::string> policies;
    std::vector<uint64_t> capacities;
    std::vector<SimReport> runs;  // ordered by (capacity, policy) as given
    std::vector<ReductionEntry> reductions;
};

nlohmann::json comparison_to_json(const ComparisonReport& r);

// Runs every (policy, capacity) pair over one trace. Requires "lru" in the
// policy list; when "hrcache" is present its first-window boundary becomes
// everyone's warmup at that capacity.
ComparisonReport compare(const Trace& trace,
                         const std::vector<std::string>& policies,
                         const std::vector<uint64_t>& capacities,
                         const SimOptions& opts = {});

struct OverheadCounters {
    double pred_per_request = 0.0;
    double features_per_request = 0.0;
};

OverheadCounters overhead_counters(const SimReport& r);

// Round to 6 significant digits; report floats pass through this.
double round6(double v);

std::string report_to_csv(const SimReport& r);
std::string comparison_to_csv(const ComparisonReport& r);

}  // namespace hrcache
