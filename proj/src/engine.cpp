#include "hrcache/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hrcache/errors.hpp"

namespace hrcache {

double round6(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.6g", v);
    return std::strtod(buf, nullptr);
}

namespace {

struct Tally {
    uint64_t hits = 0;
    uint64_t hit_bytes = 0;
    uint64_t miss_bytes = 0;
    uint64_t requests = 0;

    void add(const Request& r, bool hit) {
        ++requests;
        if (hit) {
            ++hits;
            hit_bytes += r.size;
        } else {
            miss_bytes += r.size;
        }
    }
};

SimReport finish_report(std::string policy, uint64_t capacity, uint64_t warmup,
                        const Tally& t, double wall) {
    SimReport rep;
    rep.policy = std::move(policy);
    rep.capacity = capacity;
    rep.warmup_requests = warmup;
    rep.measured_requests = t.requests;
    uint64_t total = t.hit_bytes + t.miss_bytes;
    if (t.requests > 0) {
        rep.object_hit_ratio =
            static_cast<double>(t.hits) / static_cast<double>(t.requests);
        rep.byte_hit_ratio =
            total ? static_cast<double>(t.hit_bytes) / static_cast<double>(total)
                  : 0.0;
        rep.byte_miss_ratio =
            total ? static_cast<double>(t.miss_bytes) / static_cast<double>(total)
                  : 0.0;
    }
    rep.miss_bytes = t.miss_bytes;
    rep.wall_time = wall;
    return rep;
}

}  // namespace

SimReport run_sim(const Trace& trace, std::string_view policy,
                  uint64_t capacity, const SimOptions& opts) {
    if (!is_policy_name(policy))
        throw UsageError("unknown policy: " + std::string(policy));
    if (capacity == 0) throw UsageError("capacity must be > 0");

    auto t0 = std::chrono::steady_clock::now();
    const size_t n = trace.size();
    Tally tally;

    if (policy == "hrcache") {
        HrCache cache(capacity, opts.window);
        const size_t chunk = static_cast<size_t>(opts.window.batch_size);
        // Warmup boundary may only be known after the fact; buffer outcomes.
        std::vector<bool> outcomes;
        outcomes.reserve(n);
        for (size_t i = 0; i < n; i += chunk) {
            size_t len = std::min(chunk, n - i);
            std::vector<bool> out =
                cache.process_batch({trace.requests.data() + i, len});
            outcomes.insert(outcomes.end(), out.begin(), out.end());
        }
        uint64_t warmup = opts.warmup
                              ? *opts.warmup
                              : std::min<uint64_t>(cache.warmup_boundary(), n);
        warmup = std::min<uint64_t>(warmup, n);
        for (size_t i = warmup; i < n; ++i) tally.add(trace[i], outcomes[i]);

        double wall = 0.0;
        if (opts.timing)
            wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                 t0)
                       .count();
        SimReport rep =
            finish_report("hrcache", capacity, warmup, tally, wall);
        rep.predictions_made = cache.predictions_made();
        rep.prediction_calls = cache.prediction_calls();
        rep.features_built = cache.features_built();
        return rep;
    }

    std::unique_ptr<Policy> p = make_baseline(policy, capacity, &trace);
    uint64_t warmup = std::min<uint64_t>(opts.warmup.value_or(0), n);
    for (size_t i = 0; i < n; ++i) {
        bool hit = p->on_request(trace[i]);
        if (i >= warmup) tally.add(trace[i], hit);
    }
    double wall = 0.0;
    if (opts.timing)
        wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                   .count();
    return finish_report(std::string(policy), capacity, warmup, tally, wall);
}

ComparisonReport compare(const Trace& trace,
                         const std::vector<std::string>& policies,
                         const std::vector<uint64_t>& capacities,
                         const SimOptions& opts) {
    if (policies.empty()) throw UsageError("compare: no policies given");
    if (capacities.empty()) throw UsageError("compare: no capacities given");
    for (const std::string& p : policies)
        if (!is_policy_name(p)) throw UsageError("unknown policy: " + p);
    if (std::find(policies.begin(), policies.end(), "lru") == policies.end())
        throw UsageError("compare: traffic reduction is relative to lru; "
                         "include lru in --policies");

    ComparisonReport report;
    report.policies = policies;
    report.capacities = capacities;

    for (uint64_t cap : capacities) {
        // hrcache first: its first training window sets the shared warmup
        std::optional<SimReport> hr;
        if (std::find(policies.begin(), policies.end(), "hrcache") !=
            policies.end())
            hr = run_sim(trace, "hrcache", cap, opts);

        SimOptions aligned = opts;
        if (hr && !aligned.warmup) aligned.warmup = hr->warmup_requests;

        std::vector<SimReport> runs;
        for (const std::string& p : policies) {
            if (p == "hrcache")
                runs.push_back(*hr);
            else
                runs.push_back(run_sim(trace, p, cap, aligned));
        }
        const SimReport* lru = nullptr;
        for (const SimReport& r : runs)
            if (r.policy == "lru") lru = &r;
        for (const SimReport& r : runs) {
            ReductionEntry e;
            e.policy = r.policy;
            e.capacity = cap;
            if (lru->miss_bytes == 0) {
                e.lru_zero_miss = true;
                e.reduction_pct = 0.0;
            } else {
                e.reduction_pct =
                    (static_cast<double>(lru->miss_bytes) -
                     static_cast<double>(r.miss_bytes)) /
                    static_cast<double>(lru->miss_bytes) * 100.0;
            }
            report.reductions.push_back(e);
        }
        for (SimReport& r : runs) report.runs.push_back(std::move(r));
    }
    return report;
}

OverheadCounters overhead_counters(const SimReport& r) {
    OverheadCounters c;
    if (r.measured_requests > 0) {
        c.pred_per_request = static_cast<double>(r.predictions_made) /
                             static_cast<double>(r.measured_requests);
        c.features_per_request = static_cast<double>(r.features_built) /
                                 static_cast<double>(r.measured_requests);
    }
    return c;
}

nlohmann::json report_to_json(const SimReport& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["policy"] = r.policy;
    j["capacity"] = r.capacity;
    j["warmup_requests"] = r.warmup_requests;
    j["measured_requests"] = r.measured_requests;
    j["object_hit_ratio"] = round6(r.object_hit_ratio);
    j["byte_hit_ratio"] = round6(r.byte_hit_ratio);
    j["byte_miss_ratio"] = round6(r.byte_miss_ratio);
    j["miss_bytes"] = r.miss_bytes;
    j["predictions_made"] = r.predictions_made;
    j["prediction_calls"] = r.prediction_calls;
    j["features_built"] = r.features_built;
    j["wall_time"] = round6(r.wall_time);
    return j;
}

nlohmann::json comparison_to_json(const ComparisonReport& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["policies"] = r.policies;
    j["capacities"] = r.capacities;
    nlohmann::json runs = nlohmann::json::array();
    for (const SimReport& rep : r.runs) runs.push_back(report_to_json(rep));
    j["runs"] = runs;
    nlohmann::json reds = nlohmann::json::array();
    for (const ReductionEntry& e : r.reductions) {
        reds.push_back({{"policy", e.policy},
                        {"capacity", e.capacity},
                        {"reduction_pct", round6(e.reduction_pct)},
                        {"lru_zero_miss", e.lru_zero_miss}});
    }
    j["traffic_reduction_vs_lru"] = reds;
    return j;
}

namespace {

const char* kCsvHeader =
    "policy,capacity,warmup_requests,measured_requests,object_hit_ratio,"
    "byte_hit_ratio,byte_miss_ratio,miss_bytes,predictions_made,"
    "prediction_calls,features_built,wall_time";

std::string csv_row(const SimReport& r) {
    char buf[512];
    snprintf(buf, sizeof(buf),
             "%s,%llu,%llu,%llu,%.6g,%.6g,%.6g,%llu,%llu,%llu,%llu,%.6g",
             r.policy.c_str(), (unsigned long long)r.capacity,
             (unsigned long long)r.warmup_requests,
             (unsigned long long)r.measured_requests, r.object_hit_ratio,
             r.byte_hit_ratio, r.byte_miss_ratio,
             (unsigned long long)r.miss_bytes,
             (unsigned long long)r.predictions_made,
             (unsigned long long)r.prediction_calls,
             (unsigned long long)r.features_built, r.wall_time);
    return buf;
}

}  // namespace

std::string report_to_csv(const SimReport& r) {
    std::ostringstream out;
    out << kCsvHeader << '\n' << csv_row(r) << '\n';
    return out.str();
}

std::string comparison_to_csv(const ComparisonReport& r) {
    std::ostringstream out;
    out << kCsvHeader << ",traffic_reduction_pct,lru_zero_miss\n";
    char buf[64];
    for (size_t i = 0; i < r.runs.size(); ++i) {
        const ReductionEntry& e = r.reductions[i];
        snprintf(buf, sizeof(buf), ",%.6g,%d", e.reduction_pct,
                 e.lru_zero_miss ? 1 : 0);
        out << csv_row(r.runs[i]) << buf << '\n';
    }
    return out.str();
}

}  // namespace hrcache
