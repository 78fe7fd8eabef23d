#include "hrcache/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "hrcache/errors.hpp"
#include "hrcache/rng.hpp"

namespace hrcache {

bool SamplePlan::contains(uint64_t key) const {
    return std::binary_search(sampled_keys.begin(), sampled_keys.end(), key);
}

namespace {

std::vector<uint64_t> sorted_unique_keys(std::span<const Request> window) {
    std::vector<uint64_t> keys;
    keys.reserve(window.size());
    for (const Request& r : window) keys.push_back(r.key);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

}  // namespace

SamplePlan calibrate_sampling(std::span<const Request> window,
                              uint64_t op_budget, uint64_t seed) {
    if (window.empty()) throw DataError("calibrate_sampling: empty window");
    if (op_budget < window.size())
        throw UsageError("calibrate_sampling: op_budget below window size");

    SamplePlan plan;
    plan.op_budget = op_budget;
    std::vector<uint64_t> keys = sorted_unique_keys(window);
    const double denom =
        static_cast<double>(keys.size()) * static_cast<double>(window.size());
    plan.sample_rate = std::min(1.0, static_cast<double>(op_budget) / denom);

    if (plan.sample_rate >= 1.0) {
        plan.sampled_keys = std::move(keys);
        return plan;
    }
    size_t want = static_cast<size_t>(plan.sample_rate * keys.size());
    want = std::max<size_t>(1, want);
    std::mt19937_64 gen(mix_seed(seed, 0x0bacc0ffeULL));
    plan.sampled_keys.reserve(want);
    std::sample(keys.begin(), keys.end(), std::back_inserter(plan.sampled_keys),
                want, gen);
    // std::sample preserves input order, which is already ascending
    return plan;
}

SamplePlan full_sample(std::span<const Request> window) {
    if (window.empty()) throw DataError("full_sample: empty window");
    SamplePlan plan;
    plan.sampled_keys = sorted_unique_keys(window);
    plan.sample_rate = 1.0;
    plan.op_budget = plan.sampled_keys.size() * window.size();
    return plan;
}

namespace {

struct TrackedKey {
    uint64_t key;
    uint64_t size;
    double last_time;
    uint64_t tie;
    // age-quantized rate memo
    int64_t cached_bucket = -1;
    double cached_rate = 0.0;
};

struct Ranked {
    double rate;
    uint64_t tie;
    uint64_t key;
    uint32_t slot;
};

}  // namespace

std::vector<HroMark> reconstruct_hro(std::span<const Request> window,
                                     const SamplePlan& plan,
                                     const HazardSource& hazards,
                                     double capacity, HroMode mode,
                                     const HroOptions& opts) {
    if (window.empty()) throw DataError("reconstruct_hro: empty window");
    if (capacity < 0) throw UsageError("reconstruct_hro: negative capacity");
    if (plan.sampled_keys.empty())
        throw UsageError("reconstruct_hro: empty sample plan");

    // First-seen size per key; unique-byte totals drive the capacity scaling.
    std::unordered_map<uint64_t, uint64_t> size_of;
    double unique_bytes_all = 0.0;
    for (const Request& r : window) {
        if (size_of.emplace(r.key, r.size).second)
            unique_bytes_all += static_cast<double>(r.size);
    }

    const double window_start = window.front().time;
    std::vector<TrackedKey> tracked;
    tracked.reserve(plan.sampled_keys.size());
    std::unordered_map<uint64_t, uint32_t> slot_of;
    double unique_bytes_sampled = 0.0;
    uint64_t shared_size = 0;
    for (uint64_t key : plan.sampled_keys) {
        auto it = size_of.find(key);
        if (it == size_of.end())
            throw UsageError("reconstruct_hro: sampled key absent from window");
        unique_bytes_sampled += static_cast<double>(it->second);
        uint64_t tie = opts.random_ties ? mix_seed(opts.tie_seed, key) : 0;
        slot_of.emplace(key, static_cast<uint32_t>(tracked.size()));
        tracked.push_back({key, it->second, window_start, tie});
    }
    if (mode == HroMode::hr_e) {
        for (const auto& [key, sz] : size_of) {
            if (shared_size == 0) shared_size = sz;
            if (sz != shared_size)
                throw DataError("hr_e requires a single shared object size");
        }
    }

    // hr_e capacity arrives in slots; convert to bytes before scaling.
    double capacity_bytes = (mode == HroMode::hr_e)
                                ? capacity * static_cast<double>(shared_size)
                                : capacity;
    double effective =
        capacity_bytes * (unique_bytes_sampled / unique_bytes_all);

    std::vector<HroMark> marks;
    std::vector<Ranked> ranked(tracked.size());
    for (uint64_t i = 0; i < window.size(); ++i) {
        const Request& r = window[i];
        auto slot_it = slot_of.find(r.key);
        if (slot_it == slot_of.end()) continue;

        const double now = r.time;
        for (uint32_t s = 0; s < tracked.size(); ++s) {
            TrackedKey& k = tracked[s];
            double age = now - k.last_time;
            double rate;
            if (opts.age_quantum > 0) {
                int64_t bucket =
                    static_cast<int64_t>(std::floor(age / opts.age_quantum));
                if (bucket != k.cached_bucket) {
                    k.cached_bucket = bucket;
                    k.cached_rate = hazards.rate(k.key, age);
                }
                rate = k.cached_rate;
            } else {
                rate = hazards.rate(k.key, age);
            }
            ranked[s] = {rate, k.tie, k.key, s};
        }
        std::sort(ranked.begin(), ranked.end(),
                  [](const Ranked& a, const Ranked& b) {
                      if (a.rate != b.rate) return a.rate > b.rate;
                      if (a.tie != b.tie) return a.tie < b.tie;
                      return a.key < b.key;
                  });

        // Greedy fill by hazard: whole objects while they fit; hr_fc lets the
        // first non-fitting object in fractionally, then stops.
        HroMark mark{i, r.key, false, 0.0};
        double cum = 0.0;
        for (const Ranked& rk : ranked) {
            double sz = static_cast<double>(tracked[rk.slot].size);
            bool fits = cum + sz <= effective;
            double fraction;
            if (fits) {
                fraction = 1.0;
            } else if (mode == HroMode::hr_fc) {
                fraction = std::max(0.0, (effective - cum) / sz);
            } else {
                fraction = 0.0;
            }
            if (rk.key == r.key) {
                mark.hit_fraction = fraction;
                mark.hro_hit = fraction > 0.0;
            }
            if (!fits) break;
            cum += sz;
        }
        marks.push_back(mark);
        tracked[slot_it->second].last_time = now;
        tracked[slot_it->second].cached_bucket = -1;
    }
    return marks;
}

std::vector<HroLabel> derive_labels(std::span<const Request> window,
                                    std::span<const HroMark> marks,
                                    bool look_back) {
    std::vector<HroLabel> labels;
    labels.reserve(marks.size());
    for (const HroMark& m : marks) {
        if (m.request_index >= window.size())
            throw UsageError("derive_labels: mark outside window");
        labels.push_back(
            {m.request_index, m.key, m.hro_hit, m.hit_fraction, false});
    }
    if (!look_back) {
        for (HroLabel& l : labels) l.cache_friendly = l.hro_hit;
        return labels;
    }
    // Every request to a sampled key is marked, so the nearest earlier
    // request to the same key is the previous label with that key.
    std::unordered_map<uint64_t, size_t> prev;
    for (size_t j = 0; j < labels.size(); ++j) {
        uint64_t key = labels[j].key;
        auto it = prev.find(key);
        if (labels[j].hro_hit && it != prev.end())
            labels[it->second].cache_friendly = true;
        prev[key] = j;
    }
    return labels;
}

HroBound hro_upper_bound(const Trace& trace, double capacity,
                         const HazardSource& hazards, HroMode mode,
                         const HroOptions& opts) {
    if (trace.empty()) throw DataError("hro_upper_bound: empty trace");
    std::span<const Request> window(trace.requests);
    SamplePlan plan = full_sample(window);
    std::vector<HroMark> marks =
        reconstruct_hro(window, plan, hazards, capacity, mode, opts);

    HroBound bound;
    double hit_count = 0.0, frac_bytes = 0.0, total_bytes = 0.0;
    for (const HroMark& m : marks) {
        double sz = static_cast<double>(window[m.request_index].size);
        if (m.hro_hit) hit_count += 1.0;
        frac_bytes += m.hit_fraction * sz;
        total_bytes += sz;
    }
    bound.hit_probability = hit_count / static_cast<double>(marks.size());
    bound.byte_hit_probability = frac_bytes / total_bytes;
    return bound;
}

}  // namespace hrcache
