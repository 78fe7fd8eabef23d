#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrcache/hazard.hpp"
#include "hrcache/trace.hpp"

namespace hrcache {

enum class HroMode { hr_e, hr_fc };

struct SamplePlan {
    std::vector<uint64_t> sampled_keys;  // sorted ascending
    double sample_rate = 1.0;
    uint64_t op_budget = 0;

    bool contains(uint64_t key) const;
};

// rate = min(1, op_budget / (#unique keys * #requests)); keys drawn without
// replacement, deterministic given seed. Guarantees
// #sampled_keys * #requests <= op_budget.
SamplePlan calibrate_sampling(std::span<const Request> window,
                              uint64_t op_budget, uint64_t seed);

// Convenience: every key sampled.
SamplePlan full_sample(std::span<const Request> window);

struct HroMark {
    uint64_t request_index = 0;  // index into the window span
    uint64_t key = 0;
    bool hro_hit = false;
    double hit_fraction = 0.0;
};

struct HroOptions {
    // Ties in the hazard ordering break by key ascending; with random_ties
    // they break by a seeded hash first.
    bool random_ties = false;
    uint64_t tie_seed = 0;
    // When > 0, hazard rates are re-evaluated only when a key's age crosses
    // into a new bucket of this width (throughput knob, off by default).
    double age_quantum = 0.0;
};

// Replays the window deciding, just before each request to a sampled key,
// whether that key sits in the virtual hazard-ordered cache. capacity is
// object slots for hr_e, bytes for hr_fc; it is scaled to an effective B' by
// the sampled/total unique-byte ratio.
std::vector<HroMark> reconstruct_hro(std::span<const Request> window,
                                     const SamplePlan& plan,
                                     const HazardSource& hazards,
                                     double capacity, HroMode mode,
                                     const HroOptions& opts = {});

struct HroLabel {
    uint64_t request_index = 0;
    uint64_t key = 0;
    bool hro_hit = false;
    double hit_fraction = 0.0;
    bool cache_friendly = false;
};

// With look_back, each HRO hit marks the nearest earlier request to the same
// key as cache-friendly; without it, labels copy the hit flags.
std::vector<HroLabel> derive_labels(std::span<const Request> window,
                                    std::span<const HroMark> marks,
                                    bool look_back);

struct HroBound {
    double hit_probability = 0.0;
    double byte_hit_probability = 0.0;
};

// Theoretical upper bound over a whole trace with every key sampled and
// pre-fetch semantics (first requests can hit).
HroBound hro_upper_bound(const Trace& trace, double capacity,
                         const HazardSource& hazards, HroMode mode,
                         const HroOptions& opts = {});

}  // namespace hrcache
