#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "hrcache/trace.hpp"

namespace hrcache {

inline constexpr int kNumDeltas = 32;
inline constexpr int kFeatureCount = kNumDeltas + 2;  // + decayed_freq + size
inline constexpr double kMissingDelta = 2147483647.0;  // 2^31 - 1

// Layout: [0..31] deltas, [32] decayed frequency, [33] size.
using FeatureVector = std::array<double, kFeatureCount>;

struct ObjectState {
    static constexpr uint32_t kRing = 33;

    std::array<double, kRing> times{};
    uint32_t count = 0;  // valid entries, saturates at kRing
    uint32_t head = 0;   // next write position
    double decayed_count = 0.0;
    uint64_t last_update_seq = 0;
    uint64_t size = 0;

    void push_time(double t) {
        times[head] = t;
        head = (head + 1) % kRing;
        if (count < kRing) ++count;
    }
    // i = 0 is the most recent recorded time
    double time_back(uint32_t i) const {
        return times[(head + kRing - 1 - i) % kRing];
    }
};

class FeatureTable {
public:
    explicit FeatureTable(double gamma = 0.9) : gamma_(gamma) {}

    // Records a request: appends its time, bumps the decayed count with lazy
    // decay gamma^(seq gap), stamps the sequence number.
    void touch(const Request& r, uint64_t global_seq);

    // Pure read of the state as of now/global_seq. Call before touch so a
    // request never sees itself. size_hint covers never-seen objects.
    FeatureVector build(uint64_t key, double now, uint64_t global_seq,
                        uint64_t size_hint) const;

    const ObjectState* find(uint64_t key) const;
    void evict_idle(uint64_t min_seq);
    size_t size() const { return table_.size(); }
    double gamma() const { return gamma_; }

private:
    std::unordered_map<uint64_t, ObjectState> table_;
    double gamma_;
};

struct TrainingRow {
    FeatureVector features{};
    int label = 0;
};

// Header fixed: d1..d32,decayed_freq,size,label
void write_training_csv(std::ostream& out, const std::vector<TrainingRow>& rows);
std::vector<TrainingRow> read_training_csv(std::istream& in);
// Feature rows with or without a trailing label column (ignored if present).
std::vector<FeatureVector> read_feature_csv(std::istream& in);

}  // namespace hrcache
