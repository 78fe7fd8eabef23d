#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hrcache/rng.hpp"
#include "hrcache/trace.hpp"

namespace testsupport {

// Deliberately dumb LRU: linear scan, move-to-front vector. The policies
// under test must agree with this on every request.
class NaiveLru {
public:
    explicit NaiveLru(uint64_t capacity) : capacity_(capacity) {}

    bool on_request(const hrcache::Request& r) {
        for (size_t i = 0; i < items_.size(); ++i) {
            if (items_[i].first == r.key) {
                auto item = items_[i];
                items_.erase(items_.begin() + i);
                items_.insert(items_.begin(), item);
                return true;
            }
        }
        if (r.size > capacity_) return false;
        while (used() + r.size > capacity_) items_.pop_back();
        items_.insert(items_.begin(), {r.key, r.size});
        return false;
    }

    uint64_t used_bytes() const { return used(); }

private:
    uint64_t used() const {
        uint64_t sum = 0;
        for (const auto& [k, s] : items_) sum += s;
        return sum;
    }
    uint64_t capacity_;
    std::vector<std::pair<uint64_t, uint64_t>> items_;
};

// hot keys 0..9 interleaved with a stream of one-shot cold keys; the cold
// tail piles up unique bytes so training windows keep closing
inline hrcache::Trace hot_cold_trace(size_t n) {
    hrcache::Trace t;
    for (size_t i = 0; i < n; ++i) {
        uint64_t key = (i % 2 == 0) ? i / 2 % 10 : 100 + i / 2;
        t.requests.push_back({static_cast<double>(i), key, 1});
    }
    return t;
}

inline hrcache::Trace random_trace(hrcache::Rng& rng, uint64_t max_objects,
                                   uint64_t max_requests,
                                   uint64_t max_size = 1) {
    uint64_t n_objects = 1 + rng.next_u64() % max_objects;
    uint64_t n_requests = 1 + rng.next_u64() % max_requests;
    std::vector<uint64_t> sizes(n_objects);
    for (auto& s : sizes) s = 1 + rng.next_u64() % max_size;
    hrcache::Trace t;
    double time = 0.0;
    for (uint64_t i = 0; i < n_requests; ++i) {
        time += rng.uniform();
        uint64_t key = rng.next_u64() % n_objects;
        t.requests.push_back({time, key + 1, sizes[key]});
    }
    return t;
}

}  // namespace testsupport
