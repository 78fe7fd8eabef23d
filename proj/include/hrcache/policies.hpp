#pragma once

#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <set>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hrcache/trace.hpp"

namespace hrcache {

// Trace-driven eviction policy. on_request returns true on a hit. Objects
// larger than the capacity are never admitted; misses only evict when
// admitting.
class Policy {
public:
    virtual ~Policy() = default;
    virtual bool on_request(const Request& r) = 0;
    virtual uint64_t used_bytes() const = 0;
    virtual uint64_t capacity() const = 0;
    virtual std::string_view name() const = 0;
};

class LruPolicy : public Policy {
public:
    explicit LruPolicy(uint64_t capacity) : capacity_(capacity) {}

    bool on_request(const Request& r) override;
    uint64_t used_bytes() const override { return used_; }
    uint64_t capacity() const override { return capacity_; }
    std::string_view name() const override { return "lru"; }

private:
    struct Entry {
        uint64_t key;
        uint64_t size;
    };
    uint64_t capacity_;
    uint64_t used_ = 0;
    std::list<Entry> queue_;  // front = MRU
    std::unordered_map<uint64_t, std::list<Entry>::iterator> index_;
};

// Victim is the resident with the oldest k-th most recent reference; entries
// with fewer than k references rank oldest, ties break on older last access.
class LruKPolicy : public Policy {
public:
    explicit LruKPolicy(uint64_t capacity, uint32_t k = 4)
        : capacity_(capacity), k_(k) {}

    bool on_request(const Request& r) override;
    uint64_t used_bytes() const override { return used_; }
    uint64_t capacity() const override { return capacity_; }
    std::string_view name() const override { return "lruk"; }

private:
    struct Rank {
        uint64_t kth;   // 0 when fewer than k references
        uint64_t last;
        uint64_t key;
        bool operator<(const Rank& o) const {
            if (kth != o.kth) return kth < o.kth;
            if (last != o.last) return last < o.last;
            return key < o.key;
        }
    };
    struct Entry {
        uint64_t size;
        std::deque<uint64_t> history;  // most recent reference seqs, <= k
        std::set<Rank>::iterator pos;
    };
    uint64_t rank_kth(const Entry& e) const {
        return e.history.size() < k_ ? 0 : e.history.back();
    }

    uint64_t capacity_;
    uint32_t k_;
    uint64_t used_ = 0;
    uint64_t seq_ = 0;
    std::set<Rank> order_;  // begin() = victim
    std::unordered_map<uint64_t, Entry> index_;
};

// Four equal segments; inserts land in the lowest, hits promote one up,
// overflow demotes tails downward and finally evicts from the bottom.
class S4LruPolicy : public Policy {
public:
    explicit S4LruPolicy(uint64_t capacity) : capacity_(capacity) {}

    bool on_request(const Request& r) override;
    uint64_t used_bytes() const override;
    uint64_t capacity() const override { return capacity_; }
    std::string_view name() const override { return "s4lru"; }

private:
    static constexpr int kSegments = 4;
    struct Entry {
        uint64_t key;
        uint64_t size;
    };
    struct Location {
        int segment;
        std::list<Entry>::iterator it;
    };
    void rebalance();

    uint64_t capacity_;
    std::list<Entry> segs_[kSegments];  // front = MRU
    uint64_t seg_bytes_[kSegments] = {0, 0, 0, 0};
    std::unordered_map<uint64_t, Location> index_;
};

// Priority = frequency + aging floor L; evictions raise L to the evicted
// priority so long-idle frequent objects age out.
class LfudaPolicy : public Policy {
public:
    explicit LfudaPolicy(uint64_t capacity) : capacity_(capacity) {}

    bool on_request(const Request& r) override;
    uint64_t used_bytes() const override { return used_; }
    uint64_t capacity() const override { return capacity_; }
    std::string_view name() const override { return "lfuda"; }

private:
    struct Rank {
        uint64_t priority;
        uint64_t inserted;  // older insertion evicts first on ties
        uint64_t key;
        bool operator<(const Rank& o) const {
            if (priority != o.priority) return priority < o.priority;
            if (inserted != o.inserted) return inserted < o.inserted;
            return key < o.key;
        }
    };
    struct Entry {
        uint64_t size;
        uint64_t freq;
        uint64_t inserted;
        std::set<Rank>::iterator pos;
    };

    uint64_t capacity_;
    uint64_t used_ = 0;
    uint64_t l_ = 0;
    uint64_t seq_ = 0;
    std::set<Rank> order_;
    std::unordered_map<uint64_t, Entry> index_;
};

inline constexpr uint64_t kNoNextUse = UINT64_MAX;

// next_use[i] = index of the next request to the same key, kNoNextUse if none.
std::vector<uint64_t> next_use_table(const Trace& trace);

// Offline reference: on a miss the furthest-next-use object among residents
// plus the incoming one loses; losing as the incoming object means bypass.
class BeladyPolicy : public Policy {
public:
    BeladyPolicy(uint64_t capacity, const Trace& trace);

    bool on_request(const Request& r) override;
    uint64_t used_bytes() const override { return used_; }
    uint64_t capacity() const override { return capacity_; }
    std::string_view name() const override { return "belady"; }

private:
    struct Rank {
        uint64_t next_use;
        uint64_t key;
        bool operator<(const Rank& o) const {
            if (next_use != o.next_use) return next_use > o.next_use;  // furthest first
            return key < o.key;
        }
    };
    struct Entry {
        uint64_t size;
        std::set<Rank>::iterator pos;
    };

    uint64_t capacity_;
    uint64_t used_ = 0;
    uint64_t cursor_ = 0;
    std::vector<uint64_t> next_use_;
    std::set<Rank> order_;  // begin() = furthest next use
    std::unordered_map<uint64_t, Entry> index_;
};

// Baseline factory for names lru, lruk, s4lru, lfuda, belady; belady needs
// the trace. Unknown names throw UsageError.
std::unique_ptr<Policy> make_baseline(std::string_view name, uint64_t capacity,
                                      const Trace* trace = nullptr);

bool is_policy_name(std::string_view name);  // includes "hrcache"

}  // namespace hrcache
