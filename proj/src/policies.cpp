#include "hrcache/policies.hpp"

#include <algorithm>
#include <string>

#include "hrcache/errors.hpp"

namespace hrcache {

// ---------------------------------------------------------------- LRU

bool LruPolicy::on_request(const Request& r) {
    auto it = index_.find(r.key);
    if (it != index_.end()) {
        queue_.splice(queue_.begin(), queue_, it->second);
        return true;
    }
    if (r.size > capacity_) return false;
    while (used_ + r.size > capacity_) {
        const Entry& victim = queue_.back();
        used_ -= victim.size;
        index_.erase(victim.key);
        queue_.pop_back();
    }
    queue_.push_front({r.key, r.size});
    index_[r.key] = queue_.begin();
    used_ += r.size;
    return false;
}

// ---------------------------------------------------------------- LRU-K

bool LruKPolicy::on_request(const Request& r) {
    ++seq_;
    auto it = index_.find(r.key);
    if (it != index_.end()) {
        Entry& e = it->second;
        order_.erase(e.pos);
        e.history.push_front(seq_);
        if (e.history.size() > k_) e.history.pop_back();
        e.pos = order_.insert({rank_kth(e), e.history.front(), r.key}).first;
        return true;
    }
    if (r.size > capacity_) return false;
    while (used_ + r.size > capacity_) {
        uint64_t victim = order_.begin()->key;
        used_ -= index_[victim].size;
        order_.erase(order_.begin());
        index_.erase(victim);
    }
    Entry e;
    e.size = r.size;
    e.history.push_front(seq_);
    e.pos = order_.insert({rank_kth(e), seq_, r.key}).first;
    index_.emplace(r.key, std::move(e));
    used_ += r.size;
    return false;
}

// ---------------------------------------------------------------- S4LRU

uint64_t S4LruPolicy::used_bytes() const {
    return seg_bytes_[0] + seg_bytes_[1] + seg_bytes_[2] + seg_bytes_[3];
}

void S4LruPolicy::rebalance() {
    const double budget = static_cast<double>(capacity_) / kSegments;
    for (int s = kSegments - 1; s >= 1; --s) {
        while (static_cast<double>(seg_bytes_[s]) > budget) {
            Entry victim = segs_[s].back();
            segs_[s].pop_back();
            seg_bytes_[s] -= victim.size;
            segs_[s - 1].push_front(victim);
            seg_bytes_[s - 1] += victim.size;
            index_[victim.key] = {s - 1, segs_[s - 1].begin()};
        }
    }
    while (static_cast<double>(seg_bytes_[0]) > budget) {
        Entry victim = segs_[0].back();
        segs_[0].pop_back();
        seg_bytes_[0] -= victim.size;
        index_.erase(victim.key);
    }
}

bool S4LruPolicy::on_request(const Request& r) {
    auto it = index_.find(r.key);
    if (it != index_.end()) {
        Location loc = it->second;
        int target = std::min(loc.segment + 1, kSegments - 1);
        Entry e = *loc.it;
        segs_[loc.segment].erase(loc.it);
        seg_bytes_[loc.segment] -= e.size;
        segs_[target].push_front(e);
        seg_bytes_[target] += e.size;
        index_[r.key] = {target, segs_[target].begin()};
        rebalance();
        return true;
    }
    if (r.size > capacity_) return false;
    segs_[0].push_front({r.key, r.size});
    seg_bytes_[0] += r.size;
    index_[r.key] = {0, segs_[0].begin()};
    rebalance();
    return false;
}

// ---------------------------------------------------------------- LFUDA

bool LfudaPolicy::on_request(const Request& r) {
    ++seq_;
    auto it = index_.find(r.key);
    if (it != index_.end()) {
        Entry& e = it->second;
        order_.erase(e.pos);
        e.freq += 1;
        e.pos = order_.insert({e.freq + l_, e.inserted, r.key}).first;
        return true;
    }
    if (r.size > capacity_) return false;
    while (used_ + r.size > capacity_) {
        auto victim = order_.begin();
        l_ = victim->priority;
        used_ -= index_[victim->key].size;
        index_.erase(victim->key);
        order_.erase(victim);
    }
    Entry e;
    e.size = r.size;
    e.freq = 1;
    e.inserted = seq_;
    e.pos = order_.insert({e.freq + l_, seq_, r.key}).first;
    index_.emplace(r.key, std::move(e));
    used_ += r.size;
    return false;
}

// ---------------------------------------------------------------- Belady

std::vector<uint64_t> next_use_table(const Trace& trace) {
    std::vector<uint64_t> next(trace.size(), kNoNextUse);
    std::unordered_map<uint64_t, uint64_t> upcoming;
    for (size_t i = trace.size(); i-- > 0;) {
        auto [it, fresh] = upcoming.emplace(trace[i].key, i);
        if (!fresh) {
            next[i] = it->second;
            it->second = i;
        }
    }
    return next;
}

BeladyPolicy::BeladyPolicy(uint64_t capacity, const Trace& trace)
    : capacity_(capacity), next_use_(next_use_table(trace)) {}

bool BeladyPolicy::on_request(const Request& r) {
    if (cursor_ >= next_use_.size())
        throw UsageError("belady: more requests than the trace it was built for");
    uint64_t idx = cursor_++;
    uint64_t next = next_use_[idx];

    auto it = index_.find(r.key);
    if (it != index_.end()) {
        Entry& e = it->second;
        order_.erase(e.pos);
        e.pos = order_.insert({next, r.key}).first;
        return true;
    }
    if (r.size > capacity_) return false;
    while (used_ + r.size > capacity_) {
        auto furthest = order_.begin();
        if (next >= furthest->next_use) return false;  // incoming loses: bypass
        used_ -= index_[furthest->key].size;
        index_.erase(furthest->key);
        order_.erase(furthest);
    }
    Entry e;
    e.size = r.size;
    e.pos = order_.insert({next, r.key}).first;
    index_.emplace(r.key, std::move(e));
    used_ += r.size;
    return false;
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Policy> make_baseline(std::string_view name, uint64_t capacity,
                                      const Trace* trace) {
    if (name == "lru") return std::make_unique<LruPolicy>(capacity);
    if (name == "lruk") return std::make_unique<LruKPolicy>(capacity, 4);
    if (name == "s4lru") return std::make_unique<S4LruPolicy>(capacity);
    if (name == "lfuda") return std::make_unique<LfudaPolicy>(capacity);
    if (name == "belady") {
        if (!trace) throw UsageError("belady needs the full trace up front");
        return std::make_unique<BeladyPolicy>(capacity, *trace);
    }
    throw UsageError("unknown policy: " + std::string(name));
}

bool is_policy_name(std::string_view name) {
    return name == "lru" || name == "lruk" || name == "s4lru" ||
           name == "lfuda" || name == "belady" || name == "hrcache";
}

}  // namespace hrcache
