#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hrcache/features.hpp"
#include "hrcache/hazard.hpp"
#include "hrcache/model.hpp"
#include "hrcache/policies.hpp"

namespace hrcache {

struct WindowConfig {
    double multiplier = 3.0;       // window closes at unique bytes >= multiplier * capacity
    uint64_t op_budget = 5'000'000;
    int batch_size = 128;
    double decay = 0.9;
    bool look_back = true;
    HazardMode hazard_mode = HazardMode::kernel;
    double bandwidth_scale = 1.0;
    uint64_t min_labels = 200;     // below this the window trains nothing
    GbdtParams gbdt;
    uint64_t seed = 1;

    void validate() const;
};

// Prediction source; lets tests drive the queue machinery with fixed or
// randomized verdicts instead of a trained model.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::vector<bool> predict(std::span<const FeatureVector> xs) = 0;
};

// Learning-based eviction: a classifier trained on hazard-rate-ordered cache
// decisions routes objects between a main LRU queue and a candidate queue
// that evicts first. Until the first window trains, behaves as plain LRU.
class HrCache : public Policy {
public:
    HrCache(uint64_t capacity, WindowConfig config);
    // Fixed-predictor mode: active from the first request, never trains.
    HrCache(uint64_t capacity, WindowConfig config,
            std::shared_ptr<Predictor> predictor);

    // Features for the whole span are built against the state as of entry,
    // one prediction call covers them, then requests apply sequentially.
    std::vector<bool> process_batch(std::span<const Request> batch);

    bool on_request(const Request& r) override;
    uint64_t used_bytes() const override { return main_bytes_ + candidate_bytes_; }
    uint64_t capacity() const override { return capacity_; }
    std::string_view name() const override { return "hrcache"; }

    enum class Phase { warmup, active };
    Phase phase() const { return phase_; }

    // number of requests processed before the first trained model took effect
    uint64_t warmup_boundary() const { return warmup_boundary_; }

    uint64_t main_bytes() const { return main_bytes_; }
    uint64_t candidate_bytes() const { return candidate_bytes_; }
    std::vector<uint64_t> main_keys() const;       // MRU first
    std::vector<uint64_t> candidate_keys() const;  // MRU first

    const GbdtModel* model() const { return model_ ? &*model_ : nullptr; }
    const WindowConfig& config() const { return config_; }

    uint64_t predictions_made() const { return predictions_made_; }
    uint64_t prediction_calls() const { return prediction_calls_; }
    uint64_t features_built() const { return features_built_; }
    uint64_t windows_trained() const { return windows_trained_; }
    uint64_t windows_skipped() const { return windows_skipped_; }

private:
    enum class Where : uint8_t { main, candidate };
    struct Entry {
        uint64_t key;
        uint64_t size;
    };
    struct Location {
        Where where;
        std::list<Entry>::iterator it;
    };

    bool apply_warmup(const Request& r);
    bool apply_active(const Request& r, bool friendly);
    void evict_until_fits(uint64_t incoming);
    void accumulate_window(const Request& r);
    void close_window();
    void reset_window();
    std::vector<bool> predict(std::span<const FeatureVector> xs);

    uint64_t capacity_;
    WindowConfig config_;

    std::list<Entry> main_;       // front = MRU
    std::list<Entry> candidate_;  // front = MRU, evicts before main
    std::unordered_map<uint64_t, Location> index_;
    uint64_t main_bytes_ = 0;
    uint64_t candidate_bytes_ = 0;

    Phase phase_ = Phase::warmup;
    bool training_enabled_ = true;
    std::optional<GbdtModel> model_;
    std::shared_ptr<Predictor> fixed_predictor_;

    FeatureTable features_;
    FeatureTable window_snapshot_;  // state as of the open window's start
    std::vector<Request> window_;
    std::unordered_set<uint64_t> window_keys_;
    uint64_t window_unique_bytes_ = 0;
    uint64_t window_start_seq_ = 1;
    uint64_t window_index_ = 0;

    uint64_t seq_ = 0;  // 1-based request counter
    uint64_t warmup_boundary_ = UINT64_MAX;

    uint64_t predictions_made_ = 0;
    uint64_t prediction_calls_ = 0;
    uint64_t features_built_ = 0;
    uint64_t windows_trained_ = 0;
    uint64_t windows_skipped_ = 0;
};

}  // namespace hrcache
