#include "hrcache/hr_cache.hpp"

#include <algorithm>

#include "hrcache/errors.hpp"
#include "hrcache/oracle.hpp"
#include "hrcache/rng.hpp"

namespace hrcache {

void WindowConfig::validate() const {
    if (multiplier <= 0) throw UsageError("window multiplier must be > 0");
    if (op_budget == 0) throw UsageError("op budget must be > 0");
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    if (decay <= 0 || decay >= 1) throw UsageError("decay must be in (0, 1)");
    if (bandwidth_scale <= 0) throw UsageError("bandwidth scale must be > 0");
    gbdt.validate();
}

HrCache::HrCache(uint64_t capacity, WindowConfig config)
    : capacity_(capacity),
      config_(config),
      features_(config.decay),
      window_snapshot_(config.decay) {
    config_.validate();
}

HrCache::HrCache(uint64_t capacity, WindowConfig config,
                 std::shared_ptr<Predictor> predictor)
    : HrCache(capacity, config) {
    fixed_predictor_ = std::move(predictor);
    training_enabled_ = false;
    phase_ = Phase::active;
    warmup_boundary_ = 0;
}

bool HrCache::on_request(const Request& r) {
    return process_batch({&r, 1})[0];
}

std::vector<bool> HrCache::predict(std::span<const FeatureVector> xs) {
    predictions_made_ += xs.size();
    prediction_calls_ += 1;
    if (fixed_predictor_) return fixed_predictor_->predict(xs);
    std::vector<double> probs = model_->predict_batch(xs);
    std::vector<bool> out(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > 0.5;
    return out;
}

std::vector<bool> HrCache::process_batch(std::span<const Request> batch) {
    std::vector<bool> outcomes;
    outcomes.reserve(batch.size());
    size_t i = 0;
    while (i < batch.size()) {
        if (phase_ == Phase::warmup) {
            const Request& r = batch[i];
            outcomes.push_back(apply_warmup(r));
            ++seq_;
            features_.touch(r, seq_);
            accumulate_window(r);
            ++i;
            continue;
        }
        // Prediction batch: features for the remaining span are built before
        // any of its requests touch the table, so a key repeated within the
        // batch does not see its earlier occurrence.
        std::span<const Request> rest = batch.subspan(i);
        std::vector<FeatureVector> feats(rest.size());
        for (size_t j = 0; j < rest.size(); ++j) {
            feats[j] = features_.build(rest[j].key, rest[j].time, seq_ + 1 + j,
                                       rest[j].size);
        }
        features_built_ += rest.size();
        std::vector<bool> friendly = predict(feats);
        for (size_t j = 0; j < rest.size(); ++j) {
            const Request& r = rest[j];
            outcomes.push_back(apply_active(r, friendly[j]));
            ++seq_;
            features_.touch(r, seq_);
            accumulate_window(r);
        }
        i = batch.size();
    }
    return outcomes;
}

bool HrCache::apply_warmup(const Request& r) {
    auto it = index_.find(r.key);
    if (it != index_.end()) {
        main_.splice(main_.begin(), main_, it->second.it);
        return true;
    }
    if (r.size > capacity_) return false;
    evict_until_fits(r.size);
    main_.push_front({r.key, r.size});
    index_[r.key] = {Where::main, main_.begin()};
    main_bytes_ += r.size;
    return false;
}

bool HrCache::apply_active(const Request& r, bool friendly) {
    auto it = index_.find(r.key);
    if (it != index_.end()) {
        Location& loc = it->second;
        uint64_t size = loc.it->size;
        if (loc.where == Where::candidate) {
            if (friendly) {
                main_.splice(main_.begin(), candidate_, loc.it);
                loc.where = Where::main;
                candidate_bytes_ -= size;
                main_bytes_ += size;
            } else {
                candidate_.splice(candidate_.begin(), candidate_, loc.it);
            }
        } else {
            if (friendly) {
                main_.splice(main_.begin(), main_, loc.it);
            } else {
                candidate_.splice(candidate_.begin(), main_, loc.it);
                loc.where = Where::candidate;
                main_bytes_ -= size;
                candidate_bytes_ += size;
            }
        }
        return true;
    }
    if (r.size > capacity_) return false;
    evict_until_fits(r.size);
    if (friendly) {
        main_.push_front({r.key, r.size});
        index_[r.key] = {Where::main, main_.begin()};
        main_bytes_ += r.size;
    } else {
        candidate_.push_front({r.key, r.size});
        index_[r.key] = {Where::candidate, candidate_.begin()};
        candidate_bytes_ += r.size;
    }
    return false;
}

void HrCache::evict_until_fits(uint64_t incoming) {
    while (main_bytes_ + candidate_bytes_ + incoming > capacity_) {
        if (!candidate_.empty()) {
            const Entry& victim = candidate_.back();
            candidate_bytes_ -= victim.size;
            index_.erase(victim.key);
            candidate_.pop_back();
        } else {
            const Entry& victim = main_.back();
            main_bytes_ -= victim.size;
            index_.erase(victim.key);
            main_.pop_back();
        }
    }
}

void HrCache::accumulate_window(const Request& r) {
    if (!training_enabled_) return;
    window_.push_back(r);
    if (window_keys_.insert(r.key).second) window_unique_bytes_ += r.size;
    if (static_cast<double>(window_unique_bytes_) >=
        config_.multiplier * static_cast<double>(capacity_))
        close_window();
}

void HrCache::close_window() {
    std::span<const Request> window(window_);
    SamplePlan plan = calibrate_sampling(window, config_.op_budget,
                                         mix_seed(config_.seed, window_index_));
    HazardEstimationConfig hcfg{config_.hazard_mode, config_.bandwidth_scale};
    std::unique_ptr<HazardSource> hazards =
        estimate_window_hazards(window, plan.sampled_keys, hcfg);
    std::vector<HroMark> marks =
        reconstruct_hro(window, plan, *hazards,
                        static_cast<double>(capacity_), HroMode::hr_fc);
    std::vector<HroLabel> labels = derive_labels(window, marks, config_.look_back);
    ++window_index_;

    if (labels.size() < config_.min_labels) {
        ++windows_skipped_;
        reset_window();
        return;
    }

    // Rebuild the labeled requests' features by replaying the window from the
    // snapshot taken at its start; replay seqs mirror the live pass exactly.
    std::vector<TrainingRow> rows;
    rows.reserve(labels.size());
    size_t next_label = 0;
    for (uint64_t idx = 0; idx < window_.size(); ++idx) {
        const Request& r = window_[idx];
        uint64_t replay_seq = window_start_seq_ + idx;
        if (next_label < labels.size() &&
            labels[next_label].request_index == idx) {
            TrainingRow row;
            row.features =
                window_snapshot_.build(r.key, r.time, replay_seq, r.size);
            row.label = labels[next_label].cache_friendly ? 1 : 0;
            rows.push_back(row);
            ++next_label;
        }
        window_snapshot_.touch(r, replay_seq);
    }

    model_ = train_gbdt(rows, config_.gbdt);
    ++windows_trained_;
    if (phase_ == Phase::warmup) {
        phase_ = Phase::active;
        warmup_boundary_ = seq_;
    }
    reset_window();
}

void HrCache::reset_window() {
    window_.clear();
    window_keys_.clear();
    window_unique_bytes_ = 0;
    features_.evict_idle(window_start_seq_);
    window_start_seq_ = seq_ + 1;
    window_snapshot_ = features_;
}

std::vector<uint64_t> HrCache::main_keys() const {
    std::vector<uint64_t> keys;
    keys.reserve(main_.size());
    for (const Entry& e : main_) keys.push_back(e.key);
    return keys;
}

std::vector<uint64_t> HrCache::candidate_keys() const {
    std::vector<uint64_t> keys;
    keys.reserve(candidate_.size());
    for (const Entry& e : candidate_) keys.push_back(e.key);
    return keys;
}

}  // namespace hrcache
