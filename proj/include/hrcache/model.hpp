#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hrcache/features.hpp"

namespace hrcache {

struct GbdtParams {
    double learning_rate = 0.1;
    int max_depth = 50;
    int n_trees = 100;
    int max_bins = 255;
    int min_samples_leaf = 20;
    double l2_leaf_reg = 1.0;

    void validate() const;  // throws UsageError
};

// Quantile bin boundaries per feature. bin(x) = first threshold > x, so a
// split "bin <= b" reads as "x < thresholds[b]" on raw values. A feature with
// one distinct value has no thresholds and a single bin.
class BinMap {
public:
    static BinMap fit(const std::vector<TrainingRow>& data, int max_bins);

    uint16_t bin(int feature, double value) const;
    size_t bin_count(int feature) const { return thresholds_[feature].size() + 1; }
    const std::vector<double>& thresholds(int feature) const {
        return thresholds_[feature];
    }

    nlohmann::json to_json() const;
    static BinMap from_json(const nlohmann::json& j);

private:
    std::vector<std::vector<double>> thresholds_ =
        std::vector<std::vector<double>>(kFeatureCount);
};

struct TreeNode {
    int16_t feature = -1;  // -1 marks a leaf
    uint16_t split_bin = 0;
    int32_t left = -1;
    int32_t right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;
};

class GbdtModel {
public:
    GbdtModel() = default;
    GbdtModel(GbdtParams params, BinMap bins, double base_score,
              std::vector<Tree> trees);

    // Probability the label is 1. Strictly inside (0,1).
    double predict(const FeatureVector& x) const;
    std::vector<double> predict_batch(std::span<const FeatureVector> xs) const;

    double raw_score(const FeatureVector& x) const;

    double base_score() const { return base_score_; }
    size_t n_trees() const { return trees_.size(); }
    const GbdtParams& params() const { return params_; }
    const BinMap& bins() const { return bins_; }

    nlohmann::json to_json() const;
    static GbdtModel from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static GbdtModel load(const std::string& path);

private:
    GbdtParams params_;
    BinMap bins_;
    double base_score_ = 0.0;
    std::vector<Tree> trees_;
};

// Newton-step gradient boosting on logistic loss. Single-class input yields a
// base-score-only model. round_losses, when given, receives the mean training
// loss after each boosting round.
GbdtModel train_gbdt(const std::vector<TrainingRow>& data,
                     const GbdtParams& params = {},
                     std::vector<double>* round_losses = nullptr);

double mean_logistic_loss(const GbdtModel& model,
                          const std::vector<TrainingRow>& data);

}  // namespace hrcache
