#include "hrcache/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hrcache/errors.hpp"

namespace hrcache {

namespace {

constexpr double kProbClamp = 1e-6;
constexpr double kRawClamp = 30.0;  // sigmoid stays strictly inside (0,1)
constexpr double kMinGain = 1e-12;
constexpr int kFormatVersion = 1;

double sigmoid(double x) {
    x = std::clamp(x, -kRawClamp, kRawClamp);
    return 1.0 / (1.0 + std::exp(-x));
}

// log(1 + exp(s)) - y*s, computed without overflow
double logistic_loss(double score, int y) {
    double sp = std::max(score, 0.0) + std::log1p(std::exp(-std::fabs(score)));
    return sp - y * score;
}

}  // namespace

void GbdtParams::validate() const {
    if (learning_rate <= 0) throw UsageError("gbdt: learning_rate must be > 0");
    if (max_depth < 1) throw UsageError("gbdt: max_depth must be >= 1");
    if (n_trees < 0) throw UsageError("gbdt: n_trees must be >= 0");
    if (max_bins < 2 || max_bins > 255)
        throw UsageError("gbdt: max_bins must be in [2, 255]");
    if (min_samples_leaf < 1)
        throw UsageError("gbdt: min_samples_leaf must be >= 1");
    if (l2_leaf_reg < 0) throw UsageError("gbdt: l2_leaf_reg must be >= 0");
}

BinMap BinMap::fit(const std::vector<TrainingRow>& data, int max_bins) {
    if (data.empty()) throw DataError("bin map: empty training set");
    BinMap map;
    const size_t n = data.size();
    std::vector<double> vals(n);
    for (int f = 0; f < kFeatureCount; ++f) {
        for (size_t i = 0; i < n; ++i) vals[i] = data[i].features[f];
        std::sort(vals.begin(), vals.end());

        auto& thr = map.thresholds_[f];
        size_t distinct = 1;
        for (size_t i = 1; i < n; ++i)
            if (vals[i] != vals[i - 1]) ++distinct;

        if (distinct <= static_cast<size_t>(max_bins)) {
            // one bin per distinct value, cut at midpoints
            for (size_t i = 1; i < n; ++i)
                if (vals[i] != vals[i - 1])
                    thr.push_back(0.5 * (vals[i - 1] + vals[i]));
        } else {
            // equal-population quantile cuts, skipping duplicate boundaries
            for (int b = 1; b < max_bins; ++b) {
                size_t idx = b * n / max_bins;
                if (idx == 0 || idx >= n) continue;
                if (vals[idx - 1] == vals[idx]) continue;
                double t = 0.5 * (vals[idx - 1] + vals[idx]);
                if (thr.empty() || t > thr.back()) thr.push_back(t);
            }
        }
    }
    return map;
}

uint16_t BinMap::bin(int feature, double value) const {
    const auto& thr = thresholds_[feature];
    auto it = std::upper_bound(thr.begin(), thr.end(), value);
    return static_cast<uint16_t>(it - thr.begin());
}

nlohmann::json BinMap::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& thr : thresholds_) j.push_back(thr);
    return j;
}

BinMap BinMap::from_json(const nlohmann::json& j) {
    BinMap map;
    if (!j.is_array() || j.size() != kFeatureCount)
        throw DataError("model json: bad bin map");
    for (int f = 0; f < kFeatureCount; ++f)
        map.thresholds_[f] = j[f].get<std::vector<double>>();
    return map;
}

GbdtModel::GbdtModel(GbdtParams params, BinMap bins, double base_score,
                     std::vector<Tree> trees)
    : params_(params),
      bins_(std::move(bins)),
      base_score_(base_score),
      trees_(std::move(trees)) {}

double GbdtModel::raw_score(const FeatureVector& x) const {
    uint16_t binned[kFeatureCount];
    for (int f = 0; f < kFeatureCount; ++f) binned[f] = bins_.bin(f, x[f]);

    double raw = base_score_;
    for (const Tree& tree : trees_) {
        int32_t id = 0;
        while (!tree.nodes[id].is_leaf()) {
            const TreeNode& nd = tree.nodes[id];
            id = binned[nd.feature] <= nd.split_bin ? nd.left : nd.right;
        }
        raw += params_.learning_rate * tree.nodes[id].value;
    }
    return raw;
}

double GbdtModel::predict(const FeatureVector& x) const {
    return sigmoid(raw_score(x));
}

std::vector<double> GbdtModel::predict_batch(
    std::span<const FeatureVector> xs) const {
    std::vector<double> out(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
    return out;
}

namespace {

// Per-node histogram over (feature, bin): gradient/hessian sums and counts.
struct Histogram {
    std::vector<double> g, h;
    std::vector<uint32_t> c;

    explicit Histogram(size_t cells) : g(cells, 0.0), h(cells, 0.0), c(cells, 0) {}

    void subtract(const Histogram& other) {
        for (size_t i = 0; i < g.size(); ++i) {
            g[i] -= other.g[i];
            h[i] -= other.h[i];
            c[i] -= other.c[i];
        }
    }
};

struct BestSplit {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
    double sum_g_left = 0.0, sum_h_left = 0.0;
    uint32_t count_left = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<uint8_t>& binned, size_t stride,
                const std::vector<size_t>& bin_counts,
                const std::vector<double>& grad, const std::vector<double>& hess,
                const GbdtParams& params)
        : binned_(binned),
          stride_(stride),
          bin_counts_(bin_counts),
          grad_(grad),
          hess_(hess),
          params_(params),
          rows_(grad.size()) {
        std::iota(rows_.begin(), rows_.end(), 0u);
    }

    Tree build(std::vector<double>& scores) {
        Tree tree;
        Histogram root(kFeatureCount * stride_);
        double sum_g = 0.0, sum_h = 0.0;
        fill_histogram(0, rows_.size(), root);
        for (uint32_t r : rows_) {
            sum_g += grad_[r];
            sum_h += hess_[r];
        }
        tree.nodes.emplace_back();
        scores_ = &scores;
        grow(tree, 0, 0, rows_.size(), std::move(root), sum_g, sum_h, 1);
        return tree;
    }

private:
    void fill_histogram(size_t begin, size_t end, Histogram& hist) const {
        for (size_t i = begin; i < end; ++i) {
            const uint8_t* row = &binned_[rows_[i] * kFeatureCount];
            double g = grad_[rows_[i]], h = hess_[rows_[i]];
            for (int f = 0; f < kFeatureCount; ++f) {
                size_t cell = f * stride_ + row[f];
                hist.g[cell] += g;
                hist.h[cell] += h;
                hist.c[cell] += 1;
            }
        }
    }

    BestSplit find_split(const Histogram& hist, double sum_g, double sum_h,
                         uint32_t count) const {
        const double lambda = params_.l2_leaf_reg;
        const double parent_obj = sum_g * sum_g / (sum_h + lambda);
        BestSplit best;
        for (int f = 0; f < kFeatureCount; ++f) {
            size_t nbins = bin_counts_[f];
            if (nbins < 2) continue;
            double gl = 0.0, hl = 0.0;
            uint32_t cl = 0;
            // split at bin b sends bins <= b left
            for (size_t b = 0; b + 1 < nbins; ++b) {
                size_t cell = f * stride_ + b;
                gl += hist.g[cell];
                hl += hist.h[cell];
                cl += hist.c[cell];
                uint32_t cr = count - cl;
                if (cl < static_cast<uint32_t>(params_.min_samples_leaf)) continue;
                if (cr < static_cast<uint32_t>(params_.min_samples_leaf)) break;
                double gr = sum_g - gl, hr = sum_h - hl;
                double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                              parent_obj;
                if (gain > best.gain + kMinGain) {
                    best = {gain, f, static_cast<int>(b), gl, hl, cl};
                }
            }
        }
        return best;
    }

    void make_leaf(Tree& tree, int32_t node, size_t begin, size_t end,
                   double sum_g, double sum_h) {
        double value = -sum_g / (sum_h + params_.l2_leaf_reg);
        tree.nodes[node].feature = -1;
        tree.nodes[node].value = value;
        double step = params_.learning_rate * value;
        for (size_t i = begin; i < end; ++i) (*scores_)[rows_[i]] += step;
    }

    void grow(Tree& tree, int32_t node, size_t begin, size_t end,
              Histogram hist, double sum_g, double sum_h, int depth) {
        uint32_t count = static_cast<uint32_t>(end - begin);
        if (depth > params_.max_depth ||
            count < 2 * static_cast<uint32_t>(params_.min_samples_leaf)) {
            make_leaf(tree, node, begin, end, sum_g, sum_h);
            return;
        }
        BestSplit best = find_split(hist, sum_g, sum_h, count);
        if (best.feature < 0) {
            make_leaf(tree, node, begin, end, sum_g, sum_h);
            return;
        }

        // stable partition: left rows keep order, then right rows
        scratch_.clear();
        size_t mid = begin;
        for (size_t i = begin; i < end; ++i) {
            uint32_t r = rows_[i];
            if (binned_[r * kFeatureCount + best.feature] <= best.bin)
                rows_[mid++] = r;
            else
                scratch_.push_back(r);
        }
        std::copy(scratch_.begin(), scratch_.end(), rows_.begin() + mid);

        int32_t left = static_cast<int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        int32_t right = static_cast<int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node].feature = static_cast<int16_t>(best.feature);
        tree.nodes[node].split_bin = static_cast<uint16_t>(best.bin);
        tree.nodes[node].left = left;
        tree.nodes[node].right = right;

        // build the smaller child's histogram directly, derive the sibling's
        // by subtracting it from the parent's
        size_t left_n = mid - begin, right_n = end - mid;
        Histogram small(kFeatureCount * stride_);
        double gr = sum_g - best.sum_g_left, hr = sum_h - best.sum_h_left;
        if (left_n <= right_n) {
            fill_histogram(begin, mid, small);
            hist.subtract(small);  // hist is now the right child's
            grow(tree, left, begin, mid, std::move(small), best.sum_g_left,
                 best.sum_h_left, depth + 1);
            grow(tree, right, mid, end, std::move(hist), gr, hr, depth + 1);
        } else {
            fill_histogram(mid, end, small);
            hist.subtract(small);  // hist is now the left child's
            grow(tree, left, begin, mid, std::move(hist), best.sum_g_left,
                 best.sum_h_left, depth + 1);
            grow(tree, right, mid, end, std::move(small), gr, hr, depth + 1);
        }
    }

    const std::vector<uint8_t>& binned_;
    size_t stride_;
    const std::vector<size_t>& bin_counts_;
    const std::vector<double>& grad_;
    const std::vector<double>& hess_;
    const GbdtParams& params_;
    std::vector<uint32_t> rows_;
    std::vector<uint32_t> scratch_;
    std::vector<double>* scores_ = nullptr;
};

}  // namespace

GbdtModel train_gbdt(const std::vector<TrainingRow>& data,
                     const GbdtParams& params,
                     std::vector<double>* round_losses) {
    params.validate();
    if (data.empty()) throw DataError("train_gbdt: empty training set");
    const size_t n = data.size();

    size_t positives = 0;
    for (const TrainingRow& row : data) positives += row.label;
    double prevalence = static_cast<double>(positives) / n;
    double p = std::clamp(prevalence, kProbClamp, 1.0 - kProbClamp);
    double base_score = std::log(p / (1.0 - p));

    BinMap bins = BinMap::fit(data, params.max_bins);
    if (positives == 0 || positives == n) {
        // single class: nothing to boost
        return GbdtModel(params, std::move(bins), base_score, {});
    }

    std::vector<size_t> bin_counts(kFeatureCount);
    size_t stride = 1;
    for (int f = 0; f < kFeatureCount; ++f) {
        bin_counts[f] = bins.bin_count(f);
        stride = std::max(stride, bin_counts[f]);
    }
    std::vector<uint8_t> binned(n * kFeatureCount);
    for (size_t i = 0; i < n; ++i)
        for (int f = 0; f < kFeatureCount; ++f)
            binned[i * kFeatureCount + f] =
                static_cast<uint8_t>(bins.bin(f, data[i].features[f]));

    std::vector<double> scores(n, base_score);
    std::vector<double> grad(n), hess(n);
    std::vector<Tree> trees;
    trees.reserve(params.n_trees);

    for (int round = 0; round < params.n_trees; ++round) {
        for (size_t i = 0; i < n; ++i) {
            double pi = sigmoid(scores[i]);
            grad[i] = pi - data[i].label;
            hess[i] = pi * (1.0 - pi);
        }
        TreeBuilder builder(binned, stride, bin_counts, grad, hess, params);
        trees.push_back(builder.build(scores));
        if (round_losses) {
            double loss = 0.0;
            for (size_t i = 0; i < n; ++i)
                loss += logistic_loss(scores[i], data[i].label);
            round_losses->push_back(loss / n);
        }
    }
    return GbdtModel(params, std::move(bins), base_score, std::move(trees));
}

double mean_logistic_loss(const GbdtModel& model,
                          const std::vector<TrainingRow>& data) {
    if (data.empty()) throw DataError("mean_logistic_loss: empty data");
    double loss = 0.0;
    for (const TrainingRow& row : data)
        loss += logistic_loss(model.raw_score(row.features), row.label);
    return loss / data.size();
}

nlohmann::json GbdtModel::to_json() const {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["objective"] = "logistic";
    j["params"] = {{"learning_rate", params_.learning_rate},
                   {"max_depth", params_.max_depth},
                   {"n_trees", params_.n_trees},
                   {"max_bins", params_.max_bins},
                   {"min_samples_leaf", params_.min_samples_leaf},
                   {"l2_leaf_reg", params_.l2_leaf_reg}};
    j["base_score"] = base_score_;
    j["bins"] = bins_.to_json();
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& nd : t.nodes)
            nodes.push_back({{"f", nd.feature},
                             {"b", nd.split_bin},
                             {"l", nd.left},
                             {"r", nd.right},
                             {"v", nd.value}});
        trees.push_back({{"nodes", nodes}});
    }
    j["trees"] = trees;
    return j;
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("format_version"))
        throw DataError("model json: missing format_version");
    if (j["format_version"].get<int>() != kFormatVersion)
        throw DataError("model json: unsupported format_version");
    if (j.value("objective", "") != std::string("logistic"))
        throw DataError("model json: unsupported objective");

    GbdtParams params;
    const auto& p = j.at("params");
    params.learning_rate = p.at("learning_rate").get<double>();
    params.max_depth = p.at("max_depth").get<int>();
    params.n_trees = p.at("n_trees").get<int>();
    params.max_bins = p.at("max_bins").get<int>();
    params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    params.l2_leaf_reg = p.at("l2_leaf_reg").get<double>();
    params.validate();

    BinMap bins = BinMap::from_json(j.at("bins"));
    std::vector<Tree> trees;
    for (const auto& tj : j.at("trees")) {
        Tree t;
        for (const auto& nj : tj.at("nodes")) {
            TreeNode nd;
            nd.feature = nj.at("f").get<int16_t>();
            nd.split_bin = nj.at("b").get<uint16_t>();
            nd.left = nj.at("l").get<int32_t>();
            nd.right = nj.at("r").get<int32_t>();
            nd.value = nj.at("v").get<double>();
            t.nodes.push_back(nd);
        }
        if (t.nodes.empty()) throw DataError("model json: empty tree");
        trees.push_back(std::move(t));
    }
    return GbdtModel(params, std::move(bins), j.at("base_score").get<double>(),
                     std::move(trees));
}

void GbdtModel::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write model file: " + path);
    f << to_json().dump(2) << '\n';
}

GbdtModel GbdtModel::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read model file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model json parse error: " + std::string(e.what()));
    }
    return from_json(j);
}

}  // namespace hrcache
