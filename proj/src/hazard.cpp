#include "hrcache/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hrcache/errors.hpp"

namespace hrcache {

namespace {
constexpr double kMinBandwidth = 1e-9;
constexpr double kMinDuration = 1e-9;
}  // namespace

double HazardIncrements::total() const {
    double sum = 0.0;
    for (const Event& e : events) sum += e.delta_h;
    return sum;
}

HazardIncrements nelson_aalen(std::span<const double> durations) {
    if (durations.empty()) throw DataError("nelson_aalen: empty duration set");
    std::vector<double> sorted(durations.begin(), durations.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() <= 0)
        throw DataError("nelson_aalen: durations must be positive");

    HazardIncrements inc;
    uint32_t at_risk = static_cast<uint32_t>(sorted.size());
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        uint32_t d = static_cast<uint32_t>(j - i);
        inc.events.push_back({sorted[i], d, at_risk,
                              static_cast<double>(d) / at_risk});
        at_risk -= d;
        i = j;
    }
    return inc;
}

KernelHazardEstimator::KernelHazardEstimator(HazardIncrements increments,
                                             double bandwidth)
    : increments_(std::move(increments)), bandwidth_(bandwidth) {
    if (bandwidth_ <= 0) throw UsageError("kernel estimator: bandwidth must be > 0");
    const auto& ev = increments_.events;
    p0_.resize(ev.size() + 1, 0.0);
    p1_.resize(ev.size() + 1, 0.0);
    p2_.resize(ev.size() + 1, 0.0);
    for (size_t i = 0; i < ev.size(); ++i) {
        p0_[i + 1] = p0_[i] + ev[i].delta_h;
        p1_[i + 1] = p1_[i] + ev[i].delta_h * ev[i].t;
        p2_[i + 1] = p2_[i] + ev[i].delta_h * ev[i].t * ev[i].t;
    }
}

double KernelHazardEstimator::operator()(double t) const {
    const auto& ev = increments_.events;
    // Events are sorted by t; only |t - t_j| <= h contributes.
    auto cmp = [](const HazardIncrements::Event& e, double v) { return e.t < v; };
    auto lo = std::lower_bound(ev.begin(), ev.end(), t - bandwidth_, cmp);
    auto hi = std::lower_bound(lo, ev.end(), t + bandwidth_, cmp);
    while (hi != ev.end() && hi->t <= t + bandwidth_) ++hi;
    size_t a = static_cast<size_t>(lo - ev.begin());
    size_t b = static_cast<size_t>(hi - ev.begin());
    if (a == b) return 0.0;
    if (b - a <= 64) {
        // short spans sum directly, avoiding the cancellation the expanded
        // form suffers when t is far from the covered events
        double sum = 0.0;
        for (size_t i = a; i < b; ++i) {
            double u = (t - ev[i].t) / bandwidth_;
            sum += 0.75 * (1.0 - u * u) * ev[i].delta_h;
        }
        return sum / bandwidth_;
    }
    // 0.75/h * sum (1 - (t - t_j)^2/h^2) d_j expanded into prefix sums
    const double h2 = bandwidth_ * bandwidth_;
    double s0 = p0_[b] - p0_[a];
    double s1 = p1_[b] - p1_[a];
    double s2 = p2_[b] - p2_[a];
    double sum = (1.0 - t * t / h2) * s0 + (2.0 * t / h2) * s1 - s2 / h2;
    return 0.75 * sum / bandwidth_;
}

double kernel_hazard_eval(const KernelHazardEstimator& est, double t) {
    return est(t);
}

double select_bandwidth(std::span<const double> durations, double scale) {
    if (durations.empty()) throw DataError("select_bandwidth: empty duration set");
    if (scale <= 0) throw UsageError("select_bandwidth: scale must be > 0");
    std::vector<double> sorted(durations.begin(), durations.end());
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    double median = (n % 2 == 1) ? sorted[n / 2]
                                 : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return std::max(kMinBandwidth, scale * median);
}

double poisson_rate_estimate(std::span<const double> durations) {
    if (durations.empty()) throw DataError("poisson_rate: empty duration set");
    double sum = 0.0;
    for (double d : durations) {
        if (d <= 0) throw DataError("poisson_rate: durations must be positive");
        sum += d;
    }
    return static_cast<double>(durations.size()) / sum;
}

double ClosedFormHazard::operator()(double t) const {
    if (form == Form::exponential) return a;
    return 1.0 / (a + b * t);
}

double closed_form_eval(const ClosedFormHazard& h, double t) { return h(t); }

ClosedFormHazard synthetic_true_hazard(const SyntheticConfig& config, uint64_t key) {
    if (key < 1 || key > config.n_objects)
        throw UsageError("synthetic_true_hazard: key outside 1..n_objects");
    std::vector<double> w = zipf_weights(config.n_objects, config.popularity_alpha);
    double scale = static_cast<double>(config.n_objects) * w[key];
    if (const auto* p = std::get_if<PoissonArrivals>(&config.interarrival))
        return ClosedFormHazard::exponential(p->rate * scale);
    const auto& g = std::get<GParetoArrivals>(config.interarrival);
    return ClosedFormHazard::generalized_pareto(g.sigma / scale, g.xi);
}

InterRequestSample collect_durations(std::span<const Request> requests,
                                     uint64_t key) {
    InterRequestSample sample;
    sample.key = key;
    double last = -1.0;
    double min_pos = std::numeric_limits<double>::infinity();
    for (const Request& r : requests) {
        if (r.key != key) continue;
        if (last >= 0) {
            double gap = r.time - last;
            sample.durations.push_back(gap);
            if (gap > 0) min_pos = std::min(min_pos, gap);
        }
        last = r.time;
    }
    double clamp = std::isfinite(min_pos) ? min_pos : kMinDuration;
    for (double& d : sample.durations)
        if (d <= 0) d = clamp;
    return sample;
}

void ClosedFormHazardMap::add(uint64_t key, ClosedFormHazard h) {
    entries_.emplace_back(key, h);
    sorted_ = false;
}

double ClosedFormHazardMap::rate(uint64_t key, double age) const {
    if (!sorted_) {
        auto& self = const_cast<ClosedFormHazardMap&>(*this);
        std::sort(self.entries_.begin(), self.entries_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        self.sorted_ = true;
    }
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), key,
        [](const auto& e, uint64_t k) { return e.first < k; });
    if (it == entries_.end() || it->first != key)
        throw DataError("hazard map: no entry for key " + std::to_string(key));
    return it->second(age);
}

namespace {

class EstimatedHazardSource : public HazardSource {
public:
    HazardMode mode;
    std::unordered_map<uint64_t, KernelHazardEstimator> kernel_by_key;
    std::unordered_map<uint64_t, double> rate_by_key;
    KernelHazardEstimator pooled_kernel;
    double pooled_rate = 0.0;
    bool have_pooled = false;
    double constant_rate = 0.0;  // last resort when no key repeats

    double rate(uint64_t key, double age) const override {
        if (mode == HazardMode::kernel) {
            auto it = kernel_by_key.find(key);
            if (it != kernel_by_key.end()) return it->second(age);
            if (have_pooled) return pooled_kernel(age);
        } else {
            auto it = rate_by_key.find(key);
            if (it != rate_by_key.end()) return it->second;
            if (have_pooled) return pooled_rate;
        }
        return constant_rate;
    }
};

}  // namespace

std::unique_ptr<HazardSource> estimate_window_hazards(
    std::span<const Request> window, const std::vector<uint64_t>& keys,
    const HazardEstimationConfig& config) {
    if (window.empty()) throw DataError("estimate_window_hazards: empty window");
    auto src = std::make_unique<EstimatedHazardSource>();
    src->mode = config.mode;

    // One pass over the window collects every sampled key's gaps; scanning
    // per key would cost |keys| * |window|.
    struct Acc {
        std::vector<double> durations;
        double last = -1.0;
        double min_pos = std::numeric_limits<double>::infinity();
    };
    std::unordered_map<uint64_t, Acc> gaps;
    gaps.reserve(keys.size());
    for (uint64_t key : keys) gaps.emplace(key, Acc{});
    for (const Request& r : window) {
        auto it = gaps.find(r.key);
        if (it == gaps.end()) continue;
        Acc& a = it->second;
        if (a.last >= 0) {
            double gap = r.time - a.last;
            a.durations.push_back(gap);
            if (gap > 0) a.min_pos = std::min(a.min_pos, gap);
        }
        a.last = r.time;
    }

    std::vector<double> pooled;
    for (uint64_t key : keys) {
        Acc& a = gaps.at(key);
        InterRequestSample s;
        s.key = key;
        s.durations = std::move(a.durations);
        double clamp = std::isfinite(a.min_pos) ? a.min_pos : kMinDuration;
        for (double& d : s.durations)
            if (d <= 0) d = clamp;
        if (s.durations.empty()) continue;  // fewer than 2 requests
        pooled.insert(pooled.end(), s.durations.begin(), s.durations.end());
        if (config.mode == HazardMode::kernel) {
            double bw = select_bandwidth(s.durations, config.bandwidth_scale);
            src->kernel_by_key.emplace(
                key, KernelHazardEstimator(nelson_aalen(s.durations), bw));
        } else {
            src->rate_by_key.emplace(key, poisson_rate_estimate(s.durations));
        }
    }

    if (!pooled.empty()) {
        src->have_pooled = true;
        if (config.mode == HazardMode::kernel) {
            double bw = select_bandwidth(pooled, config.bandwidth_scale);
            src->pooled_kernel = KernelHazardEstimator(nelson_aalen(pooled), bw);
        } else {
            src->pooled_rate = poisson_rate_estimate(pooled);
        }
    } else {
        double span = window.back().time - window.front().time;
        src->constant_rate =
            static_cast<double>(window.size()) / std::max(span, kMinDuration);
    }
    return src;
}

}  // namespace hrcache
