#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "hrcache/trace.hpp"

namespace hrcache {

// Cumulative-hazard increments: one event per distinct duration t_j with
// d_j occurrences among n_j still at risk, delta_h = d_j / n_j.
struct HazardIncrements {
    struct Event {
        double t;
        uint32_t d;
        uint32_t n;
        double delta_h;
    };
    std::vector<Event> events;

    double total() const;
};

HazardIncrements nelson_aalen(std::span<const double> durations);

// Epanechnikov-smoothed hazard rate: (1/h) * sum K((t - t_j)/h) * delta_h_j.
class KernelHazardEstimator {
public:
    KernelHazardEstimator() = default;
    KernelHazardEstimator(HazardIncrements increments, double bandwidth);

    double operator()(double t) const;

    const HazardIncrements& increments() const { return increments_; }
    double bandwidth() const { return bandwidth_; }

private:
    HazardIncrements increments_;
    double bandwidth_ = 1.0;
    // prefix sums of delta_h * t^p; dense evaluation windows reduce to two
    // binary searches instead of a scan over every covered event
    std::vector<double> p0_, p1_, p2_;
};

double kernel_hazard_eval(const KernelHazardEstimator& est, double t);

// max(eps, scale * median duration); rule-of-thumb default scale 1.
double select_bandwidth(std::span<const double> durations, double scale = 1.0);

// MLE rate for exponential gaps: count / sum.
double poisson_rate_estimate(std::span<const double> durations);

struct ClosedFormHazard {
    enum class Form { exponential, generalized_pareto };
    Form form = Form::exponential;
    double a = 1.0;  // rate | sigma
    double b = 0.0;  // unused | xi

    static ClosedFormHazard exponential(double rate) {
        return {Form::exponential, rate, 0.0};
    }
    static ClosedFormHazard generalized_pareto(double sigma, double xi) {
        return {Form::generalized_pareto, sigma, xi};
    }

    double operator()(double t) const;
};

double closed_form_eval(const ClosedFormHazard& h, double t);

// True hazard of an object in a synthetic trace (key = popularity rank).
ClosedFormHazard synthetic_true_hazard(const SyntheticConfig& config, uint64_t key);

// Inter-request durations of one key within a request span; zero gaps are
// clamped up to the smallest positive gap of that key (1e-9 if none).
struct InterRequestSample {
    uint64_t key = 0;
    std::vector<double> durations;
};

InterRequestSample collect_durations(std::span<const Request> requests, uint64_t key);

// Per-key hazard lookup used by HRO reconstruction.
class HazardSource {
public:
    virtual ~HazardSource() = default;
    virtual double rate(uint64_t key, double age) const = 0;
};

class ClosedFormHazardMap : public HazardSource {
public:
    void add(uint64_t key, ClosedFormHazard h);
    double rate(uint64_t key, double age) const override;  // throws DataError if absent

private:
    std::vector<std::pair<uint64_t, ClosedFormHazard>> entries_;  // sorted by key
    bool sorted_ = true;
};

enum class HazardMode { kernel, poisson };

struct HazardEstimationConfig {
    HazardMode mode = HazardMode::kernel;
    double bandwidth_scale = 1.0;
};

// Builds per-key estimators over a window for the given keys. Keys with
// fewer than 2 requests share a pooled estimator over all keys' durations;
// if no durations exist at all, a constant rate (#requests / timespan).
std::unique_ptr<HazardSource> estimate_window_hazards(
    std::span<const Request> window, const std::vector<uint64_t>& keys,
    const HazardEstimationConfig& config = {});

}  // namespace hrcache
