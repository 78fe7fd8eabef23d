#include <doctest.h>

#include <cmath>

#include "hrcache/errors.hpp"
#include "hrcache/hazard.hpp"
#include "hrcache/rng.hpp"

using namespace hrcache;

// #####################################################################
// cumulative hazard increments
// #####################################################################

TEST_CASE("nelson-aalen increments for [1,2,2]") {
    double d[] = {1.0, 2.0, 2.0};
    HazardIncrements inc = nelson_aalen(d);
    REQUIRE(inc.events.size() == 2);
    CHECK(inc.events[0].t == 1.0);
    CHECK(inc.events[0].d == 1);
    CHECK(inc.events[0].n == 3);
    CHECK(inc.events[0].delta_h == 1.0 / 3.0);
    CHECK(inc.events[1].t == 2.0);
    CHECK(inc.events[1].d == 2);
    CHECK(inc.events[1].n == 2);
    CHECK(inc.events[1].delta_h == 1.0);
}

TEST_CASE("nelson-aalen groups equal durations") {
    double d[] = {3.0, 3.0, 3.0, 3.0};
    HazardIncrements inc = nelson_aalen(d);
    REQUIRE(inc.events.size() == 1);
    CHECK(inc.events[0].t == 3.0);
    CHECK(inc.events[0].d == 4);
    CHECK(inc.events[0].n == 4);
    CHECK(inc.events[0].delta_h == 1.0);
}

TEST_CASE("nelson-aalen increment sum matches the running estimate") {
    Rng rng(21);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> d;
        for (int i = 0; i < 50; ++i) d.push_back(rng.exponential(0.5));
        HazardIncrements inc = nelson_aalen(d);
        double sum = 0.0;
        for (const auto& e : inc.events) {
            CHECK(e.delta_h == static_cast<double>(e.d) / e.n);
            sum += e.delta_h;
        }
        CHECK(inc.total() == doctest::Approx(sum));
    }
}

TEST_CASE("nelson-aalen rejects empty and non-positive input") {
    CHECK_THROWS_AS(nelson_aalen({}), DataError);
    double bad[] = {1.0, 0.0};
    CHECK_THROWS_AS(nelson_aalen(bad), DataError);
}

// #####################################################################
// kernel smoothing
// #####################################################################

TEST_CASE("epanechnikov smoothing of the [1,2,2] increments") {
    double d[] = {1.0, 2.0, 2.0};
    KernelHazardEstimator est(nelson_aalen(d), 1.0);
    // both events at distance 0.5: K(0.5) = 0.5625, (1/3 + 1) * 0.5625
    CHECK(est(1.5) == doctest::Approx(0.75).epsilon(1e-12));
    // t=2: the t=1 event sits exactly at the support edge, K(1) = 0
    CHECK(est(2.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(kernel_hazard_eval(est, 1.5) == est(1.5));
}

TEST_CASE("kernel estimate vanishes outside the data support") {
    double d[] = {1.0, 2.0, 2.0};
    KernelHazardEstimator est(nelson_aalen(d), 1.0);
    CHECK(est(-5.0) == 0.0);
    CHECK(est(3.5) == 0.0);
    CHECK(est(100.0) == 0.0);
}

TEST_CASE("kernel estimate is never negative") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> d;
        int n = 2 + static_cast<int>(rng.next_u64() % 100);
        for (int i = 0; i < n; ++i) d.push_back(rng.generalized_pareto(2.0, 0.4));
        KernelHazardEstimator est(nelson_aalen(d), select_bandwidth(d, 0.5));
        for (int i = 0; i < 50; ++i) {
            double t = rng.uniform() * 20.0 - 2.0;
            CHECK(est(t) >= 0.0);
        }
    }
}

TEST_CASE("bandwidth selection: scaled median with a positive floor") {
    double d[] = {1.0, 2.0, 2.0};
    CHECK(select_bandwidth(d, 0.5) == doctest::Approx(1.0));
    CHECK(select_bandwidth(d) == doctest::Approx(2.0));
    double even[] = {1.0, 3.0};
    CHECK(select_bandwidth(even, 1.0) == doctest::Approx(2.0));
    double tiny[] = {1e-30, 1e-30, 1e-30};
    CHECK(select_bandwidth(tiny, 1.0) > 0.0);
    CHECK_THROWS_AS(select_bandwidth({}, 1.0), DataError);
    CHECK_THROWS_AS(select_bandwidth(d, 0.0), UsageError);
}

// #####################################################################
// parametric forms
// #####################################################################

TEST_CASE("poisson rate estimate is count over total duration") {
    double d[] = {2.0, 4.0};
    CHECK(poisson_rate_estimate(d) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(poisson_rate_estimate({}), DataError);
}

TEST_CASE("closed-form hazards") {
    ClosedFormHazard exp_h = ClosedFormHazard::exponential(2.5);
    CHECK(exp_h(0.0) == 2.5);
    CHECK(exp_h(42.0) == 2.5);

    ClosedFormHazard gp = ClosedFormHazard::generalized_pareto(2.0, 0.5);
    CHECK(gp(2.0) == doctest::Approx(1.0 / 3.0));
    CHECK(closed_form_eval(gp, 0.0) == doctest::Approx(0.5));

    // xi = 0 degenerates to a constant rate 1/sigma
    ClosedFormHazard gp0 = ClosedFormHazard::generalized_pareto(4.0, 0.0);
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        double t = rng.uniform() * 100.0;
        CHECK(gp0(t) == doctest::Approx(0.25));
    }
}

TEST_CASE("generalized pareto samples match the closed-form mean") {
    Rng rng(13);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += rng.generalized_pareto(2.0, 0.25);
    // mean = sigma / (1 - xi)
    CHECK(sum / n == doctest::Approx(2.0 / 0.75).epsilon(0.02));
}

TEST_CASE("synthetic true hazards track popularity scaling") {
    SyntheticConfig cfg;
    cfg.n_objects = 10;
    cfg.n_requests = 1;
    cfg.popularity_alpha = 1.0;
    cfg.interarrival = PoissonArrivals{2.0};
    ClosedFormHazard h1 = synthetic_true_hazard(cfg, 1);
    ClosedFormHazard h2 = synthetic_true_hazard(cfg, 2);
    CHECK(h1(0.0) == doctest::Approx(2.0 * h2(0.0)));

    cfg.popularity_alpha = 0.0;
    for (uint64_t k = 1; k <= 10; ++k)
        CHECK(synthetic_true_hazard(cfg, k)(5.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(synthetic_true_hazard(cfg, 11), UsageError);
}

// #####################################################################
// per-key durations & window estimation
// #####################################################################

TEST_CASE("collect_durations takes per-key gaps in order") {
    std::vector<Request> reqs = {
        {0.0, 1, 10}, {1.0, 2, 10}, {3.0, 1, 10}, {10.0, 1, 10}};
    InterRequestSample s = collect_durations(reqs, 1);
    REQUIRE(s.durations.size() == 2);
    CHECK(s.durations[0] == 3.0);
    CHECK(s.durations[1] == 7.0);
    CHECK(collect_durations(reqs, 2).durations.empty());
    CHECK(collect_durations(reqs, 99).durations.empty());
}

TEST_CASE("zero gaps clamp to the smallest positive gap") {
    std::vector<Request> reqs = {
        {1.0, 1, 10}, {1.0, 1, 10}, {2.0, 1, 10}};
    InterRequestSample s = collect_durations(reqs, 1);
    REQUIRE(s.durations.size() == 2);
    CHECK(s.durations[0] == 1.0);
    CHECK(s.durations[1] == 1.0);

    // all gaps zero: falls back to a fixed tiny positive duration
    std::vector<Request> same = {{1.0, 2, 10}, {1.0, 2, 10}};
    InterRequestSample s2 = collect_durations(same, 2);
    REQUIRE(s2.durations.size() == 1);
    CHECK(s2.durations[0] > 0.0);
}

TEST_CASE("window estimation pools keys with fewer than two requests") {
    std::vector<Request> reqs = {
        {0.0, 1, 10}, {1.0, 1, 10}, {2.0, 1, 10},   // gaps 1, 1
        {0.5, 2, 10},                               // single request
    };
    std::sort(reqs.begin(), reqs.end(),
              [](const Request& a, const Request& b) { return a.time < b.time; });
    auto src = estimate_window_hazards(reqs, {1, 2}, {});

    // key 2 falls back to the pooled estimator = all durations combined
    double pooled_d[] = {1.0, 1.0};
    KernelHazardEstimator pooled(nelson_aalen(pooled_d),
                                 select_bandwidth(pooled_d, 1.0));
    for (double age : {0.2, 0.7, 1.0, 1.9}) {
        CHECK(src->rate(2, age) == doctest::Approx(pooled(age)));
        CHECK(src->rate(1, age) == doctest::Approx(pooled(age)));
    }
}

TEST_CASE("window estimation in poisson mode uses per-key MLE rates") {
    std::vector<Request> reqs = {
        {0.0, 1, 10}, {2.0, 1, 10}, {6.0, 1, 10},  // gaps 2, 4 -> rate 1/3
        {1.0, 2, 10},
    };
    std::sort(reqs.begin(), reqs.end(),
              [](const Request& a, const Request& b) { return a.time < b.time; });
    auto src = estimate_window_hazards(reqs, {1, 2},
                                       {HazardMode::poisson, 1.0});
    CHECK(src->rate(1, 0.0) == doctest::Approx(1.0 / 3.0));
    CHECK(src->rate(1, 99.0) == doctest::Approx(1.0 / 3.0));  // constant in age
    CHECK(src->rate(2, 1.0) == doctest::Approx(1.0 / 3.0));   // pooled
}

TEST_CASE("window of all-distinct keys still yields a usable hazard source") {
    std::vector<Request> reqs = {{0.0, 1, 10}, {1.0, 2, 10}, {2.0, 3, 10}};
    auto src = estimate_window_hazards(reqs, {1, 2, 3}, {});
    CHECK(src->rate(1, 0.5) > 0.0);
    CHECK(src->rate(1, 0.5) == src->rate(3, 77.0));
}

TEST_CASE("closed-form hazard map rejects unknown keys") {
    ClosedFormHazardMap map;
    map.add(1, ClosedFormHazard::exponential(1.0));
    CHECK(map.rate(1, 0.0) == 1.0);
    CHECK_THROWS_AS(map.rate(2, 0.0), DataError);
}

// #####################################################################
// estimator consistency (a light version; the acceptance suite runs the
// full 100-seed protocol)
// #####################################################################

TEST_CASE("kernel estimator recovers a constant hazard from exponential data") {
    for (uint64_t seed : {101, 202, 303}) {
        Rng rng(seed);
        std::vector<double> d(2000);
        for (double& x : d) x = rng.exponential(1.0);
        KernelHazardEstimator est(nelson_aalen(d), select_bandwidth(d, 0.3));
        double mae = 0.0;
        for (double t : {0.5, 0.75, 1.0, 1.25, 1.5}) mae += std::abs(est(t) - 1.0);
        mae /= 5.0;
        CHECK(mae <= 0.15);
    }
}
