#include "twinway/validate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace twinway;

namespace {

SpeedHistogram two_bin(double a, double b) { return make_histogram({0.0, 1.0, 2.0}, {a, b}); }

std::vector<double> normal_samples(std::mt19937_64& rng, std::size_t n, double mean, double sd)
{
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> out(n);
    for (double& x : out) x = d(rng);
    return out;
}

TripTrace trip(VehicleId id, double speed, double length)
{
    return make_trace(id, {{0.0, 0.0, 0, speed}, {length / speed, length, 0, speed}});
}

} // namespace

TEST(Histogram, IdenticalSamplesGiveIdenticalHistograms)
{
    std::mt19937_64 rng(1);
    const auto s = normal_samples(rng, 500, 30.0, 2.0);
    const auto [p, q] = build_histogram(s, s);
    EXPECT_EQ(p.probabilities, q.probabilities);
    EXPECT_EQ(p.edges, q.edges);
}

TEST(Histogram, ConstantSamplesFillFirstAndLastBins)
{
    const std::vector<double> zeros(50, 0.0), ones(50, 1.0);
    const auto [p, q] = build_histogram(zeros, ones);
    EXPECT_GE(p.bins(), kMinBins);
    EXPECT_NEAR(p.probabilities.front(), 1.0, 1e-6);
    EXPECT_NEAR(q.probabilities.back(), 1.0, 1e-6);
}

TEST(Histogram, SingleValueUsesUnitWindow)
{
    const std::vector<double> s(10, 7.0);
    const auto [p, q] = build_histogram(s, s);
    EXPECT_EQ(p.edges.front(), 6.5);
    EXPECT_EQ(p.edges.back(), 7.5);
}

TEST(Histogram, NormalMeanRecovered)
{
    std::mt19937_64 rng(42);
    const auto s = normal_samples(rng, 10000, 30.0, 2.0);
    const auto [p, q] = build_histogram(s, s);
    EXPECT_NEAR(p.mean(), 30.0, 0.1);
}

TEST(Histogram, SmoothingPreservesNormalization)
{
    std::mt19937_64 rng(3);
    const auto a = normal_samples(rng, 300, 28.0, 3.0);
    const auto b = normal_samples(rng, 200, 31.0, 1.0);
    const auto [p, q] = build_histogram(a, b);
    for (const SpeedHistogram* h : {&p, &q}) {
        double total = 0.0;
        for (double x : h->probabilities) {
            EXPECT_GT(x, 0.0);
            total += x;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Histogram, EmptyInputRejected)
{
    const std::vector<double> none, some{1.0};
    EXPECT_THROW(build_histogram(none, some), std::invalid_argument);
    EXPECT_THROW(build_histogram(some, none), std::invalid_argument);
}

TEST(Metrics, SelfDivergenceIsZero)
{
    const SpeedHistogram p = two_bin(0.3, 0.7);
    EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-12);
    EXPECT_NEAR(js_divergence(p, p), 0.0, 1e-12);
    EXPECT_NEAR(wasserstein1(p, p), 0.0, 1e-12);
    EXPECT_NEAR(bhattacharyya(p, p), 0.0, 1e-12);
}

TEST(Metrics, TwoBinKl)
{
    EXPECT_NEAR(kl_divergence(two_bin(0.5, 0.5), two_bin(0.25, 0.75)), 0.14384103622589042, 1e-12);
    EXPECT_NEAR(kl_divergence(two_bin(0.5, 0.5), two_bin(0.25, 0.75)), 0.1438410, 1e-6);
}

TEST(Metrics, KlIsAsymmetric)
{
    // 0.25 ln 0.5 + 0.75 ln 1.5
    EXPECT_NEAR(kl_divergence(two_bin(0.25, 0.75), two_bin(0.5, 0.5)), 0.13081203594113697, 1e-12);
}

TEST(Metrics, KlInfiniteWhereReferenceVanishes)
{
    EXPECT_TRUE(std::isinf(kl_divergence(two_bin(0.5, 0.5), two_bin(1.0, 0.0))));
}

TEST(Metrics, DisjointJsIsLnTwo)
{
    EXPECT_NEAR(js_divergence(two_bin(1.0, 0.0), two_bin(0.0, 1.0)), std::numbers::ln2, 1e-12);
}

TEST(Metrics, TwoBinBhattacharyya)
{
    EXPECT_NEAR(bhattacharyya(two_bin(0.5, 0.5), two_bin(0.25, 0.75)), 0.03466823209753704, 1e-12);
    EXPECT_NEAR(bhattacharyya(two_bin(0.5, 0.5), two_bin(0.25, 0.75)), 0.0346683, 1e-6);
}

TEST(Metrics, NearDisjointBhattacharyyaFiniteAfterSmoothing)
{
    const std::vector<double> a(100, 10.0), b(100, 40.0);
    const auto [p, q] = build_histogram(a, b);
    const double value = bhattacharyya(p, q);
    EXPECT_TRUE(std::isfinite(value));
    EXPECT_GT(value, 5.0);
}

TEST(Metrics, PointMassesAreTheirDistanceApart)
{
    const std::vector<double> edges{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> a(10, 0.0), b(10, 0.0);
    a[2] = 1.0;
    b[7] = 1.0;
    EXPECT_NEAR(wasserstein1(make_histogram(edges, a), make_histogram(edges, b)), 5.0, 1e-12);
}

TEST(Metrics, SortedPairingOracle)
{
    const std::vector<double> a{0.0, 1.0}, b{1.0, 2.0};
    EXPECT_EQ(wasserstein1_sorted(a, b), 1.0);
    const auto [p, q] = build_histogram(a, b);
    EXPECT_NEAR(wasserstein1(p, q), 1.0, p.bin_width());
}

TEST(Metrics, MismatchedEdgesRejected)
{
    const SpeedHistogram p = two_bin(0.5, 0.5);
    const SpeedHistogram q = make_histogram({0.0, 1.0, 3.0}, {0.5, 0.5});
    EXPECT_THROW(kl_divergence(p, q), HistogramMismatch);
    EXPECT_THROW(js_divergence(p, q), HistogramMismatch);
    EXPECT_THROW(wasserstein1(p, q), HistogramMismatch);
    EXPECT_THROW(bhattacharyya(p, q), HistogramMismatch);
}

TEST(MetricProperties, AxiomsOnRandomPairs)
{
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> mean(20.0, 35.0), sd(0.5, 4.0);
    std::uniform_int_distribution<int> size(5, 400);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = normal_samples(rng, static_cast<std::size_t>(size(rng)), mean(rng), sd(rng));
        const auto b = normal_samples(rng, static_cast<std::size_t>(size(rng)), mean(rng), sd(rng));
        const auto [p, q] = build_histogram(a, b);
        const double kl = kl_divergence(p, q);
        const double js = js_divergence(p, q);
        const double w = wasserstein1(p, q);
        const double bh = bhattacharyya(p, q);
        EXPECT_GE(kl, 0.0);
        EXPECT_GE(js, 0.0);
        EXPECT_LE(js, std::numbers::ln2);
        EXPECT_GE(w, 0.0);
        EXPECT_GE(bh, 0.0);
        EXPECT_NEAR(js, js_divergence(q, p), 1e-12);
        EXPECT_NEAR(w, wasserstein1(q, p), 1e-12);
        if (p.probabilities != q.probabilities) {
            EXPECT_GT(js, 0.0);
            EXPECT_GT(w, 0.0);
        }
    }
}

TEST(MetricProperties, TranslationEquivariance)
{
    std::mt19937_64 rng(9);
    for (double delta : {0.5, 1.0, 2.0, 5.0}) {
        const auto a = normal_samples(rng, 1000, 30.0, 2.0);
        std::vector<double> b = a;
        for (double& x : b) x += delta;
        const auto [p, q] = build_histogram(a, b);
        EXPECT_NEAR(wasserstein1(p, q), delta, p.bin_width()) << "delta " << delta;
    }
}

TEST(MetricProperties, HistogramW1MatchesSortedPairing)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> mean(20.0, 35.0), sd(0.5, 4.0);
    std::uniform_int_distribution<int> size(2, 300);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(size(rng));
        const auto a = normal_samples(rng, n, mean(rng), sd(rng));
        const auto b = normal_samples(rng, n, mean(rng), sd(rng));
        const auto [p, q] = build_histogram(a, b);
        EXPECT_NEAR(wasserstein1(p, q), wasserstein1_sorted(a, b), p.bin_width()) << "trial " << trial;
    }
}

TEST(Accuracy, Definition)
{
    EXPECT_EQ(*accuracy(27.0, 27.0), 100.0);
    EXPECT_NEAR(*accuracy(0.931 * 27.0, 27.0), 93.1, 1e-9);
    EXPECT_NEAR(*accuracy(1.5 * 27.0, 27.0), 50.0, 1e-9);
    EXPECT_FALSE(accuracy(1.0, 0.0).has_value());
}

TEST(Report, SelfComparison)
{
    std::vector<TripTrace> traces;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> v(25.0, 34.0), len(2000.0, 7000.0);
    for (VehicleId i = 0; i < 120; ++i) traces.push_back(trip(i, v(rng), len(rng)));
    const ValidationReport r = validation_report(traces, traces);
    EXPECT_EQ(*r.speed_accuracy, 100.0);
    EXPECT_EQ(*r.trip_length_accuracy, 100.0);
    EXPECT_EQ(*r.count_accuracy, 100.0);
    EXPECT_NEAR(r.divergences.kl, 0.0, 1e-12);
    EXPECT_NEAR(r.divergences.js, 0.0, 1e-12);
    EXPECT_NEAR(r.divergences.wasserstein, 0.0, 1e-12);
    EXPECT_NEAR(r.divergences.bhattacharyya, 0.0, 1e-12);
}

TEST(Report, UniformSpeedShift)
{
    std::vector<TripTrace> ref, twin;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> v(30.0, 1.5);
    for (VehicleId i = 0; i < 500; ++i) {
        const double speed = v(rng);
        ref.push_back(trip(i, speed, 7000.0));
        twin.push_back(trip(i, speed - 2.0, 7000.0));
    }
    const ValidationReport r = validation_report(twin, ref);
    const auto [p, q] = build_histogram(trip_speeds(twin), trip_speeds(ref));
    EXPECT_NEAR(r.divergences.wasserstein, 2.0, p.bin_width());
    EXPECT_NEAR(*r.speed_accuracy, 100.0 * (1.0 - 2.0 / r.reference.mean_speed), 1e-9);
}

TEST(Report, EmptySideRejected)
{
    const std::vector<TripTrace> none;
    const std::vector<TripTrace> one{trip(0, 30.0, 1000.0)};
    EXPECT_THROW(validation_report(none, one), std::invalid_argument);
    EXPECT_THROW(validation_report(one, none), std::invalid_argument);
}

TEST(Report, LargerSamplesDivergeLessOnAverage)
{
    std::mt19937_64 rng(77);
    const auto mean_js = [&](std::size_t n) {
        double total = 0.0;
        for (int rep = 0; rep < 30; ++rep) {
            const auto a = normal_samples(rng, n, 30.0, 2.0);
            const auto b = normal_samples(rng, n, 30.0, 2.0);
            total += speed_divergences(a, b).js;
        }
        return total / 30.0;
    };
    EXPECT_LE(mean_js(2000), mean_js(50));
}
