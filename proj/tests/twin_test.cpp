#include "twinway/twin.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace twinway;

namespace {

ScenarioConfig noiseless()
{
    ScenarioConfig c;
    c.noise.speed_sigma_mps = 0.0;
    c.noise.count_drop_rate = 0.0;
    return c;
}

std::int64_t total_count(const std::vector<DetectorReading>& readings)
{
    std::int64_t n = 0;
    for (const DetectorReading& r : readings) n += r.count;
    return n;
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

TEST(Observe, NoiselessObservationsEqualTruth)
{
    const GroundTruth truth = run_physical(noiseless(), 3);
    EXPECT_EQ(truth.observations.detectors, truth.output.detector_readings);
    EXPECT_EQ(truth.observations.classifications.size(), truth.output.inserted);
    ASSERT_EQ(truth.observations.probes.size(), truth.output.traces.size());
    for (std::size_t i = 0; i < truth.output.traces.size(); ++i) {
        EXPECT_EQ(truth.observations.probes[i].mean_speed_mps, truth.output.traces[i].mean_speed);
    }
}

TEST(Observe, FullDropLeavesNothing)
{
    ScenarioConfig c = noiseless();
    c.noise.count_drop_rate = 1.0;
    const GroundTruth truth = run_physical(c, 3);
    EXPECT_EQ(total_count(truth.observations.detectors), 0);
    EXPECT_TRUE(truth.observations.classifications.empty());
    EXPECT_THROW(run_pidt(truth, c), ObservationError);
}

TEST(Observe, NoisySpeedsStayNonNegative)
{
    ScenarioConfig c;
    c.noise.speed_sigma_mps = 5.0;
    const GroundTruth truth = run_physical(c, 4);
    for (const DetectorReading& r : truth.observations.detectors) {
        EXPECT_NO_THROW(r.validate());
    }
}

TEST(Physical, SameSeedIsDeterministic)
{
    const ScenarioConfig c;
    const GroundTruth a = run_physical(c, 11);
    const GroundTruth b = run_physical(c, 11);
    EXPECT_EQ(a.schedule, b.schedule);
    EXPECT_EQ(a.fleet, b.fleet);
    EXPECT_EQ(a.output, b.output);
    EXPECT_EQ(a.observations, b.observations);
}

TEST(Cidt, ReplayMatchesPhysicalTotals)
{
    const ScenarioConfig c;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const GroundTruth truth = run_physical(c, seed);
        const CostAggregate physical = ground_truth_costs(truth);
        const TwinRun cidt = run_cidt(truth, c);
        EXPECT_EQ(cidt.output, truth.output);
        EXPECT_LE(relative(cidt.costs.total_co2_g, physical.total_co2_g), 1e-12);
        EXPECT_LE(relative(cidt.costs.total_energy_units, physical.total_energy_units), 1e-12);
    }
}

TEST(Cidt, PerturbedDynamicsSeedKeepsFleetComposition)
{
    const ScenarioConfig c;
    const GroundTruth truth = run_physical(c, 5);
    const TwinRun cidt = run_cidt(truth, c, 999);
    ASSERT_EQ(cidt.fleet.size(), truth.fleet.size());
    for (std::size_t i = 0; i < truth.fleet.size(); ++i) {
        EXPECT_EQ(cidt.fleet[i].powertrain, truth.fleet[i].powertrain);
    }
    EXPECT_NE(cidt.costs.total_co2_g, ground_truth_costs(truth).total_co2_g);
}

TEST(Cidt, EmptyGroundTruthGivesEmptyOutput)
{
    ScenarioConfig c;
    c.horizon_s = 0.0;
    const GroundTruth truth = run_physical(c, 1);
    const TwinRun cidt = run_cidt(truth, c);
    EXPECT_TRUE(cidt.output.traces.empty());
    EXPECT_EQ(cidt.output.inserted, 0u);
    EXPECT_THROW(run_pidt(truth, c), ObservationError);
}

TEST(Cidt, CorridorMismatchRejected)
{
    const ScenarioConfig c;
    const GroundTruth truth = run_physical(c, 1);
    ScenarioConfig other = c;
    other.corridor.length_m = 6000.0;
    EXPECT_THROW(run_cidt(truth, other), std::invalid_argument);
}

TEST(Pidt, AllEvNoiselessKeepsCountAndKind)
{
    ScenarioConfig c = noiseless();
    c.ev_penetration = 1.0;
    const GroundTruth truth = run_physical(c, 7);
    const TwinRun pidt = run_pidt(truth, c);
    EXPECT_EQ(pidt.schedule.total(), truth.output.inserted);
    EXPECT_EQ(pidt.output.inserted, truth.output.inserted);
    EXPECT_EQ(count_evs(pidt.fleet), pidt.fleet.size());
    EXPECT_EQ(pidt.costs.total_co2_g, 0.0);
    EXPECT_GT(pidt.costs.total_energy_units, 0.0);
    EXPECT_NE(pidt.costs.total_energy_units, ground_truth_costs(truth).total_energy_units);
}

TEST(Pidt, KindCountsMatchObservationsWithoutDrops)
{
    const ScenarioConfig c = noiseless();
    for (std::uint64_t seed : {1u, 2u}) {
        const GroundTruth truth = run_physical(c, seed);
        const TwinRun pidt = run_pidt(truth, c);
        const auto observed_evs = static_cast<std::size_t>(
            std::count_if(truth.observations.classifications.begin(), truth.observations.classifications.end(),
                          [](const ClassificationEvent& e) { return e.is_ev; }));
        EXPECT_EQ(count_evs(pidt.fleet), observed_evs);
        EXPECT_EQ(pidt.fleet.size(), truth.observations.classifications.size());
    }
}

TEST(Pidt, TenPercentDropsThinDemand)
{
    ScenarioConfig c;
    c.noise.count_drop_rate = 0.1;
    c.emission_interval_s = 40.0;
    double physical = 0.0, twin = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const GroundTruth truth = run_physical(c, seed);
        physical += static_cast<double>(truth.output.inserted);
        twin += static_cast<double>(run_pidt(truth, c).output.inserted);
    }
    EXPECT_NEAR(twin / physical, 0.9, 0.02);
}

TEST(Pidt, AllIcevCo2WithinFrozenBand)
{
    ScenarioConfig c;
    c.ev_penetration = 0.0;
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const GroundTruth truth = run_physical(c, seed);
        const TwinRun pidt = run_pidt(truth, c);
        sum += *signed_error(pidt.costs.total_co2_g, ground_truth_costs(truth).total_co2_g);
    }
    // Frozen regression bound; the first run measured -0.56%.
    const double mean_error = sum / 20.0;
    EXPECT_LE(std::abs(mean_error), 0.01) << mean_error;
}

TEST(SignedError, Definition)
{
    EXPECT_NEAR(*signed_error(105.0, 100.0), 0.05, 1e-15);
    EXPECT_NEAR(*signed_error(95.0, 100.0), -0.05, 1e-15);
    EXPECT_FALSE(signed_error(1.0, 0.0).has_value());
}

TEST(Sweep, AllIcevLevelHasNoEnergy)
{
    const ScenarioConfig c;
    const std::vector<double> levels{0.0};
    const auto seeds = seed_range(1, 2);
    const SweepReport r = penetration_sweep(c, levels, seeds, 1);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].physical_energy, 0.0);
    EXPECT_EQ(r.rows[0].cidt_energy, 0.0);
    EXPECT_EQ(r.rows[0].pidt_energy, 0.0);
    EXPECT_GT(r.rows[0].physical_co2, 0.0);
}

TEST(Sweep, AllEvLevelHasNoCo2)
{
    const ScenarioConfig c;
    const std::vector<double> levels{1.0};
    const auto seeds = seed_range(1, 2);
    const SweepReport r = penetration_sweep(c, levels, seeds, 1);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].physical_co2, 0.0);
    EXPECT_EQ(r.rows[0].cidt_co2, 0.0);
    EXPECT_EQ(r.rows[0].pidt_co2, 0.0);
    EXPECT_GT(r.rows[0].physical_energy, 0.0);
}

TEST(Sweep, MonotoneInPenetration)
{
    const ScenarioConfig c;
    const std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto seeds = seed_range(1, 3);
    const SweepReport r = penetration_sweep(c, levels, seeds);
    ASSERT_EQ(r.rows.size(), levels.size());
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        EXPECT_LT(r.rows[i].physical_co2, r.rows[i - 1].physical_co2);
        EXPECT_GT(r.rows[i].physical_energy, r.rows[i - 1].physical_energy);
    }
}

TEST(Sweep, ThreadCountDoesNotChangeResults)
{
    const ScenarioConfig c;
    const std::vector<double> levels{0.5};
    const auto seeds = seed_range(4, 3);
    const SweepReport one = penetration_sweep(c, levels, seeds, 1);
    const SweepReport many = penetration_sweep(c, levels, seeds, 3);
    EXPECT_EQ(one.rows[0].physical_co2, many.rows[0].physical_co2);
    EXPECT_EQ(one.rows[0].pidt_energy, many.rows[0].pidt_energy);
}

TEST(Sweep, SeedRange)
{
    EXPECT_EQ(seed_range(5, 3), (std::vector<std::uint64_t>{5, 6, 7}));
    EXPECT_TRUE(seed_range(5, 0).empty());
}

TEST(DivergenceByInterval, OneRowPerInterval)
{
    const ScenarioConfig c;
    const std::vector<double> intervals{100.0, 40.0};
    const auto seeds = seed_range(1, 2);
    const auto rows = divergence_by_interval(c, intervals, seeds);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].emission_interval_s, 100.0);
    EXPECT_EQ(rows[1].emission_interval_s, 40.0);
    for (const IntervalDivergence& row : rows) {
        EXPECT_EQ(row.seeds, 2u);
        EXPECT_GE(row.mean.js, 0.0);
        EXPECT_GE(row.mean.wasserstein, 0.0);
    }
}
