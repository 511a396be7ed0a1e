#include "twinway/microsim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace twinway;

namespace {

ScenarioConfig empty_corridor_config()
{
    ScenarioConfig c;
    c.corridor.ramps.clear();
    c.horizon_s = 1.0;
    c.batch_size = 1;
    c.emission_interval_s = 100.0;
    return c;
}

Fleet uniform_fleet(std::size_t n, double v0)
{
    Fleet fleet(n);
    for (std::size_t i = 0; i < n; ++i) {
        fleet[i].id = static_cast<VehicleId>(i);
        fleet[i].powertrain = make_icev(EuroClass::Euro6);
        fleet[i].dynamics.desired_speed = v0;
    }
    return fleet;
}

Fleet jittered_fleet(const ScenarioConfig& config, std::size_t n)
{
    Engine rng = make_stream(config.seed, streams::kJitter);
    Fleet fleet = compose_fleet(n, config.ev_penetration, rng);
    apply_speed_jitter(fleet, config.dynamics.desired_speed, config.v0_jitter, rng);
    return fleet;
}

ActiveVehicle vehicle(VehicleId id, int lane, double x, double v, double v0 = 33.33)
{
    ActiveVehicle a;
    a.state = VehicleState{id, lane, x, v, 0.0};
    a.dynamics.desired_speed = v0;
    a.exit_position = 7000.0;
    a.samples.push_back({0.0, x, lane, v});
    return a;
}

} // namespace

TEST(Idm, FreeFlowEquilibrium)
{
    const DynamicsParams p;
    EXPECT_EQ(idm_acceleration(p.desired_speed, kFreeRoad, 0.0, p), 0.0);
}

TEST(Idm, StandingStartOnEmptyRoad)
{
    const DynamicsParams p;
    EXPECT_EQ(idm_acceleration(0.0, kFreeRoad, 0.0, p), p.max_accel);
}

TEST(Idm, FollowingAtFortyMetres)
{
    // 1 - (25/33.33)^4 - ((2 + 25*1.2)/40)^2, evaluated independently.
    const DynamicsParams p;
    EXPECT_NEAR(idm_acceleration(25.0, 40.0, 0.0, p), 0.043467155853045725, 1e-14);
}

TEST(Idm, EmergencyClamp)
{
    const DynamicsParams p;
    EXPECT_EQ(idm_acceleration(30.0, 0.5, 30.0, p), -p.emergency_decel);
}

TEST(Idm, RejectsDegenerateInputs)
{
    const DynamicsParams p;
    EXPECT_THROW(idm_acceleration(10.0, 0.0, 0.0, p), CollisionError);
    EXPECT_THROW(idm_acceleration(10.0, -1.0, 0.0, p), CollisionError);
    EXPECT_THROW(idm_acceleration(std::nan(""), 10.0, 0.0, p), std::invalid_argument);
    EXPECT_THROW(idm_acceleration(10.0, 10.0, std::nan(""), p), std::invalid_argument);
}

TEST(Mobil, EmptyTargetInFreeFlowStays)
{
    LaneChangeInput in;
    in.speed = in.params.desired_speed;
    in.left = LaneView{};
    in.right = LaneView{};
    EXPECT_EQ(mobil_decision(in), LaneChange::Stay);
}

TEST(Mobil, BlockedSubjectChangesToEmptyLane)
{
    LaneChangeInput in;
    in.speed = 20.0;
    in.current.leader = Neighbor{10.0, 0.0, DynamicsParams{}};
    in.left = LaneView{};
    EXPECT_EQ(mobil_decision(in), LaneChange::Left);

    in.left.reset();
    in.right = LaneView{};
    EXPECT_EQ(mobil_decision(in), LaneChange::Right);
}

TEST(Mobil, SymmetricTrafficStays)
{
    LaneChangeInput in;
    in.speed = 25.0;
    in.current.leader = Neighbor{30.0, 22.0, DynamicsParams{}};
    in.current.follower = Neighbor{35.0, 26.0, DynamicsParams{}};
    in.left = in.current;
    in.right = in.current;
    EXPECT_EQ(mobil_decision(in), LaneChange::Stay);
}

TEST(Mobil, UnsafeGapRefused)
{
    LaneChangeInput in;
    in.speed = 20.0;
    in.current.leader = Neighbor{10.0, 0.0, DynamicsParams{}};
    LaneView target;
    target.follower = Neighbor{1.0, 30.0, DynamicsParams{}};
    in.left = target;
    EXPECT_FALSE(mobil_safe(in, target));
    EXPECT_EQ(mobil_gain(in, target), -kFreeRoad);
    EXPECT_EQ(mobil_decision(in), LaneChange::Stay);
}

TEST(Schedule, ArithmeticSequence)
{
    ScenarioConfig c;
    c.corridor.ramps.clear();
    c.horizon_s = 1000.0;
    c.emission_interval_s = 100.0;
    c.batch_size = 1;
    Engine rng(1);
    const Schedule s = schedule_demand(c, rng);
    ASSERT_EQ(s.total(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(s.insertions[i].time_s, 100.0 * static_cast<double>(i));
        EXPECT_EQ(s.insertions[i].origin, kMainline);
        EXPECT_EQ(s.insertions[i].destination, kCorridorEnd);
    }
    EXPECT_TRUE(s.reference_interval);
}

TEST(Schedule, TenTimesMoreVehiclesAtTenSeconds)
{
    ScenarioConfig c;
    Engine a(1), b(1);
    c.emission_interval_s = 100.0;
    const std::size_t coarse = schedule_demand(c, a).total();
    c.emission_interval_s = 10.0;
    const std::size_t fine = schedule_demand(c, b).total();
    EXPECT_EQ(fine, 10 * coarse);
}

TEST(Schedule, Deterministic)
{
    const ScenarioConfig c;
    Engine a = make_stream(c.seed, streams::kDemand);
    Engine b = make_stream(c.seed, streams::kDemand);
    EXPECT_EQ(schedule_demand(c, a), schedule_demand(c, b));
}

TEST(Schedule, ZeroHorizonIsEmpty)
{
    ScenarioConfig c;
    c.horizon_s = 0.0;
    Engine rng(1);
    EXPECT_EQ(schedule_demand(c, rng).total(), 0u);
}

TEST(Schedule, NonReferenceIntervalFlagged)
{
    ScenarioConfig c;
    c.emission_interval_s = 30.0;
    Engine rng(1);
    EXPECT_FALSE(schedule_demand(c, rng).reference_interval);
}

TEST(Schedule, OriginsAndDestinationsRespectRampKinds)
{
    ScenarioConfig c;
    c.emission_interval_s = 10.0;
    Engine rng(5);
    const Schedule s = schedule_demand(c, rng);
    std::size_t from_ramps = 0, to_ramps = 0;
    for (const Insertion& ins : s.insertions) {
        if (ins.origin != kMainline) {
            ++from_ramps;
            EXPECT_EQ(c.corridor.ramps[static_cast<std::size_t>(ins.origin)].kind, RampKind::On);
        }
        if (ins.destination != kCorridorEnd) {
            ++to_ramps;
            const Ramp& exit = c.corridor.ramps[static_cast<std::size_t>(ins.destination)];
            EXPECT_EQ(exit.kind, RampKind::Off);
            EXPECT_GT(exit.position_m, origin_position(c.corridor, ins.origin));
        }
    }
    EXPECT_GT(from_ramps, 0u);
    EXPECT_GT(to_ramps, 0u);
}

TEST(Step, SingleVehicleFreeFlow)
{
    World world(Corridor{}, 60.0, 100.0);
    world.vehicles.push_back(vehicle(0, 0, 100.0, 33.33));
    step(world, 0.5);
    ASSERT_EQ(world.vehicles.size(), 1u);
    EXPECT_DOUBLE_EQ(world.vehicles[0].state.position, 100.0 + 33.33 * 0.5);
    EXPECT_EQ(world.vehicles[0].state.speed, 33.33);
    EXPECT_EQ(world.time, 0.5);
}

TEST(Step, EmptyWorldAdvancesTime)
{
    World world(Corridor{}, 60.0, 100.0);
    step(world, 0.5);
    step(world, 0.5);
    EXPECT_TRUE(world.vehicles.empty());
    EXPECT_EQ(world.time, 1.0);
}

TEST(Step, PlatoonBehindStoppedLeaderKeepsPositiveGaps)
{
    Corridor corridor;
    corridor.lane_count = 1;
    World world(corridor, 60.0, 1000.0);
    world.vehicles.push_back(vehicle(0, 0, 3000.0, 0.0, 0.01));
    for (VehicleId i = 1; i <= 10; ++i) {
        world.vehicles.push_back(vehicle(i, 0, 3000.0 - 60.0 * i, 20.0));
    }
    for (int k = 0; k < 600; ++k) {
        ASSERT_NO_THROW(step(world, 0.5));
        std::vector<double> xs;
        for (const ActiveVehicle& v : world.vehicles) xs.push_back(v.state.position);
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 1; i < xs.size(); ++i) {
            ASSERT_GT(xs[i] - xs[i - 1] - 5.0, 0.0) << "step " << k;
        }
    }
    EXPECT_EQ(world.vehicles.size(), 11u);
}

TEST(Step, RejectsNonPositiveDt)
{
    World world(Corridor{}, 60.0, 100.0);
    EXPECT_THROW(step(world, 0.0), std::invalid_argument);
}

TEST(Run, SingleVehicleCrossesCorridorNearFreeFlowTime)
{
    const ScenarioConfig c = empty_corridor_config();
    const SimOutput out = run(c, uniform_fleet(1, 33.33));
    ASSERT_EQ(out.completed, 1u);
    const TripTrace& t = out.traces.front();
    EXPECT_NEAR(t.duration, 7000.0 / 33.33, 2.0);
    EXPECT_LT(std::abs(t.mean_speed - 33.33) / 33.33, 0.02);
    EXPECT_NEAR(t.trip_length, 7000.0, 1e-9);
}

TEST(Run, NothingScheduledGivesEmptyOutput)
{
    ScenarioConfig c;
    c.horizon_s = 0.0;
    const SimOutput out = run(c, Fleet{});
    EXPECT_TRUE(out.traces.empty());
    EXPECT_EQ(out.inserted, 0u);
    EXPECT_EQ(out.completed + out.active + out.aborted + out.queued, 0u);
}

TEST(Run, SameSeedIsBitIdentical)
{
    ScenarioConfig c;
    c.emission_interval_s = 40.0;
    c.horizon_s = 1200.0;
    const Fleet fleet = jittered_fleet(c, 200);
    EXPECT_EQ(run(c, fleet), run(c, fleet));
}

TEST(Run, InsufficientFleetFailsUpFront)
{
    const ScenarioConfig c;
    EXPECT_THROW(run(c, uniform_fleet(3, 33.33)), FleetSizeError);
}

TEST(Run, ConservationAndSpeedBounds)
{
    for (double interval : {10.0, 40.0, 100.0}) {
        ScenarioConfig c;
        c.seed = 17;
        c.emission_interval_s = interval;
        c.horizon_s = 900.0;
        Engine demand = make_stream(c.seed, streams::kDemand);
        const Schedule s = schedule_demand(c, demand);
        const Fleet fleet = jittered_fleet(c, s.total());
        const SimOutput out = run(c, s, fleet);

        EXPECT_EQ(out.scheduled, s.total());
        EXPECT_EQ(out.inserted, out.completed + out.active + out.aborted);
        EXPECT_EQ(out.scheduled, out.inserted + out.queued);
        EXPECT_EQ(out.entries.size(), out.inserted);

        double vmax = 0.0;
        for (const VehicleSpec& v : fleet) vmax = std::max(vmax, v.dynamics.desired_speed);
        for (const TripTrace& t : out.traces) {
            for (const TraceSample& smp : t.samples) {
                ASSERT_GE(smp.speed, 0.0);
                ASSERT_LE(smp.speed, vmax + 0.1);
            }
        }
        for (const DetectorReading& r : out.detector_readings) {
            EXPECT_NO_THROW(r.validate());
        }
    }
}

TEST(Run, HalvingIntervalDoesNotReduceInsertions)
{
    ScenarioConfig c;
    c.horizon_s = 1200.0;
    std::size_t previous = 0;
    for (double interval : {100.0, 50.0, 25.0}) {
        c.emission_interval_s = interval;
        Engine demand = make_stream(c.seed, streams::kDemand);
        const Schedule s = schedule_demand(c, demand);
        const SimOutput out = run(c, s, jittered_fleet(c, s.total()));
        EXPECT_GE(out.inserted, previous);
        previous = out.inserted;
    }
}

TEST(DetectorReading, Validation)
{
    EXPECT_NO_THROW((DetectorReading{0, 0, 60, 12, 27.5}.validate()));
    EXPECT_NO_THROW((DetectorReading{0, 0, 60, 0, std::nullopt}.validate()));
    EXPECT_THROW((DetectorReading{0, 0, 60, -1, std::nullopt}.validate()), std::invalid_argument);
    EXPECT_THROW((DetectorReading{0, 0, 60, 3, std::nullopt}.validate()), std::invalid_argument);
}
