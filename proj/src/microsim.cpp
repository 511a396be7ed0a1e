#include "twinway/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace twinway {

// ===========================================================================
// Car following
// ===========================================================================

double idm_acceleration(double speed, double gap, double closing_speed, const DynamicsParams& params)
{
    if (!std::isfinite(speed) || !std::isfinite(closing_speed) || std::isnan(gap)) {
        throw std::invalid_argument("idm_acceleration: non-finite input");
    }
    if (speed < 0.0) {
        throw std::invalid_argument("idm_acceleration: negative speed");
    }
    if (gap <= 0.0) {
        std::ostringstream msg;
        msg << "idm_acceleration: non-positive gap " << gap;
        throw CollisionError(msg.str());
    }

    const double free_term = 1.0 - std::pow(speed / params.desired_speed, params.accel_exponent);
    double interaction = 0.0;
    if (std::isfinite(gap)) {
        const double dynamic = speed * params.headway +
                               speed * closing_speed /
                                   (2.0 * std::sqrt(params.max_accel * params.comfortable_decel));
        const double desired_gap = params.min_gap + std::max(0.0, dynamic);
        interaction = (desired_gap / gap) * (desired_gap / gap);
    }
    const double accel = params.max_accel * (free_term - interaction);
    return std::max(accel, -params.emergency_decel);
}

// ===========================================================================
// Lane changing (MOBIL)
// ===========================================================================

namespace {

double follower_accel(const Neighbor& follower, double gap, double leader_speed)
{
    return idm_acceleration(follower.speed, gap, follower.speed - leader_speed, follower.params);
}

double accel_behind(double speed, const std::optional<Neighbor>& leader, const DynamicsParams& params)
{
    if (!leader) {
        return idm_acceleration(speed, kFreeRoad, 0.0, params);
    }
    return idm_acceleration(speed, leader->gap, speed - leader->speed, params);
}

/// Acceleration of `follower` if the subject were not between it and `leader`.
double accel_closing_gap(const Neighbor& follower, const std::optional<Neighbor>& leader,
                         double subject_length)
{
    if (!leader) {
        return follower_accel(follower, kFreeRoad, 0.0);
    }
    return follower_accel(follower, follower.gap + subject_length + leader->gap, leader->speed);
}

} // namespace

bool mobil_safe(const LaneChangeInput& input, const LaneView& target)
{
    if (target.leader && target.leader->gap < input.params.min_gap) {
        return false;
    }
    if (target.follower) {
        const Neighbor& n = *target.follower;
        if (n.gap < n.params.min_gap) {
            return false;
        }
        if (follower_accel(n, n.gap, input.speed) < -input.params.safe_decel) {
            return false;
        }
    }
    return true;
}

double mobil_gain(const LaneChangeInput& input, const LaneView& target)
{
    if (!mobil_safe(input, target)) {
        return -kFreeRoad;
    }
    const DynamicsParams& p = input.params;
    const double own_now = accel_behind(input.speed, input.current.leader, p);
    const double own_after = accel_behind(input.speed, target.leader, p);

    double others = 0.0;
    if (target.follower) {
        const Neighbor& n = *target.follower;
        const double before = accel_closing_gap(n, target.leader, p.vehicle_length);
        const double after = follower_accel(n, n.gap, input.speed);
        others += after - before;
    }
    if (input.current.follower) {
        const Neighbor& o = *input.current.follower;
        const double before = follower_accel(o, o.gap, input.speed);
        const double after = accel_closing_gap(o, input.current.leader, p.vehicle_length);
        others += after - before;
    }
    return own_after - own_now + p.politeness * others;
}

LaneChange mobil_decision(const LaneChangeInput& input)
{
    const double threshold = input.params.lane_change_threshold;
    double best = threshold;
    LaneChange decision = LaneChange::Stay;
    if (input.left) {
        const double gain = mobil_gain(input, *input.left);
        if (gain > best) {
            best = gain;
            decision = LaneChange::Left;
        }
    }
    if (input.right) {
        const double gain = mobil_gain(input, *input.right);
        if (gain > best) {
            decision = LaneChange::Right;
        }
    }
    return decision;
}

// ===========================================================================
// Demand
// ===========================================================================

double origin_position(const Corridor& corridor, int origin)
{
    return origin == kMainline ? 0.0 : corridor.ramps.at(static_cast<std::size_t>(origin)).position_m;
}

double destination_position(const Corridor& corridor, int destination)
{
    return destination == kCorridorEnd
               ? corridor.length_m
               : corridor.ramps.at(static_cast<std::size_t>(destination)).position_m;
}

int draw_destination(const Corridor& corridor, int origin, Engine& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double start = origin_position(corridor, origin);
    for (std::size_t i = 0; i < corridor.ramps.size(); ++i) {
        const Ramp& r = corridor.ramps[i];
        if (r.kind != RampKind::Off || r.position_m <= start) {
            continue;
        }
        if (u(rng) < r.demand_share) {
            return static_cast<int>(i);
        }
    }
    return kCorridorEnd;
}

Schedule schedule_demand(const ScenarioConfig& config, Engine& rng)
{
    Schedule schedule;
    schedule.reference_interval = config.has_reference_interval();
    if (!(config.horizon_s > 0.0) || config.batch_size <= 0) {
        return schedule;
    }
    if (!(config.emission_interval_s > 0.0)) {
        throw ConfigError("emission_interval_s", "must be > 0");
    }

    const Corridor& corridor = config.corridor;
    std::vector<int> on_ramps;
    for (std::size_t i = 0; i < corridor.ramps.size(); ++i) {
        if (corridor.ramps[i].kind == RampKind::On) {
            on_ramps.push_back(static_cast<int>(i));
        }
    }

    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::int64_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * config.emission_interval_s;
        if (t >= config.horizon_s) {
            break;
        }
        for (int b = 0; b < config.batch_size; ++b) {
            int origin = kMainline;
            double draw = u(rng);
            for (int ramp : on_ramps) {
                const double share = corridor.ramps[static_cast<std::size_t>(ramp)].demand_share;
                if (draw < share) {
                    origin = ramp;
                    break;
                }
                draw -= share;
            }
            schedule.insertions.push_back({t, origin, draw_destination(corridor, origin, rng)});
        }
    }
    return schedule;
}

// ===========================================================================
// Traces and detectors
// ===========================================================================

void TripTrace::finalize()
{
    if (samples.empty()) {
        trip_length = duration = mean_speed = 0.0;
        return;
    }
    trip_length = samples.back().position - samples.front().position;
    duration = samples.back().t - samples.front().t;
    mean_speed = duration > 0.0 ? trip_length / duration : 0.0;
}

TripTrace make_trace(VehicleId id, std::vector<TraceSample> samples)
{
    TripTrace trace;
    trace.vehicle_id = id;
    trace.samples = std::move(samples);
    trace.finalize();
    return trace;
}

void DetectorReading::validate() const
{
    if (count < 0) {
        throw std::invalid_argument("detector reading has a negative count");
    }
    if (!(window_len_s > 0.0)) {
        throw std::invalid_argument("detector reading has a non-positive window length");
    }
    if (count == 0 && mean_speed_mps) {
        throw std::invalid_argument("detector reading with zero count carries a mean speed");
    }
    if (count > 0 && !mean_speed_mps) {
        throw std::invalid_argument("detector reading with vehicles lacks a mean speed");
    }
    if (mean_speed_mps && !(*mean_speed_mps >= 0.0)) {
        throw std::invalid_argument("detector reading has a negative mean speed");
    }
}

World::World(Corridor corridor_, double window_s, double end_time_s)
    : corridor(std::move(corridor_)), detector_window_s(window_s)
{
    const auto windows = static_cast<std::size_t>(std::ceil(end_time_s / window_s - 1e-9));
    detectors.assign(corridor.detector_stations.size(), std::vector<DetectorWindow>(windows));
}

std::vector<DetectorReading> World::detector_readings() const
{
    std::vector<DetectorReading> readings;
    for (std::size_t s = 0; s < detectors.size(); ++s) {
        for (std::size_t w = 0; w < detectors[s].size(); ++w) {
            const DetectorWindow& win = detectors[s][w];
            DetectorReading r;
            r.station_m = corridor.detector_stations[s];
            r.window_start_s = static_cast<double>(w) * detector_window_s;
            r.window_len_s = detector_window_s;
            r.count = win.count;
            if (win.count > 0) {
                r.mean_speed_mps = win.speed_sum / static_cast<double>(win.count);
            }
            readings.push_back(r);
        }
    }
    return readings;
}

// ===========================================================================
// Stepping
// ===========================================================================

namespace {

constexpr double kStrategicZoneM = 1000.0;

/// Vehicle indices per lane, leader first.
using LaneIndex = std::vector<std::vector<std::size_t>>;

LaneIndex index_lanes(const World& world)
{
    LaneIndex lanes(static_cast<std::size_t>(world.corridor.lane_count));
    for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
        lanes[static_cast<std::size_t>(world.vehicles[i].state.lane)].push_back(i);
    }
    for (auto& lane : lanes) {
        std::sort(lane.begin(), lane.end(), [&](std::size_t a, std::size_t b) {
            const VehicleState& va = world.vehicles[a].state;
            const VehicleState& vb = world.vehicles[b].state;
            if (va.position != vb.position) return va.position > vb.position;
            return va.id < vb.id;
        });
    }
    return lanes;
}

/// Leader and follower of a vehicle at `position` in `lane`, excluding `self`.
LaneView neighbors_at(const World& world, const std::vector<std::size_t>& lane, double position,
                      double length, std::optional<std::size_t> self)
{
    // Lane is sorted leader first, so vehicles at or ahead of `position` form a prefix.
    const auto split = std::partition_point(lane.begin(), lane.end(), [&](std::size_t idx) {
        return world.vehicles[idx].state.position >= position;
    });

    LaneView view;
    for (auto it = split; it != lane.begin();) {
        --it;
        if (self && *it == *self) continue;
        const ActiveVehicle& other = world.vehicles[*it];
        view.leader = Neighbor{other.state.position - other.dynamics.vehicle_length - position,
                               other.state.speed, other.dynamics};
        break;
    }
    for (auto it = split; it != lane.end(); ++it) {
        if (self && *it == *self) continue;
        const ActiveVehicle& other = world.vehicles[*it];
        view.follower =
            Neighbor{position - length - other.state.position, other.state.speed, other.dynamics};
        break;
    }
    return view;
}

void erase_index(std::vector<std::size_t>& lane, std::size_t idx)
{
    lane.erase(std::find(lane.begin(), lane.end(), idx));
}

void insert_sorted(const World& world, std::vector<std::size_t>& lane, std::size_t idx)
{
    const VehicleState& s = world.vehicles[idx].state;
    const auto pos = std::find_if(lane.begin(), lane.end(), [&](std::size_t other) {
        const VehicleState& o = world.vehicles[other].state;
        return o.position < s.position || (o.position == s.position && o.id > s.id);
    });
    lane.insert(pos, idx);
}

void lane_change_phase(World& world, LaneIndex& lanes)
{
    std::vector<std::size_t> order(world.vehicles.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const VehicleState& va = world.vehicles[a].state;
        const VehicleState& vb = world.vehicles[b].state;
        if (va.position != vb.position) return va.position > vb.position;
        return va.id < vb.id;
    });

    const int lane_count = world.corridor.lane_count;
    for (std::size_t idx : order) {
        ActiveVehicle& v = world.vehicles[idx];
        if (world.time - v.last_lane_change < world.lane_change_cooldown_s) {
            continue;
        }
        const int lane = v.state.lane;
        const double x = v.state.position;
        const double len = v.dynamics.vehicle_length;

        LaneChangeInput input;
        input.speed = v.state.speed;
        input.params = v.dynamics;
        input.current = neighbors_at(world, lanes[static_cast<std::size_t>(lane)], x, len, idx);

        const bool exiting = v.destination != kCorridorEnd && v.exit_position - x < kStrategicZoneM;
        LaneChange decision = LaneChange::Stay;
        if (exiting) {
            // Heading for an off-ramp: only move right, and only on safety.
            if (lane > 0) {
                const LaneView right =
                    neighbors_at(world, lanes[static_cast<std::size_t>(lane - 1)], x, len, std::nullopt);
                if (mobil_safe(input, right)) {
                    decision = LaneChange::Right;
                }
            }
        } else {
            if (lane + 1 < lane_count) {
                input.left =
                    neighbors_at(world, lanes[static_cast<std::size_t>(lane + 1)], x, len, std::nullopt);
            }
            if (lane > 0) {
                input.right =
                    neighbors_at(world, lanes[static_cast<std::size_t>(lane - 1)], x, len, std::nullopt);
            }
            decision = mobil_decision(input);
        }

        if (decision == LaneChange::Stay) {
            continue;
        }
        const int target = decision == LaneChange::Left ? lane + 1 : lane - 1;
        erase_index(lanes[static_cast<std::size_t>(lane)], idx);
        v.state.lane = target;
        v.last_lane_change = world.time;
        insert_sorted(world, lanes[static_cast<std::size_t>(target)], idx);
    }
}

void record_crossings(World& world, double x_old, double x_new, double v_old, double v_new,
                      double limit, double dt)
{
    if (!(x_new > x_old)) {
        return;
    }
    const auto& stations = world.corridor.detector_stations;
    for (std::size_t s = 0; s < stations.size(); ++s) {
        const double p = stations[s];
        if (!(p > x_old && p <= x_new && p <= limit)) {
            continue;
        }
        const double frac = (p - x_old) / (x_new - x_old);
        const double t_cross = world.time + frac * dt;
        const auto w = static_cast<std::size_t>(std::floor(t_cross / world.detector_window_s));
        auto& windows = world.detectors[s];
        if (w < windows.size()) {
            windows[w].count += 1;
            windows[w].speed_sum += v_old + frac * (v_new - v_old);
        }
    }
}

} // namespace

void check_collision_free(const World& world)
{
    const LaneIndex lanes = index_lanes(world);
    for (std::size_t l = 0; l < lanes.size(); ++l) {
        const auto& lane = lanes[l];
        for (std::size_t i = 1; i < lane.size(); ++i) {
            const ActiveVehicle& leader = world.vehicles[lane[i - 1]];
            const ActiveVehicle& follower = world.vehicles[lane[i]];
            const double gap =
                leader.state.position - leader.dynamics.vehicle_length - follower.state.position;
            if (!(gap > 0.0)) {
                std::ostringstream msg;
                msg << "collision at t=" << world.time << " lane " << l << ": vehicle "
                    << follower.state.id << " at " << follower.state.position << " m (v="
                    << follower.state.speed << ") behind vehicle " << leader.state.id << " at "
                    << leader.state.position << " m (v=" << leader.state.speed << "), gap " << gap;
                throw CollisionError(msg.str());
            }
        }
    }
}

void step(World& world, double dt)
{
    if (!(dt > 0.0)) {
        throw std::invalid_argument("step: dt must be > 0");
    }
    LaneIndex lanes = index_lanes(world);
    lane_change_phase(world, lanes);

    std::vector<double> accel(world.vehicles.size(), 0.0);
    for (const auto& lane : lanes) {
        for (std::size_t i = 0; i < lane.size(); ++i) {
            const ActiveVehicle& v = world.vehicles[lane[i]];
            if (i == 0) {
                accel[lane[i]] = idm_acceleration(v.state.speed, kFreeRoad, 0.0, v.dynamics);
                continue;
            }
            const ActiveVehicle& leader = world.vehicles[lane[i - 1]];
            const double gap =
                leader.state.position - leader.dynamics.vehicle_length - v.state.position;
            if (!(gap > 0.0)) {
                check_collision_free(world);
            }
            accel[lane[i]] = idm_acceleration(v.state.speed, gap,
                                              v.state.speed - leader.state.speed, v.dynamics);
        }
    }

    const double t_next = world.time + dt;
    std::vector<ActiveVehicle> remaining;
    remaining.reserve(world.vehicles.size());
    for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
        ActiveVehicle& v = world.vehicles[i];
        const double x_old = v.state.position;
        const double v_old = v.state.speed;
        const double a = accel[i];
        double v_new = v_old + a * dt;
        double x_new;
        if (v_new < 0.0) {
            // Stops within the step.
            x_new = x_old - v_old * v_old / (2.0 * a);
            v_new = 0.0;
        } else {
            x_new = x_old + 0.5 * (v_old + v_new) * dt;
        }

        record_crossings(world, x_old, x_new, v_old, v_new, v.exit_position, dt);

        if (x_new >= v.exit_position) {
            if (v.destination != kCorridorEnd && v.state.lane != 0) {
                ++world.aborted;
                continue;
            }
            const double frac = (v.exit_position - x_old) / (x_new - x_old);
            v.samples.push_back(
                {world.time + frac * dt, v.exit_position, v.state.lane, v_old + frac * (v_new - v_old)});
            world.completed.push_back(make_trace(v.state.id, std::move(v.samples)));
            continue;
        }

        v.state.position = x_new;
        v.state.speed = v_new;
        v.samples.push_back({t_next, x_new, v.state.lane, v_new});
        remaining.push_back(std::move(v));
    }
    world.vehicles = std::move(remaining);
    world.time = t_next;
    check_collision_free(world);
}

bool try_insert(World& world, const VehicleSpec& spec, const Insertion& insertion)
{
    const Corridor& corridor = world.corridor;
    const double x0 = origin_position(corridor, insertion.origin);
    const DynamicsParams& dyn = spec.dynamics;
    const LaneIndex lanes = index_lanes(world);

    const int lane_limit = insertion.origin == kMainline ? corridor.lane_count : 1;
    std::optional<int> best_lane;
    double best_gap = -1.0;
    double best_speed = 0.0;

    for (int lane = 0; lane < lane_limit; ++lane) {
        const LaneView view =
            neighbors_at(world, lanes[static_cast<std::size_t>(lane)], x0, dyn.vehicle_length, std::nullopt);
        double speed = dyn.desired_speed;
        double leader_gap = kFreeRoad;
        if (view.leader) {
            leader_gap = view.leader->gap;
            if (leader_gap < dyn.min_gap) continue;
            if (idm_acceleration(speed, leader_gap, speed - view.leader->speed, dyn) <
                -dyn.comfortable_decel) {
                speed = std::min(speed, view.leader->speed);
                if (leader_gap < dyn.min_gap + speed * dyn.headway) continue;
            }
        }
        if (view.follower) {
            const Neighbor& f = *view.follower;
            if (f.gap < f.params.min_gap) continue;
            if (idm_acceleration(f.speed, f.gap, f.speed - speed, f.params) < -dyn.safe_decel) continue;
        }
        if (leader_gap > best_gap) {
            best_gap = leader_gap;
            best_lane = lane;
            best_speed = speed;
        }
    }
    if (!best_lane) {
        return false;
    }

    ActiveVehicle v;
    v.state = VehicleState{spec.id, *best_lane, x0, best_speed, world.time};
    v.dynamics = dyn;
    v.destination = insertion.destination;
    v.exit_position = destination_position(corridor, insertion.destination);
    v.samples.push_back({world.time, x0, *best_lane, best_speed});
    world.vehicles.push_back(std::move(v));
    return true;
}

// ===========================================================================
// Runs
// ===========================================================================

SimOutput run(const ScenarioConfig& config, const Schedule& schedule, std::span<const VehicleSpec> fleet)
{
    config.validate();
    if (fleet.size() < schedule.total()) {
        throw FleetSizeError("fleet has " + std::to_string(fleet.size()) + " vehicles but " +
                             std::to_string(schedule.total()) + " insertions are scheduled");
    }

    const Corridor& corridor = config.corridor;
    const double end_time = config.end_time_s();
    World world(corridor, config.detector_window_s, end_time);

    SimOutput out;
    out.scheduled = schedule.total();

    std::vector<std::size_t> order(schedule.total());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return schedule.insertions[a].time_s < schedule.insertions[b].time_s;
    });

    // queues[0] is the mainline; queues[r + 1] belongs to ramp r.
    std::vector<std::deque<std::size_t>> queues(corridor.ramps.size() + 1);
    std::size_t next = 0;
    const auto steps = static_cast<std::int64_t>(std::ceil(end_time / config.dt_s - 1e-9));

    for (std::int64_t k = 0; k < steps; ++k) {
        world.time = static_cast<double>(k) * config.dt_s;
        while (next < order.size() && schedule.insertions[order[next]].time_s <= world.time + 1e-9) {
            const int origin = schedule.insertions[order[next]].origin;
            queues[static_cast<std::size_t>(origin + 1)].push_back(order[next]);
            ++next;
        }
        for (auto& queue : queues) {
            while (!queue.empty()) {
                const std::size_t slot = queue.front();
                const Insertion& ins = schedule.insertions[slot];
                if (!try_insert(world, fleet[slot], ins)) {
                    break;
                }
                out.entries.push_back({world.time, fleet[slot].id, ins.origin});
                ++out.inserted;
                queue.pop_front();
            }
        }

        const bool pending = next < order.size() ||
                             std::any_of(queues.begin(), queues.end(),
                                         [](const auto& q) { return !q.empty(); });
        if (world.vehicles.empty() && !pending) {
            break;
        }
        step(world, config.dt_s);
    }

    out.traces = std::move(world.completed);
    out.completed = out.traces.size();
    out.active = world.vehicles.size();
    out.aborted = world.aborted;
    out.queued = out.scheduled - out.inserted;
    out.detector_readings = world.detector_readings();
    out.end_time_s = end_time;
    return out;
}

SimOutput run(const ScenarioConfig& config, std::span<const VehicleSpec> fleet)
{
    Engine demand = make_stream(config.seed, streams::kDemand);
    return run(config, schedule_demand(config, demand), fleet);
}

} // namespace twinway
