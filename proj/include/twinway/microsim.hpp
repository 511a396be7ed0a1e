#pragma once

#include "twinway/fleet.hpp"
#include "twinway/rng.hpp"
#include "twinway/scenario.hpp"

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinway {

inline constexpr double kFreeRoad = std::numeric_limits<double>::infinity();

/// A following gap of zero or less: the run cannot continue.
class CollisionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FleetSizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Car following and lane changing
// ---------------------------------------------------------------------------

/// IDM acceleration. `gap` is bumper-to-bumper distance (kFreeRoad when no
/// leader), `closing_speed` is v - v_leader. The result is clamped below at
/// -params.emergency_decel.
double idm_acceleration(double speed, double gap, double closing_speed,
                        const DynamicsParams& params);

struct Neighbor {
    double gap = kFreeRoad; // bumper-to-bumper distance to the subject
    double speed = 0.0;
    DynamicsParams params;
};

struct LaneView {
    std::optional<Neighbor> leader;
    std::optional<Neighbor> follower;
};

struct LaneChangeInput {
    double speed = 0.0;
    DynamicsParams params;
    LaneView current;
    std::optional<LaneView> left;  // absent when there is no lane to the left
    std::optional<LaneView> right; // absent when there is no lane to the right
};

enum class LaneChange { Stay, Left, Right };

/// Safety criterion: both new gaps at least the minimum gap and the new
/// follower's induced deceleration no harsher than the subject's safe_decel.
bool mobil_safe(const LaneChangeInput& input, const LaneView& target);

/// MOBIL incentive of moving into `target`; -inf if the move is unsafe.
double mobil_gain(const LaneChangeInput& input, const LaneView& target);

LaneChange mobil_decision(const LaneChangeInput& input);

// ---------------------------------------------------------------------------
// Demand
// ---------------------------------------------------------------------------

inline constexpr int kMainline = -1;
inline constexpr int kCorridorEnd = -1;

struct Insertion {
    double time_s = 0.0;
    int origin = kMainline;        // ramp index of an on-ramp, or kMainline
    int destination = kCorridorEnd; // ramp index of an off-ramp, or kCorridorEnd

    friend bool operator==(const Insertion&, const Insertion&) = default;
};

struct Schedule {
    std::vector<Insertion> insertions;
    bool reference_interval = true; // false when the interval is not one of 10/40/80/100 s

    std::size_t total() const { return insertions.size(); }

    friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Batches of `batch_size` insertions at t = 0, I, 2I, ... < horizon. Origins
/// split by on-ramp demand shares, destinations by off-ramp shares.
Schedule schedule_demand(const ScenarioConfig& config, Engine& rng);

/// Draws an exit ramp for a vehicle entering at `origin`.
int draw_destination(const Corridor& corridor, int origin, Engine& rng);

double origin_position(const Corridor& corridor, int origin);
double destination_position(const Corridor& corridor, int destination);

// ---------------------------------------------------------------------------
// State and outputs
// ---------------------------------------------------------------------------

struct VehicleState {
    VehicleId id = 0;
    int lane = 0;
    double position = 0.0;
    double speed = 0.0;
    double entry_time = 0.0;
};

struct TraceSample {
    double t = 0.0;
    double position = 0.0;
    int lane = 0;
    double speed = 0.0;

    friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

struct TripTrace {
    VehicleId vehicle_id = 0;
    std::vector<TraceSample> samples;
    double trip_length = 0.0;
    double duration = 0.0;
    double mean_speed = 0.0;

    /// Recomputes trip length, duration and space-mean speed from the samples.
    void finalize();

    friend bool operator==(const TripTrace&, const TripTrace&) = default;
};

TripTrace make_trace(VehicleId id, std::vector<TraceSample> samples);

struct DetectorReading {
    double station_m = 0.0;
    double window_start_s = 0.0;
    double window_len_s = 0.0;
    std::int64_t count = 0;
    std::optional<double> mean_speed_mps; // absent when count == 0

    void validate() const;

    friend bool operator==(const DetectorReading&, const DetectorReading&) = default;
};

struct EntryEvent {
    double time_s = 0.0;
    VehicleId vehicle_id = 0;
    int origin = kMainline;

    friend bool operator==(const EntryEvent&, const EntryEvent&) = default;
};

struct SimOutput {
    std::vector<TripTrace> traces;
    std::vector<DetectorReading> detector_readings;
    std::vector<EntryEvent> entries;
    std::size_t scheduled = 0;
    std::size_t inserted = 0;
    std::size_t completed = 0;
    std::size_t active = 0;
    std::size_t aborted = 0; // missed their off-ramp and left the network
    std::size_t queued = 0;  // scheduled but never inserted
    double end_time_s = 0.0;

    friend bool operator==(const SimOutput&, const SimOutput&) = default;
};

struct ActiveVehicle {
    VehicleState state;
    DynamicsParams dynamics;
    double exit_position = 0.0;
    int destination = kCorridorEnd;
    double last_lane_change = -kFreeRoad;
    std::vector<TraceSample> samples;
};

struct DetectorWindow {
    std::int64_t count = 0;
    double speed_sum = 0.0;
};

struct World {
    Corridor corridor;
    double time = 0.0;
    double detector_window_s = 60.0;
    double lane_change_cooldown_s = 2.0;
    std::vector<ActiveVehicle> vehicles;
    std::vector<TripTrace> completed;
    std::size_t aborted = 0;
    // detectors[station][window]
    std::vector<std::vector<DetectorWindow>> detectors;

    World() = default;
    World(Corridor corridor, double detector_window_s, double end_time_s);

    std::vector<DetectorReading> detector_readings() const;
};

/// Tries to place a vehicle at its origin. Returns false when the entry is
/// occupied; the caller keeps it queued.
bool try_insert(World& world, const VehicleSpec& spec, const Insertion& insertion);

/// One update: lane changes, accelerations, ballistic integration, retirement
/// of vehicles past their exit, detector updates. Throws CollisionError if any
/// following gap is no longer positive.
void step(World& world, double dt);

/// Checks ordering and positive gaps in every lane.
void check_collision_free(const World& world);

SimOutput run(const ScenarioConfig& config, const Schedule& schedule, std::span<const VehicleSpec> fleet);

/// Schedules demand from the config's demand stream and runs it.
SimOutput run(const ScenarioConfig& config, std::span<const VehicleSpec> fleet);

} // namespace twinway
