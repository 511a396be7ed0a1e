#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinway {

/// Raised when a configuration value violates a domain invariant. `key` names
/// the offending setting using its dotted config path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key))
    {
    }

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum class RampKind { On, Off };

struct Ramp {
    double position_m = 0.0;
    RampKind kind = RampKind::On;
    double demand_share = 0.0;

    friend bool operator==(const Ramp&, const Ramp&) = default;
};

struct Corridor {
    double length_m = 7000.0;
    int lane_count = 4;
    double speed_limit_mps = 130.0 / 3.6;
    std::vector<Ramp> ramps;
    std::vector<double> detector_stations;

    /// Two interchanges (off-ramp followed by on-ramp) and seven loop stations.
    static Corridor study_site();

    void validate() const;

    friend bool operator==(const Corridor&, const Corridor&) = default;
};

/// IDM car-following and MOBIL lane-change parameters for one vehicle.
struct DynamicsParams {
    double desired_speed = 33.33;        // v0, m/s
    double max_accel = 1.0;              // a, m/s^2
    double comfortable_decel = 2.0;      // b, m/s^2
    double headway = 1.2;                // T, s
    double min_gap = 2.0;                // s0, m
    double accel_exponent = 4.0;         // delta
    double politeness = 0.3;             // p
    double lane_change_threshold = 0.2;  // m/s^2
    double safe_decel = 3.0;             // b_safe, m/s^2
    double emergency_decel = 8.0;        // magnitude of the lower accel clamp
    double vehicle_length = 5.0;         // m

    void validate(double speed_limit_mps) const;

    friend bool operator==(const DynamicsParams&, const DynamicsParams&) = default;
};

enum class InfoMode { Physical, Cidt, Pidt };

std::string to_string(InfoMode mode);
InfoMode info_mode_from_string(const std::string& text);

struct NoiseConfig {
    double speed_sigma_mps = 0.5;
    double count_drop_rate = 0.02;

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct SweepConfig {
    std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    int seeds = 20;
    std::vector<double> intervals{10.0, 40.0, 80.0, 100.0};

    friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    Corridor corridor = Corridor::study_site();
    DynamicsParams dynamics;
    double v0_jitter = 0.05;            // relative half-width of the uniform v0 jitter
    double horizon_s = 3600.0;          // demand period; insertions happen in [0, horizon)
    double cooldown_s = 400.0;          // extra simulated time for inserted vehicles to finish
    double dt_s = 0.5;
    double emission_interval_s = 100.0;
    int batch_size = 4;
    double detector_window_s = 60.0;
    double ev_penetration = 0.5;
    InfoMode info_mode = InfoMode::Physical;
    NoiseConfig noise;
    SweepConfig sweep;

    double end_time_s() const { return horizon_s + cooldown_s; }

    /// True for the emission intervals used in the reference study.
    bool has_reference_interval() const;

    void validate() const;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

} // namespace twinway
