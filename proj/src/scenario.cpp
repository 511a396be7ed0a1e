#include "twinway/scenario.hpp"

#include <array>
#include <cmath>

namespace twinway {

namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

void require(bool ok, const char* key, const std::string& message)
{
    if (!ok) {
        throw ConfigError(key, message);
    }
}

} // namespace

Corridor Corridor::study_site()
{
    Corridor c;
    c.ramps = {
        {1800.0, RampKind::Off, 0.15},
        {2200.0, RampKind::On, 0.10},
        {4800.0, RampKind::Off, 0.15},
        {5200.0, RampKind::On, 0.10},
    };
    c.detector_stations = {500.0, 1500.0, 2500.0, 3500.0, 4500.0, 5500.0, 6500.0};
    return c;
}

void Corridor::validate() const
{
    require(finite_positive(length_m), "corridor.length_m", "must be > 0");
    require(lane_count >= 1, "corridor.lanes", "must be >= 1");
    require(finite_positive(speed_limit_mps), "corridor.speed_limit_mps", "must be > 0");
    double on_share = 0.0;
    double previous = -1.0;
    for (const Ramp& r : ramps) {
        require(r.position_m >= 0.0 && r.position_m <= length_m, "corridor.ramps",
                "ramp position outside [0, length]");
        require(r.demand_share >= 0.0 && r.demand_share <= 1.0, "corridor.ramps",
                "demand share outside [0, 1]");
        require(r.position_m > previous, "corridor.ramps", "ramps must be ordered by position");
        previous = r.position_m;
        if (r.kind == RampKind::On) {
            on_share += r.demand_share;
        }
    }
    require(on_share <= 1.0 + 1e-12, "corridor.ramps", "on-ramp shares sum above 1");
    for (double d : detector_stations) {
        require(d >= 0.0 && d <= length_m, "corridor.detectors",
                "detector position outside [0, length]");
    }
}

void DynamicsParams::validate(double speed_limit_mps) const
{
    require(finite_positive(desired_speed), "dynamics.v0_mps", "must be > 0");
    require(desired_speed <= speed_limit_mps, "dynamics.v0_mps", "exceeds the corridor speed limit");
    require(finite_positive(max_accel), "dynamics.max_accel", "must be > 0");
    require(finite_positive(comfortable_decel), "dynamics.comfortable_decel", "must be > 0");
    require(finite_positive(headway), "dynamics.headway_s", "must be > 0");
    require(finite_positive(min_gap), "dynamics.min_gap_m", "must be > 0");
    require(finite_positive(accel_exponent), "dynamics.accel_exponent", "must be > 0");
    require(politeness >= 0.0 && politeness <= 1.0, "dynamics.politeness", "must be in [0, 1]");
    require(finite_positive(lane_change_threshold), "dynamics.lane_change_threshold", "must be > 0");
    require(finite_positive(safe_decel), "dynamics.safe_decel", "must be > 0");
    require(finite_positive(emergency_decel), "dynamics.emergency_decel", "must be > 0");
    require(finite_positive(vehicle_length), "dynamics.vehicle_length_m", "must be > 0");
}

std::string to_string(InfoMode mode)
{
    switch (mode) {
    case InfoMode::Physical: return "physical";
    case InfoMode::Cidt: return "cidt";
    case InfoMode::Pidt: return "pidt";
    }
    return "physical";
}

InfoMode info_mode_from_string(const std::string& text)
{
    if (text == "physical") return InfoMode::Physical;
    if (text == "cidt") return InfoMode::Cidt;
    if (text == "pidt") return InfoMode::Pidt;
    throw ConfigError("info_mode", "expected physical, cidt or pidt, got '" + text + "'");
}

bool ScenarioConfig::has_reference_interval() const
{
    constexpr std::array<double, 4> reference{10.0, 40.0, 80.0, 100.0};
    for (double r : reference) {
        if (emission_interval_s == r) return true;
    }
    return false;
}

void ScenarioConfig::validate() const
{
    corridor.validate();
    dynamics.validate(corridor.speed_limit_mps);
    require(v0_jitter >= 0.0 && v0_jitter < 1.0, "v0_jitter", "must be in [0, 1)");
    require(dynamics.desired_speed * (1.0 + v0_jitter) <= corridor.speed_limit_mps, "v0_jitter",
            "jittered desired speed exceeds the corridor speed limit");
    require(std::isfinite(horizon_s) && horizon_s >= 0.0, "horizon_s", "must be >= 0");
    require(std::isfinite(cooldown_s) && cooldown_s >= 0.0, "cooldown_s", "must be >= 0");
    require(finite_positive(dt_s), "dt_s", "must be > 0");
    require(finite_positive(emission_interval_s), "emission_interval_s", "must be > 0");
    require(batch_size >= 0, "batch_size", "must be >= 0");
    require(finite_positive(detector_window_s), "detector_window_s", "must be > 0");
    require(ev_penetration >= 0.0 && ev_penetration <= 1.0, "ev_penetration", "must be in [0, 1]");
    require(noise.speed_sigma_mps >= 0.0 && std::isfinite(noise.speed_sigma_mps),
            "noise.speed_sigma_mps", "must be >= 0");
    require(noise.count_drop_rate >= 0.0 && noise.count_drop_rate <= 1.0, "noise.count_drop_rate",
            "must be in [0, 1]");
    require(!sweep.levels.empty(), "sweep.levels", "must not be empty");
    for (double l : sweep.levels) {
        require(l >= 0.0 && l <= 1.0, "sweep.levels", "levels must be in [0, 1]");
    }
    require(sweep.seeds >= 1, "sweep.seeds", "must be >= 1");
    for (double i : sweep.intervals) {
        require(finite_positive(i), "sweep.intervals", "intervals must be > 0");
    }
}

} // namespace twinway
